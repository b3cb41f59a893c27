#include "wordspot/corpus.hpp"

#include "wordspot/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace wordspot {

namespace {

void validate_descriptor(const WordEntry& entry)
{
    for (double v : entry.descriptor)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw IngestError("word " + std::to_string(entry.word_id) + " has a descriptor component outside [0,1]");
    if (entry.box.w < 1 || entry.box.h < 1)
        throw IngestError("word " + std::to_string(entry.word_id) + " has an empty box");
}

std::string lowercase(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

} // namespace

Descriptor mean_descriptor(std::span<const WordEntry> entries)
{
    Descriptor mean{};
    if (entries.empty())
        return mean;
    for (const auto& e : entries)
        for (std::size_t k = 0; k < kDescriptorSize; ++k)
            mean[k] += e.descriptor[k];
    for (auto& v : mean)
        v /= static_cast<double>(entries.size());
    return mean;
}

CorpusIndex::CorpusIndex(std::vector<WordEntry> entries, std::optional<PcaModel> pca)
    : entries_(std::move(entries)), pca_(std::move(pca))
{
    std::sort(entries_.begin(), entries_.end(),
              [](const WordEntry& a, const WordEntry& b) { return a.word_id < b.word_id; });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        validate_descriptor(entries_[i]);
        if (i > 0 && entries_[i].word_id == entries_[i - 1].word_id)
            throw IngestError("duplicate word id " + std::to_string(entries_[i].word_id));
    }
    if (pca_ && pca_->source_dimension() != kDescriptorSize)
        throw DimensionError("PCA model must have source dimension 93");

    mean_ = mean_descriptor(entries_);
    ids_.reserve(entries_.size());
    descriptors_.reserve(entries_.size() * kDescriptorSize);
    for (const auto& e : entries_) {
        ids_.push_back(e.word_id);
        descriptors_.insert(descriptors_.end(), e.descriptor.begin(), e.descriptor.end());
    }
    if (pca_ && !entries_.empty())
        projected_ = project_rows(*pca_, descriptors_);
}

CorpusIndex CorpusIndex::with_pca(std::optional<PcaModel> model) const
{
    return CorpusIndex(entries_, std::move(model));
}

std::span<const double> CorpusIndex::projected_row(std::size_t position) const
{
    if (!pca_)
        return {};
    const auto m = pca_->dimension();
    return std::span<const double>(projected_).subspan(position * m, m);
}

std::optional<std::size_t> CorpusIndex::position_of(std::uint64_t word_id) const
{
    const auto it = std::lower_bound(ids_.begin(), ids_.end(), word_id);
    if (it == ids_.end() || *it != word_id)
        return std::nullopt;
    return static_cast<std::size_t>(it - ids_.begin());
}

const WordEntry* CorpusIndex::find(std::uint64_t word_id) const
{
    const auto pos = position_of(word_id);
    return pos ? &entries_[*pos] : nullptr;
}

std::vector<WordEntry> ingest_document(const PageImage& page, std::uint64_t doc_id,
                                       const std::optional<std::vector<std::string>>& labels,
                                       std::uint64_t first_word_id)
{
    const auto boxes = segment_words(page);
    if (labels && labels->size() != boxes.size())
        throw IngestError("document " + std::to_string(doc_id) + ": " + std::to_string(labels->size()) +
                          " labels for " + std::to_string(boxes.size()) + " segmented words");

    std::vector<WordEntry> out;
    out.reserve(boxes.size());
    std::size_t degenerate = 0;
    std::uint64_t next_id = first_word_id;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        WordEntry entry;
        try {
            entry.descriptor = extract_descriptor(page, boxes[i]);
        } catch (const DegenerateWordError&) {
            ++degenerate;
            continue;
        }
        entry.word_id = next_id++;
        entry.doc_id = doc_id;
        entry.box = boxes[i];
        if (labels)
            entry.label = lowercase((*labels)[i]);
        out.push_back(std::move(entry));
    }
    if (degenerate > 0)
        spdlog::warn("document {}: skipped {} degenerate word boxes", doc_id, degenerate);
    return out;
}

CorpusIndex build_index(std::span<const PageImage> pages, std::span<const std::vector<std::string>> labels)
{
    if (!labels.empty() && labels.size() != pages.size())
        throw IngestError("label lists must match the number of pages");
    std::vector<WordEntry> entries;
    for (std::size_t doc = 0; doc < pages.size(); ++doc) {
        std::optional<std::vector<std::string>> page_labels;
        if (!labels.empty())
            page_labels = labels[doc];
        auto words = ingest_document(pages[doc], doc, page_labels, entries.size());
        entries.insert(entries.end(), std::make_move_iterator(words.begin()), std::make_move_iterator(words.end()));
    }
    spdlog::debug("indexed {} words from {} pages", entries.size(), pages.size());
    return CorpusIndex(std::move(entries));
}

CorpusIndex fit_index_pca(const CorpusIndex& index, const PcaOptions& options)
{
    const auto rows = index.descriptors();
    const Eigen::Map<const RowMatrix> samples(rows.data(), static_cast<Eigen::Index>(index.size()),
                                              static_cast<Eigen::Index>(kDescriptorSize));
    return index.with_pca(fit_pca(samples, options));
}

} // namespace wordspot
