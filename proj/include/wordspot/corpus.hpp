#pragma once

#include "wordspot/features.hpp"
#include "wordspot/image.hpp"
#include "wordspot/subspace.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wordspot {

/// One segmented word occurrence.
struct WordEntry
{
    std::uint64_t word_id = 0;
    std::uint64_t doc_id = 0;
    WordBox box;
    Descriptor descriptor{};
    std::optional<std::string> label; ///< lowercased ground truth

    bool operator==(const WordEntry&) const = default;
};

/// Immutable collection of word entries plus feature-space metadata.
///
/// Entries are kept sorted by word_id. Descriptors (and, when a PCA model is
/// attached, their projections) are also stored as contiguous row-major
/// blocks for the ranking scan.
class CorpusIndex
{
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    CorpusIndex() = default;
    /// Throws IngestError on duplicate word ids or invalid descriptors and
    /// DimensionError if the model's source dimension is not 93.
    explicit CorpusIndex(std::vector<WordEntry> entries, std::optional<PcaModel> pca = std::nullopt);

    const std::vector<WordEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::uint32_t format_version() const { return kFormatVersion; }

    const Descriptor& feature_mean() const { return mean_; }
    const std::optional<PcaModel>& pca() const { return pca_; }

    /// Copy of this index with `model` attached (or removed).
    CorpusIndex with_pca(std::optional<PcaModel> model) const;

    std::span<const std::uint64_t> word_ids() const { return ids_; }
    /// N x 93, row-major, in entry order.
    std::span<const double> descriptors() const { return descriptors_; }
    /// N x m projections under the attached model; empty without one.
    std::span<const double> projected() const { return projected_; }
    std::span<const double> projected_row(std::size_t position) const;

    /// Storage position of `word_id`, if present.
    std::optional<std::size_t> position_of(std::uint64_t word_id) const;
    const WordEntry* find(std::uint64_t word_id) const;

    bool operator==(const CorpusIndex& other) const
    {
        return entries_ == other.entries_ && mean_ == other.mean_ && pca_ == other.pca_;
    }

private:
    std::vector<WordEntry> entries_;
    Descriptor mean_{};
    std::optional<PcaModel> pca_;
    std::vector<std::uint64_t> ids_;
    std::vector<double> descriptors_;
    std::vector<double> projected_;
};

/// Arithmetic mean of the entry descriptors (zero vector for no entries).
Descriptor mean_descriptor(std::span<const WordEntry> entries);

/// Segments `page` and describes every non-degenerate word block. Word ids
/// are assigned sequentially from `first_word_id`. When labels are given
/// their count must equal the number of segmented boxes (IngestError).
std::vector<WordEntry> ingest_document(const PageImage& page, std::uint64_t doc_id,
                                       const std::optional<std::vector<std::string>>& labels,
                                       std::uint64_t first_word_id = 0);

/// Ingests pages in order; page i becomes doc_id i and ids run 0..N-1.
CorpusIndex build_index(std::span<const PageImage> pages,
                        std::span<const std::vector<std::string>> labels = {});

/// Fits a PCA model over the index descriptors and returns the index with it attached.
CorpusIndex fit_index_pca(const CorpusIndex& index, const PcaOptions& options = {});

// Binary index file ("DIRX", little-endian, trailing CRC-32).
void save_index(const CorpusIndex& index, const std::filesystem::path& path);
CorpusIndex load_index(const std::filesystem::path& path);
std::string serialize_index(const CorpusIndex& index);
/// Throws IndexFormatError on corruption/truncation, VersionError on an
/// unknown format version.
CorpusIndex deserialize_index(std::string_view bytes);

} // namespace wordspot
