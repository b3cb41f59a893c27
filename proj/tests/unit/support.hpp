#pragma once

#include "wordspot/corpus.hpp"
#include "wordspot/synthetic.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace test {

inline std::string source_text()
{
    std::ifstream in(std::string(WORDSPOT_TEST_DATA) + "/source_text.txt");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline wordspot::Descriptor random_descriptor(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    wordspot::Descriptor d{};
    for (auto& v : d)
        v = u(rng);
    return d;
}

/// `n` entries with random descriptors and shuffled, non-contiguous ids.
inline std::vector<wordspot::WordEntry> random_entries(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<std::uint64_t> ids(n);
    for (std::size_t i = 0; i < n; ++i)
        ids[i] = 3 * i + 7;
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<wordspot::WordEntry> entries(n);
    for (std::size_t i = 0; i < n; ++i) {
        entries[i].word_id = ids[i];
        entries[i].doc_id = i / 10;
        entries[i].box = {0, 0, 10, 10};
        entries[i].descriptor = random_descriptor(rng);
        entries[i].label = "w" + std::to_string(i % 17);
    }
    return entries;
}

/// Small labelled corpus rendered from the bundled text.
inline const wordspot::CorpusIndex& small_corpus()
{
    static const wordspot::CorpusIndex index = [] {
        wordspot::SyntheticOptions options;
        options.words_per_page = 60;
        const auto corpus = wordspot::generate_synthetic_corpus(source_text(), 12, 7, options);
        return wordspot::build_index(corpus.pages, corpus.labels);
    }();
    return index;
}

} // namespace test
