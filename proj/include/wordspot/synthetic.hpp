#pragma once

#include "wordspot/image.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace wordspot {

/// Rendering style of the embedded 9-row proportional bitmap font (a-z).
struct TextStyle
{
    int scale = 2;     ///< pixels per font cell
    bool bold = false; ///< one-pixel horizontal stroke thickening
};

/// Width in pixels of `word` rendered in `style` (letters spaced one cell apart).
int word_width(std::string_view word, const TextStyle& style);
int line_height(const TextStyle& style);

/// Draws `word` with its font-cell origin at (x, y). Characters outside a-z
/// are rejected with GenerationError.
void draw_word(PageImage& page, std::string_view word, int x, int y, const TextStyle& style);

/// A standalone word image with a small white margin.
PageImage render_word(std::string_view word, const TextStyle& style = {}, int margin = 4);

/// Lays words out left to right, wrapping at `page_width`.
PageImage render_page(const std::vector<std::string>& words, const TextStyle& style, int page_width = 1400);

struct SyntheticOptions
{
    int words_per_page = 120;
    int page_width = 1400;
    /// Per-document font scales to draw from.
    std::vector<int> scales{2, 3};
    double bold_probability = 0.5;
    /// Probability of inking each background pixel that touches ink.
    double edge_noise = 0.1;
};

struct SyntheticCorpus
{
    std::vector<PageImage> pages;
    std::vector<std::vector<std::string>> labels; ///< per page, reading order
    std::vector<TextStyle> styles;
};

/// Lowercased a-z tokens of `text`, in order.
std::vector<std::string> tokenize(std::string_view text);

/// Renders `n_docs` pages of words drawn from `source_text`.
///
/// Each page is a run of consecutive source tokens in a per-document style,
/// with boundary noise. Words of four or more letters that land on a single
/// document are also substituted into a second page, so every such word
/// recurs.
/// Deterministic per seed. Throws GenerationError when the text has fewer
/// than 50 distinct words of length >= 3 or n_docs < 1.
SyntheticCorpus generate_synthetic_corpus(std::string_view source_text, int n_docs, std::uint64_t seed,
                                          const SyntheticOptions& options = {});

} // namespace wordspot
