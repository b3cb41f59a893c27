#include "wordspot/synthetic.hpp"

#include "wordspot/errors.hpp"
#include "wordspot/features.hpp"
#include "wordspot/random.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>

namespace wordspot {

namespace {

constexpr int kCellRows = 9;
constexpr int kCellCols = 5;
constexpr int kWordGapCells = 5;
constexpr int kLeadingCells = 6;
constexpr int kMargin = 24;
constexpr int kMaxNoiseAttempts = 8;

// Rows 0-1 ascenders, 2-6 x-height, 7-8 descenders.
using Glyph = std::array<const char*, kCellRows>;
constexpr std::array<Glyph, 26> kGlyphs = {{
    {".....", ".....", ".###.", "....#", ".####", "#...#", ".####", ".....", "....."}, // a
    {"#....", "#....", "####.", "#...#", "#...#", "#...#", "####.", ".....", "....."}, // b
    {".....", ".....", ".####", "#....", "#....", "#....", ".####", ".....", "....."}, // c
    {"....#", "....#", ".####", "#...#", "#...#", "#...#", ".####", ".....", "....."}, // d
    {".....", ".....", ".###.", "#...#", "#####", "#....", ".####", ".....", "....."}, // e
    {"..##.", ".#...", "####.", ".#...", ".#...", ".#...", ".#...", ".....", "....."}, // f
    {".....", ".....", ".####", "#...#", "#...#", ".####", "....#", "....#", ".###."}, // g
    {"#....", "#....", "####.", "#...#", "#...#", "#...#", "#...#", ".....", "....."}, // h
    {"..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###.", ".....", "....."}, // i
    {"...#.", ".....", "..##.", "...#.", "...#.", "...#.", "...#.", "...#.", "..#.."}, // j
    {"#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#.", ".....", "....."}, // k
    {".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###.", ".....", "....."}, // l
    {".....", ".....", "##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#", ".....", "....."}, // m
    {".....", ".....", "####.", "#...#", "#...#", "#...#", "#...#", ".....", "....."}, // n
    {".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###.", ".....", "....."}, // o
    {".....", ".....", "####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}, // p
    {".....", ".....", ".####", "#...#", "#...#", ".####", "....#", "....#", "....#"}, // q
    {".....", ".....", "#.##.", "##...", "#....", "#....", "#....", ".....", "....."}, // r
    {".....", ".....", ".####", "#....", ".###.", "....#", "####.", ".....", "....."}, // s
    {".#...", ".#...", "####.", ".#...", ".#...", ".#...", "..##.", ".....", "....."}, // t
    {".....", ".....", "#...#", "#...#", "#...#", "#...#", ".####", ".....", "....."}, // u
    {".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#..", ".....", "....."}, // v
    {".....", ".....", "#...#", "#...#", "#.#.#", "#.#.#", ".#.#.", ".....", "....."}, // w
    {".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", ".....", "....."}, // x
    {".....", ".....", "#...#", "#...#", "#...#", ".####", "....#", "....#", ".###."}, // y
    {".....", ".....", "#####", "...#.", "..#..", ".#...", "#####", ".....", "....."}, // z
}};

struct GlyphSpan
{
    int first;
    int last;
};

const Glyph& glyph_for(char c)
{
    if (c < 'a' || c > 'z')
        throw GenerationError(std::string("the embedded font has no glyph for '") + c + "'");
    return kGlyphs[static_cast<std::size_t>(c - 'a')];
}

// Inked column range of a glyph; the font is proportional.
GlyphSpan glyph_span(const Glyph& g)
{
    int first = kCellCols, last = -1;
    for (const char* row : g)
        for (int c = 0; c < kCellCols; ++c)
            if (row[c] == '#') {
                first = std::min(first, c);
                last = std::max(last, c);
            }
    return {first, last};
}

// Ink bleed: inks background pixels that touch ink in the clean image.
void add_edge_noise(PageImage& page, double probability, Rng& rng)
{
    if (probability <= 0)
        return;
    const PageImage clean = page;
    const int w = page.width();
    const int h = page.height();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (clean.ink(x, y))
                continue;
            const bool boundary = (x > 0 && clean.ink(x - 1, y)) || (x + 1 < w && clean.ink(x + 1, y)) ||
                                  (y > 0 && clean.ink(x, y - 1)) || (y + 1 < h && clean.ink(x, y + 1));
            if (boundary && rng.chance(probability))
                page.set(x, y, true);
        }
    }
}

} // namespace

int word_width(std::string_view word, const TextStyle& style)
{
    if (word.empty())
        return 0;
    int cells = 0;
    for (char c : word) {
        const auto span = glyph_span(glyph_for(c));
        cells += span.last - span.first + 1;
    }
    cells += static_cast<int>(word.size()) - 1;
    return cells * style.scale + (style.bold ? 1 : 0);
}

int line_height(const TextStyle& style)
{
    return kCellRows * style.scale;
}

void draw_word(PageImage& page, std::string_view word, int x, int y, const TextStyle& style)
{
    const int s = style.scale;
    int cursor = x;
    for (char c : word) {
        const auto& g = glyph_for(c);
        const auto span = glyph_span(g);
        for (int row = 0; row < kCellRows; ++row) {
            for (int col = span.first; col <= span.last; ++col) {
                if (g[row][col] != '#')
                    continue;
                const int px = cursor + (col - span.first) * s;
                const int py = y + row * s;
                page.fill({px, py, s + (style.bold ? 1 : 0), s});
            }
        }
        cursor += (span.last - span.first + 2) * s;
    }
}

PageImage render_word(std::string_view word, const TextStyle& style, int margin)
{
    PageImage page(word_width(word, style) + 2 * margin, line_height(style) + 2 * margin);
    draw_word(page, word, margin, margin, style);
    return page;
}

PageImage render_page(const std::vector<std::string>& words, const TextStyle& style, int page_width)
{
    const int gap = kWordGapCells * style.scale;
    const int pitch = (kCellRows + kLeadingCells) * style.scale;

    // First pass: positions.
    std::vector<std::pair<int, int>> origin;
    origin.reserve(words.size());
    int x = kMargin;
    int y = kMargin;
    for (const auto& word : words) {
        const int w = word_width(word, style);
        if (x > kMargin && x + w > page_width - kMargin) {
            x = kMargin;
            y += pitch;
        }
        origin.emplace_back(x, y);
        x += w + gap;
    }
    int width = page_width;
    for (std::size_t i = 0; i < words.size(); ++i)
        width = std::max(width, origin[i].first + word_width(words[i], style) + kMargin);
    const int height = y + line_height(style) + kMargin;

    PageImage page(width, height);
    for (std::size_t i = 0; i < words.size(); ++i)
        draw_word(page, words[i], origin[i].first, origin[i].second, style);
    return page;
}

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> tokens;
    std::string current;
    for (char raw : text) {
        const auto c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (c >= 'a' && c <= 'z') {
            current.push_back(c);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty())
        tokens.push_back(std::move(current));
    return tokens;
}

SyntheticCorpus generate_synthetic_corpus(std::string_view source_text, int n_docs, std::uint64_t seed,
                                          const SyntheticOptions& options)
{
    if (n_docs < 1)
        throw GenerationError("need at least one document");
    if (options.words_per_page < 1 || options.scales.empty())
        throw GenerationError("invalid synthetic corpus options");
    const auto tokens = tokenize(source_text);
    std::set<std::string> vocabulary;
    for (const auto& t : tokens)
        if (t.size() >= 3)
            vocabulary.insert(t);
    if (vocabulary.size() < 50)
        throw GenerationError("source text has only " + std::to_string(vocabulary.size()) +
                              " distinct words of length >= 3 (need 50)");

    Rng rng(seed);
    SyntheticCorpus corpus;
    corpus.labels.resize(static_cast<std::size_t>(n_docs));
    for (int d = 0; d < n_docs; ++d) {
        const auto start = rng.below(tokens.size());
        auto& words = corpus.labels[static_cast<std::size_t>(d)];
        for (int i = 0; i < options.words_per_page; ++i)
            words.push_back(tokens[(start + static_cast<std::size_t>(i)) % tokens.size()]);
        TextStyle style;
        style.scale = options.scales[rng.below(options.scales.size())];
        style.bold = rng.chance(options.bold_probability);
        corpus.styles.push_back(style);
    }

    // Spread query-eligible words that landed on a single document to a
    // second one by overwriting a short (ineligible) word.
    if (n_docs >= 2) {
        std::map<std::string, std::set<int>> docs_of;
        for (int d = 0; d < n_docs; ++d)
            for (const auto& w : corpus.labels[static_cast<std::size_t>(d)])
                docs_of[w].insert(d);
        std::vector<std::string> single;
        for (const auto& [word, docs] : docs_of)
            if (word.size() >= 4 && docs.size() == 1)
                single.push_back(word);
        for (const auto& word : single) {
            auto& docs = docs_of[word];
            while (docs.size() < 2) {
                std::vector<int> candidates;
                for (int d = 0; d < n_docs; ++d)
                    if (!docs.contains(d))
                        candidates.push_back(d);
                const int d = candidates[rng.below(candidates.size())];
                auto& words = corpus.labels[static_cast<std::size_t>(d)];
                std::vector<std::size_t> slots;
                for (std::size_t i = 0; i < words.size(); ++i)
                    if (words[i].size() < 4)
                        slots.push_back(i);
                if (slots.empty()) {
                    words.push_back(word);
                } else {
                    words[slots[rng.below(slots.size())]] = word;
                }
                docs.insert(d);
            }
        }
    }

    for (int d = 0; d < n_docs; ++d) {
        const auto& words = corpus.labels[static_cast<std::size_t>(d)];
        const auto& style = corpus.styles[static_cast<std::size_t>(d)];
        const PageImage clean = render_page(words, style, options.page_width);
        bool placed = false;
        for (int attempt = 0; attempt < kMaxNoiseAttempts && !placed; ++attempt) {
            PageImage page = clean;
            Rng noise(mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(d) * 131 + attempt)));
            add_edge_noise(page, options.edge_noise, noise);
            if (segment_words(page).size() == words.size()) {
                corpus.pages.push_back(std::move(page));
                placed = true;
            }
        }
        if (!placed)
            throw GenerationError("page " + std::to_string(d) + " does not segment into its word list");
    }
    return corpus;
}

} // namespace wordspot
