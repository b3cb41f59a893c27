#include "wordspot/features.hpp"

#include "wordspot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace wordspot {

namespace {

struct Range
{
    int begin;
    int end;
};

// Slice `part` of `parts` equal slices over [0, extent). Slices always cover
// at least one pixel, so narrow boxes get overlapping slices instead of empty ones.
Range slice(int extent, int parts, int part)
{
    const int begin = part * extent / parts;
    const int end = std::max(begin + 1, (part + 1) * extent / parts);
    return {begin, end};
}

// Bounding boxes of the 8-connected components of `mask` (row-major, w*h).
std::vector<WordBox> component_boxes(const std::vector<std::uint8_t>& mask, int w, int h)
{
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<std::pair<int, int>> stack;
    std::vector<WordBox> boxes;
    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            const std::size_t start = static_cast<std::size_t>(sy) * w + sx;
            if (!mask[start] || seen[start])
                continue;
            int x0 = sx, x1 = sx, y0 = sy, y1 = sy;
            seen[start] = 1;
            stack.emplace_back(sx, sy);
            while (!stack.empty()) {
                const auto [x, y] = stack.back();
                stack.pop_back();
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx;
                        const int ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h)
                            continue;
                        const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
                        if (mask[n] && !seen[n]) {
                            seen[n] = 1;
                            stack.emplace_back(nx, ny);
                        }
                    }
                }
            }
            boxes.push_back({x0, y0, x1 - x0 + 1, y1 - y0 + 1});
        }
    }
    return boxes;
}

std::vector<std::uint8_t> ink_mask(const PageImage& page)
{
    const auto px = page.pixels();
    return {px.begin(), px.end()};
}

bool columns_overlap(const WordBox& a, const WordBox& b)
{
    return a.x < b.right() && b.x < a.right();
}

// White rows between two boxes; negative when their row ranges overlap.
int vertical_gap(const WordBox& a, const WordBox& b)
{
    return std::max(b.y - a.bottom(), a.y - b.bottom());
}

WordBox unite(const WordBox& a, const WordBox& b)
{
    const int x0 = std::min(a.x, b.x);
    const int y0 = std::min(a.y, b.y);
    return {x0, y0, std::max(a.right(), b.right()) - x0, std::max(a.bottom(), b.bottom()) - y0};
}

void merge_groups(std::vector<WordBox>& boxes, int gap)
{
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < boxes.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < boxes.size(); ++j) {
                if (columns_overlap(boxes[i], boxes[j]) && vertical_gap(boxes[i], boxes[j]) <= gap) {
                    boxes[i] = unite(boxes[i], boxes[j]);
                    boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
                    changed = true;
                    break;
                }
            }
        }
    }
}

std::vector<WordBox> reading_order(std::vector<WordBox> boxes)
{
    std::sort(boxes.begin(), boxes.end(), [](const WordBox& a, const WordBox& b) {
        return std::pair(a.y, a.x) < std::pair(b.y, b.x);
    });
    struct Line
    {
        int top;
        int bottom;
        std::vector<WordBox> boxes;
    };
    std::vector<Line> lines;
    for (const auto& box : boxes) {
        auto it = std::find_if(lines.begin(), lines.end(), [&](const Line& line) {
            return box.y < line.bottom && line.top < box.bottom();
        });
        if (it == lines.end()) {
            lines.push_back({box.y, box.bottom(), {box}});
        } else {
            it->top = std::min(it->top, box.y);
            it->bottom = std::max(it->bottom, box.bottom());
            it->boxes.push_back(box);
        }
    }
    std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.top < b.top; });
    std::vector<WordBox> ordered;
    ordered.reserve(boxes.size());
    for (auto& line : lines) {
        std::sort(line.boxes.begin(), line.boxes.end(),
                  [](const WordBox& a, const WordBox& b) { return std::pair(a.x, a.y) < std::pair(b.x, b.y); });
        ordered.insert(ordered.end(), line.boxes.begin(), line.boxes.end());
    }
    return ordered;
}

int gap_from_components(const std::vector<WordBox>& components)
{
    if (components.empty())
        return 0;
    std::vector<int> heights;
    heights.reserve(components.size());
    for (const auto& c : components)
        heights.push_back(c.h);
    const auto mid = heights.begin() + static_cast<std::ptrdiff_t>((heights.size() - 1) / 2);
    std::nth_element(heights.begin(), mid, heights.end());
    return std::max(1, static_cast<int>(std::lround(0.4 * *mid)));
}

void require_ink(const PageImage& page, const WordBox& box)
{
    if (!page.contains(box))
        throw DegenerateWordError("word box lies outside the page");
    for (int y = box.y; y < box.bottom(); ++y)
        for (int x = box.x; x < box.right(); ++x)
            if (page.ink(x, y))
                return;
    throw DegenerateWordError("word box contains no ink");
}

int count_ink(const PageImage& page, const WordBox& box, Range cols, Range rows)
{
    int n = 0;
    for (int y = rows.begin; y < rows.end; ++y)
        for (int x = cols.begin; x < cols.end; ++x)
            n += page.ink(box.x + x, box.y + y) ? 1 : 0;
    return n;
}

} // namespace

int smear_gap(const PageImage& page)
{
    return gap_from_components(component_boxes(ink_mask(page), page.width(), page.height()));
}

std::vector<WordBox> segment_words(const PageImage& page)
{
    const int w = page.width();
    const int h = page.height();
    auto mask = ink_mask(page);
    const int gap = gap_from_components(component_boxes(mask, w, h));
    if (gap == 0)
        return {};

    // Fill white runs of length <= gap that lie between two ink pixels.
    for (int y = 0; y < h; ++y) {
        auto* row = mask.data() + static_cast<std::size_t>(y) * w;
        int last_ink = -1;
        for (int x = 0; x < w; ++x) {
            if (!row[x])
                continue;
            if (last_ink >= 0 && x - last_ink - 1 <= gap)
                std::fill(row + last_ink + 1, row + x, std::uint8_t{1});
            last_ink = x;
        }
    }

    auto boxes = component_boxes(mask, w, h);
    merge_groups(boxes, gap);
    return reading_order(std::move(boxes));
}

ScalarFeatures scalar_features(const PageImage& page, const WordBox& box)
{
    require_ink(page, box);
    double ink = 0, sum_x = 0, sum_y = 0;
    for (int y = 0; y < box.h; ++y) {
        for (int x = 0; x < box.w; ++x) {
            if (!page.ink(box.x + x, box.y + y))
                continue;
            ink += 1;
            sum_x += x + 0.5;
            sum_y += y + 0.5;
        }
    }
    ScalarFeatures f;
    f.ratio = std::min(static_cast<double>(box.w) / box.h, 4.0) / 4.0;
    f.density = ink / (static_cast<double>(box.w) * box.h);
    f.cog_x = sum_x / ink / box.w;
    f.cog_y = sum_y / ink / box.h;
    return f;
}

ProjectionFeatures projection_features(const PageImage& page, const WordBox& box)
{
    require_ink(page, box);
    ProjectionFeatures f;
    const double h = box.h;
    const Range all_rows{0, box.h};

    for (int j = 0; j < static_cast<int>(layout::vertical_bins); ++j) {
        const auto cols = slice(box.w, layout::vertical_bins, j);
        const int ink = count_ink(page, box, cols, all_rows);
        f.vertical[j] = std::clamp(ink / (h * (cols.end - cols.begin)), 0.0, 1.0);
    }

    for (int j = 0; j < static_cast<int>(layout::shape_slices); ++j) {
        const auto cols = slice(box.w, layout::shape_slices, j);
        int first = -1, last = -1;
        for (int y = 0; y < box.h; ++y) {
            for (int x = cols.begin; x < cols.end; ++x) {
                if (page.ink(box.x + x, box.y + y)) {
                    if (first < 0)
                        first = y;
                    last = y;
                    break;
                }
            }
        }
        if (first < 0)
            continue; // empty slice stays zero
        f.top[j] = std::clamp(1.0 - first / h, 0.0, 1.0);
        f.bottom[j] = std::clamp((last + 1) / h, 0.0, 1.0);
    }
    return f;
}

GridFeatures grid_features(const PageImage& page, const WordBox& box)
{
    require_ink(page, box);
    GridFeatures f;
    constexpr int side = layout::grid_side;
    // Odd heights share the middle row between both halves.
    const Range upper{0, (box.h + 1) / 2};
    const Range lower{box.h / 2, box.h};

    auto fill_half = [&](Range half, auto& cells) {
        const int half_h = half.end - half.begin;
        for (int r = 0; r < side; ++r) {
            const auto rows_local = slice(half_h, side, r);
            const Range rows{half.begin + rows_local.begin, half.begin + rows_local.end};
            for (int c = 0; c < side; ++c) {
                const auto cols = slice(box.w, side, c);
                const double area = static_cast<double>(rows.end - rows.begin) * (cols.end - cols.begin);
                cells[r * side + c] = std::clamp(count_ink(page, box, cols, rows) / area, 0.0, 1.0);
            }
        }
    };
    fill_half(upper, f.upper);
    fill_half(lower, f.lower);
    return f;
}

Descriptor extract_descriptor(const PageImage& page, const WordBox& box)
{
    const auto s = scalar_features(page, box);
    const auto p = projection_features(page, box);
    const auto g = grid_features(page, box);

    Descriptor d{};
    d[layout::ratio] = s.ratio;
    d[layout::density] = s.density;
    d[layout::cog] = s.cog_x;
    d[layout::cog + 1] = s.cog_y;
    std::copy(p.vertical.begin(), p.vertical.end(), d.begin() + layout::vertical);
    std::copy(p.top.begin(), p.top.end(), d.begin() + layout::top);
    std::copy(p.bottom.begin(), p.bottom.end(), d.begin() + layout::bottom);
    std::copy(g.upper.begin(), g.upper.end(), d.begin() + layout::upper_grid);
    std::copy(g.lower.begin(), g.lower.end(), d.begin() + layout::lower_grid);
    return d;
}

Descriptor describe_word_image(const PageImage& word_image)
{
    const auto bounds = word_image.ink_bounds();
    if (!bounds)
        throw DegenerateWordError("word image contains no ink");
    return extract_descriptor(word_image, *bounds);
}

} // namespace wordspot
