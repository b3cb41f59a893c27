#pragma once

#include "wordspot/image.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace wordspot {

inline constexpr std::size_t kDescriptorSize = 93;

/// 93-component word descriptor; every component lies in [0, 1].
using Descriptor = std::array<double, kDescriptorSize>;

/// Component offsets of the seven feature families inside a Descriptor.
namespace layout {
inline constexpr std::size_t ratio = 0;
inline constexpr std::size_t density = 1;
inline constexpr std::size_t cog = 2;          // x, y
inline constexpr std::size_t vertical = 4;     // 25 column bins
inline constexpr std::size_t top = 29;         // 16 slices
inline constexpr std::size_t bottom = 45;      // 16 slices
inline constexpr std::size_t upper_grid = 61;  // 4x4, row-major
inline constexpr std::size_t lower_grid = 77;  // 4x4, row-major

inline constexpr std::size_t vertical_bins = 25;
inline constexpr std::size_t shape_slices = 16;
inline constexpr std::size_t grid_side = 4;
} // namespace layout

struct ScalarFeatures
{
    double ratio = 0;   ///< min(w/h, 4) / 4
    double density = 0; ///< ink pixels / box area
    double cog_x = 0;   ///< ink centroid, pixel-centre convention, normalized by w
    double cog_y = 0;   ///< normalized by h
};

struct ProjectionFeatures
{
    std::array<double, layout::vertical_bins> vertical{};
    std::array<double, layout::shape_slices> top{};
    std::array<double, layout::shape_slices> bottom{};
};

struct GridFeatures
{
    std::array<double, layout::grid_side * layout::grid_side> upper{};
    std::array<double, layout::grid_side * layout::grid_side> lower{};
};

/// Word segmentation: 8-connected components after horizontal run-length
/// smearing. The smear gap is max(1, round(0.4 * median component height));
/// components whose column ranges overlap and that are vertically closer than
/// the same gap are grouped (dots of i/j). Boxes come back in reading order
/// and never intersect. A blank page yields an empty list.
std::vector<WordBox> segment_words(const PageImage& page);

/// Smear gap used by segment_words for this page (0 for a blank page).
int smear_gap(const PageImage& page);

// The feature functions require `box` to lie inside the page and hold at
// least one ink pixel; they throw DegenerateWordError otherwise.
ScalarFeatures scalar_features(const PageImage& page, const WordBox& box);
ProjectionFeatures projection_features(const PageImage& page, const WordBox& box);
GridFeatures grid_features(const PageImage& page, const WordBox& box);

Descriptor extract_descriptor(const PageImage& page, const WordBox& box);

/// Descriptor of a standalone word image: the box is the tight ink bounds.
Descriptor describe_word_image(const PageImage& word_image);

} // namespace wordspot
