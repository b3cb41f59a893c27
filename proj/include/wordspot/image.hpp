#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wordspot {

/// Axis-aligned word block in page coordinates (top-left origin).
struct WordBox
{
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    int right() const { return x + w; }
    int bottom() const { return y + h; }

    bool operator==(const WordBox&) const = default;
};

/// Binarized page raster. true / 1 is ink.
class PageImage
{
public:
    PageImage() = default;
    /// Blank (all-white) page. Throws ImageFormatError on non-positive sizes.
    PageImage(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }

    bool ink(int x, int y) const { return pixels_[index(x, y)] != 0; }
    void set(int x, int y, bool ink) { pixels_[index(x, y)] = ink ? 1 : 0; }

    /// Fills the rectangle, clipped to the page.
    void fill(const WordBox& box, bool ink = true);

    bool contains(const WordBox& box) const;
    std::size_t ink_count() const;
    /// Tight bounding box of all ink, or nullopt for a blank page.
    std::optional<WordBox> ink_bounds() const;

    PageImage crop(const WordBox& box) const;

    /// Row-major, one byte per pixel (0 or 1).
    std::span<const std::uint8_t> pixels() const { return pixels_; }

    bool operator==(const PageImage&) const = default;

private:
    std::size_t index(int x, int y) const
    {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Default global threshold for grayscale input, as a fraction of maxval.
inline constexpr double kDefaultBinarizeThreshold = 0.5;

// Netpbm family: P1/P4 (bitmap) are taken as-is; P2/P5 (graymap) are
// binarized with `threshold`: a pixel is ink when intensity < threshold * maxval.
PageImage decode_netpbm(std::string_view bytes, double threshold = kDefaultBinarizeThreshold);
PageImage read_netpbm(const std::filesystem::path& path, double threshold = kDefaultBinarizeThreshold);

/// Raw (P4) encoding.
std::string encode_pbm(const PageImage& page);
void write_pbm(const std::filesystem::path& path, const PageImage& page);

} // namespace wordspot
