#include "wordspot/image.hpp"

#include "wordspot/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

namespace wordspot {

PageImage::PageImage(int width, int height) : width_(width), height_(height)
{
    if (width < 1 || height < 1)
        throw ImageFormatError("page dimensions must be positive, got " + std::to_string(width) + "x" +
                               std::to_string(height));
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

void PageImage::fill(const WordBox& box, bool value)
{
    const int x0 = std::max(box.x, 0);
    const int y0 = std::max(box.y, 0);
    const int x1 = std::min(box.right(), width_);
    const int y1 = std::min(box.bottom(), height_);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            set(x, y, value);
}

bool PageImage::contains(const WordBox& box) const
{
    return box.w >= 1 && box.h >= 1 && box.x >= 0 && box.y >= 0 && box.right() <= width_ &&
           box.bottom() <= height_;
}

std::size_t PageImage::ink_count() const
{
    return static_cast<std::size_t>(std::count(pixels_.begin(), pixels_.end(), std::uint8_t{1}));
}

std::optional<WordBox> PageImage::ink_bounds() const
{
    int x0 = width_, y0 = height_, x1 = -1, y1 = -1;
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            if (!ink(x, y))
                continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0)
        return std::nullopt;
    return WordBox{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

PageImage PageImage::crop(const WordBox& box) const
{
    if (!contains(box))
        throw ImageFormatError("crop box outside page bounds");
    PageImage out(box.w, box.h);
    for (int y = 0; y < box.h; ++y)
        for (int x = 0; x < box.w; ++x)
            out.set(x, y, ink(box.x + x, box.y + y));
    return out;
}

namespace {

class NetpbmReader
{
public:
    explicit NetpbmReader(std::string_view bytes) : bytes_(bytes) {}

    // Header tokens: whitespace separated, '#' starts a comment to end of line.
    long long next_int()
    {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(static_cast<unsigned char>(bytes_[pos_])))
            throw ImageFormatError("malformed netpbm header");
        long long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > (1LL << 31))
                throw ImageFormatError("netpbm header value out of range");
            ++pos_;
        }
        return value;
    }

    // Plain P1 bits may be packed without separators ("0101").
    int next_plain_bit()
    {
        skip_space_and_comments();
        if (pos_ >= bytes_.size())
            throw ImageFormatError("truncated netpbm pixel data");
        const char c = bytes_[pos_++];
        if (c != '0' && c != '1')
            throw ImageFormatError("invalid plain PBM pixel");
        return c - '0';
    }

    // Exactly one whitespace byte separates the header from raster data.
    void skip_single_whitespace()
    {
        if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_])))
            throw ImageFormatError("missing separator before raster data");
        ++pos_;
    }

    std::string_view take(std::size_t n)
    {
        if (bytes_.size() - pos_ < n)
            throw ImageFormatError("truncated netpbm raster");
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

private:
    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            const char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n')
                    ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::string_view bytes_;
    std::size_t pos_ = 2;
};

} // namespace

PageImage decode_netpbm(std::string_view bytes, double threshold)
{
    if (bytes.size() < 2 || bytes[0] != 'P')
        throw ImageFormatError("not a netpbm image");
    const char kind = bytes[1];
    if (kind != '1' && kind != '2' && kind != '4' && kind != '5')
        throw ImageFormatError(std::string("unsupported netpbm type P") + kind);
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw ImageFormatError("binarization threshold must be in (0, 1]");

    NetpbmReader reader(bytes);
    const auto width = reader.next_int();
    const auto height = reader.next_int();
    if (width < 1 || height < 1 || width * height > (1LL << 28))
        throw ImageFormatError("invalid netpbm dimensions");
    PageImage page(static_cast<int>(width), static_cast<int>(height));

    const bool bitmap = kind == '1' || kind == '4';
    long long maxval = 1;
    if (!bitmap) {
        maxval = reader.next_int();
        if (maxval < 1 || maxval > 65535)
            throw ImageFormatError("invalid PGM maxval");
    }
    const double cutoff = threshold * static_cast<double>(maxval);

    const int w = page.width();
    const int h = page.height();
    switch (kind) {
    case '1':
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                page.set(x, y, reader.next_plain_bit() == 1);
        break;
    case '2':
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const auto v = reader.next_int();
                if (v > maxval)
                    throw ImageFormatError("PGM sample exceeds maxval");
                page.set(x, y, static_cast<double>(v) < cutoff);
            }
        break;
    case '4': {
        reader.skip_single_whitespace();
        const std::size_t stride = (static_cast<std::size_t>(w) + 7) / 8;
        const auto raster = reader.take(stride * static_cast<std::size_t>(h));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const auto byte = static_cast<unsigned char>(raster[y * stride + x / 8]);
                page.set(x, y, (byte >> (7 - x % 8)) & 1u);
            }
        break;
    }
    case '5': {
        reader.skip_single_whitespace();
        const std::size_t sample = maxval < 256 ? 1 : 2;
        const auto raster = reader.take(sample * static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = (static_cast<std::size_t>(y) * w + x) * sample;
                long long v = static_cast<unsigned char>(raster[i]);
                if (sample == 2)
                    v = (v << 8) | static_cast<unsigned char>(raster[i + 1]);
                if (v > maxval)
                    throw ImageFormatError("PGM sample exceeds maxval");
                page.set(x, y, static_cast<double>(v) < cutoff);
            }
        break;
    }
    }
    return page;
}

PageImage read_netpbm(const std::filesystem::path& path, double threshold)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ImageFormatError("cannot open image " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_netpbm(bytes, threshold);
}

std::string encode_pbm(const PageImage& page)
{
    std::ostringstream header;
    header << "P4\n" << page.width() << ' ' << page.height() << '\n';
    std::string out = header.str();
    const std::size_t stride = (static_cast<std::size_t>(page.width()) + 7) / 8;
    const std::size_t offset = out.size();
    out.resize(offset + stride * static_cast<std::size_t>(page.height()), '\0');
    for (int y = 0; y < page.height(); ++y)
        for (int x = 0; x < page.width(); ++x)
            if (page.ink(x, y))
                out[offset + y * stride + x / 8] |= static_cast<char>(1u << (7 - x % 8));
    return out;
}

void write_pbm(const std::filesystem::path& path, const PageImage& page)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ImageFormatError("cannot write image " + path.string());
    const auto bytes = encode_pbm(page);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace wordspot
