// DIRX index file.
//
//   "DIRX" | u32 version | u64 entry count
//   entry*: u64 word_id | u64 doc_id | i32 x, y, w, h | f64[93] descriptor
//           | u32 label length (0xFFFFFFFF = no label) | label bytes
//   f64[93] feature mean
//   u8 has_pca, then if set:
//     u32 n | u32 m | u8 whitened | f64 epsilon | f64[n] mean
//     | f64[n] eigenvalues | f64[m*n] basis (row-major) | f64[m] whitening scales
//   u32 CRC-32 of every preceding byte
//
// All integers and floats are little-endian.

#include "wordspot/corpus.hpp"
#include "wordspot/errors.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

namespace wordspot {

namespace {

constexpr char kMagic[4] = {'D', 'I', 'R', 'X'};
constexpr std::uint32_t kNoLabel = 0xFFFFFFFFu;

class ByteWriter
{
public:
    template <typename T>
    void put_uint(T value)
    {
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bytes_.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu));
    }
    void put_i32(std::int32_t v) { put_uint(static_cast<std::uint32_t>(v)); }
    void put_f64(double v) { put_uint(std::bit_cast<std::uint64_t>(v)); }
    void put_bytes(std::string_view s) { bytes_.append(s); }

    std::string& bytes() { return bytes_; }

private:
    std::string bytes_;
};

class ByteReader
{
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get_uint()
    {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }
    std::int32_t get_i32() { return static_cast<std::int32_t>(get_uint<std::uint32_t>()); }
    double get_f64()
    {
        const double v = std::bit_cast<double>(get_uint<std::uint64_t>());
        if (!std::isfinite(v))
            throw IndexFormatError("non-finite value in index file");
        return v;
    }
    std::string_view get_bytes(std::size_t n)
    {
        need(n);
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    bool done() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n)
            throw IndexFormatError("truncated index file");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

void write_model(ByteWriter& out, const PcaModel& model)
{
    const auto n = model.source_dimension();
    const auto m = model.dimension();
    out.put_uint(static_cast<std::uint32_t>(n));
    out.put_uint(static_cast<std::uint32_t>(m));
    out.put_uint(static_cast<std::uint8_t>(model.whitened ? 1 : 0));
    out.put_f64(model.epsilon);
    for (Eigen::Index i = 0; i < model.mean.size(); ++i)
        out.put_f64(model.mean(i));
    for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i)
        out.put_f64(model.eigenvalues(i));
    for (Eigen::Index r = 0; r < model.basis.rows(); ++r)
        for (Eigen::Index c = 0; c < model.basis.cols(); ++c)
            out.put_f64(model.basis(r, c));
    for (Eigen::Index i = 0; i < model.whitening_scales.size(); ++i)
        out.put_f64(model.whitening_scales(i));
}

PcaModel read_model(ByteReader& in)
{
    const auto n = in.get_uint<std::uint32_t>();
    const auto m = in.get_uint<std::uint32_t>();
    if (n != kDescriptorSize || m < 1 || m > n)
        throw IndexFormatError("invalid PCA block dimensions");
    const auto flag = in.get_uint<std::uint8_t>();
    if (flag > 1)
        throw IndexFormatError("invalid PCA whitening flag");

    PcaModel model;
    model.whitened = flag == 1;
    model.epsilon = in.get_f64();
    const auto nn = static_cast<Eigen::Index>(n);
    const auto mm = static_cast<Eigen::Index>(m);
    model.mean.resize(nn);
    for (Eigen::Index i = 0; i < nn; ++i)
        model.mean(i) = in.get_f64();
    model.eigenvalues.resize(nn);
    for (Eigen::Index i = 0; i < nn; ++i)
        model.eigenvalues(i) = in.get_f64();
    model.basis.resize(mm, nn);
    for (Eigen::Index r = 0; r < mm; ++r)
        for (Eigen::Index c = 0; c < nn; ++c)
            model.basis(r, c) = in.get_f64();
    model.whitening_scales.resize(mm);
    for (Eigen::Index i = 0; i < mm; ++i)
        model.whitening_scales(i) = in.get_f64();
    return model;
}

} // namespace

std::string serialize_index(const CorpusIndex& index)
{
    ByteWriter out;
    out.put_bytes(std::string_view(kMagic, sizeof(kMagic)));
    out.put_uint(CorpusIndex::kFormatVersion);
    out.put_uint(static_cast<std::uint64_t>(index.size()));
    for (const auto& e : index.entries()) {
        out.put_uint(e.word_id);
        out.put_uint(e.doc_id);
        out.put_i32(e.box.x);
        out.put_i32(e.box.y);
        out.put_i32(e.box.w);
        out.put_i32(e.box.h);
        for (double v : e.descriptor)
            out.put_f64(v);
        if (e.label) {
            out.put_uint(static_cast<std::uint32_t>(e.label->size()));
            out.put_bytes(*e.label);
        } else {
            out.put_uint(kNoLabel);
        }
    }
    for (double v : index.feature_mean())
        out.put_f64(v);
    out.put_uint(static_cast<std::uint8_t>(index.pca() ? 1 : 0));
    if (index.pca())
        write_model(out, *index.pca());
    out.put_uint(crc32_of(out.bytes()));
    return std::move(out.bytes());
}

CorpusIndex deserialize_index(std::string_view bytes)
{
    if (bytes.size() < sizeof(kMagic) + 4 + 8 + 4)
        throw IndexFormatError("index file too short");
    if (bytes.substr(0, sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic)))
        throw IndexFormatError("bad magic bytes");

    const auto body = bytes.substr(0, bytes.size() - 4);
    ByteReader trailer(bytes.substr(bytes.size() - 4));
    if (trailer.get_uint<std::uint32_t>() != crc32_of(body))
        throw IndexFormatError("checksum mismatch");

    ByteReader in(body.substr(sizeof(kMagic)));
    const auto version = in.get_uint<std::uint32_t>();
    if (version != CorpusIndex::kFormatVersion)
        throw VersionError("unsupported index format version " + std::to_string(version));

    const auto count = in.get_uint<std::uint64_t>();
    constexpr std::size_t kMinRecord = 8 + 8 + 16 + kDescriptorSize * 8 + 4;
    if (count > in.remaining() / kMinRecord)
        throw IndexFormatError("entry count exceeds file size");

    std::vector<WordEntry> entries;
    entries.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        WordEntry e;
        e.word_id = in.get_uint<std::uint64_t>();
        e.doc_id = in.get_uint<std::uint64_t>();
        e.box.x = in.get_i32();
        e.box.y = in.get_i32();
        e.box.w = in.get_i32();
        e.box.h = in.get_i32();
        for (auto& v : e.descriptor)
            v = in.get_f64();
        const auto label_len = in.get_uint<std::uint32_t>();
        if (label_len != kNoLabel)
            e.label = std::string(in.get_bytes(label_len));
        if (i > 0 && e.word_id <= entries.back().word_id)
            throw IndexFormatError("entries are not sorted by word id");
        entries.push_back(std::move(e));
    }

    Descriptor stored_mean{};
    for (auto& v : stored_mean)
        v = in.get_f64();

    std::optional<PcaModel> model;
    const auto has_pca = in.get_uint<std::uint8_t>();
    if (has_pca > 1)
        throw IndexFormatError("invalid PCA presence flag");
    if (has_pca == 1)
        model = read_model(in);
    if (!in.done())
        throw IndexFormatError("trailing bytes after index body");

    try {
        CorpusIndex index(std::move(entries), std::move(model));
        for (std::size_t k = 0; k < kDescriptorSize; ++k)
            if (std::abs(index.feature_mean()[k] - stored_mean[k]) > 1e-12)
                throw IndexFormatError("stored feature mean disagrees with entries");
        return index;
    } catch (const IngestError& e) {
        throw IndexFormatError(e.what());
    }
}

void save_index(const CorpusIndex& index, const std::filesystem::path& path)
{
    const auto bytes = serialize_index(index);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IndexFormatError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IndexFormatError("failed writing " + path.string());
}

CorpusIndex load_index(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IndexFormatError("cannot open index " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_index(bytes);
}

} // namespace wordspot
