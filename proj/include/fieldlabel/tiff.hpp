#pragma once

// Minimal GeoTIFF codec: baseline TIFF, uncompressed strips, either byte order,
// chunky or planar layout, plus the GeoTIFF tags needed for a north-up grid.
// Tiled, compressed and BigTIFF files are rejected with DataError.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fieldlabel/geo.hpp"
#include "fieldlabel/grid.hpp"

namespace fieldlabel::tiff {

enum class SampleType { u8, i8, u16, i16, u32, i32, f32, f64 };

inline int sample_bytes(SampleType t) {
    switch (t) {
        case SampleType::u8:
        case SampleType::i8: return 1;
        case SampleType::u16:
        case SampleType::i16: return 2;
        case SampleType::u32:
        case SampleType::i32:
        case SampleType::f32: return 4;
        case SampleType::f64: return 8;
    }
    return 0;
}

/// Decoded image. Samples are widened to double, which is exact for every supported type.
struct Image {
    int width = 0;
    int height = 0;
    SampleType type = SampleType::f32;
    std::vector<std::vector<double>> bands;
    std::optional<GeoTransform> transform;
};

namespace detail {

enum : std::uint16_t {
    kImageWidth = 256,
    kImageLength = 257,
    kBitsPerSample = 258,
    kCompression = 259,
    kPhotometric = 262,
    kStripOffsets = 273,
    kSamplesPerPixel = 277,
    kRowsPerStrip = 278,
    kStripByteCounts = 279,
    kPlanarConfig = 284,
    kTileWidth = 322,
    kExtraSamples = 338,
    kSampleFormat = 339,
    kModelPixelScale = 33550,
    kModelTiepoint = 33922,
    kModelTransformation = 34264,
    kGeoKeyDirectory = 34735,
    kGeoDoubleParams = 34736,
    kGeoAsciiParams = 34737,
};

enum : std::uint16_t { kByte = 1, kAscii = 2, kShort = 3, kLong = 4, kSByte = 6, kSShort = 8, kSLong = 9,
                       kFloat = 11, kDouble = 12 };

inline int type_size(std::uint16_t type) {
    switch (type) {
        case kByte: case kAscii: case kSByte: case 7: return 1;
        case kShort: case kSShort: return 2;
        case kLong: case kSLong: case kFloat: return 4;
        case kDouble: case 5: case 10: return 8;
        default: return 0;
    }
}

class Reader {
public:
    explicit Reader(std::vector<std::uint8_t> bytes) : buf_(std::move(bytes)) {}

    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    bool big_endian = false;

    template <typename T>
    T get(std::size_t offset) const {
        if (offset + sizeof(T) > buf_.size()) throw DataError("tiff: truncated file");
        T v;
        std::memcpy(&v, buf_.data() + offset, sizeof(T));
        if (big_endian != (std::endian::native == std::endian::big)) v = byteswap(v);
        return v;
    }

private:
    template <typename T>
    static T byteswap(T v) {
        std::uint8_t b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
        return v;
    }

    std::vector<std::uint8_t> buf_;
};

struct Entry {
    std::uint16_t type = 0;
    std::uint32_t count = 0;
    std::size_t value_offset = 0;  // absolute byte offset of the value array
};

inline std::vector<double> entry_numbers(const Reader& r, const Entry& e) {
    std::vector<double> out;
    out.reserve(e.count);
    for (std::uint32_t i = 0; i < e.count; ++i) {
        const std::size_t at = e.value_offset + static_cast<std::size_t>(i) * type_size(e.type);
        switch (e.type) {
            case kByte: out.push_back(r.get<std::uint8_t>(at)); break;
            case kSByte: out.push_back(r.get<std::int8_t>(at)); break;
            case kShort: out.push_back(r.get<std::uint16_t>(at)); break;
            case kSShort: out.push_back(r.get<std::int16_t>(at)); break;
            case kLong: out.push_back(r.get<std::uint32_t>(at)); break;
            case kSLong: out.push_back(r.get<std::int32_t>(at)); break;
            case kFloat: out.push_back(r.get<float>(at)); break;
            case kDouble: out.push_back(r.get<double>(at)); break;
            default: throw DataError("tiff: unsupported field type " + std::to_string(e.type));
        }
    }
    return out;
}

inline double read_sample(const Reader& r, std::size_t at, SampleType t) {
    switch (t) {
        case SampleType::u8: return r.get<std::uint8_t>(at);
        case SampleType::i8: return r.get<std::int8_t>(at);
        case SampleType::u16: return r.get<std::uint16_t>(at);
        case SampleType::i16: return r.get<std::int16_t>(at);
        case SampleType::u32: return r.get<std::uint32_t>(at);
        case SampleType::i32: return r.get<std::int32_t>(at);
        case SampleType::f32: return r.get<float>(at);
        case SampleType::f64: return r.get<double>(at);
    }
    return 0.0;
}

inline SampleType sample_type(int bits, int format) {
    // format: 1 unsigned, 2 signed, 3 IEEE float
    if (format == 3 && bits == 32) return SampleType::f32;
    if (format == 3 && bits == 64) return SampleType::f64;
    if (format == 1 && bits == 8) return SampleType::u8;
    if (format == 2 && bits == 8) return SampleType::i8;
    if (format == 1 && bits == 16) return SampleType::u16;
    if (format == 2 && bits == 16) return SampleType::i16;
    if (format == 1 && bits == 32) return SampleType::u32;
    if (format == 2 && bits == 32) return SampleType::i32;
    throw DataError("tiff: unsupported sample layout (" + std::to_string(bits) + " bits, format " +
                    std::to_string(format) + ")");
}

inline std::optional<GeoTransform> decode_geo(const Reader& r, const std::map<std::uint16_t, Entry>& tags) {
    GeoTransform t;
    bool have = false;
    auto scale_it = tags.find(kModelPixelScale);
    auto tie_it = tags.find(kModelTiepoint);
    auto mat_it = tags.find(kModelTransformation);
    if (scale_it != tags.end() && tie_it != tags.end()) {
        auto scale = entry_numbers(r, scale_it->second);
        auto tie = entry_numbers(r, tie_it->second);
        if (scale.size() < 2 || tie.size() < 6) throw DataError("tiff: malformed georeferencing tags");
        t.pixel_size_x = scale[0];
        t.pixel_size_y = scale[1];
        t.origin_x = tie[3] - tie[0] * scale[0];
        t.origin_y = tie[4] + tie[1] * scale[1];
        have = true;
    } else if (mat_it != tags.end()) {
        auto m = entry_numbers(r, mat_it->second);
        if (m.size() < 16) throw DataError("tiff: malformed ModelTransformation");
        if (m[1] != 0.0 || m[4] != 0.0) throw DataError("tiff: rotated georeferencing is not supported");
        t.pixel_size_x = m[0];
        t.pixel_size_y = -m[5];
        t.origin_x = m[3];
        t.origin_y = m[7];
        have = true;
    }
    if (!have) return std::nullopt;

    auto keys_it = tags.find(kGeoKeyDirectory);
    if (keys_it != tags.end()) {
        auto keys = entry_numbers(r, keys_it->second);
        std::string ascii;
        if (auto a = tags.find(kGeoAsciiParams); a != tags.end()) {
            for (std::uint32_t i = 0; i < a->second.count; ++i) ascii.push_back(static_cast<char>(r.get<std::uint8_t>(a->second.value_offset + i)));
        }
        std::string citation;
        int epsg = 0;
        const std::size_t n = keys.size() >= 4 ? static_cast<std::size_t>(keys[3]) : 0;
        for (std::size_t k = 0; k < n && 4 + 4 * k + 3 < keys.size(); ++k) {
            const auto id = static_cast<int>(keys[4 + 4 * k]);
            const auto loc = static_cast<int>(keys[4 + 4 * k + 1]);
            const auto count = static_cast<std::size_t>(keys[4 + 4 * k + 2]);
            const auto value = static_cast<std::size_t>(keys[4 + 4 * k + 3]);
            if (id == 1026 && loc == kGeoAsciiParams && value + count <= ascii.size()) {
                citation = ascii.substr(value, count);
                while (!citation.empty() && (citation.back() == '|' || citation.back() == '\0')) citation.pop_back();
            } else if ((id == 3072 || id == 2048) && loc == 0) {
                epsg = static_cast<int>(value);
            }
        }
        if (!citation.empty()) {
            t.crs_id = citation;
        } else if (epsg > 0 && epsg != 32767) {
            t.crs_id = "EPSG:" + std::to_string(epsg);
        }
    }
    return t;
}

class Writer {
public:
    void put_u16(std::uint16_t v) { append(&v, 2); }
    void put_u32(std::uint32_t v) { append(&v, 4); }
    void append(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void pad_to_word() {
        if (buf.size() % 2) buf.push_back(0);
    }
    std::vector<std::uint8_t> buf;
};

struct OutEntry {
    std::uint16_t tag;
    std::uint16_t type;
    std::uint32_t count;
    std::vector<std::uint8_t> data;
};

template <typename T>
OutEntry make_entry(std::uint16_t tag, std::uint16_t type, const std::vector<T>& values) {
    OutEntry e{tag, type, static_cast<std::uint32_t>(values.size()), {}};
    e.data.resize(values.size() * sizeof(T));
    if (!values.empty()) std::memcpy(e.data.data(), values.data(), e.data.size());
    return e;
}

inline void write_sample(std::vector<std::uint8_t>& out, double v, SampleType t) {
    auto put = [&out](auto x) {
        const auto* b = reinterpret_cast<const std::uint8_t*>(&x);
        out.insert(out.end(), b, b + sizeof(x));
    };
    switch (t) {
        case SampleType::u8: put(static_cast<std::uint8_t>(v)); break;
        case SampleType::i8: put(static_cast<std::int8_t>(v)); break;
        case SampleType::u16: put(static_cast<std::uint16_t>(v)); break;
        case SampleType::i16: put(static_cast<std::int16_t>(v)); break;
        case SampleType::u32: put(static_cast<std::uint32_t>(v)); break;
        case SampleType::i32: put(static_cast<std::int32_t>(v)); break;
        case SampleType::f32: put(static_cast<float>(v)); break;
        case SampleType::f64: put(v); break;
    }
}

}  // namespace detail

inline Image decode(std::vector<std::uint8_t> bytes) {
    using namespace detail;
    Reader r(std::move(bytes));
    if (r.bytes().size() < 8) throw DataError("tiff: file too small");
    if (r.bytes()[0] == 'I' && r.bytes()[1] == 'I') {
        r.big_endian = false;
    } else if (r.bytes()[0] == 'M' && r.bytes()[1] == 'M') {
        r.big_endian = true;
    } else {
        throw DataError("tiff: bad byte-order mark");
    }
    const auto magic = r.get<std::uint16_t>(2);
    if (magic == 43) throw DataError("tiff: BigTIFF is not supported");
    if (magic != 42) throw DataError("tiff: not a TIFF file");

    const std::size_t ifd = r.get<std::uint32_t>(4);
    const std::uint16_t n_entries = r.get<std::uint16_t>(ifd);
    std::map<std::uint16_t, Entry> tags;
    for (std::uint16_t i = 0; i < n_entries; ++i) {
        const std::size_t at = ifd + 2 + 12 * static_cast<std::size_t>(i);
        Entry e;
        const auto tag = r.get<std::uint16_t>(at);
        e.type = r.get<std::uint16_t>(at + 2);
        e.count = r.get<std::uint32_t>(at + 4);
        const int sz = type_size(e.type);
        if (sz == 0) continue;
        e.value_offset = static_cast<std::size_t>(sz) * e.count <= 4 ? at + 8 : r.get<std::uint32_t>(at + 8);
        tags[tag] = e;
    }

    auto scalar = [&](std::uint16_t tag, std::optional<double> fallback) -> double {
        auto it = tags.find(tag);
        if (it == tags.end()) {
            if (!fallback) throw DataError("tiff: missing required tag " + std::to_string(tag));
            return *fallback;
        }
        auto v = entry_numbers(r, it->second);
        if (v.empty()) throw DataError("tiff: empty tag " + std::to_string(tag));
        return v[0];
    };

    if (tags.count(kTileWidth)) throw DataError("tiff: tiled layout is not supported");
    if (scalar(kCompression, 1.0) != 1.0) throw DataError("tiff: compressed data is not supported");

    Image img;
    img.width = static_cast<int>(scalar(kImageWidth, std::nullopt));
    img.height = static_cast<int>(scalar(kImageLength, std::nullopt));
    const int spp = static_cast<int>(scalar(kSamplesPerPixel, 1.0));
    const int bits = static_cast<int>(scalar(kBitsPerSample, 1.0));
    const int format = static_cast<int>(scalar(kSampleFormat, 1.0));
    const int planar = static_cast<int>(scalar(kPlanarConfig, 1.0));
    const int rows_per_strip = static_cast<int>(std::min<double>(scalar(kRowsPerStrip, img.height), img.height));
    if (img.width <= 0 || img.height <= 0 || spp <= 0 || rows_per_strip <= 0) throw DataError("tiff: bad dimensions");
    img.type = sample_type(bits, format);

    if (!tags.count(kStripOffsets) || !tags.count(kStripByteCounts)) throw DataError("tiff: missing strip tables");
    const auto offsets = entry_numbers(r, tags.at(kStripOffsets));
    const int strips_per_plane = (img.height + rows_per_strip - 1) / rows_per_strip;
    const std::size_t expected_strips = static_cast<std::size_t>(strips_per_plane) * (planar == 2 ? spp : 1);
    if (offsets.size() != expected_strips) throw DataError("tiff: strip table size mismatch");

    const int bps = sample_bytes(img.type);
    img.bands.assign(spp, std::vector<double>(static_cast<std::size_t>(img.width) * img.height));
    for (int y = 0; y < img.height; ++y) {
        const int strip = y / rows_per_strip;
        const int row_in_strip = y % rows_per_strip;
        for (int b = 0; b < spp; ++b) {
            std::size_t base;
            int stride;
            if (planar == 2) {
                base = static_cast<std::size_t>(offsets[static_cast<std::size_t>(b) * strips_per_plane + strip]) +
                       static_cast<std::size_t>(row_in_strip) * img.width * bps;
                stride = bps;
            } else {
                base = static_cast<std::size_t>(offsets[strip]) +
                       static_cast<std::size_t>(row_in_strip) * img.width * spp * bps + static_cast<std::size_t>(b) * bps;
                stride = spp * bps;
            }
            auto& band = img.bands[b];
            for (int x = 0; x < img.width; ++x) {
                band[static_cast<std::size_t>(y) * img.width + x] =
                    read_sample(r, base + static_cast<std::size_t>(x) * stride, img.type);
            }
        }
    }
    img.transform = decode_geo(r, tags);
    return img;
}

/// Encodes a little-endian, band-sequential, single-strip-per-band GeoTIFF.
inline std::vector<std::uint8_t> encode(const Image& img) {
    using namespace detail;
    const int spp = static_cast<int>(img.bands.size());
    if (spp == 0 || img.width <= 0 || img.height <= 0) throw UsageError("tiff: empty image");
    const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
    for (const auto& b : img.bands)
        if (b.size() != plane) throw UsageError("tiff: band size mismatch");

    Writer w;
    w.append("II", 2);
    w.put_u16(42);
    w.put_u32(0);  // IFD offset, patched below

    std::vector<std::uint32_t> strip_offsets, strip_counts;
    const int bps = sample_bytes(img.type);
    for (const auto& band : img.bands) {
        strip_offsets.push_back(static_cast<std::uint32_t>(w.buf.size()));
        strip_counts.push_back(static_cast<std::uint32_t>(plane * bps));
        for (double v : band) write_sample(w.buf, v, img.type);
    }
    w.pad_to_word();

    std::uint16_t format = 1;
    switch (img.type) {
        case SampleType::f32: case SampleType::f64: format = 3; break;
        case SampleType::i8: case SampleType::i16: case SampleType::i32: format = 2; break;
        default: break;
    }

    std::vector<OutEntry> entries;
    entries.push_back(make_entry<std::uint32_t>(kImageWidth, kLong, {static_cast<std::uint32_t>(img.width)}));
    entries.push_back(make_entry<std::uint32_t>(kImageLength, kLong, {static_cast<std::uint32_t>(img.height)}));
    entries.push_back(make_entry<std::uint16_t>(kBitsPerSample, kShort,
                                                std::vector<std::uint16_t>(spp, static_cast<std::uint16_t>(bps * 8))));
    entries.push_back(make_entry<std::uint16_t>(kCompression, kShort, {1}));
    entries.push_back(make_entry<std::uint16_t>(kPhotometric, kShort, {1}));
    entries.push_back(make_entry(kStripOffsets, kLong, strip_offsets));
    entries.push_back(make_entry<std::uint16_t>(kSamplesPerPixel, kShort, {static_cast<std::uint16_t>(spp)}));
    entries.push_back(make_entry<std::uint32_t>(kRowsPerStrip, kLong, {static_cast<std::uint32_t>(img.height)}));
    entries.push_back(make_entry(kStripByteCounts, kLong, strip_counts));
    entries.push_back(make_entry<std::uint16_t>(kPlanarConfig, kShort, {2}));
    if (spp > 1) entries.push_back(make_entry<std::uint16_t>(kExtraSamples, kShort, std::vector<std::uint16_t>(spp - 1, 0)));
    entries.push_back(make_entry<std::uint16_t>(kSampleFormat, kShort, std::vector<std::uint16_t>(spp, format)));

    if (img.transform) {
        const auto& t = *img.transform;
        entries.push_back(make_entry<double>(kModelPixelScale, kDouble, {t.pixel_size_x, t.pixel_size_y, 0.0}));
        entries.push_back(make_entry<double>(kModelTiepoint, kDouble, {0.0, 0.0, 0.0, t.origin_x, t.origin_y, 0.0}));
        // GeoKeys: model type projected, raster type PixelIsArea, citation carries the CRS id verbatim.
        std::string ascii = t.crs_id + "|";
        std::vector<std::uint16_t> keys = {1, 1, 0, 0};
        keys.insert(keys.end(), {1024, 0, 1, 1});
        keys.insert(keys.end(), {1025, 0, 1, 1});
        keys.insert(keys.end(), {1026, kGeoAsciiParams, static_cast<std::uint16_t>(ascii.size()), 0});
        int epsg = 0;
        if (t.crs_id.rfind("EPSG:", 0) == 0) {
            try {
                epsg = std::stoi(t.crs_id.substr(5));
            } catch (...) {
                epsg = 0;
            }
        }
        if (epsg > 0 && epsg < 65535) keys.insert(keys.end(), {3072, 0, 1, static_cast<std::uint16_t>(epsg)});
        keys[3] = static_cast<std::uint16_t>((keys.size() - 4) / 4);
        entries.push_back(make_entry(kGeoKeyDirectory, kShort, keys));
        std::vector<char> ascii_bytes(ascii.begin(), ascii.end());
        ascii_bytes.push_back('\0');
        entries.push_back(make_entry(kGeoAsciiParams, kAscii, ascii_bytes));
    }
    std::sort(entries.begin(), entries.end(), [](const OutEntry& a, const OutEntry& b) { return a.tag < b.tag; });

    // Out-of-line values first, then the IFD.
    std::vector<std::uint32_t> value_offsets(entries.size(), 0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].data.size() > 4) {
            value_offsets[i] = static_cast<std::uint32_t>(w.buf.size());
            w.append(entries[i].data.data(), entries[i].data.size());
            w.pad_to_word();
        }
    }
    const auto ifd = static_cast<std::uint32_t>(w.buf.size());
    std::memcpy(w.buf.data() + 4, &ifd, 4);
    w.put_u16(static_cast<std::uint16_t>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        w.put_u16(e.tag);
        w.put_u16(e.type);
        w.put_u32(e.count);
        if (e.data.size() > 4) {
            w.put_u32(value_offsets[i]);
        } else {
            std::uint8_t inline_value[4] = {0, 0, 0, 0};
            std::memcpy(inline_value, e.data.data(), e.data.size());
            w.append(inline_value, 4);
        }
    }
    w.put_u32(0);
    return std::move(w.buf);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Image read(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw DataError("file not found: " + path.string());
    try {
        return decode(read_file_bytes(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace fieldlabel::tiff
