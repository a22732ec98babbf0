#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "hog.hpp"
#include "pyramid.hpp"

namespace occseg {

inline constexpr int kDefaultCliqueSize = 4;  // K, the standard clique size

// Fixed box size of one viewpoint component, in cells.
struct ViewpointShape {
    int w = 1;
    int h = 1;

    int cells() const { return w * h; }
    bool operator==(const ViewpointShape&) const = default;
};

// Top-left corner of a box in cell units of pyramid level `level`. x and y may
// be negative or run past the grid: overhanging boxes are legal.
struct BoxPosition {
    int x = 0;
    int y = 0;
    int level = 0;

    bool operator==(const BoxPosition&) const = default;
};

using BitVector = std::vector<std::uint8_t>;

// Structured output: box position, row-major per-cell visibility (1 = visible
// object, 0 = occluded/background) and viewpoint index.
struct Label {
    BoxPosition p;
    BitVector v;
    int viewpoint = 0;

    bool operator==(const Label&) const = default;
};

// Run-length text form of a visibility vector, e.g. "1x12,0x4,1x20". The empty
// vector encodes as "-".
inline std::string encode_rle(const BitVector& v) {
    if (v.empty())
        return "-";
    std::string out;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i;
        while (j < v.size() && v[j] == v[i])
            ++j;
        if (!out.empty())
            out += ',';
        out += (v[i] ? "1x" : "0x") + std::to_string(j - i);
        i = j;
    }
    return out;
}

inline BitVector decode_rle(const std::string& text) {
    BitVector v;
    if (text == "-")
        return v;
    if (text.empty() || text.back() == ',')
        throw FormatError("bad run-length text '" + text + "'");
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos)
            comma = text.size();
        const std::string run = text.substr(pos, comma - pos);
        if (run.size() < 3 || (run[0] != '0' && run[0] != '1') || run[1] != 'x')
            throw FormatError("bad run-length token '" + run + "'");
        std::size_t used = 0;
        unsigned long count = 0;
        try {
            count = std::stoul(run.substr(2), &used);
        } catch (const std::exception&) {
            throw FormatError("bad run-length count '" + run + "'");
        }
        if (used != run.size() - 2 || count == 0 || count > 1'000'000)
            throw FormatError("bad run-length count '" + run + "'");
        v.insert(v.end(), count, static_cast<std::uint8_t>(run[0] - '0'));
        pos = comma + 1;
    }
    return v;
}

// Dimensions of the weight vector: one block per viewpoint laid out as
//   [w_v (31*wh) | w_nv (31*wh) | w_pr (wh) | w_trunc | W | w_HOP (K+1) | w_bias]
// with blocks concatenated in viewpoint order.
struct ModelLayout {
    std::vector<ViewpointShape> shapes;
    int clique_size = kDefaultCliqueSize;  // K
    int cell_size = kDefaultCellSize;

    int num_viewpoints() const { return static_cast<int>(shapes.size()); }

    std::size_t block_length(int a) const {
        const std::size_t wh = static_cast<std::size_t>(shape(a).cells());
        return 2 * kHogDims * wh + wh + clique_size + 4;
    }

    std::size_t block_offset(int a) const {
        std::size_t off = 0;
        for (int b = 0; b < a; ++b)
            off += block_length(b);
        return off;
    }

    std::size_t total_length() const { return block_offset(num_viewpoints()); }

    const ViewpointShape& shape(int a) const {
        if (a < 0 || a >= num_viewpoints())
            throw ArgumentError("viewpoint index " + std::to_string(a) + " out of range");
        return shapes[static_cast<std::size_t>(a)];
    }

    // Offsets inside a viewpoint block.
    std::size_t visible_offset(int) const { return 0; }
    std::size_t occluded_offset(int a) const { return kHogDims * static_cast<std::size_t>(shape(a).cells()); }
    std::size_t prior_offset(int a) const { return 2 * kHogDims * static_cast<std::size_t>(shape(a).cells()); }
    std::size_t trunc_offset(int a) const { return prior_offset(a) + shape(a).cells(); }
    std::size_t pairwise_offset(int a) const { return trunc_offset(a) + 1; }
    std::size_t hop_offset(int a) const { return pairwise_offset(a) + 1; }
    std::size_t bias_offset(int a) const { return hop_offset(a) + clique_size + 1; }

    void validate() const {
        if (shapes.empty())
            throw ArgumentError("model layout needs at least one viewpoint");
        for (const auto& s : shapes)
            if (s.w < 1 || s.h < 1)
                throw ArgumentError("viewpoint shape must be at least 1x1 cells");
        if (clique_size < 2)
            throw ArgumentError("clique size K must be >= 2");
        if (cell_size < 2)
            throw ArgumentError("cell size must be >= 2");
    }

    bool operator==(const ModelLayout&) const = default;
};

// Read-only view of one viewpoint's weights.
struct ViewpointWeights {
    std::span<const double> visible;   // 31 per cell, cell-major
    std::span<const double> occluded;  // 31 per cell
    std::span<const double> prior;     // cost of label 0, per cell
    double trunc = 0;
    double pairwise = 0;
    std::span<const double> hop;       // K + 1
    double bias = 0;
};

class WeightVector {
public:
    WeightVector() = default;
    explicit WeightVector(ModelLayout layout)
        : layout_(std::move(layout)), values_(layout_.total_length(), 0.0) {
        layout_.validate();
    }

    // Fails with FormatError when the flat length does not match the layout.
    static WeightVector unpack(ModelLayout layout, std::vector<double> flat) {
        layout.validate();
        if (flat.size() != layout.total_length())
            throw FormatError("weight vector length " + std::to_string(flat.size()) +
                              " does not match layout length " +
                              std::to_string(layout.total_length()));
        WeightVector w;
        w.layout_ = std::move(layout);
        w.values_ = std::move(flat);
        return w;
    }

    const std::vector<double>& pack() const { return values_; }

    const ModelLayout& layout() const { return layout_; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    std::span<const double> block(int a) const {
        return std::span<const double>(values_).subspan(layout_.block_offset(a), layout_.block_length(a));
    }
    std::span<double> block(int a) {
        return std::span<double>(values_).subspan(layout_.block_offset(a), layout_.block_length(a));
    }

    ViewpointWeights viewpoint(int a) const {
        const auto b = block(a);
        const std::size_t wh = layout_.shape(a).cells();
        ViewpointWeights v;
        v.visible = b.subspan(layout_.visible_offset(a), kHogDims * wh);
        v.occluded = b.subspan(layout_.occluded_offset(a), kHogDims * wh);
        v.prior = b.subspan(layout_.prior_offset(a), wh);
        v.trunc = b[layout_.trunc_offset(a)];
        v.pairwise = b[layout_.pairwise_offset(a)];
        v.hop = b.subspan(layout_.hop_offset(a), layout_.clique_size + 1);
        v.bias = b[layout_.bias_offset(a)];
        return v;
    }

private:
    ModelLayout layout_;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Model file, all integers and floats little-endian:
//   "OCSGMODL"          8 bytes
//   version             u32 (= 1)
//   A                   u32, number of viewpoints
//   K                   u32
//   cell_size           u32
//   A x (w_a, h_a)      u32 pairs
//   n                   u64, flat weight count
//   n x weight          f64, in WeightVector pack order
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[8] = {'O', 'C', 'S', 'G', 'M', 'O', 'D', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(std::begin(bytes), std::end(bytes));
    out.insert(out.end(), std::begin(bytes), std::end(bytes));
}

template <typename T>
T get_le(const std::vector<unsigned char>& in, std::size_t& pos) {
    if (in.size() - pos < sizeof(T) || pos > in.size())
        throw FormatError("model file truncated");
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, in.data() + pos, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(std::begin(bytes), std::end(bytes));
    pos += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace detail

inline std::vector<unsigned char> serialize_model(const WeightVector& w) {
    const auto& layout = w.layout();
    std::vector<unsigned char> out(std::begin(kModelMagic), std::end(kModelMagic));
    detail::put_le<std::uint32_t>(out, kModelVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layout.num_viewpoints()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layout.clique_size));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(layout.cell_size));
    for (const auto& s : layout.shapes) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.w));
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.h));
    }
    detail::put_le<std::uint64_t>(out, w.pack().size());
    for (double x : w.pack())
        detail::put_le<double>(out, x);
    return out;
}

inline WeightVector deserialize_model(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kModelMagic, 8) != 0)
        throw FormatError("not a model file (bad magic)");
    std::size_t pos = 8;
    const auto version = detail::get_le<std::uint32_t>(bytes, pos);
    if (version != kModelVersion)
        throw FormatError("unsupported model file version " + std::to_string(version));
    ModelLayout layout;
    const auto a = detail::get_le<std::uint32_t>(bytes, pos);
    layout.clique_size = static_cast<int>(detail::get_le<std::uint32_t>(bytes, pos));
    layout.cell_size = static_cast<int>(detail::get_le<std::uint32_t>(bytes, pos));
    if (a == 0 || a > 4096)
        throw FormatError("model file: implausible viewpoint count");
    for (std::uint32_t i = 0; i < a; ++i) {
        ViewpointShape s;
        s.w = static_cast<int>(detail::get_le<std::uint32_t>(bytes, pos));
        s.h = static_cast<int>(detail::get_le<std::uint32_t>(bytes, pos));
        if (s.w < 1 || s.h < 1 || s.w > 4096 || s.h > 4096)
            throw FormatError("model file: bad viewpoint shape");
        layout.shapes.push_back(s);
    }
    if (layout.clique_size < 2 || layout.clique_size > 4096 || layout.cell_size < 2)
        throw FormatError("model file: bad K or cell size");
    const auto n = detail::get_le<std::uint64_t>(bytes, pos);
    if (n != layout.total_length())
        throw FormatError("model file: weight count does not match layout");
    std::vector<double> flat(n);
    for (auto& x : flat)
        x = detail::get_le<double>(bytes, pos);
    if (pos != bytes.size())
        throw FormatError("model file: trailing bytes");
    return WeightVector::unpack(std::move(layout), std::move(flat));
}

inline void save_model(const WeightVector& w, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    const auto bytes = serialize_model(w);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed: " + path.string());
}

inline WeightVector load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace occseg
