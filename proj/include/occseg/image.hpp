#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <png.h>

#include "errors.hpp"

namespace occseg {

// Row-major, channel-interleaved image with intensities in [0, 1].
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;

    RasterImage() = default;
    RasterImage(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {
        if (w < 0 || h < 0 || (c != 1 && c != 3))
            throw ArgumentError("RasterImage: bad dimensions");
    }

    double& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool empty() const { return data.empty(); }
};

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("read failed: " + path.string());
    return bytes;
}

struct PngReadSource {
    const std::vector<unsigned char>* bytes;
    std::size_t offset;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t n) {
    auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
    if (src->offset + n > src->bytes->size())
        png_error(png, "unexpected end of PNG stream");
    std::copy_n(src->bytes->data() + src->offset, n, out);
    src->offset += n;
}

inline void png_silent_warning(png_structp, png_const_charp) {}

inline RasterImage decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
        throw FormatError(name + ": not a PNG stream");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                             png_silent_warning);
    if (!png)
        throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }

    PngReadSource src{&bytes, 0};
    RasterImage img;
    std::vector<unsigned char> buffer;
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(name + ": corrupt PNG stream");
    }

    png_set_read_fn(png, &src, png_read_from_memory);
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    png_set_strip_alpha(png);
    if (bit_depth == 16)
        png_set_swap(png);  // little-endian 16-bit samples
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int channels = png_get_channels(png, info);
    bit_depth = png_get_bit_depth(png, info);
    if (channels != 1 && channels != 3)
        png_error(png, "unsupported channel layout");

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * height);
    rows.resize(height);
    for (int y = 0; y < height; ++y)
        rows[y] = buffer.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    img = RasterImage(width, height, channels);
    const std::size_t n = img.data.size();
    if (bit_depth == 16) {
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned v = buffer[2 * i] | (buffer[2 * i + 1] << 8);
            img.data[i] = v / 65535.0;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            img.data[i] = buffer[i] / 255.0;
    }
    return img;
}

// Skips whitespace and '#' comments in a PNM header.
inline void pnm_skip(const std::vector<unsigned char>& b, std::size_t& pos) {
    while (pos < b.size()) {
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n')
                ++pos;
        } else if (std::isspace(b[pos])) {
            ++pos;
        } else {
            break;
        }
    }
}

inline long pnm_int(const std::vector<unsigned char>& b, std::size_t& pos, const std::string& name) {
    pnm_skip(b, pos);
    if (pos >= b.size() || !std::isdigit(b[pos]))
        throw FormatError(name + ": malformed PNM header");
    long v = 0;
    while (pos < b.size() && std::isdigit(b[pos])) {
        v = v * 10 + (b[pos] - '0');
        if (v > 1'000'000'000)
            throw FormatError(name + ": PNM value out of range");
        ++pos;
    }
    return v;
}

inline RasterImage decode_pnm(const std::vector<unsigned char>& b, const std::string& name) {
    if (b.size() < 2 || b[0] != 'P')
        throw FormatError(name + ": not a PNM stream");
    const char kind = static_cast<char>(b[1]);
    int channels;
    bool binary;
    switch (kind) {
    case '2': channels = 1; binary = false; break;
    case '3': channels = 3; binary = false; break;
    case '5': channels = 1; binary = true; break;
    case '6': channels = 3; binary = true; break;
    default: throw FormatError(name + ": unsupported PNM variant");
    }
    std::size_t pos = 2;
    const long w = pnm_int(b, pos, name);
    const long h = pnm_int(b, pos, name);
    const long maxval = pnm_int(b, pos, name);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw FormatError(name + ": bad PNM dimensions or maxval");

    RasterImage img(static_cast<int>(w), static_cast<int>(h), channels);
    const std::size_t n = img.data.size();
    if (binary) {
        if (pos >= b.size() || !std::isspace(b[pos]))
            throw FormatError(name + ": malformed PNM header");
        ++pos;  // exactly one whitespace byte before the raster
        const std::size_t bps = maxval > 255 ? 2 : 1;
        if (b.size() - pos < n * bps)
            throw FormatError(name + ": truncated PNM raster");
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned v = bps == 2 ? (b[pos + 2 * i] << 8) | b[pos + 2 * i + 1]
                                        : b[pos + i];
            if (v > static_cast<unsigned>(maxval))
                throw FormatError(name + ": PNM sample exceeds maxval");
            img.data[i] = static_cast<double>(v) / maxval;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const long v = pnm_int(b, pos, name);
            if (v > maxval)
                throw FormatError(name + ": PNM sample exceeds maxval");
            img.data[i] = static_cast<double>(v) / maxval;
        }
    }
    return img;
}

inline unsigned char to_byte(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

inline void png_flush_noop(png_structp) {}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed: " + path.string());
}

}  // namespace detail

// Decodes PNG (8/16-bit, gray/RGB/palette; alpha dropped) or PGM/PPM
// (P2/P3/P5/P6). Samples are divided by the format's maximum value.
inline RasterImage decode_image(const std::vector<unsigned char>& bytes, const std::string& name = "<memory>") {
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0)
        return detail::decode_png(bytes, name);
    if (bytes.size() >= 2 && bytes[0] == 'P')
        return detail::decode_pnm(bytes, name);
    throw FormatError(name + ": unsupported image format");
}

inline RasterImage load_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw IoError("no such file: " + path.string());
    return decode_image(detail::read_file_bytes(path), path.string());
}

// 8-bit PNG encoding of a 1- or 3-channel image.
inline std::vector<unsigned char> encode_png(const RasterImage& img) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                              detail::png_silent_warning);
    if (!png)
        throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    std::vector<unsigned char> out;
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * img.channels);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed");
    }
    png_set_write_fn(png, &out, detail::png_write_to_vector, detail::png_flush_noop);
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        for (std::size_t i = 0; i < row.size(); ++i)
            row[i] = detail::to_byte(img.data[static_cast<std::size_t>(y) * row.size() + i]);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline void save_png(const RasterImage& img, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_png(img));
}

// Binary PGM with 16-bit big-endian samples (maxval 65535).
inline void save_pgm16(const std::vector<std::uint16_t>& values, int width, int height,
                       const std::filesystem::path& path) {
    if (values.size() != static_cast<std::size_t>(width) * height)
        throw ArgumentError("save_pgm16: size mismatch");
    std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
    std::vector<unsigned char> bytes(header.begin(), header.end());
    for (std::uint16_t v : values) {
        bytes.push_back(static_cast<unsigned char>(v >> 8));
        bytes.push_back(static_cast<unsigned char>(v & 0xff));
    }
    detail::write_file_bytes(path, bytes);
}

// Bilinear resampling with pixel-centre alignment.
inline RasterImage resize_bilinear(const RasterImage& src, int new_width, int new_height) {
    if (new_width <= 0 || new_height <= 0)
        throw ArgumentError("resize_bilinear: target size must be positive");
    RasterImage dst(new_width, new_height, src.channels);
    const double sx = static_cast<double>(src.width) / new_width;
    const double sy = static_cast<double>(src.height) / new_height;
    for (int y = 0; y < new_height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double ty = fy - y0;
        for (int x = 0; x < new_width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double tx = fx - x0;
            for (int c = 0; c < src.channels; ++c) {
                const double top = src.at(x0, y0, c) * (1 - tx) + src.at(x1, y0, c) * tx;
                const double bottom = src.at(x0, y1, c) * (1 - tx) + src.at(x1, y1, c) * tx;
                dst.at(x, y, c) = top * (1 - ty) + bottom * ty;
            }
        }
    }
    return dst;
}

}  // namespace occseg
