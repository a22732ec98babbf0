#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "boxes.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "image.hpp"
#include "model.hpp"
#include "pyramid.hpp"
#include "segmentation.hpp"

namespace occseg {

// mt19937_64 with explicit integer-to-real mapping, so streams are identical
// across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Integer in [lo, hi].
    int integer(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }
    std::uint64_t bits() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

inline constexpr double kDefaultSegmentK = 150.0;
inline constexpr int kDefaultSegmentMinSize = 30;

struct SynthConfig {
    int n_images = 20;
    std::uint64_t seed = 1;
    std::uint64_t object_texture_seed = 1;
    int occluder_count = 2;     // upper bound per image
    double max_occlusion = 0.5; // largest hidden fraction of an object
    double clutter_level = 0.5; // 0 = plain background, 1 = dense clutter
    int width = 160;
    int height = 120;
    int n_objects = 1;          // distinct object classes per image
    bool overlap = false;       // place later objects over earlier ones
    ViewpointShape shape{6, 4};
    int cell_size = kDefaultCellSize;
    double scale_step = kDefaultScaleStep;
    int max_level = 4;          // coarsest pyramid level an object is placed at
    double segment_k = kDefaultSegmentK;
    int segment_min_size = kDefaultSegmentMinSize;

    void validate() const {
        if (n_images < 0)
            throw ArgumentError("synth: image count must be nonnegative");
        if (!(max_occlusion >= 0.0 && max_occlusion <= 0.9))
            throw ArgumentError("synth: max_occlusion must lie in [0, 0.9]");
        if (!(clutter_level >= 0.0 && clutter_level <= 1.0))
            throw ArgumentError("synth: clutter_level must lie in [0, 1]");
        if (occluder_count < 0)
            throw ArgumentError("synth: occluder_count must be nonnegative");
        if (n_objects < 1 || n_objects > 4)
            throw ArgumentError("synth: object count must lie in [1, 4]");
        if (width < 16 || height < 16)
            throw ArgumentError("synth: image too small");
        if (shape.w < 1 || shape.h < 1 || cell_size < 2 || max_level < 0)
            throw ArgumentError("synth: invalid object geometry");
        if (!(scale_step > 0.0 && scale_step < 1.0))
            throw ArgumentError("synth: scale step must lie in (0, 1)");
    }
};

struct SynthObject {
    int object_id = 0;
    Label y;          // viewpoint 0 of the object's own model
    PixelRect box;
    PixelMask mask;   // visible object pixels
};

struct SynthImage {
    RasterImage image;
    std::vector<SynthObject> objects;
    SegmentMap segments;
};

namespace detail {

using Rgb = std::array<double, 3>;

inline void put(RasterImage& img, long x, long y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height)
        return;
    for (int k = 0; k < 3; ++k)
        img.at(static_cast<int>(x), static_cast<int>(y), k) = c[k];
}

inline Rgb random_color(Rng& rng, double lo = 0.1, double hi = 0.9) {
    return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

// Fixed appearance of one object class in unit box coordinates.
struct ObjectTexture {
    Rgb body, rim, mark;
    double bar0 = 0.3, bar1 = 0.7, radius = 0.22;

    explicit ObjectTexture(std::uint64_t seed) {
        Rng rng(seed * 0x9E3779B97F4A7C15ULL + 17);
        body = {rng.uniform(0.6, 0.95), rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4)};
        std::swap(body[0], body[rng.integer(0, 2)]);
        rim = {0.05, 0.05, 0.08};
        mark = {1.0 - body[0], 1.0 - body[1], 1.0 - body[2]};
        bar0 = rng.uniform(0.2, 0.35);
        bar1 = rng.uniform(0.65, 0.8);
        radius = rng.uniform(0.15, 0.25);
    }

    Rgb operator()(double u, double v) const {
        if (u < 0.08 || u > 0.92 || v < 0.1 || v > 0.9)
            return rim;
        const double du = (u - 0.5) * 1.5, dv = v - 0.5;
        if (du * du + dv * dv < radius * radius)
            return mark;
        if (std::abs(v - bar0) < 0.05 || std::abs(v - bar1) < 0.05)
            return rim;
        return body;
    }
};

inline void draw_clutter(RasterImage& img, Rng& rng, double level) {
    const Rgb base = random_color(rng, 0.3, 0.7);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            put(img, x, y, {base[0] + 0.1 * y / img.height, base[1], base[2] + 0.1 * x / img.width});
    const int n = static_cast<int>(std::lround(level * 24));
    for (int i = 0; i < n; ++i) {
        const Rgb c = random_color(rng);
        const int cx = rng.integer(0, img.width - 1), cy = rng.integer(0, img.height - 1);
        const int rx = rng.integer(3, std::max(4, img.width / 6)), ry = rng.integer(3, std::max(4, img.height / 6));
        const bool ellipse = rng.uniform() < 0.5;
        for (int y = cy - ry; y <= cy + ry; ++y) {
            for (int x = cx - rx; x <= cx + rx; ++x) {
                const double dx = static_cast<double>(x - cx) / rx, dy = static_cast<double>(y - cy) / ry;
                if (!ellipse || dx * dx + dy * dy <= 1.0)
                    put(img, x, y, c);
            }
        }
    }
}

// Occluder rectangle entering the object box from one side and covering
// `depth` of its extent along that axis.
inline PixelRect occluder_rect(Rng& rng, const PixelRect& box, double depth) {
    const long bw = box.x.size(), bh = box.y.size();
    const int side = rng.integer(0, 3);
    const double across = rng.uniform(0.5, 1.3);
    PixelRect r;
    if (side < 2) {
        const long d = std::lround(depth * bw);
        const long span = std::lround(across * bh);
        const long y0 = box.y.begin + rng.integer(static_cast<int>(-bh / 4), static_cast<int>(bh / 4));
        r.y = {y0, y0 + span};
        r.x = side == 0 ? PixelSpan{box.x.begin - bw, box.x.begin + d} : PixelSpan{box.x.end - d, box.x.end + bw};
    } else {
        const long d = std::lround(depth * bh);
        const long span = std::lround(across * bw);
        const long x0 = box.x.begin + rng.integer(static_cast<int>(-bw / 4), static_cast<int>(bw / 4));
        r.x = {x0, x0 + span};
        r.y = side == 2 ? PixelSpan{box.y.begin - bh, box.y.begin + d} : PixelSpan{box.y.end - d, box.y.end + bh};
    }
    return r;
}

inline void draw_occluder(RasterImage& img, Rng& rng, const PixelRect& r, PixelMask& cover) {
    const Rgb a = random_color(rng), b = random_color(rng);
    const int period = rng.integer(4, 12);
    const bool vertical = rng.uniform() < 0.5;
    for (long y = std::max(0L, r.y.begin); y < std::min<long>(img.height, r.y.end); ++y) {
        for (long x = std::max(0L, r.x.begin); x < std::min<long>(img.width, r.x.end); ++x) {
            const long t = vertical ? x : y;
            put(img, x, y, (t / period) % 2 ? a : b);
            cover.at(static_cast<int>(x), static_cast<int>(y)) = 1;
        }
    }
}

}  // namespace detail

// Renders one image. Object boxes are aligned with the HOG cell grid of their
// level, so the annotations are exact.
inline SynthImage render_synthetic(const SynthConfig& cfg, Rng& rng) {
    PyramidGeometry geo;
    geo.cell_size = cfg.cell_size;
    geo.base_width = cfg.width;
    geo.base_height = cfg.height;
    for (int l = 0; l <= cfg.max_level; ++l)
        geo.scales.push_back(std::pow(cfg.scale_step, l));

    SynthImage out;
    out.image.width = cfg.width;
    out.image.height = cfg.height;
    out.image.channels = 3;
    out.image.data.assign(static_cast<std::size_t>(cfg.width) * cfg.height * 3, 0.0);
    detail::draw_clutter(out.image, rng, cfg.clutter_level);

    std::vector<int> fitting;
    for (int l = 0; l <= cfg.max_level; ++l) {
        const PixelRect r = box_pixels(geo, {0, 0, l}, cfg.shape);
        if (r.x.end <= cfg.width && r.y.end <= cfg.height)
            fitting.push_back(l);
    }
    if (fitting.empty())
        throw GenerationError("synth: object does not fit the image at any level");

    std::vector<PixelMask> owner_masks;
    for (int o = 0; o < cfg.n_objects; ++o) {
        BoxPosition p;
        PixelRect rect;
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            p.level = fitting[static_cast<std::size_t>(rng.integer(0, static_cast<int>(fitting.size()) - 1))];
            // Largest cell offsets that keep the box inside the image.
            int max_x = 0, max_y = 0;
            while (box_pixels(geo, {max_x + 1, 0, p.level}, cfg.shape).x.end <= cfg.width)
                ++max_x;
            while (box_pixels(geo, {0, max_y + 1, p.level}, cfg.shape).y.end <= cfg.height)
                ++max_y;
            p.x = rng.integer(0, max_x);
            p.y = rng.integer(0, max_y);
            rect = box_pixels(geo, p, cfg.shape);
            placed = true;
            for (const auto& prev : out.objects) {
                const double iou = rect_iou(rect, prev.box);
                const bool touching = intersect(rect, prev.box).area() > 0;
                if (cfg.overlap ? !(touching && iou < 0.5) : touching)
                    placed = false;
            }
        }
        if (!placed)
            throw GenerationError("synth: could not place object " + std::to_string(o) + " after 100 attempts");

        const detail::ObjectTexture tex(cfg.object_texture_seed + static_cast<std::uint64_t>(o));
        PixelMask pix(cfg.width, cfg.height);
        const double bw = static_cast<double>(rect.x.size()), bh = static_cast<double>(rect.y.size());
        for (long y = rect.y.begin; y < rect.y.end; ++y) {
            for (long x = rect.x.begin; x < rect.x.end; ++x) {
                detail::put(out.image, x, y, tex((x - rect.x.begin + 0.5) / bw, (y - rect.y.begin + 0.5) / bh));
                pix.at(static_cast<int>(x), static_cast<int>(y)) = 1;
            }
        }
        for (auto& earlier : owner_masks)
            for (std::size_t i = 0; i < pix.bits.size(); ++i)
                if (pix.bits[i])
                    earlier.bits[i] = 0;
        owner_masks.push_back(pix);

        SynthObject obj;
        obj.object_id = o;
        obj.y.p = p;
        obj.y.viewpoint = 0;
        obj.box = rect;
        out.objects.push_back(obj);
    }

    // Occluders: each covers a random depth of the first object; the union
    // must leave at least 1 - max_occlusion of it visible.
    if (cfg.max_occlusion > 0 && cfg.occluder_count > 0) {
        const int n_occ = rng.integer(0, cfg.occluder_count);
        const PixelRect target = out.objects.front().box;
        const double area = static_cast<double>(target.area());
        bool ok = false;
        std::vector<PixelRect> rects;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            rects.clear();
            PixelMask cover(cfg.width, cfg.height);
            for (int k = 0; k < n_occ; ++k) {
                const PixelRect r = detail::occluder_rect(rng, target, rng.uniform(0.0, cfg.max_occlusion));
                rects.push_back(r);
                const PixelRect c = intersect(r, target);
                for (long y = c.y.begin; y < c.y.end; ++y)
                    for (long x = c.x.begin; x < c.x.end; ++x)
                        cover.at(static_cast<int>(x), static_cast<int>(y)) = 1;
            }
            ok = static_cast<double>(cover.count()) <= cfg.max_occlusion * area;
        }
        if (!ok)
            throw GenerationError("synth: occlusion limit not met after 100 placement attempts");
        PixelMask cover(cfg.width, cfg.height);
        for (const auto& r : rects)
            detail::draw_occluder(out.image, rng, r, cover);
        for (auto& m : owner_masks)
            for (std::size_t i = 0; i < m.bits.size(); ++i)
                if (cover.bits[i])
                    m.bits[i] = 0;
    }

    // Mild sensor noise.
    for (auto& px : out.image.data)
        px = std::clamp(px + rng.uniform(-0.02, 0.02), 0.0, 1.0);
    // Quantise to the 8-bit values a PNG round trip would produce.
    for (auto& px : out.image.data)
        px = std::lround(px * 255.0) / 255.0;

    for (std::size_t o = 0; o < out.objects.size(); ++o) {
        auto& obj = out.objects[o];
        obj.mask = std::move(owner_masks[o]);
        obj.y.v = quantize_mask(obj.mask, obj.y.p, cfg.shape, geo);
    }
    out.segments = segment_unsupervised(out.image, cfg.segment_k, cfg.segment_min_size);
    return out;
}

inline std::vector<SynthImage> gen_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::vector<SynthImage> out;
    out.reserve(static_cast<std::size_t>(cfg.n_images));
    for (int i = 0; i < cfg.n_images; ++i)
        out.push_back(render_synthetic(cfg, rng));
    return out;
}

}  // namespace occseg
