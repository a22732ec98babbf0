#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "boxes.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "pyramid.hpp"
#include "segmentation.hpp"

namespace occseg {

struct PixelMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    PixelMask() = default;
    PixelMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    long count() const { return std::accumulate(bits.begin(), bits.end(), 0L); }

    bool operator==(const PixelMask&) const = default;
};

// Paints every visible cell's base-level footprint, clipped to the image.
inline PixelMask rasterize_cells(const Label& y, const ViewpointShape& shape, const PyramidGeometry& geo) {
    if (static_cast<int>(y.v.size()) != shape.cells())
        throw ArgumentError("rasterize_cells: labelling length does not match shape");
    PixelMask m(geo.base_width, geo.base_height);
    for (int cy = 0; cy < shape.h; ++cy) {
        for (int cx = 0; cx < shape.w; ++cx) {
            if (!y.v[static_cast<std::size_t>(cy * shape.w + cx)])
                continue;
            const PixelRect r = cell_pixels(geo, y.p, cx, cy);
            for (long py = std::max(0L, r.y.begin); py < std::min<long>(geo.base_height, r.y.end); ++py)
                for (long px = std::max(0L, r.x.begin); px < std::min<long>(geo.base_width, r.x.end); ++px)
                    m.at(static_cast<int>(px), static_cast<int>(py)) = 1;
        }
    }
    return m;
}

// Cell-level visibility from a pixel mask: a cell is 1 iff more than half of
// its base-level footprint (including any part outside the image) is set.
inline BitVector quantize_mask(const PixelMask& mask, const BoxPosition& p, const ViewpointShape& shape,
                               const PyramidGeometry& geo) {
    BitVector v(static_cast<std::size_t>(shape.cells()), 0);
    for (int cy = 0; cy < shape.h; ++cy) {
        for (int cx = 0; cx < shape.w; ++cx) {
            const PixelRect r = cell_pixels(geo, p, cx, cy);
            long on = 0;
            for (long py = std::max(0L, r.y.begin); py < std::min<long>(mask.height, r.y.end); ++py)
                for (long px = std::max(0L, r.x.begin); px < std::min<long>(mask.width, r.x.end); ++px)
                    on += mask.at(static_cast<int>(px), static_cast<int>(py));
            v[static_cast<std::size_t>(cy * shape.w + cx)] = 2 * on > r.area() ? 1 : 0;
        }
    }
    return v;
}

struct SegError {
    double error = 0;
    bool vacuous = false;  // both masks empty
};

// 1 - |pred & gt| / |pred | gt|.
inline SegError voc_seg_error(const PixelMask& pred, const PixelMask& gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw ArgumentError("voc_seg_error: mask dimensions differ");
    long inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.bits.size(); ++i) {
        inter += pred.bits[i] && gt.bits[i];
        uni += pred.bits[i] || gt.bits[i];
    }
    if (uni == 0)
        return {0.0, true};
    return {1.0 - static_cast<double>(inter) / uni, false};
}

inline constexpr double kDefaultRefineThreshold = 0.8;

// Promotes a segment to all-ones when strictly more than `threshold` of its
// pixels are set; other segments keep their raw pixels.
inline PixelMask refine_mask(const PixelMask& raw, const SegmentMap& seg, double threshold = kDefaultRefineThreshold) {
    if (raw.width != seg.width || raw.height != seg.height)
        throw ArgumentError("refine_mask: mask and segmentation dimensions differ");
    std::vector<long> on(static_cast<std::size_t>(seg.num_segments()), 0);
    for (std::size_t i = 0; i < raw.bits.size(); ++i)
        on[seg.pixel_labels[i]] += raw.bits[i];
    PixelMask out = raw;
    for (std::size_t i = 0; i < raw.bits.size(); ++i) {
        const int s = seg.pixel_labels[i];
        if (static_cast<double>(on[s]) > threshold * static_cast<double>(seg.segment_areas[s]))
            out.bits[i] = 1;
    }
    return out;
}

struct ScoredBox {
    PixelRect box;
    double score = 0;
};

struct CurvePoint {
    double fppi = 0;
    double recall = 0;
};

struct EvalCurve {
    std::vector<CurvePoint> points;
    double auc = 0;

    // Highest recall reached at or below the given false-positive rate.
    double recall_at(double fppi) const {
        double r = 0;
        for (const auto& p : points)
            if (p.fppi <= fppi)
                r = std::max(r, p.recall);
        return r;
    }
};

inline constexpr double kDefaultMatchIou = 0.5;

// Area under recall(fppi) for fppi in [0, 1], trapezoid rule between curve
// points; the curve is held at its last recall beyond its last point.
inline double curve_auc(const std::vector<CurvePoint>& pts) {
    double area = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const CurvePoint a = pts[i - 1];
        CurvePoint b = pts[i];
        if (a.fppi >= 1.0)
            break;
        if (b.fppi > 1.0) {
            const double t = (1.0 - a.fppi) / (b.fppi - a.fppi);
            b = {1.0, a.recall + t * (b.recall - a.recall)};
        }
        area += (b.fppi - a.fppi) * (a.recall + b.recall) / 2;
    }
    if (!pts.empty() && pts.back().fppi < 1.0)
        area += (1.0 - pts.back().fppi) * pts.back().recall;
    return area;
}

// Detections of all images ranked by score (ties keep image then input
// order) and matched greedily: each detection takes the unmatched ground
// truth of its image with the highest IoU, if that IoU reaches iou_match.
// One curve point is emitted per distinct score threshold.
inline EvalCurve fppi_recall(const std::vector<std::vector<ScoredBox>>& dets,
                             const std::vector<std::vector<PixelRect>>& gts, double iou_match = kDefaultMatchIou) {
    if (dets.size() != gts.size())
        throw ArgumentError("fppi_recall: detections and ground truth cover different image counts");
    std::size_t total_gt = 0;
    for (const auto& g : gts)
        total_gt += g.size();
    if (total_gt == 0)
        throw ArgumentError("fppi_recall: no ground-truth objects, recall is undefined");
    const double n_images = static_cast<double>(gts.size());

    struct Entry {
        std::size_t image, index;
        double score;
    };
    std::vector<Entry> all;
    for (std::size_t i = 0; i < dets.size(); ++i)
        for (std::size_t k = 0; k < dets[i].size(); ++k)
            all.push_back({i, k, dets[i][k].score});
    std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score > b.score; });

    std::vector<std::vector<bool>> used(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i)
        used[i].assign(gts[i].size(), false);

    EvalCurve curve;
    curve.points.push_back({0.0, 0.0});
    long tp = 0, fp = 0;
    for (std::size_t e = 0; e < all.size(); ++e) {
        const Entry& d = all[e];
        const PixelRect& box = dets[d.image][d.index].box;
        double best = -1;
        std::size_t best_k = 0;
        for (std::size_t k = 0; k < gts[d.image].size(); ++k) {
            if (used[d.image][k])
                continue;
            const double iou = rect_iou(box, gts[d.image][k]);
            if (iou > best) {
                best = iou;
                best_k = k;
            }
        }
        if (best >= iou_match) {
            used[d.image][best_k] = true;
            ++tp;
        } else {
            ++fp;
        }
        if (e + 1 == all.size() || all[e + 1].score != d.score)
            curve.points.push_back({fp / n_images, static_cast<double>(tp) / total_gt});
    }
    curve.auc = curve_auc(curve.points);
    return curve;
}

}  // namespace occseg
