#pragma once

#include <algorithm>
#include <cmath>

#include "boxes.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "pyramid.hpp"

namespace occseg {

struct LossValue {
    double iou = 0;
    double hamming = 0;
    double total = 0;  // (1 - iou) + iou * hamming
};

namespace detail {

// Index of the cell of `level` whose pixel span contains base pixel px.
inline long cell_of_pixel(const PyramidGeometry& geo, long px, int level) {
    long c = static_cast<long>(std::floor((px + 0.5) * geo.scale(level) / geo.cell_size));
    while (geo.pixel_edge(c, level) > px)
        --c;
    while (geo.pixel_edge(c + 1, level) <= px)
        ++c;
    return c;
}

// Visibility of base pixel (px, py) under a labelling; 0 outside its box.
inline int projected_label(const PyramidGeometry& geo, const BoxPosition& p, const ViewpointShape& shape,
                           const BitVector& v, const PixelRect& rect, long px, long py) {
    if (!rect.contains(px, py))
        return 0;
    const long cx = cell_of_pixel(geo, px, p.level) - p.x;
    const long cy = cell_of_pixel(geo, py, p.level) - p.y;
    return v[static_cast<std::size_t>(cy * shape.w + cx)];
}

}  // namespace detail

// Mean per-pixel disagreement between two labellings projected to base
// resolution, taken over the union of both boxes. A pixel inside only one box
// is compared against label 0.
inline double hamming_projected(const Label& y, const ViewpointShape& shape_y, const Label& yh,
                                const ViewpointShape& shape_yh, const PyramidGeometry& geo) {
    if (static_cast<int>(y.v.size()) != shape_y.cells() || static_cast<int>(yh.v.size()) != shape_yh.cells())
        throw ArgumentError("hamming_projected: labelling length does not match shape");
    const PixelRect a = box_pixels(geo, y.p, shape_y);
    const PixelRect b = box_pixels(geo, yh.p, shape_yh);
    const PixelRect hull{{std::min(a.x.begin, b.x.begin), std::max(a.x.end, b.x.end)},
                         {std::min(a.y.begin, b.y.begin), std::max(a.y.end, b.y.end)}};
    long in_union = 0, differ = 0;
    for (long py = hull.y.begin; py < hull.y.end; ++py) {
        for (long px = hull.x.begin; px < hull.x.end; ++px) {
            if (!a.contains(px, py) && !b.contains(px, py))
                continue;
            ++in_union;
            const int la = detail::projected_label(geo, y.p, shape_y, y.v, a, px, py);
            const int lb = detail::projected_label(geo, yh.p, shape_yh, yh.v, b, px, py);
            differ += la != lb;
        }
    }
    return in_union > 0 ? static_cast<double>(differ) / in_union : 0.0;
}

// Overlap-gated loss: the segmentation term only counts once the boxes
// overlap, so any non-overlapping prediction costs exactly 1.
inline LossValue loss(const Label& y, const Label& yh, const ModelLayout& layout, const PyramidGeometry& geo) {
    const auto& sy = layout.shape(y.viewpoint);
    const auto& syh = layout.shape(yh.viewpoint);
    LossValue out;
    out.iou = rect_iou(box_pixels(geo, y.p, sy), box_pixels(geo, yh.p, syh));
    out.hamming = out.iou > 0 ? hamming_projected(y, sy, yh, syh, geo) : 0.0;
    out.total = (1.0 - out.iou) + out.iou * out.hamming;
    return out;
}

}  // namespace occseg
