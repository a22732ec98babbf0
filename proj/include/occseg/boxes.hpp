#pragma once

#include <algorithm>

#include "model.hpp"
#include "pyramid.hpp"

namespace occseg {

// Axis-aligned set of base-level pixels [x.begin, x.end) x [y.begin, y.end).
// Coordinates may fall outside the image.
struct PixelRect {
    PixelSpan x;
    PixelSpan y;

    long area() const { return x.size() * y.size(); }

    bool contains(long px, long py) const {
        return px >= x.begin && px < x.end && py >= y.begin && py < y.end;
    }
};

inline PixelRect intersect(const PixelRect& a, const PixelRect& b) {
    return {{std::max(a.x.begin, b.x.begin), std::min(a.x.end, b.x.end)},
            {std::max(a.y.begin, b.y.begin), std::min(a.y.end, b.y.end)}};
}

inline PixelRect box_pixels(const PyramidGeometry& geo, const BoxPosition& p, const ViewpointShape& shape) {
    return {geo.cell_span(p.x, shape.w, p.level), geo.cell_span(p.y, shape.h, p.level)};
}

inline PixelRect cell_pixels(const PyramidGeometry& geo, const BoxPosition& p, int cx, int cy) {
    return {geo.cell_span(p.x + cx, 1, p.level), geo.cell_span(p.y + cy, 1, p.level)};
}

inline double rect_iou(const PixelRect& a, const PixelRect& b) {
    const long inter = intersect(a, b).area();
    const long uni = a.area() + b.area() - inter;
    return uni > 0 ? static_cast<double>(inter) / uni : 0.0;
}

}  // namespace occseg
