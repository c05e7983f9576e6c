#include "countvqa/geometry.hpp"

#include <algorithm>

namespace cvqa {

double intersection_area(const Box& a, const Box& b) {
    double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

double iou(const Box& a, const Box& b) {
    double inter = intersection_area(a, b);
    double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double overlap_frac(const Box& a, const Box& b) {
    double denom = a.area();
    if (denom <= 0.0) return 0.0;
    return intersection_area(a, b) / denom;
}

std::array<double, 11> pair_features(const Box& a, const Box& b, double image_w, double image_h) {
    detail::require(image_w > 0.0 && image_h > 0.0, "pair_features: zero-size image");
    return {a.x1 / image_w, a.y1 / image_h, a.x2 / image_w, a.y2 / image_h,
            b.x1 / image_w, b.y1 / image_h, b.x2 / image_w, b.y2 / image_h,
            iou(a, b),      overlap_frac(a, b), overlap_frac(b, a)};
}

}  // namespace cvqa
