#pragma once

#include <array>

#include "countvqa/tensor.hpp"

namespace cvqa {

/// Axis-aligned box, corner form. Degenerate (zero-area) boxes are legal.
struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
};

double intersection_area(const Box& a, const Box& b);

/// Intersection over union; 0 when the union has zero area.
double iou(const Box& a, const Box& b);

/// Intersection over area of the first box; 0 when that area is zero.
double overlap_frac(const Box& a, const Box& b);

/// [b_i(4), b_j(4), IoU, O_ij, O_ji] with coordinates normalized to [0,1]
/// by image width/height.
std::array<double, 11> pair_features(const Box& a, const Box& b, double image_w, double image_h);

}  // namespace cvqa
