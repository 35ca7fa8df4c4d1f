#pragma once

#include <optional>

namespace deid {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point2&) const = default;
};

/// Axis-aligned face box in integer pixels, top-left corner plus size.
struct BoxGeom {
    int x = 0;
    int y = 0;
    int w = 1;
    int h = 1;

    int right() const { return x + w; }    // exclusive
    int bottom() const { return y + h; }   // exclusive
    bool contains(int px, int py) const { return px >= x && px < right() && py >= y && py < bottom(); }

    bool operator==(const BoxGeom&) const = default;
};

Point2 box_center(const BoxGeom& box);

double box_diagonal(const BoxGeom& box);

double center_distance(const BoxGeom& a, const BoxGeom& b);

/// Intersection of `box` with the frame rectangle [0,width) x [0,height).
/// Empty when nothing of the box remains.
std::optional<BoxGeom> clamp_to_frame(const BoxGeom& box, int width, int height);

/// Throws ValidationError unless w >= 1, h >= 1, x >= 0 and y >= 0.
void validate_box(const BoxGeom& box);

/// Round-half-up of num/den for den > 0, exact in integer arithmetic.
long long round_half_up_div(long long num, long long den);

}  // namespace deid
