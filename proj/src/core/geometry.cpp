#include "deid/core/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "deid/error.hpp"

namespace deid {

Point2 box_center(const BoxGeom& box) {
    return {box.x + box.w / 2.0, box.y + box.h / 2.0};
}

double box_diagonal(const BoxGeom& box) {
    return std::hypot(static_cast<double>(box.w), static_cast<double>(box.h));
}

double center_distance(const BoxGeom& a, const BoxGeom& b) {
    const Point2 ca = box_center(a);
    const Point2 cb = box_center(b);
    return std::hypot(ca.x - cb.x, ca.y - cb.y);
}

std::optional<BoxGeom> clamp_to_frame(const BoxGeom& box, int width, int height) {
    const int x0 = std::max(box.x, 0);
    const int y0 = std::max(box.y, 0);
    const int x1 = std::min(box.right(), width);
    const int y1 = std::min(box.bottom(), height);
    if (x1 <= x0 || y1 <= y0) return std::nullopt;
    return BoxGeom{x0, y0, x1 - x0, y1 - y0};
}

void validate_box(const BoxGeom& box) {
    if (box.w < 1 || box.h < 1)
        throw ValidationError("box size must be at least 1x1, got " + std::to_string(box.w) + "x" +
                              std::to_string(box.h));
    if (box.x < 0 || box.y < 0)
        throw ValidationError("box origin must be non-negative, got (" + std::to_string(box.x) + "," +
                              std::to_string(box.y) + ")");
}

long long round_half_up_div(long long num, long long den) {
    // floor((2*num + den) / (2*den)), with floor division for negative numerators
    const long long n = 2 * num + den;
    const long long d = 2 * den;
    long long q = n / d;
    if ((n % d != 0) && (n < 0)) --q;
    return q;
}

}  // namespace deid
