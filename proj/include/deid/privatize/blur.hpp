#pragma once

#include <string>
#include <string_view>

#include "deid/core/geometry.hpp"
#include "deid/core/image.hpp"

namespace deid::privatize {

/// Blur scale kept as an exact fraction so kernel sizes never suffer from
/// floating-point rounding (200 * 1/5 is exactly 40).
struct BlurScale {
    long long num = 1;
    long long den = 5;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;

    /// Accepts "1/5", "2/15" or a decimal such as "0.2". Throws ValidationError
    /// unless 0 < scale <= 1.
    static BlurScale parse(std::string_view text);

    bool operator==(const BlurScale& o) const { return num * o.den == o.num * den; }
};

struct BlurSpec {
    BlurScale scale;
    void validate() const;
};

inline constexpr BlurScale kPowerfulBlur{1, 5};
inline constexpr BlurScale kWeakBlur{1, 15};

/// k = ceil((w + h) * scale), at least 1.
int blur_kernel_size(const BoxGeom& box, const BlurScale& scale);

/// k x k mean filter over `box` only, per channel, anchored at floor(k/2),
/// with samples outside the box replicated from its edge. Means are rounded
/// half-up. Pixels outside the box are untouched.
void box_filter_in_place(Image& image, const BoxGeom& box, int k);

void blur_region_in_place(Image& image, const BoxGeom& box, const BlurSpec& spec);

Image blur_region(const Image& image, const BoxGeom& box, const BlurSpec& spec);

}  // namespace deid::privatize
