#include "deid/privatize/blur.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <vector>

#include "deid/error.hpp"

namespace deid::privatize {

namespace {

long long parse_int(std::string_view s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
        throw ValidationError("bad blur scale component '" + std::string(s) + "'");
    return v;
}

// Sum of src[clamp(i, 0, n-1)] for i in [lo, lo + k), given prefix sums of src.
// Requires lo <= n - 1 and lo + k - 1 >= 0.
long long clamped_window_sum(const std::vector<long long>& prefix, const long long* src, int n, int lo, int k) {
    const int hi = lo + k - 1;
    long long sum = 0;
    if (lo < 0) sum += static_cast<long long>(-lo) * src[0];
    if (hi > n - 1) sum += static_cast<long long>(hi - (n - 1)) * src[n - 1];
    const int a = std::max(lo, 0);
    const int b = std::min(hi, n - 1);
    sum += prefix[static_cast<std::size_t>(b) + 1] - prefix[static_cast<std::size_t>(a)];
    return sum;
}

}  // namespace

std::string BlurScale::str() const { return std::to_string(num) + "/" + std::to_string(den); }

BlurScale BlurScale::parse(std::string_view text) {
    BlurScale s;
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        s.num = parse_int(text.substr(0, slash));
        s.den = parse_int(text.substr(slash + 1));
    } else if (auto dot = text.find('.'); dot != std::string_view::npos) {
        const std::string_view frac = text.substr(dot + 1);
        if (frac.size() > 12) throw ValidationError("blur scale has too many decimals");
        long long den = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
        const long long whole = dot == 0 ? 0 : parse_int(text.substr(0, dot));
        s.num = whole * den + (frac.empty() ? 0 : parse_int(frac));
        s.den = den;
    } else {
        s.num = parse_int(text);
        s.den = 1;
    }
    if (s.den <= 0 || s.num <= 0 || s.num > s.den)
        throw ValidationError("blur scale must satisfy 0 < scale <= 1, got '" + std::string(text) + "'");
    const long long g = std::gcd(s.num, s.den);
    s.num /= g;
    s.den /= g;
    return s;
}

void BlurSpec::validate() const {
    if (scale.den <= 0 || scale.num <= 0 || scale.num > scale.den)
        throw ValidationError("blur scale must satisfy 0 < scale <= 1");
}

int blur_kernel_size(const BoxGeom& box, const BlurScale& scale) {
    const long long p = static_cast<long long>(box.w) + box.h;
    const long long k = (p * scale.num + scale.den - 1) / scale.den;
    return static_cast<int>(std::max<long long>(k, 1));
}

void box_filter_in_place(Image& image, const BoxGeom& box, int k) {
    if (k <= 1) return;
    if (box.x < 0 || box.y < 0 || box.right() > image.width || box.bottom() > image.height)
        throw DomainError("blur box outside image");
    const int w = box.w;
    const int h = box.h;
    const int anchor = k / 2;
    const long long area = static_cast<long long>(k) * k;

    std::vector<long long> line(static_cast<std::size_t>(std::max(w, h)));
    std::vector<long long> prefix(line.size() + 1);
    std::vector<long long> horiz(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));

    for (int c = 0; c < image.channels; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) line[static_cast<std::size_t>(x)] = image.at(box.x + x, box.y + y, c);
            prefix[0] = 0;
            for (int x = 0; x < w; ++x) prefix[static_cast<std::size_t>(x) + 1] = prefix[static_cast<std::size_t>(x)] + line[static_cast<std::size_t>(x)];
            for (int x = 0; x < w; ++x)
                horiz[static_cast<std::size_t>(y) * w + x] = clamped_window_sum(prefix, line.data(), w, x - anchor, k);
        }
        for (int x = 0; x < w; ++x) {
            for (int y = 0; y < h; ++y) line[static_cast<std::size_t>(y)] = horiz[static_cast<std::size_t>(y) * w + x];
            prefix[0] = 0;
            for (int y = 0; y < h; ++y) prefix[static_cast<std::size_t>(y) + 1] = prefix[static_cast<std::size_t>(y)] + line[static_cast<std::size_t>(y)];
            for (int y = 0; y < h; ++y) {
                const long long sum = clamped_window_sum(prefix, line.data(), h, y - anchor, k);
                image.at(box.x + x, box.y + y, c) = static_cast<std::uint8_t>(round_half_up_div(sum, area));
            }
        }
    }
}

void blur_region_in_place(Image& image, const BoxGeom& box, const BlurSpec& spec) {
    spec.validate();
    box_filter_in_place(image, box, blur_kernel_size(box, spec.scale));
}

Image blur_region(const Image& image, const BoxGeom& box, const BlurSpec& spec) {
    Image out = image;
    blur_region_in_place(out, box, spec);
    return out;
}

}  // namespace deid::privatize
