#include "deid/privatize/swap.hpp"

#include <algorithm>
#include <cmath>

#include "deid/error.hpp"

using nlohmann::json;

namespace deid::privatize {

FaceCrop extract_crop(const Image& frame, const BoxGeom& box, double margin, int frame_index) {
    if (box.w < 1 || box.h < 1) throw ValidationError("crop box must be at least 1x1");
    if (!(margin >= 0.0)) throw ValidationError("crop margin must be non-negative");
    const int mx = static_cast<int>(std::floor(margin * box.w + 0.5));
    const int my = static_cast<int>(std::floor(margin * box.h + 0.5));
    const BoxGeom grown{box.x - mx, box.y - my, box.w + 2 * mx, box.h + 2 * my};
    auto region = clamp_to_frame(grown, frame.width, frame.height);
    if (!region) throw DomainError("crop box does not intersect the frame");
    FaceCrop crop;
    crop.frame = frame_index;
    crop.source_box = box;
    crop.region = *region;
    crop.margin = margin;
    crop.pixels = crop_image(frame, *region);
    return crop;
}

SwapResult IdentitySwapAdapter::swap(const FaceCrop& crop) {
    return {crop.pixels, std::vector<float>(static_cast<std::size_t>(crop.pixels.width) * crop.pixels.height, 1.0f)};
}

SwapResult BlurSwapAdapter::swap(const FaceCrop& crop) {
    SwapResult out{crop.pixels, std::vector<float>(static_cast<std::size_t>(crop.pixels.width) * crop.pixels.height, 1.0f)};
    auto local = clamp_to_frame(BoxGeom{crop.source_box.x - crop.region.x, crop.source_box.y - crop.region.y,
                                        crop.source_box.w, crop.source_box.h},
                                crop.pixels.width, crop.pixels.height);
    if (local) blur_region_in_place(out.pixels, *local, spec_);
    return out;
}

SwapResult ProcessSwapAdapter::swap(const FaceCrop& crop) {
    const int w = crop.pixels.width;
    const int h = crop.pixels.height;
    process_.write_line(json{{"op", "swap"}, {"frame_index", crop.frame}, {"width", w}, {"height", h}}.dump());
    process_.write_bytes(crop.pixels.pixels);

    json header;
    try {
        header = json::parse(process_.read_line());
    } catch (const json::parse_error& e) {
        throw ProtocolError("swap adapter sent a malformed header for frame " + std::to_string(crop.frame) + ": " +
                            e.what());
    }
    auto get_int = [&](const char* key) {
        auto it = header.find(key);
        if (it == header.end() || !it->is_number_integer())
            throw ProtocolError("swap adapter header for frame " + std::to_string(crop.frame) + " lacks " + key);
        return it->get<long long>();
    };
    if (auto err = header.find("error"); err != header.end() && !err->is_null())
        throw ProtocolError("swap adapter failed on frame " + std::to_string(crop.frame) + ": " + err->dump());
    const long long fi = get_int("frame_index");
    const long long rw = get_int("width");
    const long long rh = get_int("height");
    if (fi != crop.frame) throw ProtocolError("swap adapter answered frame " + std::to_string(fi) + " for " + std::to_string(crop.frame));
    if (rw != w || rh != h)
        throw ProtocolError("swap adapter returned " + std::to_string(rw) + "x" + std::to_string(rh) + " for a " +
                            std::to_string(w) + "x" + std::to_string(h) + " crop on frame " + std::to_string(crop.frame));
    SwapResult out;
    out.pixels = Image(w, h, 3);
    out.pixels.pixels = process_.read_bytes(static_cast<std::size_t>(w) * h * 3);
    const auto mask = process_.read_bytes(static_cast<std::size_t>(w) * h);
    out.mask.resize(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) out.mask[i] = static_cast<float>(mask[i]) / 255.0f;
    return out;
}

SwapResult apply_swap(const FaceCrop& crop, SwapAdapter& adapter) {
    if (crop.pixels.empty()) throw ValidationError("cannot swap an empty crop");
    SwapResult r = adapter.swap(crop);
    const std::size_t n = static_cast<std::size_t>(crop.pixels.width) * crop.pixels.height;
    if (r.pixels.width != crop.pixels.width || r.pixels.height != crop.pixels.height ||
        r.pixels.channels != crop.pixels.channels || r.pixels.pixels.size() != crop.pixels.pixels.size())
        throw ProtocolError("swap result dimensions differ from the crop on frame " + std::to_string(crop.frame));
    if (r.mask.size() != n) throw ProtocolError("swap mask size differs from the crop on frame " + std::to_string(crop.frame));
    for (float m : r.mask)
        if (!(m >= 0.0f && m <= 1.0f)) throw ProtocolError("swap mask value outside [0,1] on frame " + std::to_string(crop.frame));
    return r;
}

void composite(Image& frame, const SwapResult& result, const BoxGeom& geometry) {
    if (geometry.x < 0 || geometry.y < 0 || geometry.right() > frame.width || geometry.bottom() > frame.height)
        throw DomainError("composite geometry outside the frame");
    if (result.pixels.width != geometry.w || result.pixels.height != geometry.h ||
        result.pixels.channels != frame.channels)
        throw DomainError("composite geometry does not match the swap result");
    if (result.mask.size() != static_cast<std::size_t>(geometry.w) * geometry.h)
        throw DomainError("composite mask does not match the geometry");
    for (int y = 0; y < geometry.h; ++y) {
        for (int x = 0; x < geometry.w; ++x) {
            const float m = result.mask[static_cast<std::size_t>(y) * geometry.w + x];
            if (m <= 0.0f) continue;
            for (int c = 0; c < frame.channels; ++c) {
                std::uint8_t& dst = frame.at(geometry.x + x, geometry.y + y, c);
                const double v = m * result.pixels.at(x, y, c) + (1.0 - static_cast<double>(m)) * dst;
                dst = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
            }
        }
    }
}

}  // namespace deid::privatize
