#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "deid/adapter/process.hpp"
#include "deid/core/image.hpp"
#include "deid/privatize/blur.hpp"

namespace deid::privatize {

/// Face pixels cut from a frame: the source box grown by `margin` (a fraction
/// of the box size) on every side, clamped to the frame.
struct FaceCrop {
    int frame = 0;
    BoxGeom source_box;
    BoxGeom region;  // realized geometry in frame coordinates
    double margin = 0.0;
    Image pixels;
};

FaceCrop extract_crop(const Image& frame, const BoxGeom& box, double margin, int frame_index = 0);

struct SwapResult {
    Image pixels;
    std::vector<float> mask;  // one blend weight in [0,1] per pixel
};

class SwapAdapter {
public:
    virtual ~SwapAdapter() = default;
    virtual SwapResult swap(const FaceCrop& crop) = 0;
};

using SwapAdapterFactory = std::function<std::unique_ptr<SwapAdapter>()>;

/// Echoes the crop with a full mask.
class IdentitySwapAdapter final : public SwapAdapter {
public:
    SwapResult swap(const FaceCrop& crop) override;
};

/// Blurs the source box inside the crop exactly like blur_region would on
/// the frame, with a full mask.
class BlurSwapAdapter final : public SwapAdapter {
public:
    explicit BlurSwapAdapter(BlurSpec spec) : spec_(spec) {}
    SwapResult swap(const FaceCrop& crop) override;

private:
    BlurSpec spec_;
};

/// Binary swap protocol over a child process:
///   request:  {"op":"swap","frame_index":N,"width":W,"height":H}\n + W*H*3 RGB bytes
///   response: {"frame_index":N,"width":W,"height":H}\n + W*H*3 RGB bytes + W*H mask bytes
class ProcessSwapAdapter final : public SwapAdapter {
public:
    explicit ProcessSwapAdapter(const std::string& command) : process_(command) {}
    SwapResult swap(const FaceCrop& crop) override;

private:
    adapter::Process process_;
};

/// Runs the adapter and checks the result shape. Throws ProtocolError if
/// dimensions or mask values are wrong.
SwapResult apply_swap(const FaceCrop& crop, SwapAdapter& adapter);

/// Blends `result` into `frame` over `geometry`:
/// out = mask * swapped + (1 - mask) * original, rounded half-up.
/// Throws DomainError when geometry and result disagree.
void composite(Image& frame, const SwapResult& result, const BoxGeom& geometry);

}  // namespace deid::privatize
