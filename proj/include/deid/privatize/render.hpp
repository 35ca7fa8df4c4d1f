#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "deid/core/types.hpp"
#include "deid/privatize/blur.hpp"
#include "deid/privatize/swap.hpp"

namespace deid::privatize {

enum class RenderStatus { privatized, copied, fallback, failed };

std::string_view to_string(RenderStatus s);

struct RenderEntry {
    int frame = 0;
    RenderStatus status = RenderStatus::copied;
    std::string message;
};

struct RenderLog {
    std::vector<RenderEntry> entries;  // sorted by frame

    int count(RenderStatus s) const;
    bool ok() const { return count(RenderStatus::failed) == 0; }
};

std::string render_log_json(const RenderLog& log);

enum class SwapFallback { blur, passthrough, fail };

struct BlurMode {
    BlurSpec spec;
};

struct SwapMode {
    SwapAdapterFactory make_adapter;
    double margin = 0.25;
    SwapFallback fallback = SwapFallback::blur;
    BlurSpec fallback_blur{kPowerfulBlur};
};

struct PrivatizeOptions {
    std::variant<BlurMode, SwapMode> mode = BlurMode{};
    int parallelism = 1;
    // Boxes of faces tagged `other`, blurred when blur_others is set.
    bool blur_others = false;
    std::map<int, std::vector<BoxGeom>> other_boxes;
    BlurSpec other_blur{kPowerfulBlur};
};

/// Renders every frame of the session into `output_dir`: frames on the track
/// get their box privatized, all other frames are copied byte for byte.
/// Per-frame failures are logged and the run continues. The log is also
/// written to `output_dir/render_log.json`.
RenderLog privatize_session(const SessionManifest& manifest, std::span<const FaceObservation> track,
                            const PrivatizeOptions& options, const std::filesystem::path& output_dir);

}  // namespace deid::privatize
