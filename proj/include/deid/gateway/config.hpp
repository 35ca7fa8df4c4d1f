#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "deid/annotate/engine.hpp"
#include "deid/detect/detector.hpp"
#include "deid/gateway/scheduler.hpp"
#include "deid/privatize/blur.hpp"

namespace deid::gateway {

// Configuration file keys (all optional). Unknown keys are rejected so typos
// surface instead of silently falling back to defaults.
//
//   store_root                      directory holding one subdirectory per session
//   workers                         stage worker threads in the pipeline runner
//   detector.command                shell command of a JSON-lines detector
//   detector.batch_file             precomputed detections (used when no command)
//   detector.stride / match_max_center_distance / min_confidence / parallelism
//   chains.gap_limit / link_max_center_distance
//   limits.detect / densify / annotate / extract / privatize / evaluate
//   privatize.mode                  "blur" or "swap"
//   privatize.scale                 blur scale, "1/5" or 0.2
//   privatize.swap_command          swap adapter command
//   privatize.margin                swap crop margin (fraction of box side)
//   privatize.fallback              "blur", "passthrough" or "fail"
//   privatize.parallelism
//   privatize.blur_others           also blur chains tagged "other"
//   server.host / server.port
//   eval.landmarks_command / gaze_command / expression_command
//   eval.gaze_min_side / gaze_session_floor
//   eval.frame_stride               analyse every Nth frame of the track
struct PrivatizeConfig {
    std::string mode = "blur";
    privatize::BlurScale scale = privatize::kPowerfulBlur;
    std::string swap_command;
    double margin = 0.25;
    std::string fallback = "blur";
    int parallelism = 1;
    bool blur_others = false;
};

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
};

struct EvalConfig {
    std::string landmarks_command;
    std::string gaze_command;
    std::string expression_command;
    int gaze_min_side = 56;
    double gaze_session_floor = 0.10;
    int frame_stride = 10;
};

struct GatewayConfig {
    std::filesystem::path store_root = "deid-store";
    int workers = 2;
    std::string detector_command;
    std::filesystem::path detector_batch_file;
    detect::DetectorConfig detector;
    annotate::ChainLinkConfig chains;
    StageLimits limits;
    PrivatizeConfig privatize;
    ServerConfig server;
    EvalConfig eval;

    void validate() const;
};

GatewayConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const GatewayConfig& config);
GatewayConfig load_config(const std::filesystem::path& file);

}  // namespace deid::gateway
