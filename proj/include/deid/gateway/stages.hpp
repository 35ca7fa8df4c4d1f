#pragma once

#include <string>

#include "deid/detect/detector.hpp"
#include "deid/eval/report.hpp"
#include "deid/gateway/config.hpp"
#include "deid/gateway/store.hpp"
#include "deid/privatize/render.hpp"

// Stage bodies shared by the pipeline runner and the CLI verbs. Each one
// overwrites its own outputs, so running a stage twice is harmless.

namespace deid::gateway {

detect::DetectorFactory detector_factory(const GatewayConfig& config);
privatize::PrivatizeOptions privatize_options(const PrivatizeConfig& config);
eval::Condition condition_of(const PrivatizeConfig& config);

void run_detect_stage(SessionStore& store, const GatewayConfig& config, const std::string& id);

/// Densifies the sparse detections into the session. If pass 1 is already
/// complete the chains are rebuilt as well.
void run_densify_stage(SessionStore& store, const GatewayConfig& config, const std::string& id);

/// Writes track.csv and one face crop per track frame.
void run_extract_stage(SessionStore& store, const std::string& id);

/// Throws if any frame failed to render.
privatize::RenderLog run_privatize_stage(SessionStore& store, const PrivatizeConfig& config, const std::string& id);

/// Writes reports/<condition>.json and .csv.
eval::EvalReport run_evaluate_stage(SessionStore& store, const GatewayConfig& config, const std::string& id);

void run_stage(Stage stage, SessionStore& store, const GatewayConfig& config, const std::string& id);

}  // namespace deid::gateway
