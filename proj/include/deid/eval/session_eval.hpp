#pragma once

#include <filesystem>
#include <span>

#include "deid/core/types.hpp"
#include "deid/eval/adapters.hpp"
#include "deid/eval/report.hpp"

namespace deid::eval {

/// Where one analysis op gets its payloads. `privatized` may be null, in which
/// case `original` serves both streams (a process adapter sees the image path
/// and so can tell them apart).
struct SourcePair {
    AnalysisSource* original = nullptr;
    AnalysisSource* privatized = nullptr;

    AnalysisSource* for_privatized() const { return privatized ? privatized : original; }
    explicit operator bool() const { return original != nullptr; }
};

struct AnalysisSuite {
    SourcePair landmarks;
    SourcePair gaze;
    SourcePair expression;
    GazeConfig gaze_config;
    // Only frames whose index is a multiple of the stride are analysed.
    int frame_stride = 10;
};

/// Runs every configured analysis on the track frames of the original video
/// and of `privatized_dir`, and assembles the report for `condition`.
/// Unconfigured analyses leave their section empty.
EvalReport evaluate_track(const SessionManifest& manifest, std::span<const FaceObservation> track,
                          const std::filesystem::path& privatized_dir, const Condition& condition,
                          AnalysisSuite& suite);

}  // namespace deid::eval
