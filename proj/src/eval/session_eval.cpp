#include "deid/eval/session_eval.hpp"

#include <algorithm>

#include "deid/core/frames.hpp"

namespace fs = std::filesystem;

namespace deid::eval {

EvalReport evaluate_track(const SessionManifest& manifest, std::span<const FaceObservation> track,
                          const fs::path& privatized_dir, const Condition& condition, AnalysisSuite& suite) {
    EvalReport report;
    report.condition = condition;

    std::vector<LandmarkPair> landmark_pairs;
    std::vector<GazeSample> gaze_orig, gaze_priv;
    std::vector<ExpressionLabel> expr_orig, expr_priv;

    const int stride = std::max(suite.frame_stride, 1);
    for (const auto& obs : track) {
        if (obs.frame % stride != 0) continue;
        const fs::path orig = frame_path(manifest, obs.frame);
        const fs::path priv = privatized_dir / frame_file_name(obs.frame);

        if (suite.landmarks) {
            auto a = suite.landmarks.original->lookup(obs.frame, orig, obs.box);
            auto b = suite.landmarks.for_privatized()->lookup(obs.frame, priv, obs.box);
            auto la = a ? parse_landmarks(*a, obs.frame, obs.box) : std::nullopt;
            auto lb = b ? parse_landmarks(*b, obs.frame, obs.box) : std::nullopt;
            if (la && lb) landmark_pairs.push_back({*la, *lb});
        }
        if (suite.gaze) {
            const int side = std::min(obs.box.w, obs.box.h);
            auto a = suite.gaze.original->lookup(obs.frame, orig, obs.box);
            auto b = suite.gaze.for_privatized()->lookup(obs.frame, priv, obs.box);
            gaze_orig.push_back(a ? parse_gaze(*a, obs.frame, side) : GazeSample{obs.frame, side, {}, {}});
            gaze_priv.push_back(b ? parse_gaze(*b, obs.frame, side) : GazeSample{obs.frame, side, {}, {}});
        }
        if (suite.expression) {
            auto a = suite.expression.original->lookup(obs.frame, orig, obs.box);
            auto b = suite.expression.for_privatized()->lookup(obs.frame, priv, obs.box);
            if (auto l = a ? parse_expression_label(*a, obs.frame) : std::nullopt) expr_orig.push_back(*l);
            if (auto l = b ? parse_expression_label(*b, obs.frame) : std::nullopt) expr_priv.push_back(*l);
        }
    }

    if (suite.landmarks && !landmark_pairs.empty()) report.landmarks = summarize_landmarks(landmark_pairs);
    if (suite.gaze && !gaze_orig.empty()) report.gaze = gaze_agreement(gaze_orig, gaze_priv, suite.gaze_config);
    if (suite.expression) report.expression = expression_agreement(expr_orig, expr_priv);
    return report;
}

}  // namespace deid::eval
