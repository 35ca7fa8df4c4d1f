#include "deid/gateway/stages.hpp"

#include <algorithm>

#include "deid/annotate/engine.hpp"
#include "deid/core/frames.hpp"
#include "deid/core/image.hpp"
#include "deid/error.hpp"
#include "deid/eval/session_eval.hpp"

namespace fs = std::filesystem;

namespace deid::gateway {

detect::DetectorFactory detector_factory(const GatewayConfig& config) {
    if (!config.detector_command.empty()) {
        const std::string cmd = config.detector_command;
        return [cmd] { return std::make_unique<detect::ProcessDetector>(cmd); };
    }
    if (!config.detector_batch_file.empty()) {
        auto table = std::make_shared<detect::BatchFileDetector>(config.detector_batch_file);
        // The batch detector is stateless, so workers can share one table.
        return [table] { return std::make_unique<detect::BatchFileDetector>(*table); };
    }
    throw ValidationError("no detector configured (detector.command or detector.batch_file)");
}

privatize::PrivatizeOptions privatize_options(const PrivatizeConfig& config) {
    privatize::PrivatizeOptions opts;
    opts.parallelism = config.parallelism;
    if (config.mode == "swap") {
        privatize::SwapMode mode;
        const std::string cmd = config.swap_command;
        mode.make_adapter = [cmd] { return std::make_unique<privatize::ProcessSwapAdapter>(cmd); };
        mode.margin = config.margin;
        mode.fallback = config.fallback == "fail"          ? privatize::SwapFallback::fail
                        : config.fallback == "passthrough" ? privatize::SwapFallback::passthrough
                                                           : privatize::SwapFallback::blur;
        mode.fallback_blur = {config.scale};
        opts.mode = std::move(mode);
    } else {
        opts.mode = privatize::BlurMode{{config.scale}};
    }
    return opts;
}

eval::Condition condition_of(const PrivatizeConfig& config) {
    if (config.mode == "swap") return {eval::Condition::Kind::swap, {}};
    return {eval::Condition::Kind::blur, config.scale};
}

void run_detect_stage(SessionStore& store, const GatewayConfig& config, const std::string& id) {
    const auto snap = store.owner(id)->snapshot();
    store.save_sparse_detections(id, detect::run_sparse_detection(snap->manifest, config.detector, detector_factory(config)));
}

void run_densify_stage(SessionStore& store, const GatewayConfig& config, const std::string& id) {
    DetectionSet dense = detect::densify(store.load_sparse_detections(id), config.detector);
    store.owner(id)->apply(std::nullopt, [&](AnnotationSession& s) {
        annotate::set_detections(s, std::move(dense));
        if (s.pass_complete(1) && !s.pass_complete(2)) annotate::build_chains(s, config.chains);
    });
}

void run_extract_stage(SessionStore& store, const std::string& id) {
    const auto snap = store.owner(id)->snapshot();
    if (!snap->pass_complete(4)) throw StateError("session " + id + " has not completed pass 4");
    write_file_atomic(store.session_dir(id) / "track.csv", annotate::export_track_csv(*snap));
    const fs::path crops = store.crops_dir(id);
    fs::remove_all(crops);
    fs::create_directories(crops);
    for (const auto& obs : snap->final_track) {
        const Image frame = load_png(frame_path(snap->manifest, obs.frame));
        auto box = clamp_to_frame(obs.box, frame.width, frame.height);
        if (!box) continue;
        save_png(crop_image(frame, *box), crops / frame_file_name(obs.frame));
    }
}

privatize::RenderLog run_privatize_stage(SessionStore& store, const PrivatizeConfig& config, const std::string& id) {
    const auto snap = store.owner(id)->snapshot();
    if (!snap->pass_complete(4)) throw StateError("session " + id + " has not completed pass 4");
    const fs::path out = store.rendered_dir(id);
    fs::remove_all(out);
    auto opts = privatize_options(config);
    if (config.blur_others) {
        opts.blur_others = true;
        opts.other_blur = {config.scale};
        for (const auto& chain : snap->chains)
            if (chain.subject_tag == SubjectTag::other)
                for (const auto& o : chain.observations) opts.other_boxes[o.frame].push_back(o.box);
    }
    auto log = privatize::privatize_session(snap->manifest, snap->final_track, opts, out);
    if (!log.ok())
        throw Error(std::to_string(log.count(privatize::RenderStatus::failed)) + " frame(s) failed to render");
    return log;
}

eval::EvalReport run_evaluate_stage(SessionStore& store, const GatewayConfig& config, const std::string& id) {
    const auto snap = store.owner(id)->snapshot();
    const fs::path rendered = store.rendered_dir(id);
    if (!fs::exists(rendered / "render_log.json")) throw StateError("session " + id + " has not been privatized");

    std::unique_ptr<eval::ProcessAnalysis> landmarks, gaze, expression;
    eval::AnalysisSuite suite;
    suite.gaze_config.min_side = config.eval.gaze_min_side;
    suite.gaze_config.session_validity_floor = config.eval.gaze_session_floor;
    suite.frame_stride = config.eval.frame_stride;
    if (!config.eval.landmarks_command.empty()) {
        landmarks = std::make_unique<eval::ProcessAnalysis>(config.eval.landmarks_command, "landmarks");
        suite.landmarks.original = landmarks.get();
    }
    if (!config.eval.gaze_command.empty()) {
        gaze = std::make_unique<eval::ProcessAnalysis>(config.eval.gaze_command, "gaze");
        suite.gaze.original = gaze.get();
    }
    if (!config.eval.expression_command.empty()) {
        expression = std::make_unique<eval::ProcessAnalysis>(config.eval.expression_command, "expression");
        suite.expression.original = expression.get();
    }

    auto report = eval::evaluate_track(snap->manifest, snap->final_track, rendered, condition_of(config.privatize), suite);
    const fs::path dir = store.reports_dir(id);
    fs::create_directories(dir);
    std::string stem = report.condition.str();
    std::replace(stem.begin(), stem.end(), ':', '_');
    std::replace(stem.begin(), stem.end(), '/', '-');
    write_file_atomic(dir / (stem + ".json"), eval::emit_report(report, eval::ReportFormat::json));
    write_file_atomic(dir / (stem + ".csv"), eval::emit_report(report, eval::ReportFormat::csv));
    return report;
}

void run_stage(Stage stage, SessionStore& store, const GatewayConfig& config, const std::string& id) {
    switch (stage) {
        case Stage::detect: run_detect_stage(store, config, id); return;
        case Stage::densify: run_densify_stage(store, config, id); return;
        case Stage::annotate: throw StateError("annotate is done by a person, not a worker");
        case Stage::extract: run_extract_stage(store, id); return;
        case Stage::privatize: run_privatize_stage(store, config.privatize, id); return;
        case Stage::evaluate: run_evaluate_stage(store, config, id); return;
    }
}

}  // namespace deid::gateway
