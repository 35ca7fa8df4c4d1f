#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "deid/core/frames.hpp"
#include "deid/core/image.hpp"
#include "deid/error.hpp"
#include "deid/eval/session_eval.hpp"
#include "deid/eval/sweep.hpp"
#include "deid/gateway/config.hpp"
#include "deid/gateway/http_api.hpp"
#include "deid/gateway/pipeline.hpp"
#include "deid/gateway/stages.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace deid;

namespace {

gateway::ApiServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

// A CLI stage run stands in for the scheduler: if the session is waiting on
// exactly this stage, record it as done so the pipeline moves on.
void record_stage(gateway::SessionStore& store, const std::string& id, gateway::Stage stage) {
    store.update_jobs([&](gateway::SchedulerState& s) {
        for (auto it = s.jobs.rbegin(); it != s.jobs.rend(); ++it) {
            if (it->session_id != id) continue;
            if (it->stage == stage && it->status == gateway::JobStatus::queued) {
                const auto now = gateway::now_millis();
                it->status = gateway::JobStatus::done;
                it->started_at = now;
                it->finished_at = now;
            }
            return;
        }
    });
}

// Face list: either a JSON file [{"identity":..,"image":PATH,"box":{x,y,w,h}?}]
// or a directory with one subdirectory of PNG faces per identity. Without a
// box the whole image is the face.
std::vector<eval::SweepQuery> load_faces(const fs::path& source) {
    std::vector<eval::SweepQuery> out;
    auto add = [&](std::string identity, const fs::path& image, std::optional<BoxGeom> box) {
        eval::SweepQuery q;
        q.identity = std::move(identity);
        q.image_ref = image.string();
        q.frame = load_png(image);
        q.box = box.value_or(BoxGeom{0, 0, q.frame.width, q.frame.height});
        out.push_back(std::move(q));
    };
    if (fs::is_directory(source)) {
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(source))
            if (e.is_directory()) dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto& d : dirs) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(d))
                if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) add(d.filename().string(), f, std::nullopt);
        }
        if (out.empty()) throw ValidationError(source.string() + " holds no <identity>/*.png faces");
        return out;
    }
    const json doc = json::parse(read_file(source));
    if (!doc.is_array()) throw ValidationError(source.string() + " must hold a JSON array");
    for (const auto& e : doc) {
        fs::path p = e.at("image").get<std::string>();
        if (p.is_relative()) p = source.parent_path() / p;
        std::optional<BoxGeom> box;
        if (auto b = e.find("box"); b != e.end())
            box = BoxGeom{b->at("x").get<int>(), b->at("y").get<int>(), b->at("w").get<int>(), b->at("h").get<int>()};
        add(e.at("identity").get<std::string>(), p, box);
    }
    return out;
}

// Precomputed embeddings: [{"identity":..,"image_ref":..,"vector":[..],"recognizer":..}].
std::vector<eval::EmbeddingRecord> load_embeddings(const fs::path& file) {
    const json doc = json::parse(read_file(file));
    if (!doc.is_array()) throw ValidationError(file.string() + " must hold a JSON array");
    std::vector<eval::EmbeddingRecord> out;
    for (const auto& e : doc)
        out.push_back({e.at("identity").get<std::string>(), e.value("image_ref", ""),
                       e.at("vector").get<std::vector<double>>(), e.value("recognizer", "batch")});
    return out;
}

std::unique_ptr<eval::Embedder> make_embedder(const std::string& spec, const std::string& name) {
    if (spec == "downsample") return std::make_unique<eval::DownsampleEmbedder>();
    return std::make_unique<eval::ProcessEmbedder>(spec, name.empty() ? spec : name);
}

void write_output(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_file_atomic(path, text);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Video de-identification toolkit"};
    app.require_subcommand(1);
    std::string config_file, store_override;
    app.add_option("--config", config_file, "JSON config file (see docs/formats.md)")->check(CLI::ExistingFile);
    app.add_option("--store", store_override, "session store root (overrides store_root)");

    std::string frame_dir;
    double fps = 30.0;
    auto* submit = app.add_subcommand("submit", "register a directory of NNNNNN.png frames as a session");
    submit->add_option("frame_dir", frame_dir)->required();
    submit->add_option("--fps", fps);

    std::string session;
    std::string detector_cmd, batch_file;
    int stride = 0;
    auto* detect = app.add_subcommand("detect", "run sparse face detection");
    detect->add_option("session,--session", session)->required();
    detect->add_option("--detector", detector_cmd, "detector adapter command");
    detect->add_option("--batch", batch_file, "precomputed detections file");
    detect->add_option("--stride", stride);

    auto* densify = app.add_subcommand("densify", "interpolate sparse detections to every frame");
    densify->add_option("session,--session", session)->required();

    int port = -1;
    bool no_pipeline = false;
    auto* serve = app.add_subcommand("annotate-serve", "serve the annotation API and run the pipeline");
    serve->add_option("--port", port);
    serve->add_flag("--no-pipeline", no_pipeline, "serve the API only");

    std::string mode, scale, adapter, fallback, output;
    double margin = -1.0;
    auto* priv = app.add_subcommand("privatize", "render privatized frames for the final track");
    priv->add_option("session,--session", session)->required();
    priv->add_option("--mode", mode)->check(CLI::IsMember({"blur", "swap"}));
    priv->add_option("--scale", scale, "blur scale, e.g. 1/5");
    priv->add_option("--adapter", adapter, "swap adapter command");
    priv->add_option("--margin", margin);
    priv->add_option("--fallback", fallback)->check(CLI::IsMember({"blur", "passthrough", "fail"}));
    priv->add_option("--output", output, "output directory (default: the session's rendered/)");

    std::string condition = "original", rendered, lm_cmd, gaze_cmd, expr_cmd, recognizer, recognizer_name, queries,
                references, metric = "euclidean", format = "json";
    std::vector<int> ks = eval::kReportedKs;
    auto* evaluate = app.add_subcommand("evaluate", "compute an evaluation report for one condition");
    evaluate->add_option("session,--session", session, "session to evaluate (optional for recognition-only runs)");
    evaluate->add_option("--condition", condition, "original, swap or blur:<scale>");
    evaluate->add_option("--rendered", rendered, "privatized frame directory (default: the session's rendered/)");
    evaluate->add_option("--landmarks", lm_cmd, "landmark adapter command");
    evaluate->add_option("--gaze", gaze_cmd, "gaze adapter command");
    evaluate->add_option("--expression", expr_cmd, "expression adapter command");
    evaluate->add_option("--recognizer", recognizer, "embedder command, or 'downsample'");
    evaluate->add_option("--recognizer-name", recognizer_name);
    evaluate->add_option("--queries", queries, "query faces: JSON list or <identity>/*.png directory")
        ->check(CLI::ExistingPath);
    evaluate->add_option("--references", references, "reference faces, same forms as --queries")->check(CLI::ExistingPath);
    std::string query_embeddings, reference_embeddings;
    evaluate->add_option("--query-embeddings", query_embeddings, "precomputed query embeddings")->check(CLI::ExistingFile);
    evaluate->add_option("--reference-embeddings", reference_embeddings, "precomputed reference embeddings")
        ->check(CLI::ExistingFile);
    std::vector<std::string> lm_batch, gaze_batch, expr_batch;
    evaluate->add_option("--landmarks-batch", lm_batch, "landmark batch files: ORIGINAL PRIVATIZED")->expected(2);
    evaluate->add_option("--gaze-batch", gaze_batch, "gaze batch files: ORIGINAL PRIVATIZED")->expected(2);
    evaluate->add_option("--expression-batch", expr_batch, "expression batch files: ORIGINAL PRIVATIZED")->expected(2);
    int frame_stride = 0;
    evaluate->add_option("--frame-stride", frame_stride, "analyse every Nth track frame (default from config)");
    auto* metric_opt = evaluate->add_option("--metric", metric)->check(CLI::IsMember({"euclidean", "cosine"}));
    evaluate->add_option("--k", ks, "K values for rank-K accuracy");
    evaluate->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));
    evaluate->add_option("--out", output);

    std::vector<std::string> report_files;
    auto* report = app.add_subcommand("report", "combine evaluation reports");
    report->add_option("reports", report_files)->required()->check(CLI::ExistingFile);
    report->add_option("--format", format)->check(CLI::IsMember({"json", "csv", "table"}));
    report->add_option("--out", output);

    CLI11_PARSE(app, argc, argv);

    try {
        gateway::GatewayConfig config;
        if (!config_file.empty()) config = gateway::load_config(config_file);
        if (!store_override.empty()) config.store_root = store_override;

        if (*submit) {
            gateway::SessionStore store(config.store_root);
            std::cout << store.submit_session(frame_dir, fps) << "\n";
            return 0;
        }
        if (*detect) {
            if (!detector_cmd.empty()) config.detector_command = detector_cmd;
            if (!batch_file.empty()) config.detector_batch_file = batch_file;
            if (stride > 0) config.detector.stride = stride;
            config.validate();
            gateway::SessionStore store(config.store_root);
            gateway::run_detect_stage(store, config, session);
            record_stage(store, session, gateway::Stage::detect);
            const auto sparse = store.load_sparse_detections(session);
            std::cout << session << ": " << sparse.sampled_frames.size() << " frames sampled, "
                      << sparse.observation_count() << " faces, " << sparse.frame_errors.size() << " frame errors\n";
            return 0;
        }
        if (*densify) {
            gateway::SessionStore store(config.store_root);
            gateway::run_densify_stage(store, config, session);
            record_stage(store, session, gateway::Stage::densify);
            const auto snap = store.owner(session)->snapshot();
            std::cout << session << ": " << snap->detections.observation_count() << " observations after densify\n";
            return 0;
        }
        if (*serve) {
            if (port >= 0) config.server.port = port;
            gateway::SessionStore store(config.store_root);
            std::unique_ptr<gateway::PipelineRunner> runner;
            if (!no_pipeline) {
                runner = std::make_unique<gateway::PipelineRunner>(store, config);
                runner->start();
            }
            gateway::ApiServer server(store, config, runner.get());
            const int bound = server.bind(config.server.host, config.server.port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "serving " << config.store_root.string() << " on http://" << config.server.host << ":" << bound
                      << "\n";
            server.serve();
            g_server = nullptr;
            if (runner) runner->stop();
            return 0;
        }
        if (*priv) {
            if (!mode.empty()) config.privatize.mode = mode;
            if (!scale.empty()) config.privatize.scale = privatize::BlurScale::parse(scale);
            if (!adapter.empty()) config.privatize.swap_command = adapter;
            if (margin >= 0.0) config.privatize.margin = margin;
            if (!fallback.empty()) config.privatize.fallback = fallback;
            config.validate();
            gateway::SessionStore store(config.store_root);
            privatize::RenderLog log;
            if (output.empty()) {
                log = gateway::run_privatize_stage(store, config.privatize, session);
                record_stage(store, session, gateway::Stage::privatize);
            } else {
                const auto snap = store.owner(session)->snapshot();
                if (!snap->pass_complete(4)) throw StateError("session " + session + " has not completed pass 4");
                log = privatize::privatize_session(snap->manifest, snap->final_track,
                                                   gateway::privatize_options(config.privatize), output);
            }
            std::cout << "privatized " << log.count(privatize::RenderStatus::privatized) << ", fallback "
                      << log.count(privatize::RenderStatus::fallback) << ", copied "
                      << log.count(privatize::RenderStatus::copied) << ", failed "
                      << log.count(privatize::RenderStatus::failed) << "\n";
            return log.ok() ? 0 : 2;
        }
        if (*evaluate) {
            const eval::Condition cond = eval::Condition::parse(condition);
            eval::EvalReport result;
            result.condition = cond;
            if (!session.empty()) {
                gateway::SessionStore store(config.store_root);
                const auto snap = store.owner(session)->snapshot();
                const fs::path dir = rendered.empty() ? store.rendered_dir(session) : fs::path(rendered);
                std::vector<std::unique_ptr<eval::AnalysisSource>> owned;
                eval::AnalysisSuite suite;
                suite.gaze_config.min_side = config.eval.gaze_min_side;
                suite.gaze_config.session_validity_floor = config.eval.gaze_session_floor;
                suite.frame_stride = frame_stride > 0 ? frame_stride : config.eval.frame_stride;
                auto wire = [&](eval::SourcePair& pair, const std::vector<std::string>& batch, std::string cmd,
                                const std::string& fallback_cmd, const char* op) {
                    if (!batch.empty()) {
                        owned.push_back(std::make_unique<eval::BatchAnalysis>(batch[0]));
                        pair.original = owned.back().get();
                        owned.push_back(std::make_unique<eval::BatchAnalysis>(batch[1]));
                        pair.privatized = owned.back().get();
                        return;
                    }
                    if (cmd.empty()) cmd = fallback_cmd;
                    if (cmd.empty()) return;
                    owned.push_back(std::make_unique<eval::ProcessAnalysis>(cmd, op));
                    pair.original = owned.back().get();
                };
                wire(suite.landmarks, lm_batch, lm_cmd, config.eval.landmarks_command, "landmarks");
                wire(suite.gaze, gaze_batch, gaze_cmd, config.eval.gaze_command, "gaze");
                wire(suite.expression, expr_batch, expr_cmd, config.eval.expression_command, "expression");
                result = eval::evaluate_track(snap->manifest, snap->final_track, dir, cond, suite);
            }
            if (!query_embeddings.empty() || !reference_embeddings.empty()) {
                if (query_embeddings.empty() || reference_embeddings.empty())
                    throw ValidationError("--query-embeddings and --reference-embeddings go together");
                const auto qs = load_embeddings(query_embeddings);
                const auto rs = load_embeddings(reference_embeddings);
                auto rr = eval::evaluate_recognition(qs, rs, ks, eval::parse_metric(metric));
                result.recognition.push_back(eval::recognition_section(rr));
            } else if (!recognizer.empty()) {
                if (queries.empty() || references.empty())
                    throw ValidationError("--recognizer needs --queries and --references");
                auto embedder = make_embedder(recognizer, recognizer_name);
                const auto qs = load_faces(queries);
                const auto rs = load_faces(references);
                int ref_failed = 0;
                const auto refs = eval::embed_queries(rs, *embedder, &ref_failed);
                if (ref_failed > 0) throw Error(std::to_string(ref_failed) + " reference image(s) could not be embedded");
                auto m = eval::parse_metric(metric);
                if (metric_opt->count() == 0 && embedder->declared_metric()) m = *embedder->declared_metric();
                eval::RecognitionResult rr;
                if (cond.kind == eval::Condition::Kind::blur) {
                    // Blur the query boxes inside their images, as the privatizer would.
                    std::vector<eval::EmbeddingRecord> embedded;
                    int failed = 0;
                    for (std::size_t i = 0; i < qs.size(); ++i) {
                        try {
                            const Image face =
                                crop_image(privatize::blur_region(qs[i].frame, qs[i].box, {cond.scale}), qs[i].box);
                            embedded.push_back({qs[i].identity, qs[i].image_ref,
                                                embedder->embed(face, static_cast<int>(i)), embedder->name()});
                        } catch (const std::exception&) {
                            ++failed;
                        }
                    }
                    rr = eval::evaluate_recognition(embedded, refs, ks, m, failed);
                } else {
                    int failed = 0;
                    const auto embedded = eval::embed_queries(qs, *embedder, &failed);
                    rr = eval::evaluate_recognition(embedded, refs, ks, m, failed);
                }
                result.recognition.push_back(eval::recognition_section(rr));
            }
            write_output(eval::emit_report(result, format == "csv" ? eval::ReportFormat::csv : eval::ReportFormat::json),
                         output);
            return 0;
        }
        if (*report) {
            std::vector<eval::EvalReport> reports;
            for (const auto& f : report_files) reports.push_back(eval::report_from_json(json::parse(read_file(f))));
            std::string text;
            if (format == "table") {
                text = eval::render_recognition_table(reports);
            } else if (format == "csv") {
                for (std::size_t i = 0; i < reports.size(); ++i) {
                    std::string csv = eval::report_to_csv(reports[i]);
                    if (i > 0) csv.erase(0, csv.find('\n') + 1);
                    text += csv;
                }
            } else {
                nlohmann::ordered_json all = nlohmann::ordered_json::array();
                for (const auto& r : reports) all.push_back(eval::report_to_json(r));
                text = all.dump(2) + "\n";
            }
            write_output(text, output);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "deid: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
