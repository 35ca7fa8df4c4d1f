#include "deid/gateway/http_api.hpp"

#include <httplib.h>

#include "deid/core/frames.hpp"
#include "deid/core/session_json.hpp"
#include "deid/error.hpp"
#include "deid/gateway/pipeline.hpp"

using nlohmann::json;
using nlohmann::ordered_json;

namespace deid::gateway {

ordered_json coverage_to_json(const annotate::CoverageReport& r) {
    ordered_json j;
    j["rate_before"] = r.rate_before;
    j["rate_after"] = r.rate_after;
    j["raw_detection_rate"] = r.raw_detection_rate;
    j["frames_in_regions"] = r.frames_in_regions;
    j["per_region"] = ordered_json::array();
    for (const auto& pr : r.per_region)
        j["per_region"].push_back({{"start_frame", pr.region.start_frame},
                                   {"end_frame", pr.region.end_frame},
                                   {"covered_before", pr.covered_before},
                                   {"covered_after", pr.covered_after}});
    return j;
}

ordered_json session_view(const AnnotationSession& session) {
    ordered_json j = session_to_json(session);
    j.erase("detections");
    j["detections"] = {{"sampled_frames", session.detections.sampled_frames.size()},
                       {"observations", session.detections.observation_count()},
                       {"frame_errors", session.detections.frame_errors.size()}};
    return j;
}

namespace {

const char* kJson = "application/json";
const std::string kId = "([A-Za-z0-9_-]+)";

void reply(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void reply_error(httplib::Response& res, int status, const std::string& kind, const std::string& message,
                 ordered_json extra = ordered_json::object()) {
    extra["error"] = kind;
    extra["message"] = message;
    reply(res, status, extra);
}

json parse_body(const httplib::Request& req) {
    try {
        json j = json::parse(req.body);
        if (!j.is_object()) throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ParseError("request body is not JSON", e.byte > 0 ? e.byte - 1 : 0);
    }
}

long required_revision(const json& body) {
    auto it = body.find("revision");
    if (it == body.end() || !it->is_number_integer()) throw ValidationError("mutating requests require an integer \"revision\"");
    return it->get<long>();
}

int int_field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_number_integer()) throw ValidationError(std::string("missing integer field \"") + key + "\"");
    return it->get<int>();
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const ConflictError& e) {
            reply_error(res, 409, "conflict", e.what(), {{"expected", e.expected()}, {"actual", e.actual()}});
        } catch (const NotFoundError& e) {
            reply_error(res, 404, "not_found", e.what());
        } catch (const ParseError& e) {
            reply_error(res, 400, "parse", e.what(), {{"byte_offset", e.byte_offset()}});
        } catch (const ValidationError& e) {
            reply_error(res, 400, "validation", e.what());
        } catch (const annotate::UnresolvableRegionError& e) {
            ordered_json regions = ordered_json::array();
            for (const auto& r : e.regions()) regions.push_back({{"start_frame", r.start_frame}, {"end_frame", r.end_frame}});
            reply_error(res, 422, "unresolvable_region", e.what(), {{"regions", regions}});
        } catch (const StateError& e) {
            reply_error(res, 422, "state", e.what());
        } catch (const DomainError& e) {
            reply_error(res, 422, "domain", e.what());
        } catch (const json::exception& e) {
            reply_error(res, 400, "validation", e.what());
        } catch (const std::exception& e) {
            reply_error(res, 500, "internal", e.what());
        }
    };
}

}  // namespace

struct ApiServer::Impl {
    SessionStore& store;
    GatewayConfig config;
    PipelineRunner* runner;
    httplib::Server server;

    Impl(SessionStore& s, GatewayConfig c, PipelineRunner* r) : store(s), config(std::move(c)), runner(r) { routes(); }

    std::shared_ptr<annotate::SessionOwner> owner(const httplib::Request& req) {
        return store.owner(req.matches[1].str());
    }

    void notify() {
        if (runner) runner->poke();
    }

    void routes() {
        server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
            ordered_json list = ordered_json::array();
            for (const auto& id : store.session_ids()) {
                auto snap = store.owner(id)->snapshot();
                ordered_json passes = ordered_json::array();
                for (bool p : snap->pass_state) passes.push_back(p);
                list.push_back({{"session_id", id},
                                {"revision", snap->revision},
                                {"frame_count", snap->manifest.frame_count},
                                {"passes", passes}});
            }
            reply(res, 200, {{"sessions", list}});
        }));

        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            json body = parse_body(req);
            auto dir = body.find("frame_dir");
            if (dir == body.end() || !dir->is_string()) throw ValidationError("missing string field \"frame_dir\"");
            const double fps = body.value("fps", 30.0);
            const std::string id = store.submit_session(dir->get<std::string>(), fps);
            notify();
            reply(res, 201, {{"session_id", id}, {"revision", 0}});
        }));

        server.Get("/sessions/" + kId, guarded([this](const httplib::Request& req, httplib::Response& res) {
            reply(res, 200, session_view(*owner(req)->snapshot()));
        }));

        server.Get("/sessions/" + kId + R"(/frames/(-?\d+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       auto snap = owner(req)->snapshot();
                       const int n = std::stoi(req.matches[2].str());
                       if (n < 0 || n >= snap->manifest.frame_count)
                           throw NotFoundError("frame " + std::to_string(n) + " is outside the session");
                       res.status = 200;
                       res.set_content(read_file(frame_path(snap->manifest, n)), "image/png");
                   }));

        server.Get("/sessions/" + kId + "/keyframes", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto snap = owner(req)->snapshot();
            ordered_json marks = ordered_json::array();
            for (const auto& k : snap->keyframes) marks.push_back({{"frame", k.frame}, {"kind", to_string(k.kind)}});
            reply(res, 200, {{"revision", snap->revision}, {"keyframes", marks}});
        }));

        server.Post("/sessions/" + kId + "/keyframes", guarded([this](const httplib::Request& req, httplib::Response& res) {
            json body = parse_body(req);
            const long rev = required_revision(body);
            const int frame = int_field(body, "frame");
            const bool remove = body.value("remove", false);
            annotate::PresenceKind kind = annotate::PresenceKind::subject_enter;
            if (!remove) {
                const KeyFrameKind k = parse_keyframe_kind(body.at("kind").get<std::string>());
                if (k == KeyFrameKind::subject_leave) kind = annotate::PresenceKind::subject_leave;
                else if (k != KeyFrameKind::subject_enter)
                    throw ValidationError("only subject_enter and subject_leave marks can be posted");
            }
            auto o = owner(req);
            o->apply(rev, [&](AnnotationSession& s) {
                if (remove) annotate::unmark_presence(s, frame);
                else annotate::mark_presence(s, kind, frame);
            });
            auto snap = o->snapshot();
            ordered_json marks = ordered_json::array();
            for (const auto& k : snap->keyframes) marks.push_back({{"frame", k.frame}, {"kind", to_string(k.kind)}});
            reply(res, 200, {{"revision", snap->revision}, {"keyframes", marks}});
        }));

        server.Get("/sessions/" + kId + "/chains", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto snap = owner(req)->snapshot();
            ordered_json chains = ordered_json::array();
            for (const auto& c : snap->chains) chains.push_back(to_json(c));
            reply(res, 200, {{"revision", snap->revision}, {"chains", chains}});
        }));

        server.Post("/sessions/" + kId + "/chains/([A-Za-z0-9_-]+)/tag",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        json body = parse_body(req);
                        const long rev = required_revision(body);
                        const SubjectTag tag = parse_subject_tag(body.at("tag").get<std::string>());
                        const std::string cid = req.matches[2].str();
                        auto o = owner(req);
                        o->apply(rev, [&](AnnotationSession& s) { annotate::tag_chain(s, cid, tag); });
                        reply(res, 200, {{"revision", o->revision()}, {"chain_id", cid}, {"tag", to_string(tag)}});
                    }));

        server.Post("/sessions/" + kId + "/boxes", guarded([this](const httplib::Request& req, httplib::Response& res) {
            json body = parse_body(req);
            const long rev = required_revision(body);
            const int frame = int_field(body, "frame");
            const bool remove = body.value("remove", false);
            BoxGeom box;
            if (!remove) box = {int_field(body, "x"), int_field(body, "y"), int_field(body, "w"), int_field(body, "h")};
            auto o = owner(req);
            o->apply(rev, [&](AnnotationSession& s) {
                if (remove) annotate::remove_manual_box(s, frame);
                else annotate::add_manual_box(s, frame, box);
            });
            auto snap = o->snapshot();
            ordered_json boxes = ordered_json::array();
            for (const auto& b : snap->manual_boxes) boxes.push_back(to_json(b));
            reply(res, 200, {{"revision", snap->revision}, {"manual_boxes", boxes}});
        }));

        server.Post("/sessions/" + kId + R"(/passes/(\d+)/complete)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        json body = parse_body(req);
                        const long rev = required_revision(body);
                        const int pass = std::stoi(req.matches[2].str());
                        if (pass < 1 || pass > 4) throw NotFoundError("no pass " + std::to_string(pass));
                        auto o = owner(req);
                        o->apply(rev, [&](AnnotationSession& s) {
                            annotate::complete_pass(s, pass);
                            // Pass 2 works on chains, so they are built as soon as regions exist.
                            if (pass == 1) annotate::build_chains(s, config.chains);
                        });
                        auto snap = o->snapshot();
                        ordered_json out = session_view(*snap);
                        if (pass == 4) out["coverage"] = coverage_to_json(annotate::coverage_report(*snap));
                        if (pass == 4) notify();
                        reply(res, 200, out);
                    }));

        server.Post("/sessions/" + kId + R"(/passes/(\d+)/reopen)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        json body = parse_body(req);
                        const long rev = required_revision(body);
                        const int pass = std::stoi(req.matches[2].str());
                        if (pass < 1 || pass > 4) throw NotFoundError("no pass " + std::to_string(pass));
                        auto o = owner(req);
                        o->apply(rev, [&](AnnotationSession& s) { annotate::reopen_pass(s, pass); });
                        reply(res, 200, session_view(*o->snapshot()));
                    }));

        server.Post("/sessions/" + kId + "/passes/4/run", guarded([this](const httplib::Request& req, httplib::Response& res) {
            json body = parse_body(req);
            const long rev = required_revision(body);
            auto o = owner(req);
            auto report = o->apply(rev, [&](AnnotationSession& s) { return annotate::run_interpolation_pass(s); });
            notify();
            ordered_json out = coverage_to_json(report);
            out["revision"] = o->revision();
            reply(res, 200, out);
        }));

        server.Get("/sessions/" + kId + "/coverage", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto snap = owner(req)->snapshot();
            ordered_json out = coverage_to_json(annotate::coverage_report(*snap));
            out["revision"] = snap->revision;
            reply(res, 200, out);
        }));

        server.Get("/sessions/" + kId + "/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1].str();
            if (!store.contains(id)) throw NotFoundError("no session '" + id + "'");
            ordered_json jobs = ordered_json::array();
            for (const auto& job : store.jobs().jobs)
                if (job.session_id == id) jobs.push_back(to_json(job));
            reply(res, 200, {{"session_id", id}, {"jobs", jobs}});
        }));
    }
};

ApiServer::ApiServer(SessionStore& store, GatewayConfig config, PipelineRunner* runner)
    : impl_(std::make_unique<Impl>(store, std::move(config), runner)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) throw IoError("cannot bind " + host);
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ApiServer::serve() { impl_->server.listen_after_bind(); }

void ApiServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace deid::gateway
