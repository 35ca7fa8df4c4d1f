#include "deid/core/session_json.hpp"

#include <cmath>

#include "deid/error.hpp"

namespace deid {

namespace {

constexpr const char* kSessionFormat = "deid.session/1";
constexpr const char* kDetectionsFormat = "deid.detections/1";

using json = nlohmann::json;

const json& field(const json& j, const char* name) {
    if (!j.is_object()) throw ValidationError(std::string("expected object holding '") + name + "'");
    auto it = j.find(name);
    if (it == j.end()) throw ValidationError(std::string("missing field '") + name + "'");
    return *it;
}

int int_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number_integer()) throw ValidationError(std::string("field '") + name + "' must be an integer");
    return v.get<int>();
}

double number_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number()) throw ValidationError(std::string("field '") + name + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(std::string("field '") + name + "' must be finite");
    return d;
}

std::string string_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_string()) throw ValidationError(std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
}

const json& array_field(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_array()) throw ValidationError(std::string("field '") + name + "' must be an array");
    return v;
}

template <typename F>
auto parse_document(std::string_view bytes, F&& build) {
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte == 0 ? 0 : e.byte - 1);
    }
    try {
        return build(doc);
    } catch (const ValidationError& e) {
        throw ParseError(std::string("invalid document: ") + e.what(), bytes.size());
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid document: ") + e.what(), bytes.size());
    }
}

}  // namespace

ordered_json to_json(const BoxGeom& box) {
    return ordered_json{{"x", box.x}, {"y", box.y}, {"w", box.w}, {"h", box.h}};
}

ordered_json to_json(const FaceObservation& obs) {
    ordered_json j;
    j["frame"] = obs.frame;
    j["x"] = obs.box.x;
    j["y"] = obs.box.y;
    j["w"] = obs.box.w;
    j["h"] = obs.box.h;
    j["confidence"] = obs.confidence;
    j["provenance"] = to_string(obs.provenance);
    j["chain_id"] = obs.chain_id ? ordered_json(*obs.chain_id) : ordered_json(nullptr);
    return j;
}

ordered_json to_json(const SessionManifest& m) {
    return ordered_json{{"session_id", m.session_id},   {"frame_count", m.frame_count},
                        {"fps", m.fps},                 {"frame_width", m.frame_width},
                        {"frame_height", m.frame_height}, {"frame_source", m.frame_source}};
}

ordered_json to_json(const DetectionSet& d) {
    ordered_json j;
    j["format"] = kDetectionsFormat;
    j["session_id"] = d.session_id;
    j["sampled_frames"] = d.sampled_frames;
    ordered_json obs = ordered_json::array();
    for (const auto& [frame, list] : d.frames)
        for (const auto& o : list) obs.push_back(to_json(o));
    j["observations"] = std::move(obs);
    ordered_json errors = ordered_json::array();
    for (const auto& [frame, msg] : d.frame_errors)
        errors.push_back(ordered_json{{"frame", frame}, {"message", msg}});
    j["frame_errors"] = std::move(errors);
    return j;
}

ordered_json to_json(const FaceChain& c) {
    ordered_json j;
    j["id"] = c.id;
    j["subject_tag"] = to_string(c.subject_tag);
    ordered_json obs = ordered_json::array();
    for (const auto& o : c.observations) obs.push_back(to_json(o));
    j["observations"] = std::move(obs);
    return j;
}

BoxGeom box_from_json(const json& j) {
    BoxGeom b{int_field(j, "x"), int_field(j, "y"), int_field(j, "w"), int_field(j, "h")};
    validate_box(b);
    return b;
}

FaceObservation observation_from_json(const json& j) {
    FaceObservation o;
    o.frame = int_field(j, "frame");
    if (o.frame < 0) throw ValidationError("negative frame index");
    o.box = box_from_json(j);
    o.confidence = number_field(j, "confidence");
    if (o.confidence < 0.0 || o.confidence > 1.0) throw ValidationError("confidence outside [0,1]");
    o.provenance = parse_provenance(string_field(j, "provenance"));
    if (auto it = j.find("chain_id"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw ValidationError("chain_id must be a string or null");
        o.chain_id = it->get<std::string>();
    }
    return o;
}

SessionManifest manifest_from_json(const json& j) {
    SessionManifest m;
    m.session_id = string_field(j, "session_id");
    m.frame_count = int_field(j, "frame_count");
    m.fps = number_field(j, "fps");
    m.frame_width = int_field(j, "frame_width");
    m.frame_height = int_field(j, "frame_height");
    m.frame_source = string_field(j, "frame_source");
    if (m.frame_count < 1) throw ValidationError("frame_count must be >= 1");
    if (m.frame_width < 1 || m.frame_height < 1) throw ValidationError("frame size must be positive");
    return m;
}

DetectionSet detections_from_json(const json& j) {
    DetectionSet d;
    d.session_id = string_field(j, "session_id");
    for (const auto& f : array_field(j, "sampled_frames")) {
        if (!f.is_number_integer()) throw ValidationError("sampled_frames must hold integers");
        d.sampled_frames.push_back(f.get<int>());
    }
    for (const auto& o : array_field(j, "observations")) {
        FaceObservation obs = observation_from_json(o);
        d.frames[obs.frame].push_back(std::move(obs));
    }
    if (auto it = j.find("frame_errors"); it != j.end()) {
        if (!it->is_array()) throw ValidationError("frame_errors must be an array");
        for (const auto& e : *it) d.frame_errors[int_field(e, "frame")] = string_field(e, "message");
    }
    return d;
}

ordered_json session_to_json(const AnnotationSession& s) {
    ordered_json j;
    j["format"] = kSessionFormat;
    j["manifest"] = to_json(s.manifest);
    j["revision"] = s.revision;
    j["passes"] = ordered_json{{"pass1", s.pass_state[0]},
                               {"pass2", s.pass_state[1]},
                               {"pass3", s.pass_state[2]},
                               {"pass4", s.pass_state[3]}};
    ordered_json regions = ordered_json::array();
    for (const auto& r : s.regions)
        regions.push_back(ordered_json{{"start_frame", r.start_frame}, {"end_frame", r.end_frame}});
    j["regions"] = std::move(regions);
    ordered_json keyframes = ordered_json::array();
    for (const auto& k : s.keyframes)
        keyframes.push_back(ordered_json{{"frame", k.frame}, {"kind", to_string(k.kind)}});
    j["keyframes"] = std::move(keyframes);
    ordered_json chains = ordered_json::array();
    for (const auto& c : s.chains) chains.push_back(to_json(c));
    j["chains"] = std::move(chains);
    ordered_json manual = ordered_json::array();
    for (const auto& o : s.manual_boxes) manual.push_back(to_json(o));
    j["manual_boxes"] = std::move(manual);
    ordered_json track = ordered_json::array();
    for (const auto& o : s.final_track) track.push_back(to_json(o));
    j["final_track"] = std::move(track);
    j["detections"] = to_json(s.detections);
    return j;
}

AnnotationSession session_from_json(const json& j) {
    if (string_field(j, "format") != kSessionFormat) throw ValidationError("unsupported session format");
    AnnotationSession s;
    s.manifest = manifest_from_json(field(j, "manifest"));
    const json& rev = field(j, "revision");
    if (!rev.is_number_integer()) throw ValidationError("revision must be an integer");
    s.revision = rev.get<long>();
    const json& passes = field(j, "passes");
    for (int k = 0; k < 4; ++k) {
        const std::string name = "pass" + std::to_string(k + 1);
        const json& v = field(passes, name.c_str());
        if (!v.is_boolean()) throw ValidationError(name + " must be a boolean");
        s.pass_state[static_cast<std::size_t>(k)] = v.get<bool>();
    }
    for (const auto& r : array_field(j, "regions")) {
        PresenceRegion region{int_field(r, "start_frame"), int_field(r, "end_frame")};
        if (region.start_frame > region.end_frame) throw ValidationError("region start after end");
        if (!s.regions.empty() && s.regions.back().end_frame >= region.start_frame)
            throw ValidationError("regions must be sorted and disjoint");
        s.regions.push_back(region);
    }
    for (const auto& k : array_field(j, "keyframes"))
        s.keyframes.push_back({int_field(k, "frame"), parse_keyframe_kind(string_field(k, "kind"))});
    for (const auto& c : array_field(j, "chains")) {
        FaceChain chain;
        chain.id = string_field(c, "id");
        chain.subject_tag = parse_subject_tag(string_field(c, "subject_tag"));
        for (const auto& o : array_field(c, "observations"))
            chain.observations.push_back(observation_from_json(o));
        if (chain.observations.empty()) throw ValidationError("chain " + chain.id + " has no observations");
        s.chains.push_back(std::move(chain));
    }
    for (const auto& o : array_field(j, "manual_boxes")) s.manual_boxes.push_back(observation_from_json(o));
    if (auto it = j.find("final_track"); it != j.end()) {
        if (!it->is_array()) throw ValidationError("final_track must be an array");
        for (const auto& o : *it) s.final_track.push_back(observation_from_json(o));
    }
    s.detections = detections_from_json(field(j, "detections"));
    return s;
}

std::string serialize_session(const AnnotationSession& session) {
    return session_to_json(session).dump(1);
}

AnnotationSession deserialize_session(std::string_view bytes) {
    return parse_document(bytes, [](const json& doc) { return session_from_json(doc); });
}

std::string serialize_detections(const DetectionSet& detections) {
    return to_json(detections).dump(1);
}

DetectionSet deserialize_detections(std::string_view bytes) {
    return parse_document(bytes, [](const json& doc) {
        if (auto it = doc.find("format"); it != doc.end() && *it != kDetectionsFormat)
            throw ValidationError("unsupported detections format");
        return detections_from_json(doc);
    });
}

}  // namespace deid
