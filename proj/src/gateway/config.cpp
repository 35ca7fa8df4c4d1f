#include "deid/gateway/config.hpp"

#include <set>

#include "deid/core/frames.hpp"
#include "deid/error.hpp"

using nlohmann::json;
using nlohmann::ordered_json;

namespace deid::gateway {

namespace {

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
    if (!obj.is_object()) throw ValidationError(where + " must be an object");
    std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) throw ValidationError("unknown config key '" + (where.empty() ? k : where + "." + k) + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

privatize::BlurScale scale_from(const json& v) {
    if (v.is_string()) return privatize::BlurScale::parse(v.get<std::string>());
    if (v.is_number()) return privatize::BlurScale::parse(json(v.get<double>()).dump());
    throw ValidationError("privatize.scale must be a string or number");
}

}  // namespace

void GatewayConfig::validate() const {
    if (workers < 1) throw ValidationError("workers must be >= 1");
    detector.validate();
    chains.validate();
    limits.validate();
    if (privatize.mode != "blur" && privatize.mode != "swap")
        throw ValidationError("privatize.mode must be blur or swap");
    if (privatize.fallback != "blur" && privatize.fallback != "passthrough" && privatize.fallback != "fail")
        throw ValidationError("privatize.fallback must be blur, passthrough or fail");
    if (privatize.mode == "swap" && privatize.swap_command.empty())
        throw ValidationError("privatize.swap_command is required in swap mode");
    if (privatize.margin < 0.0) throw ValidationError("privatize.margin must be >= 0");
    if (privatize.parallelism < 1) throw ValidationError("privatize.parallelism must be >= 1");
    privatize::BlurSpec{privatize.scale}.validate();
    if (server.port < 0 || server.port > 65535) throw ValidationError("server.port out of range");
    if (eval.gaze_min_side < 0) throw ValidationError("eval.gaze_min_side must be >= 0");
    if (!(eval.gaze_session_floor >= 0.0 && eval.gaze_session_floor <= 1.0))
        throw ValidationError("eval.gaze_session_floor must lie in [0,1]");
    if (eval.frame_stride < 1) throw ValidationError("eval.frame_stride must be >= 1");
}

GatewayConfig config_from_json(const json& j) {
    GatewayConfig c;
    try {
        reject_unknown(j, "", {"store_root", "workers", "detector", "chains", "limits", "privatize", "server", "eval"});
        if (auto it = j.find("store_root"); it != j.end()) c.store_root = it->get<std::string>();
        read(j, "workers", c.workers);
        if (auto d = j.find("detector"); d != j.end()) {
            reject_unknown(*d, "detector",
                           {"command", "batch_file", "stride", "match_max_center_distance", "min_confidence", "parallelism"});
            read(*d, "command", c.detector_command);
            if (auto b = d->find("batch_file"); b != d->end()) c.detector_batch_file = b->get<std::string>();
            read(*d, "stride", c.detector.stride);
            read(*d, "match_max_center_distance", c.detector.match_max_center_distance);
            read(*d, "min_confidence", c.detector.min_confidence);
            read(*d, "parallelism", c.detector.parallelism);
        }
        if (auto ch = j.find("chains"); ch != j.end()) {
            reject_unknown(*ch, "chains", {"gap_limit", "link_max_center_distance"});
            read(*ch, "gap_limit", c.chains.gap_limit);
            read(*ch, "link_max_center_distance", c.chains.link_max_center_distance);
        }
        if (auto l = j.find("limits"); l != j.end()) {
            reject_unknown(*l, "limits", {"detect", "densify", "annotate", "extract", "privatize", "evaluate"});
            for (auto s : kStages) read(*l, std::string(to_string(s)).c_str(), c.limits[s]);
        }
        if (auto p = j.find("privatize"); p != j.end()) {
            reject_unknown(*p, "privatize", {"mode", "scale", "swap_command", "margin", "fallback", "parallelism", "blur_others"});
            read(*p, "mode", c.privatize.mode);
            if (auto s = p->find("scale"); s != p->end()) c.privatize.scale = scale_from(*s);
            read(*p, "swap_command", c.privatize.swap_command);
            read(*p, "margin", c.privatize.margin);
            read(*p, "fallback", c.privatize.fallback);
            read(*p, "parallelism", c.privatize.parallelism);
            read(*p, "blur_others", c.privatize.blur_others);
        }
        if (auto s = j.find("server"); s != j.end()) {
            reject_unknown(*s, "server", {"host", "port"});
            read(*s, "host", c.server.host);
            read(*s, "port", c.server.port);
        }
        if (auto e = j.find("eval"); e != j.end()) {
            reject_unknown(*e, "eval",
                           {"landmarks_command", "gaze_command", "expression_command", "gaze_min_side", "gaze_session_floor", "frame_stride"});
            read(*e, "landmarks_command", c.eval.landmarks_command);
            read(*e, "gaze_command", c.eval.gaze_command);
            read(*e, "expression_command", c.eval.expression_command);
            read(*e, "gaze_min_side", c.eval.gaze_min_side);
            read(*e, "gaze_session_floor", c.eval.gaze_session_floor);
            read(*e, "frame_stride", c.eval.frame_stride);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

ordered_json config_to_json(const GatewayConfig& c) {
    ordered_json j;
    j["store_root"] = c.store_root.string();
    j["workers"] = c.workers;
    j["detector"] = {{"command", c.detector_command},
                     {"batch_file", c.detector_batch_file.string()},
                     {"stride", c.detector.stride},
                     {"match_max_center_distance", c.detector.match_max_center_distance},
                     {"min_confidence", c.detector.min_confidence},
                     {"parallelism", c.detector.parallelism}};
    j["chains"] = {{"gap_limit", c.chains.gap_limit}, {"link_max_center_distance", c.chains.link_max_center_distance}};
    ordered_json limits;
    for (auto s : kStages) limits[std::string(to_string(s))] = c.limits[s];
    j["limits"] = limits;
    j["privatize"] = {{"mode", c.privatize.mode},         {"scale", c.privatize.scale.str()},
                      {"swap_command", c.privatize.swap_command}, {"margin", c.privatize.margin},
                      {"fallback", c.privatize.fallback}, {"parallelism", c.privatize.parallelism},
                      {"blur_others", c.privatize.blur_others}};
    j["server"] = {{"host", c.server.host}, {"port", c.server.port}};
    j["eval"] = {{"landmarks_command", c.eval.landmarks_command},
                 {"gaze_command", c.eval.gaze_command},
                 {"expression_command", c.eval.expression_command},
                 {"gaze_min_side", c.eval.gaze_min_side},
                 {"gaze_session_floor", c.eval.gaze_session_floor},
                 {"frame_stride", c.eval.frame_stride}};
    return j;
}

GatewayConfig load_config(const std::filesystem::path& file) {
    json j;
    try {
        j = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
        throw ParseError("config " + file.string() + ": " + e.what(), e.byte > 0 ? e.byte - 1 : 0);
    }
    return config_from_json(j);
}

}  // namespace deid::gateway
