#include "deid/eval/adapters.hpp"

#include <cmath>
#include <random>

#include <unistd.h>

#include "deid/core/frames.hpp"
#include "deid/core/session_json.hpp"
#include "deid/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace deid::eval {

ModelProcess::ModelProcess(const std::string& command, std::string op) : channel_(command), op_(std::move(op)) {
    handshake_ = channel_.receive();
    if (!handshake_.is_object()) throw ProtocolError("adapter '" + command + "' sent a non-object handshake");
}

json ModelProcess::query(int frame_index, const fs::path& image, const std::optional<BoxGeom>& box) {
    json req{{"op", op_}, {"frame_index", frame_index}, {"image_path", image.string()}};
    if (box) req["box"] = json{{"x", box->x}, {"y", box->y}, {"w", box->w}, {"h", box->h}};
    json resp = channel_.request(req);
    if (!resp.is_object()) throw ProtocolError(op_ + " response for frame " + std::to_string(frame_index) + " is not an object");
    auto fi = resp.find("frame_index");
    if (fi == resp.end() || !fi->is_number_integer() || fi->get<int>() != frame_index)
        throw ProtocolError(op_ + " response does not echo frame_index " + std::to_string(frame_index));
    return resp;
}

std::optional<json> ProcessAnalysis::lookup(int frame_index, const fs::path& image, const BoxGeom& box) {
    json resp = model_.query(frame_index, image, box);
    if (auto err = resp.find("error"); err != resp.end() && !err->is_null()) return std::nullopt;
    return resp;
}

std::map<int, json> load_batch_file(const fs::path& file) {
    json doc;
    try {
        doc = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
        throw ProtocolError("batch file " + file.string() + " is malformed: " + e.what());
    }
    if (!doc.is_array()) throw ProtocolError("batch file " + file.string() + " must hold a JSON array");
    std::map<int, json> table;
    for (auto& entry : doc) {
        auto fi = entry.find("frame_index");
        if (!entry.is_object() || fi == entry.end() || !fi->is_number_integer())
            throw ProtocolError("batch file " + file.string() + " has an entry without frame_index");
        table[fi->get<int>()] = entry;
    }
    return table;
}

BatchAnalysis::BatchAnalysis(const fs::path& file) : table_(load_batch_file(file)) {}

std::optional<json> BatchAnalysis::lookup(int frame_index, const fs::path&, const BoxGeom&) {
    auto it = table_.find(frame_index);
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

std::optional<LandmarkSet> parse_landmarks(const json& payload, int frame, const BoxGeom& box) {
    auto it = payload.find("points");
    if (it == payload.end() || it->is_null()) return std::nullopt;
    if (!it->is_array() || it->size() != kLandmarkCount)
        throw ProtocolError("landmarks for frame " + std::to_string(frame) + " must hold exactly 68 points");
    LandmarkSet set;
    set.frame = frame;
    set.box = box;
    if (auto b = payload.find("box"); b != payload.end() && b->is_object()) set.box = box_from_json(*b);
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        const json& p = (*it)[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw ProtocolError("landmark " + std::to_string(i) + " on frame " + std::to_string(frame) + " is not [x,y]");
        set.points[i] = {p[0].get<double>(), p[1].get<double>()};
    }
    return set;
}

GazeSample parse_gaze(const json& payload, int frame, int face_min_side) {
    GazeSample s;
    s.frame = frame;
    s.face_min_side = face_min_side;
    auto ratio = [&](const char* key) -> std::optional<double> {
        auto it = payload.find(key);
        if (it == payload.end() || it->is_null()) return std::nullopt;
        if (!it->is_number()) throw ProtocolError(std::string("gaze ") + key + " on frame " + std::to_string(frame) + " is not a number");
        const double v = it->get<double>();
        if (!(v >= 0.0 && v <= 1.0)) throw ProtocolError(std::string("gaze ") + key + " outside [0,1]");
        return v;
    };
    s.horizontal_ratio = ratio("horizontal_ratio");
    s.vertical_ratio = ratio("vertical_ratio");
    if (s.horizontal_ratio.has_value() != s.vertical_ratio.has_value()) {
        s.horizontal_ratio.reset();
        s.vertical_ratio.reset();
    }
    return s;
}

std::optional<ExpressionLabel> parse_expression_label(const json& payload, int frame) {
    auto it = payload.find("label");
    if (it == payload.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ProtocolError("expression label on frame " + std::to_string(frame) + " is not a string");
    try {
        return ExpressionLabel{frame, parse_expression(it->get<std::string>())};
    } catch (const ValidationError& e) {
        throw ProtocolError(e.what());
    }
}

std::vector<double> parse_embedding(const json& payload, std::size_t expected_dim) {
    if (auto err = payload.find("error"); err != payload.end() && !err->is_null())
        throw Error("embedding failed: " + err->dump());
    auto it = payload.find("vector");
    if (it == payload.end() || !it->is_array()) throw ProtocolError("embedding response lacks a vector");
    std::vector<double> v;
    v.reserve(it->size());
    for (const auto& x : *it) {
        if (!x.is_number()) throw ProtocolError("embedding vector holds a non-number");
        v.push_back(x.get<double>());
    }
    if (expected_dim != 0 && v.size() != expected_dim)
        throw ProtocolError("embedding has dimension " + std::to_string(v.size()) + ", handshake declared " +
                            std::to_string(expected_dim));
    return v;
}

std::vector<double> DownsampleEmbedder::embed(const Image& face, int) {
    if (face.empty()) throw ValidationError("cannot embed an empty face");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(grid_) * grid_ * face.channels);
    for (int gy = 0; gy < grid_; ++gy) {
        const int y0 = gy * face.height / grid_;
        const int y1 = std::max(y0 + 1, (gy + 1) * face.height / grid_);
        for (int gx = 0; gx < grid_; ++gx) {
            const int x0 = gx * face.width / grid_;
            const int x1 = std::max(x0 + 1, (gx + 1) * face.width / grid_);
            for (int c = 0; c < face.channels; ++c) {
                double sum = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) sum += face.at(std::min(x, face.width - 1), std::min(y, face.height - 1), c);
                out.push_back(sum / (255.0 * (x1 - x0) * (y1 - y0)));
            }
        }
    }
    return out;
}

ProcessEmbedder::ProcessEmbedder(const std::string& command, std::string name)
    : model_(command, "embed"), name_(std::move(name)) {
    auto d = model_.handshake().find("dim");
    if (d == model_.handshake().end() || !d->is_number_integer() || d->get<long>() < 1)
        throw ProtocolError("embedder '" + command + "' handshake lacks a positive dim");
    dim_ = d->get<std::size_t>();
    if (auto m = model_.handshake().find("metric"); m != model_.handshake().end() && m->is_string())
        metric_ = parse_metric(m->get<std::string>());
    std::random_device rd;
    scratch_ = fs::temp_directory_path() / ("deid-embed-" + std::to_string(::getpid()) + "-" + std::to_string(rd()));
    fs::create_directories(scratch_);
}

ProcessEmbedder::~ProcessEmbedder() {
    std::error_code ec;
    fs::remove_all(scratch_, ec);
}

std::vector<double> ProcessEmbedder::embed(const Image& face, int frame_index) {
    const fs::path file = scratch_ / ("face-" + std::to_string(counter_++) + ".png");
    save_png(face, file);
    json resp = model_.query(frame_index, file, BoxGeom{0, 0, face.width, face.height});
    std::error_code ec;
    fs::remove(file, ec);
    return parse_embedding(resp, dim_);
}

}  // namespace deid::eval
