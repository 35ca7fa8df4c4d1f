#include "deid/detect/detector.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "deid/core/frames.hpp"
#include "deid/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace deid::detect {

namespace {

constexpr std::size_t kChunk = 16;

int rounded(double v) { return static_cast<int>(std::floor(v + 0.5)); }

DetectedBox parse_box(const json& b, int frame) {
    auto num = [&](const char* key) {
        auto it = b.find(key);
        if (it == b.end() || !it->is_number())
            throw ProtocolError("detector response for frame " + std::to_string(frame) + ": box field '" + key +
                                "' missing or not a number");
        const double v = it->get<double>();
        if (!std::isfinite(v))
            throw ProtocolError("detector response for frame " + std::to_string(frame) + ": non-finite " + key);
        return v;
    };
    if (!b.is_object())
        throw ProtocolError("detector response for frame " + std::to_string(frame) + ": box is not an object");
    const double w = num("w");
    const double h = num("h");
    if (w <= 0.0 || h <= 0.0)
        throw ProtocolError("detector response for frame " + std::to_string(frame) + ": non-positive box size");
    const double conf = num("confidence");
    if (conf < 0.0 || conf > 1.0)
        throw ProtocolError("detector response for frame " + std::to_string(frame) + ": confidence outside [0,1]");
    DetectedBox out;
    out.box = BoxGeom{rounded(num("x")), rounded(num("y")), std::max(1, rounded(w)), std::max(1, rounded(h))};
    out.confidence = conf;
    return out;
}

bool readable(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return static_cast<bool>(in);
}

}  // namespace

void DetectorConfig::validate() const {
    if (stride < 1) throw ValidationError("detector stride must be >= 1");
    if (!(match_max_center_distance >= 0.0)) throw ValidationError("match distance must be non-negative");
    if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) throw ValidationError("min_confidence outside [0,1]");
    if (parallelism < 1) throw ValidationError("parallelism must be >= 1");
}

FrameResult parse_detector_response(const json& response, int context_frame) {
    if (!response.is_object())
        throw ProtocolError("detector response for frame " + std::to_string(context_frame) + " is not an object");
    auto fi = response.find("frame_index");
    if (fi == response.end() || !fi->is_number_integer())
        throw ProtocolError("detector response for frame " + std::to_string(context_frame) + " lacks frame_index");
    FrameResult out;
    out.frame_index = fi->get<int>();
    if (auto err = response.find("error"); err != response.end() && !err->is_null()) {
        out.error = err->is_string() ? err->get<std::string>() : err->dump();
        return out;
    }
    auto boxes = response.find("boxes");
    if (boxes == response.end() || !boxes->is_array())
        throw ProtocolError("detector response for frame " + std::to_string(out.frame_index) + " lacks a boxes array");
    for (const auto& b : *boxes) out.boxes.push_back(parse_box(b, out.frame_index));
    return out;
}

ProcessDetector::ProcessDetector(const std::string& command, std::size_t window)
    : channel_(command), window_(std::max<std::size_t>(window, 1)) {}

std::vector<FrameResult> ProcessDetector::detect(std::span<const FrameRequest> requests) {
    std::vector<FrameResult> results;
    std::set<int> pending;
    std::size_t next = 0;
    while (next < requests.size() || !pending.empty()) {
        while (next < requests.size() && pending.size() < window_) {
            const auto& r = requests[next++];
            channel_.send(json{{"op", "detect"}, {"frame_index", r.frame_index}, {"frame_path", r.frame_path.string()}});
            pending.insert(r.frame_index);
        }
        const int context = *pending.begin();
        json response;
        try {
            response = channel_.receive();
        } catch (const ProtocolError& e) {
            throw ProtocolError("detector failed while frame " + std::to_string(context) + " was pending: " + e.what());
        }
        FrameResult result = parse_detector_response(response, context);
        if (pending.erase(result.frame_index) == 0)
            throw ProtocolError("detector answered unrequested frame " + std::to_string(result.frame_index) +
                                " while frame " + std::to_string(context) + " was pending");
        results.push_back(std::move(result));
    }
    return results;
}

BatchFileDetector::BatchFileDetector(const fs::path& file) {
    json doc;
    try {
        doc = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
        throw ProtocolError("detections file " + file.string() + " is malformed: " + e.what());
    }
    if (!doc.is_array()) throw ProtocolError("detections file " + file.string() + " must hold a JSON array");
    for (const auto& entry : doc) {
        FrameResult r = parse_detector_response(entry, -1);
        auto& slot = table_[r.frame_index];
        slot.insert(slot.end(), r.boxes.begin(), r.boxes.end());
    }
}

std::vector<FrameResult> BatchFileDetector::detect(std::span<const FrameRequest> requests) {
    std::vector<FrameResult> out;
    out.reserve(requests.size());
    for (const auto& r : requests) {
        FrameResult res;
        res.frame_index = r.frame_index;
        if (auto it = table_.find(r.frame_index); it != table_.end()) res.boxes = it->second;
        out.push_back(std::move(res));
    }
    return out;
}

std::vector<int> sampled_frames(int frame_count, int stride) {
    if (stride < 1) throw ValidationError("stride must be >= 1");
    std::vector<int> frames;
    for (int f = 0; f < frame_count; f += stride) frames.push_back(f);
    if (frame_count > 0 && frames.back() != frame_count - 1) frames.push_back(frame_count - 1);
    return frames;
}

namespace {

// Sends one chunk through an adapter and folds the answers into `out`.
void detect_chunk(DetectorAdapter& adapter, std::span<const FrameRequest> chunk, const SessionManifest& manifest,
                  const DetectorConfig& config, std::map<int, std::vector<FaceObservation>>& frames,
                  std::map<int, std::string>& errors) {
    std::vector<FrameResult> results = adapter.detect(chunk);
    std::set<int> expected;
    for (const auto& r : chunk) expected.insert(r.frame_index);
    for (auto& res : results) {
        if (expected.erase(res.frame_index) == 0)
            throw ProtocolError("detector returned unexpected or duplicate frame " + std::to_string(res.frame_index));
        if (res.error) {
            errors[res.frame_index] = *res.error;
            continue;
        }
        std::vector<FaceObservation> kept;
        for (const auto& b : res.boxes) {
            if (b.confidence < config.min_confidence) continue;
            auto clamped = clamp_to_frame(b.box, manifest.frame_width, manifest.frame_height);
            if (!clamped) continue;
            kept.push_back(FaceObservation{res.frame_index, *clamped, b.confidence, Provenance::detected, std::nullopt});
        }
        if (!kept.empty()) frames[res.frame_index] = std::move(kept);
    }
    if (!expected.empty())
        throw ProtocolError("detector gave no answer for frame " + std::to_string(*expected.begin()));
}

struct Plan {
    DetectionSet set;
    std::vector<FrameRequest> requests;
};

Plan plan_requests(const SessionManifest& manifest, const DetectorConfig& config) {
    config.validate();
    if (manifest.frame_count < 1) throw ValidationError("frame_count must be >= 1");
    Plan plan;
    plan.set.session_id = manifest.session_id;
    plan.set.sampled_frames = sampled_frames(manifest.frame_count, config.stride);
    for (int f : plan.set.sampled_frames) {
        fs::path p = frame_path(manifest, f);
        if (!readable(p)) {
            plan.set.frame_errors[f] = "unreadable frame file " + p.string();
            continue;
        }
        plan.requests.push_back({f, std::move(p)});
    }
    return plan;
}

}  // namespace

DetectionSet run_sparse_detection(const SessionManifest& manifest, const DetectorConfig& config,
                                  DetectorAdapter& adapter) {
    Plan plan = plan_requests(manifest, config);
    std::span<const FrameRequest> all(plan.requests);
    for (std::size_t i = 0; i < all.size(); i += kChunk)
        detect_chunk(adapter, all.subspan(i, std::min(kChunk, all.size() - i)), manifest, config, plan.set.frames,
                     plan.set.frame_errors);
    return std::move(plan.set);
}

DetectionSet run_sparse_detection(const SessionManifest& manifest, const DetectorConfig& config,
                                  const DetectorFactory& make_adapter) {
    Plan plan = plan_requests(manifest, config);
    std::span<const FrameRequest> all(plan.requests);
    const std::size_t chunks = (all.size() + kChunk - 1) / kChunk;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.parallelism), std::max<std::size_t>(chunks, 1));

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr failure;
    std::atomic<bool> stop{false};

    auto work = [&] {
        try {
            auto adapter = make_adapter();
            for (;;) {
                if (stop) return;
                const std::size_t c = next++;
                if (c >= chunks) return;
                std::map<int, std::vector<FaceObservation>> frames;
                std::map<int, std::string> errors;
                detect_chunk(*adapter, all.subspan(c * kChunk, std::min(kChunk, all.size() - c * kChunk)), manifest,
                             config, frames, errors);
                std::lock_guard lock(mu);
                plan.set.frames.merge(frames);
                plan.set.frame_errors.merge(errors);
            }
        } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
            stop = true;
        }
    };

    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return std::move(plan.set);
}

std::vector<MatchPair> match_detections(std::span<const FaceObservation> earlier,
                                        std::span<const FaceObservation> later, double gate_fraction) {
    std::vector<MatchPair> candidates;
    for (std::size_t i = 0; i < earlier.size(); ++i) {
        for (std::size_t j = 0; j < later.size(); ++j) {
            const double d = center_distance(earlier[i].box, later[j].box);
            const double gate = gate_fraction * 0.5 * (box_diagonal(earlier[i].box) + box_diagonal(later[j].box));
            if (d <= gate) candidates.push_back({i, j, d});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const MatchPair& a, const MatchPair& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        if (a.earlier != b.earlier) return a.earlier < b.earlier;
        return a.later < b.later;
    });
    std::vector<bool> used_e(earlier.size(), false);
    std::vector<bool> used_l(later.size(), false);
    std::vector<MatchPair> out;
    for (const auto& c : candidates) {
        if (used_e[c.earlier] || used_l[c.later]) continue;
        used_e[c.earlier] = used_l[c.later] = true;
        out.push_back(c);
    }
    std::sort(out.begin(), out.end(), [](const MatchPair& a, const MatchPair& b) { return a.earlier < b.earlier; });
    return out;
}

DetectionSet densify(const DetectionSet& sparse, const DetectorConfig& config) {
    config.validate();
    for (const auto& [frame, list] : sparse.frames)
        for (const auto& o : list)
            if (o.provenance != Provenance::detected)
                throw ValidationError("densify expects detected observations only (frame " + std::to_string(frame) + ")");

    DetectionSet out = sparse;
    static const std::vector<FaceObservation> kNone;
    auto at = [&](int f) -> const std::vector<FaceObservation>& {
        auto it = sparse.frames.find(f);
        return it == sparse.frames.end() ? kNone : it->second;
    };
    for (std::size_t k = 0; k + 1 < sparse.sampled_frames.size(); ++k) {
        const int s0 = sparse.sampled_frames[k];
        const int s1 = sparse.sampled_frames[k + 1];
        if (s1 - s0 < 2) continue;
        const auto& a = at(s0);
        const auto& b = at(s1);
        for (const auto& m : match_detections(a, b, config.match_max_center_distance)) {
            const FaceObservation& lo = a[m.earlier];
            const FaceObservation& hi = b[m.later];
            for (int f = s0 + 1; f < s1; ++f)
                out.frames[f].push_back(FaceObservation{f, lerp_box(lo, hi, f), std::min(lo.confidence, hi.confidence),
                                                        Provenance::interpolated, std::nullopt});
        }
    }
    return out;
}

double detection_rate(const std::set<int>& covered_frames, std::span<const PresenceRegion> regions) {
    long long total = 0;
    long long covered = 0;
    for (const auto& r : regions) {
        total += r.length();
        auto it = covered_frames.lower_bound(r.start_frame);
        for (; it != covered_frames.end() && *it <= r.end_frame; ++it) ++covered;
    }
    if (total == 0) return 1.0;
    return static_cast<double>(covered) / static_cast<double>(total);
}

double detection_rate(const DetectionSet& detections, std::span<const PresenceRegion> regions) {
    std::set<int> covered;
    for (const auto& [frame, list] : detections.frames)
        if (!list.empty()) covered.insert(frame);
    return detection_rate(covered, regions);
}

}  // namespace deid::detect
