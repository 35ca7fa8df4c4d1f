#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "deid/adapter/process.hpp"
#include "deid/core/types.hpp"

namespace deid::detect {

struct DetectorConfig {
    int stride = 10;
    // Gate for pairing detections across sampled frames, as a fraction of the
    // mean diagonal of the two boxes.
    double match_max_center_distance = 0.5;
    double min_confidence = 0.0;
    int parallelism = 1;

    void validate() const;
};

struct DetectedBox {
    BoxGeom box;
    double confidence = 1.0;
};

struct FrameRequest {
    int frame_index = 0;
    std::filesystem::path frame_path;
};

struct FrameResult {
    int frame_index = 0;
    std::vector<DetectedBox> boxes;
    std::optional<std::string> error;  // adapter-reported per-frame failure
};

/// A face detector behind some transport. Implementations may return results
/// in any order; the frame_index of each result is authoritative.
class DetectorAdapter {
public:
    virtual ~DetectorAdapter() = default;
    virtual std::vector<FrameResult> detect(std::span<const FrameRequest> requests) = 0;
};

using DetectorFactory = std::function<std::unique_ptr<DetectorAdapter>()>;

/// JSON-lines detector running as a child process. Keeps up to `window`
/// requests in flight.
class ProcessDetector final : public DetectorAdapter {
public:
    explicit ProcessDetector(const std::string& command, std::size_t window = 8);
    std::vector<FrameResult> detect(std::span<const FrameRequest> requests) override;

private:
    adapter::JsonLineChannel channel_;
    std::size_t window_;
};

/// Serves pre-computed detections from a JSON file of the form
/// [{"frame_index":N,"boxes":[{"x":..,"y":..,"w":..,"h":..,"confidence":..}]}].
/// Frames missing from the file have no detections.
class BatchFileDetector final : public DetectorAdapter {
public:
    explicit BatchFileDetector(const std::filesystem::path& file);
    explicit BatchFileDetector(std::map<int, std::vector<DetectedBox>> table) : table_(std::move(table)) {}

    std::vector<FrameResult> detect(std::span<const FrameRequest> requests) override;

private:
    std::map<int, std::vector<DetectedBox>> table_;
};

/// Parses one detector response line payload. Throws ProtocolError naming
/// `context_frame` on any schema violation.
FrameResult parse_detector_response(const nlohmann::json& response, int context_frame);

/// Frames sent to the detector: 0, stride, 2*stride, ... below frame_count,
/// plus the final frame.
std::vector<int> sampled_frames(int frame_count, int stride);

DetectionSet run_sparse_detection(const SessionManifest& manifest, const DetectorConfig& config,
                                  DetectorAdapter& adapter);

/// Fans requests out over `config.parallelism` workers, each owning an
/// adapter created by `make_adapter`.
DetectionSet run_sparse_detection(const SessionManifest& manifest, const DetectorConfig& config,
                                  const DetectorFactory& make_adapter);

struct MatchPair {
    std::size_t earlier = 0;  // index into the earlier frame's list
    std::size_t later = 0;
    double distance = 0.0;

    bool operator==(const MatchPair&) const = default;
};

/// Greedy nearest-center pairing under the mean-diagonal distance gate.
/// Candidate pairs are taken by ascending (distance, earlier, later).
std::vector<MatchPair> match_detections(std::span<const FaceObservation> earlier,
                                        std::span<const FaceObservation> later, double gate_fraction);

/// Fills frames between consecutive sampled frames with interpolated boxes
/// for every matched pair of detections.
DetectionSet densify(const DetectionSet& sparse, const DetectorConfig& config);

/// Share of frames inside `regions` that appear in `covered_frames`. An empty
/// region list is vacuously fully covered.
double detection_rate(const std::set<int>& covered_frames, std::span<const PresenceRegion> regions);

/// Rate over every frame carrying at least one observation.
double detection_rate(const DetectionSet& detections, std::span<const PresenceRegion> regions);

}  // namespace deid::detect
