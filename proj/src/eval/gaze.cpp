#include "deid/eval/gaze.hpp"

#include "deid/error.hpp"

namespace deid::eval {

namespace {

std::optional<double> pct(int num, int den) {
    if (den <= 0) return std::nullopt;
    return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

GazeResult finish(const GazeCounts& c, bool excluded) {
    GazeResult r;
    r.counts = c;
    r.session_excluded = excluded;
    r.pct_over_threshold = pct(c.thresholded_frames, c.total_frames);
    if (excluded) return r;
    r.pct_detected = pct(c.privatized_detected, c.thresholded_frames);
    r.original_pct_detected = pct(c.original_detected, c.thresholded_frames);
    r.accuracy = pct(c.agreeing, c.both_detected);
    return r;
}

}  // namespace

std::string GazeClass::str() const {
    static const char* h[] = {"left", "center", "right"};
    static const char* v[] = {"up", "center", "down"};
    return std::string(h[static_cast<int>(horizontal)]) + "-" + v[static_cast<int>(vertical)];
}

std::optional<GazeClass> gaze_classify(const GazeSample& sample, const GazeThresholds& t) {
    if (!sample.horizontal_ratio || !sample.vertical_ratio) return std::nullopt;
    const double h = *sample.horizontal_ratio;
    const double v = *sample.vertical_ratio;
    GazeClass c;
    c.horizontal = h <= t.low ? HorizontalGaze::right : h >= t.high ? HorizontalGaze::left : HorizontalGaze::center;
    c.vertical = v <= t.low ? VerticalGaze::down : v >= t.high ? VerticalGaze::up : VerticalGaze::center;
    return c;
}

GazeResult gaze_agreement(std::span<const GazeSample> original, std::span<const GazeSample> privatized,
                          const GazeConfig& config) {
    if (original.size() != privatized.size())
        throw ValidationError("gaze streams differ in length: " + std::to_string(original.size()) + " vs " +
                              std::to_string(privatized.size()));
    GazeCounts c;
    c.total_frames = static_cast<int>(original.size());
    for (std::size_t i = 0; i < original.size(); ++i) {
        if (original[i].frame != privatized[i].frame)
            throw ValidationError("gaze streams misaligned at position " + std::to_string(i) + " (frames " +
                                  std::to_string(original[i].frame) + " and " + std::to_string(privatized[i].frame) + ")");
        if (original[i].face_min_side < config.min_side) continue;
        ++c.thresholded_frames;
        const auto o = gaze_classify(original[i], config.thresholds);
        const auto p = gaze_classify(privatized[i], config.thresholds);
        if (o) ++c.original_detected;
        if (p) ++c.privatized_detected;
        if (p && !o) ++c.newly_detected;
        if (o && p) {
            ++c.both_detected;
            if (*o == *p) ++c.agreeing;
        }
    }
    const bool excluded = c.thresholded_frames == 0 ||
                          static_cast<double>(c.original_detected) <
                              config.session_validity_floor * static_cast<double>(c.thresholded_frames);
    return finish(c, excluded);
}

GazeResult pool_gaze(std::span<const GazeResult> sessions) {
    GazeCounts total;
    bool any = false;
    for (const auto& s : sessions) {
        if (s.session_excluded) continue;
        any = true;
        total.total_frames += s.counts.total_frames;
        total.thresholded_frames += s.counts.thresholded_frames;
        total.original_detected += s.counts.original_detected;
        total.privatized_detected += s.counts.privatized_detected;
        total.both_detected += s.counts.both_detected;
        total.agreeing += s.counts.agreeing;
        total.newly_detected += s.counts.newly_detected;
    }
    return finish(total, !any);
}

}  // namespace deid::eval
