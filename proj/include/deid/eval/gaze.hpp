#pragma once

#include <optional>
#include <span>
#include <string>

namespace deid::eval {

enum class HorizontalGaze { left, center, right };
enum class VerticalGaze { up, center, down };

struct GazeClass {
    HorizontalGaze horizontal = HorizontalGaze::center;
    VerticalGaze vertical = VerticalGaze::center;

    bool operator==(const GazeClass&) const = default;
    std::string str() const;
};

struct GazeThresholds {
    double low = 0.35;
    double high = 0.65;
};

struct GazeSample {
    int frame = 0;
    int face_min_side = 0;  // min(width, height) of the face box
    std::optional<double> horizontal_ratio;
    std::optional<double> vertical_ratio;
};

/// One of nine classes, or nothing when the sample carries no gaze. A ratio
/// <= low maps to right/down, >= high to left/up, anything else to center.
std::optional<GazeClass> gaze_classify(const GazeSample& sample, const GazeThresholds& thresholds = {});

struct GazeConfig {
    int min_side = 56;
    double session_validity_floor = 0.10;
    GazeThresholds thresholds;
};

/// Frame counts behind the gaze metrics; percentages are derived from them.
struct GazeCounts {
    int total_frames = 0;
    int thresholded_frames = 0;     // face_min_side >= min_side
    int original_detected = 0;      // among thresholded
    int privatized_detected = 0;    // among thresholded
    int both_detected = 0;
    int agreeing = 0;               // both detected and equal class
    int newly_detected = 0;         // privatized detected where original was not
};

struct GazeResult {
    GazeCounts counts;
    bool session_excluded = false;  // original gaze valid on < floor of thresholded frames
    std::optional<double> pct_over_threshold;
    std::optional<double> pct_detected;           // privatized
    std::optional<double> original_pct_detected;
    std::optional<double> accuracy;
};

/// Compares per-frame gaze classes of an original and a privatized stream.
/// The lists must cover the same frames in the same order.
GazeResult gaze_agreement(std::span<const GazeSample> original, std::span<const GazeSample> privatized,
                          const GazeConfig& config = {});

/// Pools several sessions; excluded sessions contribute nothing.
GazeResult pool_gaze(std::span<const GazeResult> sessions);

}  // namespace deid::eval
