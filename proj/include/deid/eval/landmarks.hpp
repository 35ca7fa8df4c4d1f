#pragma once

#include <array>
#include <span>

#include "deid/core/geometry.hpp"

namespace deid::eval {

inline constexpr std::size_t kLandmarkCount = 68;

/// 68-point facial landmarks (standard iBUG ordering) plus the face box used
/// to normalize displacements.
struct LandmarkSet {
    int frame = 0;
    BoxGeom box;
    std::array<Point2, kLandmarkCount> points{};
};

/// Index ranges, 0-based inclusive.
struct LandmarkRange {
    std::size_t first;
    std::size_t last;
};
inline constexpr LandmarkRange kEyes{36, 47};
inline constexpr LandmarkRange kNose{27, 35};
inline constexpr LandmarkRange kMouth{48, 67};

/// Mean over all 68 points of the box-normalized displacement
///   sqrt(((o.x - p.x) / w)^2 + ((o.y - p.y) / h)^2)
/// with w, h taken from the original face box.
double landmark_distance(const LandmarkSet& original, const LandmarkSet& privatized);

struct FeatureDistances {
    double eyes = 0.0;
    double nose = 0.0;
    double mouth = 0.0;
};

FeatureDistances per_feature_distance(const LandmarkSet& original, const LandmarkSet& privatized);

struct LandmarkPair {
    LandmarkSet original;
    LandmarkSet privatized;
};

struct LandmarkSummary {
    int faces_compared = 0;
    double overall = 0.0;  // mean of per-face distances
    FeatureDistances features;
};

LandmarkSummary summarize_landmarks(std::span<const LandmarkPair> pairs);

}  // namespace deid::eval
