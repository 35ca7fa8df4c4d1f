#include "deid/eval/landmarks.hpp"

#include <cmath>

#include "deid/error.hpp"

namespace deid::eval {

namespace {

double normalized_mean(const LandmarkSet& o, const LandmarkSet& p, LandmarkRange range) {
    if (o.box.w < 1 || o.box.h < 1) throw ValidationError("degenerate face box for landmark normalization");
    const double w = o.box.w;
    const double h = o.box.h;
    double sum = 0.0;
    for (std::size_t i = range.first; i <= range.last; ++i) {
        const double dx = (o.points[i].x - p.points[i].x) / w;
        const double dy = (o.points[i].y - p.points[i].y) / h;
        sum += std::sqrt(dx * dx + dy * dy);
    }
    return sum / static_cast<double>(range.last - range.first + 1);
}

}  // namespace

double landmark_distance(const LandmarkSet& original, const LandmarkSet& privatized) {
    return normalized_mean(original, privatized, {0, kLandmarkCount - 1});
}

FeatureDistances per_feature_distance(const LandmarkSet& original, const LandmarkSet& privatized) {
    return {normalized_mean(original, privatized, kEyes), normalized_mean(original, privatized, kNose),
            normalized_mean(original, privatized, kMouth)};
}

LandmarkSummary summarize_landmarks(std::span<const LandmarkPair> pairs) {
    LandmarkSummary s;
    s.faces_compared = static_cast<int>(pairs.size());
    if (pairs.empty()) return s;
    for (const auto& p : pairs) {
        s.overall += landmark_distance(p.original, p.privatized);
        const auto f = per_feature_distance(p.original, p.privatized);
        s.features.eyes += f.eyes;
        s.features.nose += f.nose;
        s.features.mouth += f.mouth;
    }
    const double n = static_cast<double>(pairs.size());
    s.overall /= n;
    s.features.eyes /= n;
    s.features.nose /= n;
    s.features.mouth /= n;
    return s;
}

}  // namespace deid::eval
