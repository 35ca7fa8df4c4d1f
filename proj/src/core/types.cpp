#include "deid/core/types.hpp"

#include <algorithm>

#include "deid/error.hpp"

namespace deid {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table,
             const char* what) {
    for (const auto& [name, value] : table)
        if (name == s) return value;
    throw ValidationError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E value, const std::array<std::pair<std::string_view, E>, N>& table) {
    for (const auto& [name, v] : table)
        if (v == value) return name;
    return "?";
}

constexpr std::array<std::pair<std::string_view, Provenance>, 3> kProvenance{{
    {"detected", Provenance::detected},
    {"manual", Provenance::manual},
    {"interpolated", Provenance::interpolated},
}};

constexpr std::array<std::pair<std::string_view, SubjectTag>, 3> kSubjectTag{{
    {"untagged", SubjectTag::untagged},
    {"key_subject", SubjectTag::key_subject},
    {"other", SubjectTag::other},
}};

constexpr std::array<std::pair<std::string_view, KeyFrameKind>, 5> kKeyFrameKind{{
    {"subject_enter", KeyFrameKind::subject_enter},
    {"subject_leave", KeyFrameKind::subject_leave},
    {"chain_start", KeyFrameKind::chain_start},
    {"chain_end", KeyFrameKind::chain_end},
    {"supplemental", KeyFrameKind::supplemental},
}};

}  // namespace

std::string_view to_string(Provenance p) { return enum_name(p, kProvenance); }
std::string_view to_string(SubjectTag t) { return enum_name(t, kSubjectTag); }
std::string_view to_string(KeyFrameKind k) { return enum_name(k, kKeyFrameKind); }

Provenance parse_provenance(std::string_view s) { return parse_enum(s, kProvenance, "provenance"); }
SubjectTag parse_subject_tag(std::string_view s) { return parse_enum(s, kSubjectTag, "subject tag"); }
KeyFrameKind parse_keyframe_kind(std::string_view s) {
    return parse_enum(s, kKeyFrameKind, "key frame kind");
}

BoxGeom lerp_box(const FaceObservation& a, const FaceObservation& b, int frame) {
    const FaceObservation& lo = a.frame <= b.frame ? a : b;
    const FaceObservation& hi = a.frame <= b.frame ? b : a;
    if (!(lo.frame < frame && frame < hi.frame))
        throw DomainError("frame " + std::to_string(frame) + " is not strictly between " +
                          std::to_string(lo.frame) + " and " + std::to_string(hi.frame));

    // v = (v_lo * (hi - f) + v_hi * (f - lo)) / (hi - lo), kept rational so the
    // result does not depend on argument order.
    const long long span = hi.frame - lo.frame;
    const long long wl = hi.frame - frame;
    const long long wh = frame - lo.frame;
    auto mix = [&](int vl, int vh) {
        return static_cast<int>(round_half_up_div(vl * wl + vh * wh, span));
    };
    BoxGeom out{mix(lo.box.x, hi.box.x), mix(lo.box.y, hi.box.y), mix(lo.box.w, hi.box.w),
                mix(lo.box.h, hi.box.h)};
    out.w = std::max(out.w, 1);
    out.h = std::max(out.h, 1);
    return out;
}

void validate_chain(const FaceChain& chain, int gap_limit) {
    if (chain.observations.empty()) throw ValidationError("chain " + chain.id + " is empty");
    for (std::size_t i = 0; i < chain.observations.size(); ++i) {
        const auto& obs = chain.observations[i];
        if (obs.chain_id != chain.id)
            throw ValidationError("observation on frame " + std::to_string(obs.frame) +
                                  " does not belong to chain " + chain.id);
        if (i == 0) continue;
        const int prev = chain.observations[i - 1].frame;
        if (obs.frame <= prev)
            throw ValidationError("chain " + chain.id + " frames not strictly increasing at " +
                                  std::to_string(obs.frame));
        if (obs.frame - prev > gap_limit)
            throw ValidationError("chain " + chain.id + " gap " + std::to_string(obs.frame - prev) +
                                  " exceeds limit " + std::to_string(gap_limit));
    }
}

std::size_t DetectionSet::observation_count() const {
    std::size_t n = 0;
    for (const auto& [frame, obs] : frames) n += obs.size();
    return n;
}

}  // namespace deid
