#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deid/core/geometry.hpp"

namespace deid {

enum class Provenance { detected, manual, interpolated };

enum class SubjectTag { untagged, key_subject, other };

enum class KeyFrameKind { subject_enter, subject_leave, chain_start, chain_end, supplemental };

std::string_view to_string(Provenance p);
std::string_view to_string(SubjectTag t);
std::string_view to_string(KeyFrameKind k);

// The parsers throw ValidationError on unknown names.
Provenance parse_provenance(std::string_view s);
SubjectTag parse_subject_tag(std::string_view s);
KeyFrameKind parse_keyframe_kind(std::string_view s);

/// One bounding box on one frame.
struct FaceObservation {
    int frame = 0;
    BoxGeom box;
    double confidence = 1.0;
    Provenance provenance = Provenance::detected;
    std::optional<std::string> chain_id;

    bool operator==(const FaceObservation&) const = default;
};

/// Linear interpolation of every box coordinate between two observations,
/// rounded half-up to integer pixels. Either argument order is accepted;
/// `frame` must lie strictly between the two observation frames.
BoxGeom lerp_box(const FaceObservation& a, const FaceObservation& b, int frame);

struct FaceChain {
    std::string id;
    std::vector<FaceObservation> observations;  // strictly increasing frames
    SubjectTag subject_tag = SubjectTag::untagged;

    int first_frame() const { return observations.front().frame; }
    int last_frame() const { return observations.back().frame; }

    bool operator==(const FaceChain&) const = default;
};

/// Checks the chain invariants: non-empty, strictly increasing frames, member
/// chain ids match, and consecutive frames at most `gap_limit` apart.
void validate_chain(const FaceChain& chain, int gap_limit);

/// Inclusive frame interval during which the key subject is in view.
struct PresenceRegion {
    int start_frame = 0;
    int end_frame = 0;

    int length() const { return end_frame - start_frame + 1; }
    bool contains(int frame) const { return frame >= start_frame && frame <= end_frame; }

    bool operator==(const PresenceRegion&) const = default;
};

struct KeyFrameMark {
    int frame = 0;
    KeyFrameKind kind = KeyFrameKind::supplemental;

    bool operator==(const KeyFrameMark&) const = default;
    auto operator<=>(const KeyFrameMark&) const = default;
};

struct SessionManifest {
    std::string session_id;
    int frame_count = 1;
    double fps = 60.0;
    int frame_width = 1;
    int frame_height = 1;
    std::string frame_source;  // directory of zero-padded PNG frames

    bool operator==(const SessionManifest&) const = default;
};

/// Sparse or densified detector output for one session.
struct DetectionSet {
    std::string session_id;
    std::map<int, std::vector<FaceObservation>> frames;
    std::vector<int> sampled_frames;  // sorted
    std::map<int, std::string> frame_errors;

    std::size_t observation_count() const;

    bool operator==(const DetectionSet&) const = default;
};

/// Completion flags for the four annotation passes, index 0 is pass 1.
using PassState = std::array<bool, 4>;

/// Per-video annotation state. Owned and mutated by the annotation engine.
struct AnnotationSession {
    SessionManifest manifest;
    DetectionSet detections;
    std::vector<PresenceRegion> regions;
    std::vector<KeyFrameMark> keyframes;
    std::vector<FaceChain> chains;
    std::vector<FaceObservation> manual_boxes;
    PassState pass_state{false, false, false, false};
    long revision = 0;
    // Output of the interpolation pass; empty until it runs.
    std::vector<FaceObservation> final_track;

    bool pass_complete(int pass) const { return pass_state.at(static_cast<std::size_t>(pass - 1)); }

    bool operator==(const AnnotationSession&) const = default;
};

}  // namespace deid
