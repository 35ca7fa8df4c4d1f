#pragma once

#include <span>
#include <string>
#include <vector>

#include "deid/core/types.hpp"
#include "deid/error.hpp"

// Four-pass annotation workflow over an AnnotationSession:
//   1. presence marking (enter/leave marks compiled into regions)
//   2. face chain construction and key-subject tagging
//   3. supplemental manual boxes
//   4. interpolation filling every region frame
// Every successful mutating call bumps `revision` by exactly one. Writes are
// gated on pass state; a failed call leaves the session untouched.

namespace deid::annotate {

struct ChainLinkConfig {
    int gap_limit = 30;
    // Fraction of the mean box diagonal.
    double link_max_center_distance = 0.75;

    void validate() const;
};

enum class PresenceKind { subject_enter, subject_leave };

class UnresolvableRegionError : public DomainError {
public:
    explicit UnresolvableRegionError(std::vector<PresenceRegion> regions);
    const std::vector<PresenceRegion>& regions() const { return regions_; }

private:
    std::vector<PresenceRegion> regions_;
};

struct RegionCoverage {
    PresenceRegion region;
    int covered_before = 0;
    int covered_after = 0;
};

struct CoverageReport {
    double rate_before = 1.0;          // key-subject chain observations only
    double rate_after = 1.0;           // final track
    double raw_detection_rate = 1.0;   // any densified detection, tagged or not
    int frames_in_regions = 0;
    std::vector<RegionCoverage> per_region;
};

// pass 1
void mark_presence(AnnotationSession& session, PresenceKind kind, int frame);
void unmark_presence(AnnotationSession& session, int frame);

/// Compiles alternating enter/leave marks into sorted, disjoint regions.
/// Throws ValidationError naming the offending frames otherwise.
std::vector<PresenceRegion> compile_regions(std::span<const KeyFrameMark> marks);

/// Marks pass `pass` complete. Pass 1 compiles regions; pass 4 runs the
/// interpolation pass.
void complete_pass(AnnotationSession& session, int pass);

/// Reopens pass `pass` and every later pass. Later outputs (regions for pass
/// 1, the final track for passes 1-3) are discarded; manual boxes are kept.
void reopen_pass(AnnotationSession& session, int pass);

/// Replaces the session's detections, dropping chains built from the old ones.
void set_detections(AnnotationSession& session, DetectionSet detections);

// pass 2

/// Pure chain linking over every observation of `detections`.
std::vector<FaceChain> link_chains(const DetectionSet& detections, const ChainLinkConfig& config);

void build_chains(AnnotationSession& session, const ChainLinkConfig& config);
void tag_chain(AnnotationSession& session, const std::string& chain_id, SubjectTag tag);

// pass 3
void add_manual_box(AnnotationSession& session, int frame, const BoxGeom& box);
void remove_manual_box(AnnotationSession& session, int frame);

// pass 4
CoverageReport run_interpolation_pass(AnnotationSession& session);

/// Observations available to the interpolation pass, one per frame, sorted:
/// key-subject chain members overridden by manual boxes.
std::vector<FaceObservation> key_subject_observations(const AnnotationSession& session);

CoverageReport coverage_report(const AnnotationSession& session);

/// "frame,x,y,w,h,provenance" export of the final track.
std::string export_track_csv(const AnnotationSession& session);

}  // namespace deid::annotate
