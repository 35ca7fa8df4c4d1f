#include "deid/annotate/engine.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "deid/detect/detector.hpp"

namespace deid::annotate {

namespace {

void require_pass_open(const AnnotationSession& s, int pass) {
    for (int k = 1; k < pass; ++k)
        if (!s.pass_complete(k))
            throw StateError("pass " + std::to_string(pass) + " requires pass " + std::to_string(k) + " to be complete");
    if (s.pass_complete(pass)) throw StateError("pass " + std::to_string(pass) + " is already complete");
}

void require_frame(const AnnotationSession& s, int frame) {
    if (frame < 0 || frame >= s.manifest.frame_count)
        throw DomainError("frame " + std::to_string(frame) + " outside [0, " + std::to_string(s.manifest.frame_count) +
                          ")");
}

std::string describe(const PresenceRegion& r) {
    return "[" + std::to_string(r.start_frame) + "," + std::to_string(r.end_frame) + "]";
}

std::string describe_regions(const std::vector<PresenceRegion>& regions) {
    std::string out;
    for (const auto& r : regions) out += (out.empty() ? "" : " ") + describe(r);
    return out;
}

void normalize_keyframes(std::vector<KeyFrameMark>& marks) {
    std::sort(marks.begin(), marks.end());
    marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
}

bool is_presence(KeyFrameKind k) { return k == KeyFrameKind::subject_enter || k == KeyFrameKind::subject_leave; }

// Canonical in-frame ordering so linking ignores input order.
auto observation_key(const FaceObservation& o) {
    return std::make_tuple(o.box.x, o.box.y, o.box.w, o.box.h, o.confidence, static_cast<int>(o.provenance));
}

CoverageReport compute_coverage(const AnnotationSession& s) {
    std::set<int> before;
    std::set<int> raw;
    for (const auto& c : s.chains)
        if (c.subject_tag == SubjectTag::key_subject)
            for (const auto& o : c.observations) before.insert(o.frame);
    for (const auto& [frame, list] : s.detections.frames)
        if (!list.empty()) raw.insert(frame);
    std::set<int> after;
    for (const auto& o : s.final_track) after.insert(o.frame);

    CoverageReport rep;
    rep.rate_before = detect::detection_rate(before, s.regions);
    rep.rate_after = detect::detection_rate(after, s.regions);
    rep.raw_detection_rate = detect::detection_rate(raw, s.regions);
    for (const auto& r : s.regions) {
        RegionCoverage rc{r, 0, 0};
        rc.covered_before = static_cast<int>(std::distance(before.lower_bound(r.start_frame), before.upper_bound(r.end_frame)));
        rc.covered_after = static_cast<int>(std::distance(after.lower_bound(r.start_frame), after.upper_bound(r.end_frame)));
        rep.frames_in_regions += r.length();
        rep.per_region.push_back(rc);
    }
    return rep;
}

}  // namespace

UnresolvableRegionError::UnresolvableRegionError(std::vector<PresenceRegion> regions)
    : DomainError("no key-subject box in region(s) " + describe_regions(regions) +
                  "; add at least one box per region"),
      regions_(std::move(regions)) {}

void ChainLinkConfig::validate() const {
    if (gap_limit < 1) throw ValidationError("gap_limit must be >= 1");
    if (!(link_max_center_distance >= 0.0)) throw ValidationError("link distance must be non-negative");
}

void mark_presence(AnnotationSession& s, PresenceKind kind, int frame) {
    require_pass_open(s, 1);
    require_frame(s, frame);
    s.keyframes.push_back(
        {frame, kind == PresenceKind::subject_enter ? KeyFrameKind::subject_enter : KeyFrameKind::subject_leave});
    normalize_keyframes(s.keyframes);
    ++s.revision;
}

void unmark_presence(AnnotationSession& s, int frame) {
    require_pass_open(s, 1);
    std::erase_if(s.keyframes, [&](const KeyFrameMark& m) { return m.frame == frame && is_presence(m.kind); });
    ++s.revision;
}

std::vector<PresenceRegion> compile_regions(std::span<const KeyFrameMark> marks) {
    std::vector<KeyFrameMark> presence;
    for (const auto& m : marks)
        if (is_presence(m.kind)) presence.push_back(m);
    // On a shared frame an enter sorts before a leave, so enter@5 leave@5 is [5,5].
    std::sort(presence.begin(), presence.end());

    std::vector<PresenceRegion> regions;
    std::vector<int> offending;
    std::optional<int> open;
    for (const auto& m : presence) {
        if (m.kind == KeyFrameKind::subject_enter) {
            if (open) {
                offending.push_back(*open);
                offending.push_back(m.frame);
            }
            open = m.frame;
        } else {
            if (!open) {
                offending.push_back(m.frame);
                continue;
            }
            if (!regions.empty() && regions.back().end_frame >= *open) {
                offending.push_back(*open);
            }
            regions.push_back({*open, m.frame});
            open.reset();
        }
    }
    if (open) offending.push_back(*open);
    if (!offending.empty()) {
        std::sort(offending.begin(), offending.end());
        offending.erase(std::unique(offending.begin(), offending.end()), offending.end());
        std::string list;
        for (int f : offending) list += (list.empty() ? "" : ", ") + std::to_string(f);
        throw ValidationError("enter/leave marks do not alternate at frame(s) " + list);
    }
    return regions;
}

void complete_pass(AnnotationSession& s, int pass) {
    if (pass < 1 || pass > 4) throw ValidationError("no such pass " + std::to_string(pass));
    if (pass == 4) {
        run_interpolation_pass(s);
        return;
    }
    require_pass_open(s, pass);
    if (pass == 1) s.regions = compile_regions(s.keyframes);
    s.pass_state[static_cast<std::size_t>(pass - 1)] = true;
    ++s.revision;
}

void reopen_pass(AnnotationSession& s, int pass) {
    if (pass < 1 || pass > 4) throw ValidationError("no such pass " + std::to_string(pass));
    bool any = false;
    for (int k = pass; k <= 4; ++k) any = any || s.pass_complete(k);
    if (!any) throw StateError("pass " + std::to_string(pass) + " is already open");
    for (int k = pass; k <= 4; ++k) s.pass_state[static_cast<std::size_t>(k - 1)] = false;
    if (pass == 1) s.regions.clear();
    s.final_track.clear();
    ++s.revision;
}

void set_detections(AnnotationSession& s, DetectionSet detections) {
    if (s.pass_complete(2)) throw StateError("cannot replace detections after pass 2 is complete");
    s.detections = std::move(detections);
    s.chains.clear();
    std::erase_if(s.keyframes, [](const KeyFrameMark& m) {
        return m.kind == KeyFrameKind::chain_start || m.kind == KeyFrameKind::chain_end;
    });
    s.final_track.clear();
    ++s.revision;
}

std::vector<FaceChain> link_chains(const DetectionSet& detections, const ChainLinkConfig& config) {
    config.validate();
    std::vector<FaceChain> chains;
    for (const auto& [frame, raw] : detections.frames) {
        std::vector<FaceObservation> obs = raw;
        std::sort(obs.begin(), obs.end(),
                  [](const FaceObservation& a, const FaceObservation& b) { return observation_key(a) < observation_key(b); });

        struct Candidate {
            double distance;
            std::size_t obs;
            std::size_t chain;
        };
        std::vector<Candidate> candidates;
        for (std::size_t c = 0; c < chains.size(); ++c) {
            const FaceObservation& last = chains[c].observations.back();
            if (last.frame >= frame || frame - last.frame > config.gap_limit) continue;
            for (std::size_t i = 0; i < obs.size(); ++i) {
                const double d = center_distance(last.box, obs[i].box);
                const double gate =
                    config.link_max_center_distance * 0.5 * (box_diagonal(last.box) + box_diagonal(obs[i].box));
                if (d <= gate) candidates.push_back({d, i, c});
            }
        }
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            return std::tie(a.distance, a.obs, a.chain) < std::tie(b.distance, b.obs, b.chain);
        });
        std::vector<bool> obs_used(obs.size(), false);
        std::vector<bool> chain_used(chains.size(), false);
        for (const auto& cand : candidates) {
            if (obs_used[cand.obs] || chain_used[cand.chain]) continue;
            obs_used[cand.obs] = chain_used[cand.chain] = true;
            FaceObservation o = obs[cand.obs];
            o.chain_id = chains[cand.chain].id;
            chains[cand.chain].observations.push_back(std::move(o));
        }
        for (std::size_t i = 0; i < obs.size(); ++i) {
            if (obs_used[i]) continue;
            FaceChain chain;
            chain.id = "c" + std::to_string(chains.size());
            FaceObservation o = obs[i];
            o.chain_id = chain.id;
            chain.observations.push_back(std::move(o));
            chains.push_back(std::move(chain));
        }
    }
    return chains;
}

void build_chains(AnnotationSession& s, const ChainLinkConfig& config) {
    require_pass_open(s, 2);
    std::vector<FaceChain> chains = link_chains(s.detections, config);
    std::erase_if(s.keyframes, [](const KeyFrameMark& m) {
        return m.kind == KeyFrameKind::chain_start || m.kind == KeyFrameKind::chain_end;
    });
    for (const auto& c : chains) {
        s.keyframes.push_back({c.first_frame(), KeyFrameKind::chain_start});
        s.keyframes.push_back({c.last_frame(), KeyFrameKind::chain_end});
    }
    normalize_keyframes(s.keyframes);
    s.chains = std::move(chains);
    ++s.revision;
}

void tag_chain(AnnotationSession& s, const std::string& chain_id, SubjectTag tag) {
    require_pass_open(s, 2);
    auto it = std::find_if(s.chains.begin(), s.chains.end(), [&](const FaceChain& c) { return c.id == chain_id; });
    if (it == s.chains.end()) throw NotFoundError("no chain '" + chain_id + "'");
    it->subject_tag = tag;
    ++s.revision;
}

void add_manual_box(AnnotationSession& s, int frame, const BoxGeom& box) {
    require_pass_open(s, 3);
    require_frame(s, frame);
    if (box.w < 1 || box.h < 1) throw ValidationError("manual box must be at least 1x1");
    auto clamped = clamp_to_frame(box, s.manifest.frame_width, s.manifest.frame_height);
    if (!clamped) throw DomainError("manual box lies outside the frame");
    if (std::none_of(s.regions.begin(), s.regions.end(), [&](const PresenceRegion& r) { return r.contains(frame); }))
        throw DomainError("frame " + std::to_string(frame) + " is outside every presence region");

    FaceObservation obs{frame, *clamped, 1.0, Provenance::manual, std::nullopt};
    auto it = std::lower_bound(s.manual_boxes.begin(), s.manual_boxes.end(), frame,
                               [](const FaceObservation& o, int f) { return o.frame < f; });
    if (it != s.manual_boxes.end() && it->frame == frame)
        *it = obs;
    else
        s.manual_boxes.insert(it, obs);
    s.keyframes.push_back({frame, KeyFrameKind::supplemental});
    normalize_keyframes(s.keyframes);
    ++s.revision;
}

void remove_manual_box(AnnotationSession& s, int frame) {
    require_pass_open(s, 3);
    const auto removed = std::erase_if(s.manual_boxes, [&](const FaceObservation& o) { return o.frame == frame; });
    if (removed == 0) throw NotFoundError("no manual box on frame " + std::to_string(frame));
    std::erase_if(s.keyframes,
                  [&](const KeyFrameMark& m) { return m.frame == frame && m.kind == KeyFrameKind::supplemental; });
    ++s.revision;
}

std::vector<FaceObservation> key_subject_observations(const AnnotationSession& s) {
    std::map<int, FaceObservation> by_frame;
    for (const auto& c : s.chains) {
        if (c.subject_tag != SubjectTag::key_subject) continue;
        for (const auto& o : c.observations) {
            auto [it, inserted] = by_frame.try_emplace(o.frame, o);
            if (!inserted && o.confidence > it->second.confidence) it->second = o;
        }
    }
    for (const auto& m : s.manual_boxes) by_frame.insert_or_assign(m.frame, m);
    std::vector<FaceObservation> out;
    out.reserve(by_frame.size());
    for (auto& [frame, o] : by_frame) out.push_back(std::move(o));
    return out;
}

CoverageReport run_interpolation_pass(AnnotationSession& s) {
    for (int k = 1; k <= 3; ++k)
        if (!s.pass_complete(k))
            throw StateError("interpolation pass requires pass " + std::to_string(k) + " to be complete");

    const std::vector<FaceObservation> key = key_subject_observations(s);
    auto first_at_or_after = [&](int f) {
        return std::lower_bound(key.begin(), key.end(), f, [](const FaceObservation& o, int v) { return o.frame < v; });
    };

    std::vector<PresenceRegion> unresolved;
    std::vector<FaceObservation> track;
    for (const auto& r : s.regions) {
        auto lo = first_at_or_after(r.start_frame);
        auto hi = first_at_or_after(r.end_frame + 1);
        if (lo == hi) {
            unresolved.push_back(r);
            continue;
        }
        auto next = lo;  // first key observation with frame >= f inside the region
        for (int f = r.start_frame; f <= r.end_frame; ++f) {
            while (next != hi && next->frame < f) ++next;
            if (next != hi && next->frame == f) {
                track.push_back(*next);
                continue;
            }
            const FaceObservation* before = next != lo ? &*(next - 1) : nullptr;
            const FaceObservation* after = next != hi ? &*next : nullptr;
            FaceObservation filled;
            filled.frame = f;
            filled.provenance = Provenance::interpolated;
            if (before && after) {
                filled.box = lerp_box(*before, *after, f);
                filled.confidence = std::min(before->confidence, after->confidence);
            } else {
                const FaceObservation* src = before ? before : after;
                filled.box = src->box;
                filled.confidence = src->confidence;
            }
            track.push_back(filled);
        }
    }
    if (!unresolved.empty()) throw UnresolvableRegionError(std::move(unresolved));

    s.final_track = std::move(track);
    s.pass_state[3] = true;
    ++s.revision;
    return compute_coverage(s);
}

CoverageReport coverage_report(const AnnotationSession& s) {
    if (!s.pass_complete(4)) throw StateError("coverage is available after the interpolation pass has run");
    return compute_coverage(s);
}

std::string export_track_csv(const AnnotationSession& s) {
    std::ostringstream out;
    out << "frame,x,y,w,h,provenance\n";
    for (const auto& o : s.final_track)
        out << o.frame << ',' << o.box.x << ',' << o.box.y << ',' << o.box.w << ',' << o.box.h << ','
            << to_string(o.provenance) << '\n';
    return out.str();
}

}  // namespace deid::annotate
