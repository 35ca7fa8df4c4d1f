#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "deid/annotate/owner.hpp"
#include "deid/core/types.hpp"
#include "deid/gateway/scheduler.hpp"

namespace deid::gateway {

// On-disk layout under the store root:
//   jobs.json                       scheduler state for every session
//   <session_id>/session.json       AnnotationSession (deid.session/1)
//   <session_id>/detections_sparse.json
//   <session_id>/track.csv          final key-subject track
//   <session_id>/crops/             key-subject face crops, one PNG per frame
//   <session_id>/rendered/          privatized frames + render_log.json
//   <session_id>/reports/           evaluation reports
// Every file is replaced atomically.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    /// Validates the frame directory, persists a fresh session and queues its
    /// detect job. Every call yields a new id, even for the same directory.
    std::string submit_session(const std::filesystem::path& frame_dir, double fps);

    std::vector<std::string> session_ids() const;
    bool contains(const std::string& id) const;

    /// Single writer for the session; persists session.json on every change.
    std::shared_ptr<annotate::SessionOwner> owner(const std::string& id);

    std::filesystem::path session_dir(const std::string& id) const;
    std::filesystem::path rendered_dir(const std::string& id) const { return session_dir(id) / "rendered"; }
    std::filesystem::path reports_dir(const std::string& id) const { return session_dir(id) / "reports"; }
    std::filesystem::path crops_dir(const std::string& id) const { return session_dir(id) / "crops"; }

    void save_sparse_detections(const std::string& id, const DetectionSet& detections);
    DetectionSet load_sparse_detections(const std::string& id) const;

    /// Scheduler state, guarded by the store so the runner, the CLI and the
    /// API see the same jobs.
    SchedulerState jobs() const;
    template <typename F>
    void update_jobs(F&& mutate) {
        std::lock_guard lock(jobs_mu_);
        SchedulerState next = jobs_;
        mutate(next);
        persist_jobs(next);
        jobs_ = std::move(next);
    }

private:
    void persist_jobs(const SchedulerState& state) const;

    std::filesystem::path root_;
    mutable std::mutex owners_mu_;
    std::map<std::string, std::shared_ptr<annotate::SessionOwner>> owners_;
    mutable std::mutex jobs_mu_;
    SchedulerState jobs_;
};

std::int64_t now_millis();

}  // namespace deid::gateway
