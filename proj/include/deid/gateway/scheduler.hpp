#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace deid::gateway {

enum class Stage { detect, densify, annotate, extract, privatize, evaluate };
enum class JobStatus { queued, running, blocked, done, failed };

inline constexpr std::size_t kStageCount = 6;
inline constexpr std::array<Stage, kStageCount> kStages{Stage::detect,  Stage::densify,   Stage::annotate,
                                                       Stage::extract, Stage::privatize, Stage::evaluate};

std::string_view to_string(Stage s);
std::string_view to_string(JobStatus s);
Stage parse_stage(std::string_view s);
JobStatus parse_job_status(std::string_view s);

struct PipelineJob {
    long id = 0;
    std::string session_id;
    Stage stage = Stage::detect;
    JobStatus status = JobStatus::queued;
    std::int64_t queued_at = 0;
    std::optional<std::int64_t> started_at;
    std::optional<std::int64_t> finished_at;
    std::optional<std::string> error;

    bool terminal() const { return status == JobStatus::done || status == JobStatus::failed; }
    bool operator==(const PipelineJob&) const = default;
};

struct StageLimits {
    std::array<int, kStageCount> max_running{2, 4, 4, 4, 2, 4};

    int operator[](Stage s) const { return max_running[static_cast<std::size_t>(s)]; }
    int& operator[](Stage s) { return max_running[static_cast<std::size_t>(s)]; }
    void validate() const;
    bool operator==(const StageLimits&) const = default;
};

/// Every job ever created, in creation order. A session's current job is its
/// last one; earlier jobs are its finished stages.
struct SchedulerState {
    std::vector<PipelineJob> jobs;
    long next_id = 1;

    bool operator==(const SchedulerState&) const = default;
};

/// Queues the first stage for a new session and returns the job id.
long enqueue_session(SchedulerState& state, const std::string& session_id, std::int64_t now);

using PassFourComplete = std::function<bool(const std::string& session_id)>;

/// One coordinating step:
///   1. done jobs (other than evaluate) get their next stage queued;
///   2. annotate jobs finish once pass 4 is complete, otherwise block;
///   3. queued jobs start in FIFO order while their stage has spare capacity.
/// Annotate waits on a person, so it never occupies a running slot.
SchedulerState scheduler_tick(SchedulerState state, const StageLimits& limits, const PassFourComplete& pass4_complete,
                              std::int64_t now);

/// Records the outcome of a running job. A failure only affects that session.
void finish_job(SchedulerState& state, long job_id, std::optional<std::string> error, std::int64_t now);

/// After a restart nothing is running: jobs caught mid-flight are queued
/// again. Stage bodies overwrite their own outputs, so re-running is safe.
void recover_after_restart(SchedulerState& state, std::int64_t now);

/// Jobs currently running for `stage`.
int running_count(const SchedulerState& state, Stage stage);

/// True once every session has either finished evaluate or failed.
bool all_sessions_settled(const SchedulerState& state);

/// Last job of the session, or nullptr.
const PipelineJob* current_job(const SchedulerState& state, const std::string& session_id);

nlohmann::ordered_json to_json(const PipelineJob& job);
PipelineJob job_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const SchedulerState& state);
SchedulerState scheduler_from_json(const nlohmann::json& j);

}  // namespace deid::gateway
