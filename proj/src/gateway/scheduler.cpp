#include "deid/gateway/scheduler.hpp"

#include <map>

#include "deid/error.hpp"

using nlohmann::json;
using nlohmann::ordered_json;

namespace deid::gateway {

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::detect: return "detect";
        case Stage::densify: return "densify";
        case Stage::annotate: return "annotate";
        case Stage::extract: return "extract";
        case Stage::privatize: return "privatize";
        case Stage::evaluate: return "evaluate";
    }
    return "?";
}

std::string_view to_string(JobStatus s) {
    switch (s) {
        case JobStatus::queued: return "queued";
        case JobStatus::running: return "running";
        case JobStatus::blocked: return "blocked";
        case JobStatus::done: return "done";
        case JobStatus::failed: return "failed";
    }
    return "?";
}

Stage parse_stage(std::string_view s) {
    for (auto st : kStages)
        if (to_string(st) == s) return st;
    throw ValidationError("unknown stage '" + std::string(s) + "'");
}

JobStatus parse_job_status(std::string_view s) {
    for (auto st : {JobStatus::queued, JobStatus::running, JobStatus::blocked, JobStatus::done, JobStatus::failed})
        if (to_string(st) == s) return st;
    throw ValidationError("unknown job status '" + std::string(s) + "'");
}

void StageLimits::validate() const {
    for (auto s : kStages)
        if ((*this)[s] < 1) throw ValidationError("limit for stage " + std::string(to_string(s)) + " must be >= 1");
}

long enqueue_session(SchedulerState& state, const std::string& session_id, std::int64_t now) {
    if (current_job(state, session_id)) throw ValidationError("session " + session_id + " already has jobs");
    PipelineJob job;
    job.id = state.next_id++;
    job.session_id = session_id;
    job.stage = Stage::detect;
    job.queued_at = now;
    state.jobs.push_back(job);
    return job.id;
}

namespace {

// Index of each session's last job, in order of the sessions' first job.
std::vector<std::size_t> current_indices(const SchedulerState& state) {
    std::map<std::string, std::size_t> last;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < state.jobs.size(); ++i) {
        auto [it, fresh] = last.try_emplace(state.jobs[i].session_id, i);
        if (fresh) order.push_back(state.jobs[i].session_id);
        it->second = i;
    }
    std::vector<std::size_t> out;
    out.reserve(order.size());
    for (const auto& id : order) out.push_back(last[id]);
    return out;
}

void queue_next(SchedulerState& state, const PipelineJob& finished, std::int64_t now) {
    PipelineJob next;
    next.id = state.next_id++;
    next.session_id = finished.session_id;
    next.stage = kStages[static_cast<std::size_t>(finished.stage) + 1];
    next.queued_at = now;
    state.jobs.push_back(std::move(next));
}

}  // namespace

SchedulerState scheduler_tick(SchedulerState state, const StageLimits& limits, const PassFourComplete& pass4_complete,
                              std::int64_t now) {
    for (std::size_t idx : current_indices(state)) {
        const PipelineJob job = state.jobs[idx];
        if (job.status == JobStatus::done && job.stage != Stage::evaluate) queue_next(state, job, now);
    }

    for (std::size_t idx : current_indices(state)) {
        PipelineJob& job = state.jobs[idx];
        if (job.stage != Stage::annotate || job.terminal()) continue;
        if (pass4_complete && pass4_complete(job.session_id)) {
            job.status = JobStatus::done;
            if (!job.started_at) job.started_at = now;
            job.finished_at = now;
            const PipelineJob copy = job;
            queue_next(state, copy, now);
        } else {
            job.status = JobStatus::blocked;
        }
    }

    std::array<int, kStageCount> running{};
    for (const auto& job : state.jobs)
        if (job.status == JobStatus::running) ++running[static_cast<std::size_t>(job.stage)];
    for (auto& job : state.jobs) {
        if (job.status != JobStatus::queued || job.stage == Stage::annotate) continue;
        auto& n = running[static_cast<std::size_t>(job.stage)];
        if (n >= limits[job.stage]) continue;
        ++n;
        job.status = JobStatus::running;
        job.started_at = now;
    }
    return state;
}

void finish_job(SchedulerState& state, long job_id, std::optional<std::string> error, std::int64_t now) {
    for (auto& job : state.jobs) {
        if (job.id != job_id) continue;
        if (job.status != JobStatus::running)
            throw StateError("job " + std::to_string(job_id) + " is " + std::string(to_string(job.status)) + ", not running");
        job.status = error ? JobStatus::failed : JobStatus::done;
        job.error = std::move(error);
        job.finished_at = now;
        return;
    }
    throw NotFoundError("no job " + std::to_string(job_id));
}

void recover_after_restart(SchedulerState& state, std::int64_t now) {
    for (auto& job : state.jobs) {
        if (job.status != JobStatus::running) continue;
        job.status = JobStatus::queued;
        job.started_at.reset();
        job.queued_at = now;
    }
}

int running_count(const SchedulerState& state, Stage stage) {
    int n = 0;
    for (const auto& job : state.jobs)
        if (job.stage == stage && job.status == JobStatus::running) ++n;
    return n;
}

bool all_sessions_settled(const SchedulerState& state) {
    for (std::size_t idx : current_indices(state)) {
        const auto& job = state.jobs[idx];
        if (job.status == JobStatus::failed) continue;
        if (job.stage != Stage::evaluate || job.status != JobStatus::done) return false;
    }
    return true;
}

const PipelineJob* current_job(const SchedulerState& state, const std::string& session_id) {
    for (auto it = state.jobs.rbegin(); it != state.jobs.rend(); ++it)
        if (it->session_id == session_id) return &*it;
    return nullptr;
}

ordered_json to_json(const PipelineJob& job) {
    ordered_json j;
    j["id"] = job.id;
    j["session_id"] = job.session_id;
    j["stage"] = to_string(job.stage);
    j["status"] = to_string(job.status);
    j["queued_at"] = job.queued_at;
    j["started_at"] = job.started_at ? ordered_json(*job.started_at) : ordered_json(nullptr);
    j["finished_at"] = job.finished_at ? ordered_json(*job.finished_at) : ordered_json(nullptr);
    j["error"] = job.error ? ordered_json(*job.error) : ordered_json(nullptr);
    return j;
}

PipelineJob job_from_json(const json& j) {
    PipelineJob job;
    job.id = j.at("id").get<long>();
    job.session_id = j.at("session_id").get<std::string>();
    job.stage = parse_stage(j.at("stage").get<std::string>());
    job.status = parse_job_status(j.at("status").get<std::string>());
    job.queued_at = j.at("queued_at").get<std::int64_t>();
    if (!j.at("started_at").is_null()) job.started_at = j.at("started_at").get<std::int64_t>();
    if (!j.at("finished_at").is_null()) job.finished_at = j.at("finished_at").get<std::int64_t>();
    if (!j.at("error").is_null()) job.error = j.at("error").get<std::string>();
    return job;
}

ordered_json to_json(const SchedulerState& state) {
    ordered_json j;
    j["format"] = "deid.jobs/1";
    j["next_id"] = state.next_id;
    j["jobs"] = ordered_json::array();
    for (const auto& job : state.jobs) j["jobs"].push_back(to_json(job));
    return j;
}

SchedulerState scheduler_from_json(const json& j) {
    try {
        SchedulerState state;
        state.next_id = j.at("next_id").get<long>();
        for (const auto& e : j.at("jobs")) state.jobs.push_back(job_from_json(e));
        return state;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed job state: ") + e.what());
    }
}

}  // namespace deid::gateway
