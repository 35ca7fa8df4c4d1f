#include "deid/gateway/pipeline.hpp"

#include "deid/gateway/stages.hpp"

namespace deid::gateway {

namespace {

constexpr auto kTickInterval = std::chrono::milliseconds(200);

}  // namespace

PipelineRunner::PipelineRunner(SessionStore& store, GatewayConfig config)
    : PipelineRunner(store, config, {}) {
    body_ = [this](Stage stage, const std::string& id) { run_stage(stage, store_, config_, id); };
}

PipelineRunner::PipelineRunner(SessionStore& store, GatewayConfig config, StageBody body)
    : store_(store), config_(std::move(config)), body_(std::move(body)) {
    config_.limits.validate();
}

PipelineRunner::~PipelineRunner() { stop(); }

void PipelineRunner::start() {
    std::lock_guard lock(mu_);
    if (coordinator_.joinable()) return;
    stopping_ = false;
    coordinator_ = std::thread([this] { coordinate(); });
    for (int i = 0; i < config_.workers; ++i) workers_.emplace_back([this] { work(); });
}

void PipelineRunner::stop() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    wake_.notify_all();
    ready_cv_.notify_all();
    if (coordinator_.joinable()) coordinator_.join();
    for (auto& t : workers_) t.join();
    workers_.clear();

    // Admitted but never picked up: hand them back to the queue.
    std::lock_guard lock(mu_);
    if (!ready_.empty()) {
        std::set<long> pending;
        for (const auto& job : ready_) pending.insert(job.id);
        store_.update_jobs([&](SchedulerState& s) {
            for (auto& job : s.jobs)
                if (pending.count(job.id) && job.status == JobStatus::running) {
                    job.status = JobStatus::queued;
                    job.started_at.reset();
                }
        });
    }
    ready_.clear();
    dispatched_.clear();
}

void PipelineRunner::poke() {
    {
        std::lock_guard lock(mu_);
        poked_ = true;
    }
    wake_.notify_all();
}

bool PipelineRunner::wait_settled(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        if (all_sessions_settled(store_.jobs())) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return all_sessions_settled(store_.jobs());
}

void PipelineRunner::coordinate() {
    auto pass4 = [this](const std::string& id) {
        return store_.contains(id) && store_.owner(id)->snapshot()->pass_complete(4);
    };
    std::unique_lock lock(mu_);
    while (!stopping_) {
        lock.unlock();
        std::vector<PipelineJob> admitted;
        store_.update_jobs([&](SchedulerState& s) {
            s = scheduler_tick(std::move(s), config_.limits, pass4, now_millis());
            for (const auto& job : s.jobs)
                if (job.status == JobStatus::running) admitted.push_back(job);
        });
        lock.lock();
        for (auto& job : admitted)
            if (dispatched_.insert(job.id).second) ready_.push_back(std::move(job));
        ready_cv_.notify_all();
        wake_.wait_for(lock, kTickInterval, [this] { return stopping_ || poked_; });
        poked_ = false;
    }
}

void PipelineRunner::work() {
    for (;;) {
        PipelineJob job;
        {
            std::unique_lock lock(mu_);
            ready_cv_.wait(lock, [this] { return stopping_ || !ready_.empty(); });
            if (stopping_) return;
            job = std::move(ready_.front());
            ready_.pop_front();
        }
        std::optional<std::string> error;
        try {
            body_(job.stage, job.session_id);
        } catch (const std::exception& e) {
            error = e.what();
        }
        store_.update_jobs([&](SchedulerState& s) { finish_job(s, job.id, error, now_millis()); });
        poke();
    }
}

}  // namespace deid::gateway
