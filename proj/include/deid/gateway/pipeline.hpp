#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "deid/gateway/config.hpp"
#include "deid/gateway/store.hpp"

namespace deid::gateway {

/// Drives the scheduler against a store: one coordinating thread ticks, a
/// pool of workers runs the stage bodies the tick admitted.
class PipelineRunner {
public:
    using StageBody = std::function<void(Stage, const std::string& session_id)>;

    PipelineRunner(SessionStore& store, GatewayConfig config);
    /// For tests: run `body` instead of the real stage implementations.
    PipelineRunner(SessionStore& store, GatewayConfig config, StageBody body);
    ~PipelineRunner();

    PipelineRunner(const PipelineRunner&) = delete;
    PipelineRunner& operator=(const PipelineRunner&) = delete;

    void start();
    void stop();
    /// Wakes the coordinator early, e.g. after pass 4 completes.
    void poke();

    /// Blocks until every session is settled or the timeout passes.
    bool wait_settled(std::chrono::milliseconds timeout);

private:
    void coordinate();
    void work();

    SessionStore& store_;
    GatewayConfig config_;
    StageBody body_;

    std::mutex mu_;
    std::condition_variable wake_;
    std::condition_variable ready_cv_;
    std::deque<PipelineJob> ready_;
    std::set<long> dispatched_;
    bool stopping_ = false;
    bool poked_ = false;
    std::thread coordinator_;
    std::vector<std::thread> workers_;
};

}  // namespace deid::gateway
