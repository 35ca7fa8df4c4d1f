#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <type_traits>

#include "deid/core/types.hpp"
#include "deid/error.hpp"

namespace deid::annotate {

/// Single writer for one session. Mutations run on a private copy and are
/// published (and persisted) only if they succeed; readers get immutable
/// snapshots. A write carrying a stale revision is rejected with ConflictError.
class SessionOwner {
public:
    using Persist = std::function<void(const AnnotationSession&)>;

    explicit SessionOwner(AnnotationSession initial, Persist persist = {})
        : current_(std::make_shared<const AnnotationSession>(std::move(initial))), persist_(std::move(persist)) {}

    std::shared_ptr<const AnnotationSession> snapshot() const {
        std::lock_guard lock(mu_);
        return current_;
    }

    long revision() const { return snapshot()->revision; }

    template <typename F>
    auto apply(std::optional<long> expected_revision, F&& mutate) -> std::invoke_result_t<F, AnnotationSession&> {
        std::lock_guard lock(mu_);
        if (expected_revision && *expected_revision != current_->revision)
            throw ConflictError(*expected_revision, current_->revision);
        AnnotationSession draft = *current_;
        if constexpr (std::is_void_v<std::invoke_result_t<F, AnnotationSession&>>) {
            mutate(draft);
            publish(std::move(draft));
        } else {
            auto result = mutate(draft);
            publish(std::move(draft));
            return result;
        }
    }

private:
    void publish(AnnotationSession draft) {
        if (persist_) persist_(draft);
        current_ = std::make_shared<const AnnotationSession>(std::move(draft));
    }

    mutable std::mutex mu_;
    std::shared_ptr<const AnnotationSession> current_;
    Persist persist_;
};

}  // namespace deid::annotate
