#include "deid/gateway/store.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>

#include "deid/core/frames.hpp"
#include "deid/core/session_json.hpp"
#include "deid/error.hpp"

namespace fs = std::filesystem;

namespace deid::gateway {

std::int64_t now_millis() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

namespace {

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
    return true;
}

}  // namespace

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    const fs::path jobs_file = root_ / "jobs.json";
    if (fs::exists(jobs_file)) {
        jobs_ = scheduler_from_json(nlohmann::json::parse(read_file(jobs_file)));
        recover_after_restart(jobs_, now_millis());
        persist_jobs(jobs_);
    }
}

fs::path SessionStore::session_dir(const std::string& id) const {
    if (!valid_id(id)) throw NotFoundError("no session '" + id + "'");
    return root_ / id;
}

bool SessionStore::contains(const std::string& id) const {
    return valid_id(id) && fs::is_regular_file(root_ / id / "session.json");
}

std::vector<std::string> SessionStore::session_ids() const {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root_)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_directory() && contains(name)) ids.push_back(name);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::string SessionStore::submit_session(const fs::path& frame_dir, double fps) {
    if (!(fps > 0.0)) throw ValidationError("fps must be positive");
    const FrameDirectoryInfo info = scan_frame_directory(frame_dir);

    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    std::string id;
    for (int n = 0;; ++n) {
        id = std::string("s") + stamp + "-" + std::to_string(n);
        // create_directory fails on an existing path, which makes ids unique
        // even across processes sharing the store.
        if (fs::create_directory(root_ / id)) break;
    }

    AnnotationSession session;
    session.manifest.session_id = id;
    session.manifest.frame_count = info.frame_count;
    session.manifest.fps = fps;
    session.manifest.frame_width = info.width;
    session.manifest.frame_height = info.height;
    session.manifest.frame_source = fs::absolute(frame_dir).lexically_normal().string();
    session.detections.session_id = id;
    write_file_atomic(root_ / id / "session.json", serialize_session(session));
    update_jobs([&](SchedulerState& s) { enqueue_session(s, id, now_millis()); });
    return id;
}

std::shared_ptr<annotate::SessionOwner> SessionStore::owner(const std::string& id) {
    std::lock_guard lock(owners_mu_);
    if (auto it = owners_.find(id); it != owners_.end()) return it->second;
    if (!contains(id)) throw NotFoundError("no session '" + id + "'");
    const fs::path file = session_dir(id) / "session.json";
    auto owner = std::make_shared<annotate::SessionOwner>(
        deserialize_session(read_file(file)),
        [file](const AnnotationSession& s) { write_file_atomic(file, serialize_session(s)); });
    owners_.emplace(id, owner);
    return owner;
}

void SessionStore::save_sparse_detections(const std::string& id, const DetectionSet& detections) {
    write_file_atomic(session_dir(id) / "detections_sparse.json", serialize_detections(detections));
}

DetectionSet SessionStore::load_sparse_detections(const std::string& id) const {
    const fs::path file = session_dir(id) / "detections_sparse.json";
    if (!fs::exists(file)) throw StateError("session " + id + " has no sparse detections yet");
    return deserialize_detections(read_file(file));
}

SchedulerState SessionStore::jobs() const {
    std::lock_guard lock(jobs_mu_);
    return jobs_;
}

void SessionStore::persist_jobs(const SchedulerState& state) const {
    write_file_atomic(root_ / "jobs.json", to_json(state).dump(1));
}

}  // namespace deid::gateway
