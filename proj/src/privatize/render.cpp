#include "deid/privatize/render.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "deid/core/frames.hpp"
#include "deid/error.hpp"

namespace fs = std::filesystem;

namespace deid::privatize {

std::string_view to_string(RenderStatus s) {
    switch (s) {
        case RenderStatus::privatized: return "privatized";
        case RenderStatus::copied: return "copied";
        case RenderStatus::fallback: return "fallback";
        case RenderStatus::failed: return "failed";
    }
    return "?";
}

int RenderLog::count(RenderStatus s) const {
    return static_cast<int>(std::count_if(entries.begin(), entries.end(), [&](const RenderEntry& e) { return e.status == s; }));
}

std::string render_log_json(const RenderLog& log) {
    nlohmann::ordered_json j;
    j["privatized"] = log.count(RenderStatus::privatized);
    j["fallback"] = log.count(RenderStatus::fallback);
    j["copied"] = log.count(RenderStatus::copied);
    j["failed"] = log.count(RenderStatus::failed);
    auto& frames = j["frames"] = nlohmann::ordered_json::array();
    for (const auto& e : log.entries) {
        nlohmann::ordered_json row{{"frame", e.frame}, {"status", to_string(e.status)}};
        if (!e.message.empty()) row["message"] = e.message;
        frames.push_back(std::move(row));
    }
    return j.dump(1);
}

namespace {

struct Worker {
    const SessionManifest& manifest;
    const PrivatizeOptions& options;
    const fs::path& output_dir;
    std::unique_ptr<SwapAdapter> swapper;

    void blur_others(Image& img, int frame) const {
        if (!options.blur_others) return;
        auto it = options.other_boxes.find(frame);
        if (it == options.other_boxes.end()) return;
        for (const auto& b : it->second)
            if (auto c = clamp_to_frame(b, img.width, img.height)) blur_region_in_place(img, *c, options.other_blur);
    }

    RenderEntry render(int frame, const BoxGeom* key_box) {
        RenderEntry entry{frame, RenderStatus::copied, {}};
        const fs::path src = frame_path(manifest, frame);
        const fs::path dst = output_dir / frame_file_name(frame);
        const bool has_others = options.blur_others && options.other_boxes.count(frame) > 0;
        try {
            if (!key_box && !has_others) {
                fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
                return entry;
            }
            Image img = load_png(src);
            if (key_box) {
                auto box = clamp_to_frame(*key_box, img.width, img.height);
                if (!box) throw DomainError("track box outside frame");
                entry.status = RenderStatus::privatized;
                if (const auto* blur = std::get_if<BlurMode>(&options.mode)) {
                    blur_region_in_place(img, *box, blur->spec);
                } else {
                    swap_into(img, *box, frame, entry);
                }
            } else {
                entry.status = RenderStatus::privatized;
            }
            blur_others(img, frame);
            save_png(img, dst);
        } catch (const std::exception& e) {
            entry.status = RenderStatus::failed;
            entry.message = e.what();
        }
        return entry;
    }

    void swap_into(Image& img, const BoxGeom& box, int frame, RenderEntry& entry) {
        const auto& mode = std::get<SwapMode>(options.mode);
        try {
            if (!swapper) swapper = mode.make_adapter();
            FaceCrop crop = extract_crop(img, box, mode.margin, frame);
            SwapResult result = apply_swap(crop, *swapper);
            composite(img, result, crop.region);
            return;
        } catch (const std::exception& e) {
            // The adapter stream may be out of sync now; start a fresh one next time.
            swapper.reset();
            entry.message = e.what();
        }
        switch (mode.fallback) {
            case SwapFallback::blur:
                blur_region_in_place(img, box, mode.fallback_blur);
                entry.status = RenderStatus::fallback;
                break;
            case SwapFallback::passthrough:
                entry.status = RenderStatus::fallback;
                break;
            case SwapFallback::fail:
                throw Error(entry.message);
        }
    }
};

}  // namespace

RenderLog privatize_session(const SessionManifest& manifest, std::span<const FaceObservation> track,
                            const PrivatizeOptions& options, const fs::path& output_dir) {
    if (const auto* blur = std::get_if<BlurMode>(&options.mode)) blur->spec.validate();
    if (const auto* swap = std::get_if<SwapMode>(&options.mode); swap && !swap->make_adapter)
        throw ValidationError("swap mode needs an adapter factory");
    fs::create_directories(output_dir);

    std::map<int, BoxGeom> boxes;
    for (const auto& o : track) boxes.insert_or_assign(o.frame, o.box);

    std::vector<RenderEntry> entries(static_cast<std::size_t>(manifest.frame_count));
    std::atomic<int> next{0};
    auto work = [&] {
        Worker worker{manifest, options, output_dir, nullptr};
        for (int f; (f = next++) < manifest.frame_count;) {
            auto it = boxes.find(f);
            entries[static_cast<std::size_t>(f)] = worker.render(f, it == boxes.end() ? nullptr : &it->second);
        }
    };
    const int threads = std::clamp(options.parallelism, 1, std::max(manifest.frame_count, 1));
    std::vector<std::thread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    RenderLog log{std::move(entries)};
    write_file_atomic(output_dir / "render_log.json", render_log_json(log));
    return log;
}

}  // namespace deid::privatize
