#include "support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>

#include "deid/core/frames.hpp"
#include "deid/error.hpp"

namespace fs = std::filesystem;

namespace deid::testing {

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::optional<BoxGeom> subject_box(const SubjectSpec& s, int frame) {
    if (frame < s.first_frame || frame > s.last_frame) return std::nullopt;
    const int t = frame - s.first_frame;
    return BoxGeom{static_cast<int>(std::floor(s.x0 + s.vx * t + 0.5)),
                   static_cast<int>(std::floor(s.y0 + s.vy * t + 0.5)), s.size, s.size};
}

Image render_frame(const VideoSpec& spec, int frame) {
    Image img(spec.width, spec.height);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = spec.background[c];
    for (const auto& s : spec.subjects) {
        auto box = subject_box(s, frame);
        if (!box) continue;
        for (int y = 0; y < box->h; ++y)
            for (int x = 0; x < box->w; ++x) {
                const int px = box->x + x, py = box->y + y;
                if (px < 0 || py < 0 || px >= spec.width || py >= spec.height) continue;
                const int tex = (x * 7 + y * 13) % 32;
                for (int c = 0; c < 3; ++c) img.at(px, py, c) = static_cast<std::uint8_t>(std::min(255, s.color[c] + tex));
            }
    }
    return img;
}

SessionManifest write_video(const fs::path& dir, const VideoSpec& spec, const std::string& id) {
    fs::create_directories(dir);
    for (int f = 0; f < spec.frame_count; ++f) save_png(render_frame(spec, f), dir / frame_file_name(f));
    SessionManifest m;
    m.session_id = id;
    m.frame_count = spec.frame_count;
    m.fps = 30.0;
    m.frame_width = spec.width;
    m.frame_height = spec.height;
    m.frame_source = dir.string();
    return m;
}

Image identity_face(int identity, int sample, int size) {
    std::mt19937_64 base(0x5eedULL * static_cast<std::uint64_t>(identity + 1));
    std::mt19937_64 noise(static_cast<std::uint64_t>(identity) * 1000003ULL + static_cast<std::uint64_t>(sample) + 7);
    constexpr int cells = 4;
    std::array<std::array<Rgb, cells>, cells> grid;
    for (auto& row : grid)
        for (auto& cell : row)
            for (auto& v : cell) v = static_cast<std::uint8_t>(base() % 256);
    std::uniform_int_distribution<int> jitter(-12, 12);
    Image img(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const Rgb& cell = grid[static_cast<std::size_t>(y * cells / size)][static_cast<std::size_t>(x * cells / size)];
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(cell[c] + jitter(noise), 0, 255));
        }
    return img;
}

CommandResult run_command(const std::string& command) {
    CommandResult r;
    FILE* p = ::popen(command.c_str(), "r");
    if (!p) throw IoError("popen failed: " + command);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int st = ::pclose(p);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

}  // namespace deid::testing
