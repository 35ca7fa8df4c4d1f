#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "deid/core/image.hpp"
#include "deid/core/types.hpp"

namespace deid::testing {

#ifdef DEID_STUB_ADAPTER
inline const std::string kStub = DEID_STUB_ADAPTER;
#endif
#ifdef DEID_CLI
inline const std::string kCli = DEID_CLI;
#endif

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "deid");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

using Rgb = std::array<std::uint8_t, 3>;

// A textured square moving at constant velocity while it is in view.
struct SubjectSpec {
    int first_frame = 0;
    int last_frame = 0;
    double x0 = 0.0;
    double y0 = 0.0;
    double vx = 0.0;
    double vy = 0.0;
    int size = 16;
    Rgb color{200, 120, 80};
};

struct VideoSpec {
    int frame_count = 10;
    int width = 64;
    int height = 48;
    Rgb background{30, 30, 30};
    std::vector<SubjectSpec> subjects;
};

/// Box of the subject on `frame`, or nothing when it is out of view.
std::optional<BoxGeom> subject_box(const SubjectSpec& s, int frame);

Image render_frame(const VideoSpec& spec, int frame);

/// Writes NNNNNN.png frames into `dir`; returns the manifest for them.
SessionManifest write_video(const std::filesystem::path& dir, const VideoSpec& spec, const std::string& id = "test");

/// Distinct blocky pattern per identity with a little per-sample noise, so
/// several samples of one identity sit close in pixel space.
Image identity_face(int identity, int sample, int size);

/// Runs a shell command, returning its exit status and captured stdout.
struct CommandResult {
    int status = -1;
    std::string out;
};
CommandResult run_command(const std::string& command);

std::string shell_quote(const std::string& s);

}  // namespace deid::testing
