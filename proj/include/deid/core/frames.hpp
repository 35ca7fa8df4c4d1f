#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "deid/core/types.hpp"

namespace deid {

/// Frame files are named by zero-padded six-digit index: 000000.png, 000001.png, ...
inline constexpr int kFrameNameDigits = 6;

std::string frame_file_name(int index);

std::filesystem::path frame_path(const SessionManifest& manifest, int index);

struct FrameDirectoryInfo {
    int frame_count = 0;
    int width = 0;
    int height = 0;
};

/// Validates a frame directory: only contiguous `NNNNNN.png` files starting at
/// zero, all with the same dimensions as the first frame. Throws
/// ValidationError with the reason otherwise (including an empty directory).
FrameDirectoryInfo scan_frame_directory(const std::filesystem::path& dir);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace deid
