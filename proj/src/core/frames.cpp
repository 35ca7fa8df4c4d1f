#include "deid/core/frames.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <unistd.h>

#include "deid/core/image.hpp"
#include "deid/error.hpp"

namespace fs = std::filesystem;

namespace deid {

std::string frame_file_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*d.png", kFrameNameDigits, index);
    return buf;
}

fs::path frame_path(const SessionManifest& manifest, int index) {
    return fs::path(manifest.frame_source) / frame_file_name(index);
}

FrameDirectoryInfo scan_frame_directory(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw ValidationError("not a directory: " + dir.string());

    std::vector<int> indices;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (entry.path().extension() != ".png") continue;
        const std::string stem = entry.path().stem().string();
        if (stem.size() != static_cast<std::size_t>(kFrameNameDigits) ||
            !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; }))
            throw ValidationError("unexpected frame file name: " + name);
        indices.push_back(std::stoi(stem));
    }
    if (indices.empty()) throw ValidationError("no PNG frames in " + dir.string());
    std::sort(indices.begin(), indices.end());
    for (std::size_t i = 0; i < indices.size(); ++i)
        if (indices[i] != static_cast<int>(i))
            throw ValidationError("frame numbering is not contiguous from 0: missing " + frame_file_name(static_cast<int>(i)));

    FrameDirectoryInfo info;
    info.frame_count = static_cast<int>(indices.size());
    try {
        std::tie(info.width, info.height) = png_dimensions(dir / frame_file_name(0));
    } catch (const IoError& e) {
        throw ValidationError(e.what());
    }
    if (info.width < 1 || info.height < 1) throw ValidationError("first frame has zero size");
    for (int i = 1; i < info.frame_count; ++i) {
        std::pair<int, int> dims;
        try {
            dims = png_dimensions(dir / frame_file_name(i));
        } catch (const IoError& e) {
            throw ValidationError(e.what());
        }
        if (dims != std::pair{info.width, info.height})
            throw ValidationError(frame_file_name(i) + " is " + std::to_string(dims.first) + "x" +
                                  std::to_string(dims.second) + ", expected " + std::to_string(info.width) + "x" +
                                  std::to_string(info.height));
    }
    return info;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
    static std::atomic<unsigned long> counter{0};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw IoError("cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot rename into " + path.string() + ": " + ec.message());
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace deid
