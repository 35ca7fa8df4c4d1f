// Reference adapter processes for tests and demos. Each mode speaks one of the
// adapter wire protocols over stdin/stdout:
//   detect      JSON lines; boxes are the connected non-background regions
//   swap        binary crop protocol (identity, blur, wrong-dims, fail-after)
//   embed       JSON lines with a {"dim":D} handshake; pixel downsample vector
//   gaze        JSON lines; ratios from the mean red/green of the face box
//   expression  JSON lines; label from the dominant colour channel
//   landmarks   JSON lines; 68 points on a grid shifted by the box centroid
//   garbage     prints a non-JSON line and exits

#include <poll.h>
#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deid/core/image.hpp"
#include "deid/eval/adapters.hpp"
#include "deid/privatize/blur.hpp"

using nlohmann::json;

namespace {

class StdinReader {
public:
    std::optional<std::string> line() {
        for (;;) {
            if (auto nl = buf_.find('\n'); nl != std::string::npos) {
                std::string out = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                return out;
            }
            if (!fill()) return std::nullopt;
        }
    }

    bool bytes(std::vector<std::uint8_t>& out, std::size_t n) {
        while (buf_.size() < n)
            if (!fill()) return false;
        out.assign(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n));
        buf_.erase(0, n);
        return true;
    }

    bool ready(int timeout_ms) {
        if (buf_.find('\n') != std::string::npos) return true;
        pollfd p{0, POLLIN, 0};
        return ::poll(&p, 1, timeout_ms) > 0;
    }

private:
    bool fill() {
        char tmp[65536];
        const ssize_t n = ::read(0, tmp, sizeof tmp);
        if (n <= 0) return false;
        buf_.append(tmp, static_cast<std::size_t>(n));
        return true;
    }

    std::string buf_;
};

void emit(const json& j) {
    const std::string s = j.dump() + "\n";
    std::fwrite(s.data(), 1, s.size(), stdout);
    std::fflush(stdout);
}

void emit_raw(const std::vector<std::uint8_t>& bytes) {
    std::fwrite(bytes.data(), 1, bytes.size(), stdout);
}

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Bounding boxes of 4-connected regions that differ from the top-left pixel.
std::vector<deid::BoxGeom> find_faces(const deid::Image& img, int min_area) {
    const int w = img.width, h = img.height;
    auto differs = [&](int x, int y) {
        int d = 0;
        for (int c = 0; c < img.channels; ++c) d += std::abs(int(img.at(x, y, c)) - int(img.at(0, 0, c)));
        return d > 24;
    };
    std::vector<char> seen(static_cast<std::size_t>(w) * h, 0);
    std::vector<deid::BoxGeom> out;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (seen[i] || !differs(x, y)) continue;
            int x0 = x, x1 = x, y0 = y, y1 = y, area = 0;
            std::vector<std::pair<int, int>> stack{{x, y}};
            seen[i] = 1;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                ++area;
                x0 = std::min(x0, cx), x1 = std::max(x1, cx), y0 = std::min(y0, cy), y1 = std::max(y1, cy);
                const int nx[4] = {cx - 1, cx + 1, cx, cx}, ny[4] = {cy, cy, cy - 1, cy + 1};
                for (int k = 0; k < 4; ++k) {
                    if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
                    const std::size_t j = static_cast<std::size_t>(ny[k]) * w + nx[k];
                    if (!seen[j] && differs(nx[k], ny[k])) {
                        seen[j] = 1;
                        stack.emplace_back(nx[k], ny[k]);
                    }
                }
            }
            if (area >= min_area) out.push_back({x0, y0, x1 - x0 + 1, y1 - y0 + 1});
        }
    return out;
}

int run_detect(double dropout, std::uint64_t seed, bool reorder, int min_area) {
    StdinReader in;
    auto answer = [&](const std::string& line) {
        const json req = json::parse(line);
        const int frame = req.at("frame_index").get<int>();
        json resp{{"frame_index", frame}, {"boxes", json::array()}};
        try {
            const double u = double(mix(seed ^ (std::uint64_t(frame) << 1)) >> 11) / double(1ULL << 53);
            if (u >= dropout) {
                const auto img = deid::load_png(req.at("frame_path").get<std::string>());
                for (const auto& b : find_faces(img, min_area))
                    resp["boxes"].push_back({{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"confidence", 0.9}});
            }
        } catch (const std::exception& e) {
            resp["error"] = e.what();
        }
        emit(resp);
    };
    while (auto line = in.line()) {
        if (reorder && in.ready(50)) {
            if (auto second = in.line()) {
                answer(*second);
                answer(*line);
                continue;
            }
        }
        answer(*line);
    }
    return 0;
}

int run_swap(const std::string& mode, const std::string& scale, int fail_after) {
    StdinReader in;
    const deid::privatize::BlurSpec spec{deid::privatize::BlurScale::parse(scale)};
    int served = 0;
    while (auto line = in.line()) {
        const json req = json::parse(*line);
        const int w = req.at("width").get<int>(), h = req.at("height").get<int>();
        deid::Image crop(w, h, 3);
        if (!in.bytes(crop.pixels, static_cast<std::size_t>(w) * h * 3)) return 1;
        if (mode == "fail-after" && served >= fail_after) return 3;
        ++served;
        int ow = w, oh = h;
        deid::Image out = crop;
        if (mode == "blur") {
            deid::privatize::blur_region_in_place(out, {0, 0, w, h}, spec);
        } else if (mode == "wrong-dims") {
            ow = w + 1;
            out = deid::Image(ow, oh, 3);
        }
        emit(json{{"frame_index", req.at("frame_index")}, {"width", ow}, {"height", oh}});
        emit_raw(out.pixels);
        emit_raw(std::vector<std::uint8_t>(static_cast<std::size_t>(ow) * oh, 255));
        std::fflush(stdout);
    }
    return 0;
}

deid::Image face_of(const json& req) {
    const auto img = deid::load_png(req.at("image_path").get<std::string>());
    if (auto b = req.find("box"); b != req.end()) {
        deid::BoxGeom box{b->at("x").get<int>(), b->at("y").get<int>(), b->at("w").get<int>(), b->at("h").get<int>()};
        if (auto c = deid::clamp_to_frame(box, img.width, img.height)) return deid::crop_image(img, *c);
        throw std::runtime_error("box outside image");
    }
    return img;
}

std::array<double, 3> channel_means(const deid::Image& face) {
    std::array<double, 3> m{};
    for (int y = 0; y < face.height; ++y)
        for (int x = 0; x < face.width; ++x)
            for (int c = 0; c < 3; ++c) m[static_cast<std::size_t>(c)] += face.at(x, y, c);
    for (auto& v : m) v /= 255.0 * face.width * face.height;
    return m;
}

template <typename F>
int serve_json(const json& handshake, F&& payload) {
    StdinReader in;
    emit(handshake);
    while (auto line = in.line()) {
        const json req = json::parse(*line);
        json resp{{"frame_index", req.at("frame_index")}};
        try {
            payload(req, resp);
        } catch (const std::exception& e) {
            resp["error"] = e.what();
        }
        emit(resp);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reference adapter processes"};
    app.require_subcommand(1);

    double dropout = 0.0;
    std::uint64_t seed = 1;
    bool reorder = false;
    int min_area = 16;
    auto* detect = app.add_subcommand("detect", "JSON-lines face detector");
    detect->add_option("--dropout", dropout, "fraction of frames answered with no boxes")->check(CLI::Range(0.0, 1.0));
    detect->add_option("--seed", seed);
    detect->add_flag("--reorder", reorder, "answer pipelined requests out of order");
    detect->add_option("--min-area", min_area);

    std::string swap_mode = "identity", scale = "1/5";
    int fail_after = 0;
    auto* swap = app.add_subcommand("swap", "binary face swap");
    swap->add_option("--mode", swap_mode)->check(CLI::IsMember({"identity", "blur", "wrong-dims", "fail-after"}));
    swap->add_option("--scale", scale);
    swap->add_option("--fail-after", fail_after);

    int grid = 8;
    auto* embed = app.add_subcommand("embed", "pixel downsample recognizer");
    embed->add_option("--grid", grid)->check(CLI::PositiveNumber);

    auto* gaze = app.add_subcommand("gaze", "colour-driven gaze ratios");
    auto* expression = app.add_subcommand("expression", "colour-driven expression label");
    auto* landmarks = app.add_subcommand("landmarks", "grid landmarks");
    auto* garbage = app.add_subcommand("garbage", "violates the protocol");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*detect) return run_detect(dropout, seed, reorder, min_area);
        if (*swap) return run_swap(swap_mode, scale, fail_after);
        if (*embed) {
            deid::eval::DownsampleEmbedder embedder(grid);
            return serve_json(json{{"dim", grid * grid * 3}}, [&](const json& req, json& resp) {
                resp["vector"] = embedder.embed(face_of(req), req.at("frame_index").get<int>());
            });
        }
        if (*gaze) {
            return serve_json(json::object(), [](const json& req, json& resp) {
                const auto m = channel_means(face_of(req));
                resp["horizontal_ratio"] = m[0];
                resp["vertical_ratio"] = m[1];
            });
        }
        if (*expression) {
            return serve_json(json{{"labels", {"Angry", "Disgust", "Fear", "Happy", "Sad", "Surprise", "Neutral"}}},
                              [](const json& req, json& resp) {
                                  const auto m = channel_means(face_of(req));
                                  const char* label = "Neutral";
                                  if (m[0] > m[1] + 0.05 && m[0] > m[2] + 0.05) label = "Angry";
                                  else if (m[1] > m[0] + 0.05 && m[1] > m[2] + 0.05) label = "Happy";
                                  else if (m[2] > m[0] + 0.05 && m[2] > m[1] + 0.05) label = "Sad";
                                  resp["label"] = label;
                              });
        }
        if (*landmarks) {
            return serve_json(json::object(), [](const json& req, json& resp) {
                const deid::Image face = face_of(req);
                double sx = 0, sy = 0, total = 0;
                for (int y = 0; y < face.height; ++y)
                    for (int x = 0; x < face.width; ++x) {
                        const double v = face.at(x, y, 0) + face.at(x, y, 1) + face.at(x, y, 2);
                        sx += v * x, sy += v * y, total += v;
                    }
                const double cx = total > 0 ? sx / total : face.width / 2.0;
                const double cy = total > 0 ? sy / total : face.height / 2.0;
                double ox = 0, oy = 0;
                if (auto b = req.find("box"); b != req.end()) ox = b->at("x").get<int>(), oy = b->at("y").get<int>();
                json pts = json::array();
                for (int i = 0; i < 68; ++i) {
                    const double gx = (i % 8 + 0.5) / 8.0 * face.width, gy = (i / 8 + 0.5) / 9.0 * face.height;
                    pts.push_back({ox + gx + (cx - face.width / 2.0) * 0.1, oy + gy + (cy - face.height / 2.0) * 0.1});
                }
                resp["points"] = pts;
            });
        }
        if (*garbage) {
            std::puts("this is not json");
            std::fflush(stdout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "stub adapter: %s\n", e.what());
        return 1;
    }
    return 0;
}
