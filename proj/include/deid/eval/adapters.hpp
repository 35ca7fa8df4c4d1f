#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "deid/adapter/process.hpp"
#include "deid/core/image.hpp"
#include "deid/eval/expression.hpp"
#include "deid/eval/gaze.hpp"
#include "deid/eval/landmarks.hpp"
#include "deid/eval/recognition.hpp"

// Analysis models (embed, landmarks, gaze, expression) speak the same
// JSON-lines pattern as the detector. On start the process prints one
// handshake line: {"dim":D} for embedders, optionally with "metric":"cosine",
// and any object (e.g. {"labels":[...]}) for the others. Each request is
//   {"op":OP,"frame_index":N,"image_path":"...","box":{"x":..,"y":..,"w":..,"h":..}}
// and each response echoes frame_index with the op-specific payload, or
// carries "error" for a per-frame failure.

namespace deid::eval {

class ModelProcess {
public:
    ModelProcess(const std::string& command, std::string op);

    const nlohmann::json& handshake() const { return handshake_; }

    /// Throws ProtocolError on malformed or mismatched responses.
    nlohmann::json query(int frame_index, const std::filesystem::path& image, const std::optional<BoxGeom>& box);

private:
    adapter::JsonLineChannel channel_;
    std::string op_;
    nlohmann::json handshake_;
};

/// Per-frame payload provider for one analysis op.
class AnalysisSource {
public:
    virtual ~AnalysisSource() = default;
    /// Payload for the face, or nullopt when the frame has none.
    virtual std::optional<nlohmann::json> lookup(int frame_index, const std::filesystem::path& image,
                                                 const BoxGeom& box) = 0;
};

class ProcessAnalysis final : public AnalysisSource {
public:
    ProcessAnalysis(const std::string& command, std::string op) : model_(command, std::move(op)) {}
    std::optional<nlohmann::json> lookup(int frame_index, const std::filesystem::path& image, const BoxGeom& box) override;

private:
    ModelProcess model_;
};

/// Batch file: a JSON array of payload objects, each with "frame_index".
class BatchAnalysis final : public AnalysisSource {
public:
    explicit BatchAnalysis(const std::filesystem::path& file);
    explicit BatchAnalysis(std::map<int, nlohmann::json> table) : table_(std::move(table)) {}
    std::optional<nlohmann::json> lookup(int frame_index, const std::filesystem::path& image, const BoxGeom& box) override;

private:
    std::map<int, nlohmann::json> table_;
};

std::map<int, nlohmann::json> load_batch_file(const std::filesystem::path& file);

// Payload parsers. Missing or null payload fields mean "not detected".
std::optional<LandmarkSet> parse_landmarks(const nlohmann::json& payload, int frame, const BoxGeom& box);
GazeSample parse_gaze(const nlohmann::json& payload, int frame, int face_min_side);
std::optional<ExpressionLabel> parse_expression_label(const nlohmann::json& payload, int frame);
std::vector<double> parse_embedding(const nlohmann::json& payload, std::size_t expected_dim);

/// Face recognizer producing one feature vector per face image.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string name() const = 0;
    /// Throws on failure; callers count the face as a failed query.
    virtual std::vector<double> embed(const Image& face, int frame_index) = 0;
    /// Metric the recognizer asks for, if it declares one.
    virtual std::optional<DistanceMetric> declared_metric() const { return std::nullopt; }
};

/// Pixel-space embedder: the face resized to grid x grid cells by area
/// averaging, RGB scaled to [0,1]. Stands in for a neural recognizer in tests
/// and synthetic sweeps.
class DownsampleEmbedder final : public Embedder {
public:
    explicit DownsampleEmbedder(int grid = 8) : grid_(grid) {}
    std::string name() const override { return "downsample" + std::to_string(grid_); }
    std::vector<double> embed(const Image& face, int frame_index) override;

private:
    int grid_;
};

/// Recognizer running as a child process; faces are handed over as PNG files
/// in a private temporary directory.
class ProcessEmbedder final : public Embedder {
public:
    ProcessEmbedder(const std::string& command, std::string name);
    ~ProcessEmbedder() override;
    std::string name() const override { return name_; }
    std::vector<double> embed(const Image& face, int frame_index) override;
    std::size_t dim() const { return dim_; }
    std::optional<DistanceMetric> declared_metric() const override { return metric_; }

private:
    ModelProcess model_;
    std::string name_;
    std::size_t dim_ = 0;
    std::optional<DistanceMetric> metric_;
    std::filesystem::path scratch_;
    long counter_ = 0;
};

}  // namespace deid::eval
