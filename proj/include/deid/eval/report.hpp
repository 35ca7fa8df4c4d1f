#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "deid/eval/expression.hpp"
#include "deid/eval/gaze.hpp"
#include "deid/eval/landmarks.hpp"
#include "deid/eval/recognition.hpp"
#include "deid/privatize/blur.hpp"

namespace deid::eval {

/// Privatization condition a report describes: "original", "swap" or
/// "blur:<scale>".
struct Condition {
    enum class Kind { original, swap, blur };
    Kind kind = Kind::original;
    privatize::BlurScale scale{};

    std::string str() const;
    static Condition parse(std::string_view text);
    bool operator==(const Condition& o) const { return kind == o.kind && (kind != Kind::blur || scale == o.scale); }
};

struct RecognitionSection {
    std::string recognizer;
    int queries = 0;
    int failed_queries = 0;
    std::map<int, double> accuracy_pct;  // K -> percent
    std::optional<double> rank_median;
    std::optional<double> rank_mean;
    std::optional<double> rank_sd;

    bool operator==(const RecognitionSection&) const = default;
};

RecognitionSection recognition_section(const RecognitionResult& result);

/// Report for one condition. Absent or zero-count sections are rendered as
/// "empty" rather than omitted.
struct EvalReport {
    Condition condition;
    std::vector<RecognitionSection> recognition;
    std::optional<LandmarkSummary> landmarks;
    std::optional<GazeResult> gaze;
    std::optional<ExpressionResult> expression;
};

bool operator==(const EvalReport& a, const EvalReport& b);

enum class ReportFormat { json, csv };

nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// CSV columns: condition,section,name,metric,value (see docs/formats.md).
std::string report_to_csv(const EvalReport& report);

std::string emit_report(const EvalReport& report, ReportFormat format);

/// Text table with one block per recognizer, one column per condition, and
/// rows K=1, K=2, K=5, K=10, Median, Mean±SD.
std::string render_recognition_table(std::span<const EvalReport> reports);

}  // namespace deid::eval
