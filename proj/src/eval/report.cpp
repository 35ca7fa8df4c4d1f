#include "deid/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "deid/error.hpp"

using nlohmann::json;
using nlohmann::ordered_json;

namespace deid::eval {

namespace {

bool features_equal(const FeatureDistances& a, const FeatureDistances& b) {
    return a.eyes == b.eyes && a.nose == b.nose && a.mouth == b.mouth;
}

bool landmarks_equal(const LandmarkSummary& a, const LandmarkSummary& b) {
    return a.faces_compared == b.faces_compared && a.overall == b.overall && features_equal(a.features, b.features);
}

bool counts_equal(const GazeCounts& a, const GazeCounts& b) {
    return a.total_frames == b.total_frames && a.thresholded_frames == b.thresholded_frames &&
           a.original_detected == b.original_detected && a.privatized_detected == b.privatized_detected &&
           a.both_detected == b.both_detected && a.agreeing == b.agreeing && a.newly_detected == b.newly_detected;
}

bool gaze_equal(const GazeResult& a, const GazeResult& b) {
    return counts_equal(a.counts, b.counts) && a.session_excluded == b.session_excluded &&
           a.pct_over_threshold == b.pct_over_threshold && a.pct_detected == b.pct_detected &&
           a.original_pct_detected == b.original_pct_detected && a.accuracy == b.accuracy;
}

bool expression_equal(const ExpressionResult& a, const ExpressionResult& b) {
    return a.compared == b.compared && a.skipped == b.skipped && a.agreement_rate == b.agreement_rate &&
           a.confusion == b.confusion && a.original_order == b.original_order &&
           a.privatized_order == b.privatized_order;
}

template <class T, class Eq>
bool optional_equal(const std::optional<T>& a, const std::optional<T>& b, Eq eq) {
    if (a.has_value() != b.has_value()) return false;
    return !a || eq(*a, *b);
}

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<Expression> order_from(const json& j) {
    std::vector<Expression> out;
    for (const auto& e : j) out.push_back(parse_expression(e.get<std::string>()));
    return out;
}

std::string join_order(const std::vector<Expression>& order) {
    std::string s;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i) s += '|';
        s += to_string(order[i]);
    }
    return s;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string Condition::str() const {
    switch (kind) {
        case Kind::original: return "original";
        case Kind::swap: return "swap";
        case Kind::blur: return "blur:" + scale.str();
    }
    return "original";
}

Condition Condition::parse(std::string_view text) {
    if (text == "original") return {};
    if (text == "swap") return {Kind::swap, {}};
    if (text.substr(0, 5) == "blur:") return {Kind::blur, privatize::BlurScale::parse(text.substr(5))};
    throw ValidationError("unknown condition '" + std::string(text) + "' (expected original, swap or blur:<scale>)");
}

RecognitionSection recognition_section(const RecognitionResult& result) {
    RecognitionSection s;
    s.recognizer = result.recognizer;
    s.queries = result.queries;
    s.failed_queries = result.failed_queries;
    for (const auto& [k, frac] : result.accuracy) s.accuracy_pct[k] = frac * 100.0;
    if (!result.ranking.ranks.empty()) {
        s.rank_median = result.ranking.median;
        s.rank_mean = result.ranking.mean;
        s.rank_sd = result.ranking.sd;
    }
    return s;
}

bool operator==(const EvalReport& a, const EvalReport& b) {
    return a.condition == b.condition && a.recognition == b.recognition &&
           optional_equal(a.landmarks, b.landmarks, landmarks_equal) && optional_equal(a.gaze, b.gaze, gaze_equal) &&
           optional_equal(a.expression, b.expression, expression_equal);
}

ordered_json report_to_json(const EvalReport& r) {
    ordered_json out;
    out["format"] = "deid.report/1";
    out["condition"] = r.condition.str();

    ordered_json rec;
    rec["status"] = r.recognition.empty() ? "empty" : "ok";
    rec["recognizers"] = ordered_json::array();
    for (const auto& s : r.recognition) {
        ordered_json e;
        e["recognizer"] = s.recognizer;
        e["queries"] = s.queries;
        e["failed_queries"] = s.failed_queries;
        ordered_json acc = ordered_json::object();
        for (const auto& [k, pct] : s.accuracy_pct) acc[std::to_string(k)] = pct;
        e["accuracy_pct"] = acc;
        e["rank_median"] = opt(s.rank_median);
        e["rank_mean"] = opt(s.rank_mean);
        e["rank_sd"] = opt(s.rank_sd);
        rec["recognizers"].push_back(e);
    }
    out["recognition"] = rec;

    ordered_json lm;
    if (r.landmarks && r.landmarks->faces_compared > 0) {
        lm["status"] = "ok";
        lm["faces_compared"] = r.landmarks->faces_compared;
        lm["overall"] = r.landmarks->overall;
        lm["eyes"] = r.landmarks->features.eyes;
        lm["nose"] = r.landmarks->features.nose;
        lm["mouth"] = r.landmarks->features.mouth;
    } else {
        lm["status"] = "empty";
        lm["faces_compared"] = 0;
    }
    out["landmarks"] = lm;

    ordered_json gz;
    if (r.gaze && r.gaze->counts.total_frames > 0) {
        const auto& g = *r.gaze;
        gz["status"] = g.session_excluded ? "excluded" : "ok";
        gz["total_frames"] = g.counts.total_frames;
        gz["thresholded_frames"] = g.counts.thresholded_frames;
        gz["original_detected"] = g.counts.original_detected;
        gz["privatized_detected"] = g.counts.privatized_detected;
        gz["both_detected"] = g.counts.both_detected;
        gz["agreeing"] = g.counts.agreeing;
        gz["newly_detected"] = g.counts.newly_detected;
        gz["pct_over_threshold"] = opt(g.pct_over_threshold);
        gz["pct_gaze_detected"] = opt(g.pct_detected);
        gz["original_pct_detected"] = opt(g.original_pct_detected);
        gz["accuracy"] = opt(g.accuracy);
    } else {
        gz["status"] = "empty";
    }
    out["gaze"] = gz;

    ordered_json ex;
    if (r.expression && (r.expression->compared > 0 || r.expression->skipped > 0)) {
        const auto& e = *r.expression;
        ex["status"] = e.compared > 0 ? "ok" : "empty";
        ex["compared"] = e.compared;
        ex["skipped"] = e.skipped;
        ex["agreement_rate"] = opt(e.agreement_rate);
        ordered_json labels = ordered_json::array();
        for (auto l : kAllExpressions) labels.push_back(std::string(to_string(l)));
        ex["labels"] = labels;
        ex["confusion"] = e.confusion;
        ordered_json oo = ordered_json::array(), po = ordered_json::array();
        for (auto l : e.original_order) oo.push_back(std::string(to_string(l)));
        for (auto l : e.privatized_order) po.push_back(std::string(to_string(l)));
        ex["original_order"] = oo;
        ex["privatized_order"] = po;
    } else {
        ex["status"] = "empty";
    }
    out["expression"] = ex;
    return out;
}

EvalReport report_from_json(const json& j) {
    try {
        if (j.value("format", "") != "deid.report/1") throw ValidationError("not a deid.report/1 document");
        EvalReport r;
        r.condition = Condition::parse(j.at("condition").get<std::string>());
        for (const auto& e : j.at("recognition").at("recognizers")) {
            RecognitionSection s;
            s.recognizer = e.at("recognizer").get<std::string>();
            s.queries = e.at("queries").get<int>();
            s.failed_queries = e.at("failed_queries").get<int>();
            for (const auto& [k, v] : e.at("accuracy_pct").items()) s.accuracy_pct[std::stoi(k)] = v.get<double>();
            s.rank_median = opt_from(e, "rank_median");
            s.rank_mean = opt_from(e, "rank_mean");
            s.rank_sd = opt_from(e, "rank_sd");
            r.recognition.push_back(std::move(s));
        }
        const auto& lm = j.at("landmarks");
        if (lm.at("status") == "ok") {
            LandmarkSummary s;
            s.faces_compared = lm.at("faces_compared").get<int>();
            s.overall = lm.at("overall").get<double>();
            s.features = {lm.at("eyes").get<double>(), lm.at("nose").get<double>(), lm.at("mouth").get<double>()};
            r.landmarks = s;
        }
        const auto& gz = j.at("gaze");
        if (gz.at("status") != "empty") {
            GazeResult g;
            g.session_excluded = gz.at("status") == "excluded";
            g.counts.total_frames = gz.at("total_frames").get<int>();
            g.counts.thresholded_frames = gz.at("thresholded_frames").get<int>();
            g.counts.original_detected = gz.at("original_detected").get<int>();
            g.counts.privatized_detected = gz.at("privatized_detected").get<int>();
            g.counts.both_detected = gz.at("both_detected").get<int>();
            g.counts.agreeing = gz.at("agreeing").get<int>();
            g.counts.newly_detected = gz.at("newly_detected").get<int>();
            g.pct_over_threshold = opt_from(gz, "pct_over_threshold");
            g.pct_detected = opt_from(gz, "pct_gaze_detected");
            g.original_pct_detected = opt_from(gz, "original_pct_detected");
            g.accuracy = opt_from(gz, "accuracy");
            r.gaze = g;
        }
        const auto& ex = j.at("expression");
        if (ex.contains("compared")) {
            ExpressionResult e;
            e.compared = ex.at("compared").get<int>();
            e.skipped = ex.at("skipped").get<int>();
            e.agreement_rate = opt_from(ex, "agreement_rate");
            e.confusion = ex.at("confusion").get<ConfusionMatrix>();
            e.original_order = order_from(ex.at("original_order"));
            e.privatized_order = order_from(ex.at("privatized_order"));
            r.expression = e;
        }
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
}

std::string report_to_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "condition,section,name,metric,value\n";
    const std::string cond = csv_field(r.condition.str());
    auto row = [&](const char* section, const std::string& name, const std::string& metric, const std::string& value) {
        out << cond << ',' << section << ',' << csv_field(name) << ',' << csv_field(metric) << ',' << csv_field(value)
            << '\n';
    };

    if (r.recognition.empty()) row("recognition", "", "status", "empty");
    for (const auto& s : r.recognition) {
        row("recognition", s.recognizer, "status", "ok");
        row("recognition", s.recognizer, "queries", std::to_string(s.queries));
        row("recognition", s.recognizer, "failed_queries", std::to_string(s.failed_queries));
        for (const auto& [k, pct] : s.accuracy_pct) row("recognition", s.recognizer, "accuracy_pct@" + std::to_string(k), num(pct));
        row("recognition", s.recognizer, "rank_median", num(s.rank_median));
        row("recognition", s.recognizer, "rank_mean", num(s.rank_mean));
        row("recognition", s.recognizer, "rank_sd", num(s.rank_sd));
    }

    if (r.landmarks && r.landmarks->faces_compared > 0) {
        const auto& l = *r.landmarks;
        row("landmarks", "", "status", "ok");
        row("landmarks", "", "faces_compared", std::to_string(l.faces_compared));
        row("landmarks", "", "overall", num(l.overall));
        row("landmarks", "", "eyes", num(l.features.eyes));
        row("landmarks", "", "nose", num(l.features.nose));
        row("landmarks", "", "mouth", num(l.features.mouth));
    } else {
        row("landmarks", "", "status", "empty");
    }

    if (r.gaze && r.gaze->counts.total_frames > 0) {
        const auto& g = *r.gaze;
        row("gaze", "", "status", g.session_excluded ? "excluded" : "ok");
        row("gaze", "", "total_frames", std::to_string(g.counts.total_frames));
        row("gaze", "", "thresholded_frames", std::to_string(g.counts.thresholded_frames));
        row("gaze", "", "newly_detected", std::to_string(g.counts.newly_detected));
        row("gaze", "", "pct_over_threshold", num(g.pct_over_threshold));
        row("gaze", "", "pct_gaze_detected", num(g.pct_detected));
        row("gaze", "", "original_pct_detected", num(g.original_pct_detected));
        row("gaze", "", "accuracy", num(g.accuracy));
    } else {
        row("gaze", "", "status", "empty");
    }

    if (r.expression && r.expression->compared > 0) {
        const auto& e = *r.expression;
        row("expression", "", "status", "ok");
        row("expression", "", "compared", std::to_string(e.compared));
        row("expression", "", "skipped", std::to_string(e.skipped));
        row("expression", "", "agreement_rate", num(e.agreement_rate));
        for (std::size_t a = 0; a < kExpressionCount; ++a)
            for (std::size_t b = 0; b < kExpressionCount; ++b)
                row("expression", std::string(to_string(kAllExpressions[a])),
                    "confusion:" + std::string(to_string(kAllExpressions[b])), std::to_string(e.confusion[a][b]));
        row("expression", "", "original_order", join_order(e.original_order));
        row("expression", "", "privatized_order", join_order(e.privatized_order));
    } else {
        row("expression", "", "status", "empty");
    }
    return out.str();
}

std::string emit_report(const EvalReport& report, ReportFormat format) {
    if (format == ReportFormat::csv) return report_to_csv(report);
    return report_to_json(report).dump(2) + "\n";
}

std::string render_recognition_table(std::span<const EvalReport> reports) {
    std::vector<std::string> recognizers;
    for (const auto& r : reports)
        for (const auto& s : r.recognition)
            if (std::find(recognizers.begin(), recognizers.end(), s.recognizer) == recognizers.end())
                recognizers.push_back(s.recognizer);

    std::ostringstream out;
    for (const auto& name : recognizers) {
        std::vector<std::vector<std::string>> grid;
        std::vector<std::string> header{name};
        for (const auto& r : reports) header.push_back(r.condition.str());
        grid.push_back(header);
        auto section_of = [&](const EvalReport& r) -> const RecognitionSection* {
            for (const auto& s : r.recognition)
                if (s.recognizer == name) return &s;
            return nullptr;
        };
        for (int k : kReportedKs) {
            std::vector<std::string> line{"K=" + std::to_string(k)};
            for (const auto& r : reports) {
                const auto* s = section_of(r);
                auto it = s ? s->accuracy_pct.find(k) : decltype(s->accuracy_pct.end()){};
                line.push_back(s && it != s->accuracy_pct.end() ? fixed(it->second, 2) + "%" : "-");
            }
            grid.push_back(line);
        }
        std::vector<std::string> med{"Median"}, mean{"Mean\xC2\xB1SD"};
        for (const auto& r : reports) {
            const auto* s = section_of(r);
            med.push_back(s && s->rank_median ? fixed(*s->rank_median, 1) : "-");
            mean.push_back(s && s->rank_mean ? fixed(*s->rank_mean, 2) + "\xC2\xB1" + fixed(s->rank_sd.value_or(0.0), 2)
                                             : "-");
        }
        grid.push_back(med);
        grid.push_back(mean);

        // "±" is two bytes but one column wide.
        auto width = [](const std::string& s) {
            std::size_t w = 0;
            for (unsigned char c : s) w += (c & 0xC0) != 0x80;
            return w;
        };
        std::vector<std::size_t> widths(header.size(), 0);
        for (const auto& line : grid)
            for (std::size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], width(line[c]));
        for (const auto& line : grid) {
            for (std::size_t c = 0; c < line.size(); ++c) {
                if (c) out << "  ";
                const std::string pad(widths[c] - width(line[c]), ' ');
                out << (c == 0 ? line[c] + pad : pad + line[c]);
            }
            out << '\n';
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace deid::eval
