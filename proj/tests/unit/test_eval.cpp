#include <doctest.h>

#include <random>

#include "deid/core/frames.hpp"
#include "deid/error.hpp"
#include "deid/eval/adapters.hpp"
#include "deid/eval/expression.hpp"
#include "deid/eval/gaze.hpp"
#include "deid/eval/landmarks.hpp"
#include "deid/eval/recognition.hpp"
#include "deid/eval/report.hpp"
#include "deid/eval/session_eval.hpp"
#include "deid/eval/sweep.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace deid;
using namespace deid::eval;
using deid::testing::TempDir;

namespace {

EmbeddingRecord rec(std::string id, std::vector<double> v) { return {std::move(id), "", std::move(v), "r"}; }

LandmarkSet face(BoxGeom box, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LandmarkSet s;
    s.box = box;
    for (auto& p : s.points) p = {box.x + u(rng) * box.w, box.y + u(rng) * box.h};
    return s;
}

LandmarkSet shifted(LandmarkSet s, LandmarkRange r, double dx, double dy) {
    for (std::size_t i = r.first; i <= r.last; ++i) s.points[i].x += dx, s.points[i].y += dy;
    return s;
}

std::vector<ExpressionLabel> labels(std::initializer_list<Expression> l) {
    std::vector<ExpressionLabel> out;
    int f = 0;
    for (auto e : l) out.push_back({f++, e});
    return out;
}

}  // namespace

TEST_CASE("rank-K on the worked example") {
    const std::vector<EmbeddingRecord> refs{rec("A", {0.1, 0}), rec("B", {1, 0}), rec("B", {1, 1}), rec("C", {2, 0}),
                                            rec("A", {5, 5})};
    const std::vector<EmbeddingRecord> qa{rec("A", {0, 0})}, qb{rec("B", {0, 0})};
    CHECK(rank_k_accuracy(qa, refs, 1) == 1.0);
    CHECK(rank_k_accuracy(qb, refs, 1) == 0.0);
    CHECK(rank_k_accuracy(qb, refs, 2) == 1.0);
    CHECK(query_ranks(qb, refs) == std::vector<int>{2});
    CHECK(identity_ranking(qb, refs).ranks == std::vector<int>{2});
    const std::vector<EmbeddingRecord> self{rec("C", {2, 0})};
    CHECK(query_ranks(self, refs) == std::vector<int>{1});
    CHECK(rank_k_accuracy(qa, refs, 1, DistanceMetric::euclidean, 1) == 0.5);
}

TEST_CASE("ranking statistics") {
    const auto s = ranking_stats({1, 3});
    CHECK(s.median == 2.0);
    CHECK(s.mean == 2.0);
    CHECK(s.sd == 1.0);
    CHECK(ranking_stats({4, 1, 2}).median == 2.0);
}

TEST_CASE("recognition input validation") {
    const std::vector<EmbeddingRecord> refs{rec("A", {0, 0})};
    CHECK_THROWS_AS(query_ranks(std::vector<EmbeddingRecord>{rec("A", {0, 0, 0})}, refs), ValidationError);
    CHECK_THROWS_AS(query_ranks(std::vector<EmbeddingRecord>{rec("A", {0, 0})}, {}), ValidationError);
    CHECK_THROWS_AS(query_ranks(std::vector<EmbeddingRecord>{rec("A", {NAN, 0})}, refs), ValidationError);
    CHECK_THROWS_AS(identity_ranking(std::vector<EmbeddingRecord>{rec("Z", {0, 0})}, refs), ValidationError);
    CHECK(query_ranks(std::vector<EmbeddingRecord>{rec("Z", {0, 0})}, refs) == std::vector<int>{kNoRank});
    auto other = refs;
    other.push_back({"B", "", {1, 1}, "other"});
    CHECK_THROWS_AS(query_ranks(refs, other), ValidationError);
    CHECK(parse_metric("cosine") == DistanceMetric::cosine);
    CHECK_THROWS_AS(parse_metric("manhattan"), ValidationError);
}

TEST_CASE("property: recognition matches the sort oracle") {
    std::mt19937_64 rng(42);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::normal_distribution<double> g(0.0, 1.0);
    for (int iter = 0; iter < 120; ++iter) {
        const int ids = pick(1, 12), dim = pick(1, 8), per = pick(1, 5);
        // coarse values make exact distance ties common
        auto vec = [&] {
            std::vector<double> v(static_cast<std::size_t>(dim));
            for (auto& x : v) x = pick(0, 1) ? std::round(g(rng) * 2) : g(rng);
            return v;
        };
        std::vector<EmbeddingRecord> refs, queries;
        for (int i = 0; i < ids; ++i)
            for (int r = 0; r < per; ++r) refs.push_back(rec("id" + std::to_string(i), vec()));
        for (int q = pick(1, 60); q > 0; --q) queries.push_back(rec("id" + std::to_string(pick(0, ids - 1)), vec()));
        const auto metric = pick(0, 1) ? DistanceMetric::euclidean : DistanceMetric::cosine;
        if (metric == DistanceMetric::cosine) {
            for (auto* set : {&refs, &queries})
                for (auto& r : *set)
                    if (std::all_of(r.vector.begin(), r.vector.end(), [](double x) { return x == 0; })) r.vector[0] = 1;
        }
        const auto want = deid::testing::oracle_ranks(queries, refs, metric);
        REQUIRE(query_ranks(queries, refs, metric) == want);
        double prev = 0;
        for (int k = 1; k <= static_cast<int>(refs.size()); ++k) {
            const double acc = rank_k_accuracy(queries, refs, k, metric);
            REQUIRE(acc == deid::testing::oracle_accuracy(want, k));
            REQUIRE(acc >= prev);
            prev = acc;
        }
        REQUIRE(prev == 1.0);
        const auto stats = identity_ranking(queries, refs, metric);
        const auto o = deid::testing::oracle_stats(want);
        REQUIRE(stats.median == o.median);
        REQUIRE(stats.mean == o.mean);
        REQUIRE(stats.sd == o.sd);
        for (std::size_t i = 0; i < want.size(); ++i) {
            REQUIRE(want[i] >= 1);
            REQUIRE(want[i] <= static_cast<int>(refs.size()));
            REQUIRE((want[i] == 1) == (rank_k_accuracy(std::span(queries).subspan(i, 1), refs, 1, metric) == 1.0));
        }
    }
}

TEST_CASE("evaluate_recognition skips K beyond the reference count") {
    const std::vector<EmbeddingRecord> refs{rec("A", {0}), rec("B", {1})};
    const std::vector<EmbeddingRecord> qs{rec("A", {0.2}), rec("B", {0.4})};
    const auto r = evaluate_recognition(qs, refs);
    CHECK(r.accuracy.count(1) == 1);
    CHECK(r.accuracy.count(2) == 1);
    CHECK(r.accuracy.count(5) == 0);
    CHECK(r.accuracy.at(1) == 0.5);
    CHECK(r.queries == 2);
}

TEST_CASE("landmark distance") {
    const BoxGeom box{50, 40, 200, 100};
    const auto o = face(box, 1);
    CHECK(landmark_distance(o, o) == 0.0);
    CHECK(landmark_distance(o, shifted(o, {0, 67}, 20.0, 0)) == doctest::Approx(0.1).epsilon(1e-12));
    const auto p = face(box, 2);
    CHECK(std::abs(landmark_distance(o, p) - deid::testing::oracle_landmark_distance(o, p)) < 1e-9);

    const auto id = per_feature_distance(o, o);
    CHECK(id.eyes == 0.0);
    CHECK(id.nose == 0.0);
    CHECK(id.mouth == 0.0);
    const auto m = per_feature_distance(o, shifted(o, kMouth, 0, 10.0));
    CHECK(m.mouth == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(m.eyes == 0.0);
    CHECK(m.nose == 0.0);
}

TEST_CASE("property: landmark distance invariances") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-300, 300);
    for (int iter = 0; iter < 300; ++iter) {
        const BoxGeom box{static_cast<int>(rng() % 300), static_cast<int>(rng() % 300), 20 + static_cast<int>(rng() % 200),
                          20 + static_cast<int>(rng() % 200)};
        const auto o = face(box, rng());
        const auto p = face(box, rng());
        const double d = landmark_distance(o, p);
        REQUIRE(std::abs(d - deid::testing::oracle_landmark_distance(o, p)) < 1e-9);
        // translate everything together
        const int tx = static_cast<int>(u(rng)), ty = static_cast<int>(u(rng));
        auto o2 = shifted(o, {0, 67}, tx, ty), p2 = shifted(p, {0, 67}, tx, ty);
        o2.box.x += tx, o2.box.y += ty, p2.box.x += tx, p2.box.y += ty;
        REQUIRE(std::abs(landmark_distance(o2, p2) - d) < 1e-9);
        // a fixed pixel offset halves when the box doubles
        auto big = o;
        big.box.w *= 2, big.box.h *= 2;
        const double small_d = landmark_distance(o, shifted(o, {0, 67}, 3, 4));
        REQUIRE(std::abs(landmark_distance(big, shifted(big, {0, 67}, 3, 4)) - small_d / 2) < 1e-12);
        // a perturbation inside one feature moves only that feature
        const auto f = per_feature_distance(o, shifted(o, kEyes, u(rng), u(rng)));
        REQUIRE(f.nose == 0.0);
        REQUIRE(f.mouth == 0.0);
        REQUIRE(f.eyes > 0.0);
    }
}

TEST_CASE("landmark summary reproduces the face-swap row shape") {
    // Uniform horizontal shifts per feature: eyes 0.0245, nose 0.0270,
    // mouth 0.0332 and the remaining 27 points chosen so the 68-point mean is
    // 0.0318.
    const BoxGeom box{0, 0, 1000, 1000};
    const auto o = face(box, 3);
    const double rest = (68 * 0.0318 - 12 * 0.0245 - 9 * 0.0270 - 20 * 0.0332) / 27;
    auto p = shifted(o, kEyes, 24.5, 0);
    p = shifted(p, kNose, 27, 0);
    p = shifted(p, kMouth, 33.2, 0);
    p = shifted(p, {0, 26}, rest * 1000, 0);
    const LandmarkPair pairs[] = {{o, p}};
    const auto s = summarize_landmarks(pairs);
    CHECK(s.faces_compared == 1);
    CHECK(s.overall == doctest::Approx(0.0318).epsilon(1e-9));
    CHECK(s.features.eyes == doctest::Approx(0.0245).epsilon(1e-9));
    CHECK(s.features.nose == doctest::Approx(0.0270).epsilon(1e-9));
    CHECK(s.features.mouth == doctest::Approx(0.0332).epsilon(1e-9));
    CHECK(s.features.mouth > s.features.eyes);
}

TEST_CASE("gaze classification") {
    CHECK(gaze_classify({0, 60, 0.5, 0.5}) == GazeClass{HorizontalGaze::center, VerticalGaze::center});
    CHECK(gaze_classify({0, 60, 0.2, 0.5}) == GazeClass{HorizontalGaze::right, VerticalGaze::center});
    CHECK(gaze_classify({0, 60, 0.65, 0.35}) == GazeClass{HorizontalGaze::left, VerticalGaze::down});
    CHECK_FALSE(gaze_classify({0, 60, std::nullopt, std::nullopt}).has_value());
}

TEST_CASE("gaze agreement") {
    SUBCASE("self agreement") {
        std::vector<GazeSample> s;
        for (int f = 0; f < 50; ++f)
            s.push_back({f, 60, f % 3 ? std::optional(0.1 * (f % 10)) : std::nullopt, f % 3 ? std::optional(0.5) : std::nullopt});
        const auto r = gaze_agreement(s, s);
        CHECK(r.accuracy == 100.0);
        CHECK(r.pct_detected == r.original_pct_detected);
    }
    SUBCASE("all faces below 56 px") {
        std::vector<GazeSample> s(10, GazeSample{0, 40, 0.5, 0.5});
        for (int f = 0; f < 10; ++f) s[static_cast<std::size_t>(f)].frame = f;
        const auto r = gaze_agreement(s, s);
        CHECK(r.pct_over_threshold == 0.0);
        CHECK(r.session_excluded);
        CHECK_FALSE(r.accuracy.has_value());
        CHECK_FALSE(r.pct_detected.has_value());
    }
    SUBCASE("counted fixture: 100 thresholded, 50 both valid, 34 equal") {
        std::vector<GazeSample> o, p;
        for (int f = 0; f < 120; ++f) {
            const int side = f < 100 ? 56 : 55;  // 20 frames under threshold
            GazeSample a{f, side, std::nullopt, std::nullopt}, b = a;
            if (f < 50) {
                a.horizontal_ratio = a.vertical_ratio = 0.5;
                b.horizontal_ratio = 0.5;
                b.vertical_ratio = f < 34 ? 0.5 : 0.9;
            } else if (f < 60) {
                a.horizontal_ratio = a.vertical_ratio = 0.1;  // privatized loses gaze
            } else if (f < 65) {
                b.horizontal_ratio = b.vertical_ratio = 0.1;  // newly found
            }
            o.push_back(a);
            p.push_back(b);
        }
        const auto r = gaze_agreement(o, p);
        CHECK(r.counts.thresholded_frames == 100);
        CHECK(r.counts.both_detected == 50);
        CHECK(r.counts.agreeing == 34);
        CHECK(r.counts.newly_detected == 5);
        CHECK(r.accuracy == 68.0);
        CHECK(*r.pct_over_threshold == doctest::Approx(100.0 * 100 / 120));
        CHECK(r.original_pct_detected == 60.0);
        CHECK(r.pct_detected == 55.0);
    }
    SUBCASE("session validity floor") {
        std::vector<GazeSample> s;
        for (int f = 0; f < 100; ++f) s.push_back({f, 80, std::nullopt, std::nullopt});
        for (int f = 0; f < 9; ++f) s[static_cast<std::size_t>(f)].horizontal_ratio = s[static_cast<std::size_t>(f)].vertical_ratio = 0.5;
        CHECK(gaze_agreement(s, s).session_excluded);  // 9% < 10%
        s[9].horizontal_ratio = s[9].vertical_ratio = 0.5;
        const auto ok = gaze_agreement(s, s);
        CHECK_FALSE(ok.session_excluded);  // exactly 10%
        const GazeResult both[] = {gaze_agreement(s, s), gaze_agreement(std::vector<GazeSample>(s.begin(), s.begin() + 1), std::vector<GazeSample>(s.begin(), s.begin() + 1))};
        CHECK(pool_gaze(both).counts.thresholded_frames == 101);
    }
    SUBCASE("misaligned streams") {
        std::vector<GazeSample> a{{0, 60, {}, {}}}, b{{1, 60, {}, {}}};
        CHECK_THROWS_AS(gaze_agreement(a, b), ValidationError);
    }
}

TEST_CASE("expression agreement") {
    using E = Expression;
    SUBCASE("identical streams") {
        const auto l = labels({E::Happy, E::Sad, E::Happy, E::Neutral});
        const auto r = expression_agreement(l, l);
        CHECK(r.agreement_rate == 100.0);
        CHECK(r.confusion[3][3] == 2);
        int total = 0, diag = 0;
        for (std::size_t i = 0; i < 7; ++i)
            for (std::size_t j = 0; j < 7; ++j) total += r.confusion[i][j], diag += i == j ? r.confusion[i][j] : 0;
        CHECK(total == 4);
        CHECK(diag == 4);
        // most frequent first, ties by name; unseen classes trail
        CHECK(r.original_order == std::vector<E>{E::Happy, E::Neutral, E::Sad, E::Angry, E::Disgust, E::Fear, E::Surprise});
    }
    SUBCASE("disjoint streams") {
        CHECK(expression_agreement(labels({E::Happy, E::Sad}), labels({E::Angry, E::Fear})).agreement_rate == 0.0);
    }
    SUBCASE("40.78% fixture") {
        std::vector<ExpressionLabel> o, p;
        for (int f = 0; f < 5000; ++f) {
            o.push_back({f, E::Neutral});
            p.push_back({f, f < 2039 ? E::Neutral : E::Sad});
        }
        p.push_back({6000, E::Happy});  // only one stream labels it
        const auto r = expression_agreement(o, p);
        CHECK(r.compared == 5000);
        CHECK(r.skipped == 1);
        CHECK(*r.agreement_rate == doctest::Approx(40.78).epsilon(1e-12));
        CHECK(r.privatized_order.front() == E::Sad);
    }
    CHECK(parse_expression("happy") == E::Happy);
    CHECK(parse_expression("SURPRISE") == E::Surprise);
    CHECK_THROWS_AS(parse_expression("bored"), ValidationError);
}

TEST_CASE("blur sweep on synthetic identities") {
    std::vector<SweepQuery> queries;
    std::vector<EmbeddingRecord> refs;
    DownsampleEmbedder embedder;
    for (int id = 0; id < 10; ++id) {
        for (int s = 0; s < 3; ++s) {
            Image frame(64, 64, 3, 40);
            paste_image(frame, deid::testing::identity_face(id, s, 32), 16, 16);
            if (s == 0) {
                refs.push_back({"id" + std::to_string(id), "", embedder.embed(crop_image(frame, {16, 16, 32, 32}), 0), embedder.name()});
            } else {
                queries.push_back({"id" + std::to_string(id), "", frame, {16, 16, 32, 32}});
            }
        }
    }
    const privatize::BlurScale scales[] = {{1, 20}, {1, 15}, {1, 10}, {1, 5}};
    const auto rows = blur_sweep(queries, scales, embedder, refs);
    REQUIRE(rows.size() == 4);
    CHECK(rows.front().scale == privatize::BlurScale{1, 5});
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) CHECK(rows[i].accuracy.at(1) <= rows[i + 1].accuracy.at(1) + 0.02);

    // k = 1 is the unblurred face
    const privatize::BlurScale tiny[] = {{1, 1000}};
    const auto t = blur_sweep(queries, tiny, embedder, refs);
    const auto plain = embed_queries(queries, embedder);
    CHECK(t[0].accuracy.at(1) == rank_k_accuracy(plain, refs, 1));
    CHECK(rank_k_accuracy(plain, refs, 1) == 1.0);
}

TEST_CASE("reports") {
    SUBCASE("empty report marks every section") {
        EvalReport r;
        const auto j = report_to_json(r);
        CHECK(j.at("recognition").at("status") == "empty");
        CHECK(j.at("landmarks").at("status") == "empty");
        CHECK(j.at("gaze").at("status") == "empty");
        CHECK(j.at("expression").at("status") == "empty");
        CHECK(report_from_json(nlohmann::json::parse(j.dump())) == r);
        const std::string csv = report_to_csv(r);
        CHECK(csv.rfind("condition,section,name,metric,value\n", 0) == 0);
        CHECK(csv.find("original,landmarks,,status,empty") != std::string::npos);
    }
    SUBCASE("populated report round-trips") {
        EvalReport r;
        r.condition = Condition::parse("blur:1/5");
        RecognitionResult rr;
        rr.recognizer = "arcface";
        rr.accuracy = {{1, 0.001}, {2, 0.01}, {5, 0.05}, {10, 0.1}};
        rr.ranking = ranking_stats({1, 30, 55});
        rr.queries = 3;
        r.recognition.push_back(recognition_section(rr));
        r.landmarks = LandmarkSummary{12, 0.0318, {0.0245, 0.03, 0.0332}};
        std::vector<GazeSample> g{{0, 60, 0.5, 0.5}, {1, 60, 0.1, 0.1}};
        r.gaze = gaze_agreement(g, g);
        r.expression = expression_agreement(labels({Expression::Happy}), labels({Expression::Sad}));
        const auto j = report_to_json(r);
        CHECK(j.at("condition") == "blur:1/5");
        CHECK(j.at("recognition").at("recognizers")[0].at("accuracy_pct").at("1") == doctest::Approx(0.1));
        CHECK(report_from_json(nlohmann::json::parse(j.dump())) == r);
        CHECK(emit_report(r, ReportFormat::csv).find("blur:1/5,recognition,arcface,accuracy_pct@1,") != std::string::npos);
    }
    SUBCASE("table layout") {
        EvalReport orig, swap;
        swap.condition = Condition::parse("swap");
        RecognitionResult a;
        a.recognizer = "arcface";
        a.accuracy = {{1, 0.9671}, {2, 0.98}, {5, 0.99}, {10, 1.0}};
        a.ranking = ranking_stats({1, 1, 2});
        orig.recognition.push_back(recognition_section(a));
        a.accuracy = {{1, 0.1}, {2, 0.2}, {5, 0.3}, {10, 0.4}};
        a.ranking = ranking_stats({5, 7, 9});
        swap.recognition.push_back(recognition_section(a));
        const EvalReport both[] = {orig, swap};
        const std::string t = render_recognition_table(both);
        CHECK(t.find("arcface") != std::string::npos);
        CHECK(t.find("original") < t.find("swap"));
        const auto k1 = t.find("K=1"), k2 = t.find("K=2"), k5 = t.find("K=5"), k10 = t.find("K=10"), med = t.find("Median"),
                   mean = t.find("Mean");
        CHECK(k1 < k2);
        CHECK(k2 < k5);
        CHECK(k5 < k10);
        CHECK(k10 < med);
        CHECK(med < mean);
        CHECK(t.find("96.71") != std::string::npos);
    }
    CHECK(Condition::parse("original").str() == "original");
    CHECK_THROWS_AS(Condition::parse("pixelate"), ValidationError);
}

TEST_CASE("analysis adapters through the stub process") {
    TempDir dir;
    deid::testing::VideoSpec spec;
    spec.frame_count = 21;
    spec.width = 160;
    spec.height = 120;
    spec.subjects = {{0, 20, 20, 20, 2, 1, 60, {210, 90, 60}}};
    const auto m = deid::testing::write_video(dir / "orig", spec);
    std::vector<FaceObservation> track;
    for (int f = 0; f < 21; ++f) track.push_back({f, *deid::testing::subject_box(spec.subjects[0], f), 1, Provenance::detected, {}});

    ProcessAnalysis lm(deid::testing::kStub + " landmarks", "landmarks");
    ProcessAnalysis gz(deid::testing::kStub + " gaze", "gaze");
    ProcessAnalysis ex(deid::testing::kStub + " expression", "expression");
    AnalysisSuite suite;
    suite.landmarks.original = &lm;
    suite.gaze.original = &gz;
    suite.expression.original = &ex;
    const auto r = evaluate_track(m, track, dir / "orig", Condition{}, suite);
    REQUIRE(r.landmarks);
    CHECK(r.landmarks->faces_compared == 3);  // frames 0, 10, 20
    CHECK(r.landmarks->overall == 0.0);
    REQUIRE(r.gaze);
    CHECK(r.gaze->accuracy == 100.0);
    REQUIRE(r.expression);
    CHECK(r.expression->agreement_rate == 100.0);
    CHECK(r.recognition.empty());

    SUBCASE("batch files stand in for processes") {
        write_file_atomic(dir / "lm.json", "[{\"frame_index\":0,\"points\":null}]");
        BatchAnalysis b(dir / "lm.json");
        CHECK(b.lookup(0, "", {}).has_value());
        CHECK_FALSE(b.lookup(1, "", {}).has_value());
    }
    SUBCASE("garbage handshake") {
        CHECK_THROWS_AS(ProcessAnalysis(deid::testing::kStub + " garbage", "gaze"), ProtocolError);
    }
}

TEST_CASE("embedders") {
    const Image a = deid::testing::identity_face(1, 0, 32), b = deid::testing::identity_face(2, 0, 32);
    DownsampleEmbedder d(4);
    CHECK(d.embed(a, 0).size() == 48);
    ProcessEmbedder p(deid::testing::kStub + " embed --grid 4", "stub");
    CHECK(p.dim() == 48);
    CHECK_FALSE(p.declared_metric().has_value());
    const auto va = p.embed(a, 0);
    const auto da = d.embed(a, 0);
    REQUIRE(va.size() == da.size());
    for (std::size_t i = 0; i < va.size(); ++i) CHECK(va[i] == doctest::Approx(da[i]).epsilon(1e-9));
    CHECK(p.embed(b, 1) != va);
    CHECK_THROWS_AS(parse_embedding(nlohmann::json{{"vector", {1, 2}}}, 3), ProtocolError);
}
