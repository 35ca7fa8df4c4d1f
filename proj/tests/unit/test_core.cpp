#include <doctest.h>

#include <random>

#include "deid/core/frames.hpp"
#include "deid/core/geometry.hpp"
#include "deid/core/image.hpp"
#include "deid/core/session_json.hpp"
#include "deid/core/types.hpp"
#include "deid/error.hpp"
#include "support.hpp"

using namespace deid;
using deid::testing::TempDir;

namespace {

FaceObservation obs(int frame, BoxGeom box) {
    FaceObservation o;
    o.frame = frame;
    o.box = box;
    return o;
}

// Random but structurally valid session.
AnnotationSession random_session(std::mt19937_64& rng) {
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto box = [&] { return BoxGeom{pick(0, 500), pick(0, 300), pick(1, 120), pick(1, 120)}; };
    auto conf = [&] { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); };

    AnnotationSession s;
    s.manifest = {"s" + std::to_string(pick(0, 999)), pick(50, 400), 30.0 + pick(0, 30), 640, 480, "/tmp/frames"};
    s.revision = pick(0, 1000);
    for (auto& p : s.pass_state) p = pick(0, 1) == 1;

    const int n = s.manifest.frame_count;
    for (int f = 0; f < n; f += pick(1, 15)) {
        if (pick(0, 2) == 0) continue;
        s.detections.sampled_frames.push_back(f);
        // frames with no boxes are absent from the map, never empty lists
        const int count = pick(0, 3);
        if (count == 0) continue;
        auto& list = s.detections.frames[f];
        for (int k = count; k > 0; --k) {
            auto o = obs(f, box());
            o.confidence = conf();
            o.provenance = pick(0, 1) ? Provenance::detected : Provenance::interpolated;
            list.push_back(o);
        }
    }
    if (pick(0, 1)) s.detections.frame_errors[0] = "adapter said no";
    s.detections.session_id = s.manifest.session_id;

    int f = 0;
    while (f + 2 < n && pick(0, 2) != 0) {
        const int start = pick(f, n - 2);
        const int end = pick(start, n - 1);
        s.regions.push_back({start, end});
        s.keyframes.push_back({start, KeyFrameKind::subject_enter});
        s.keyframes.push_back({end, KeyFrameKind::subject_leave});
        f = end + 2;
    }
    for (int c = pick(0, 3); c > 0; --c) {
        FaceChain chain;
        chain.id = "c" + std::to_string(c);
        chain.subject_tag = static_cast<SubjectTag>(pick(0, 2));
        for (int fr = pick(0, 20); fr < n && chain.observations.size() < 6; fr += pick(1, 10)) {
            auto o = obs(fr, box());
            o.chain_id = chain.id;
            chain.observations.push_back(o);
        }
        if (!chain.observations.empty()) s.chains.push_back(chain);
    }
    for (int m = pick(0, 3); m > 0; --m) {
        auto o = obs(pick(0, n - 1), box());
        o.provenance = Provenance::manual;
        s.manual_boxes.push_back(o);
    }
    for (int fr = 0; fr < n && pick(0, 3) != 0; fr += pick(1, 5)) {
        auto o = obs(fr, box());
        o.provenance = pick(0, 1) ? Provenance::interpolated : Provenance::detected;
        s.final_track.push_back(o);
    }
    return s;
}

}  // namespace

TEST_CASE("box_center") {
    CHECK(box_center({0, 0, 100, 50}) == Point2{50.0, 25.0});
    CHECK(box_center({10, 10, 1, 1}) == Point2{10.5, 10.5});
    CHECK(box_center({5, 7, 3, 9}) == Point2{6.5, 11.5});
}

TEST_CASE("lerp_box midpoint and rounding") {
    CHECK(lerp_box(obs(10, {0, 0, 100, 100}), obs(20, {100, 0, 100, 100}), 15) == BoxGeom{50, 0, 100, 100});
    CHECK(lerp_box(obs(0, {0, 0, 40, 40}), obs(10, {0, 0, 60, 60}), 5) == BoxGeom{0, 0, 50, 50});
    // 10 * 1/3 = 3.33 -> 3
    CHECK(lerp_box(obs(0, {0, 0, 10, 10}), obs(3, {10, 0, 10, 10}), 1).x == 3);
    // 10 * 2/3 = 6.67 -> 7; exact halves round up
    CHECK(lerp_box(obs(0, {0, 0, 10, 10}), obs(3, {10, 0, 10, 10}), 2).x == 7);
    CHECK(lerp_box(obs(0, {0, 0, 10, 10}), obs(2, {1, 0, 10, 10}), 1).x == 1);
    CHECK_THROWS_AS(lerp_box(obs(0, {}), obs(3, {}), 0), DomainError);
    CHECK_THROWS_AS(lerp_box(obs(0, {}), obs(3, {}), 3), DomainError);
}

TEST_CASE("property: lerp_box is symmetric and matches a floating-point oracle") {
    std::mt19937_64 rng(11);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int i = 0; i < 5000; ++i) {
        const int fa = pick(0, 100), fb = fa + pick(2, 60);
        const auto a = obs(fa, {pick(0, 900), pick(0, 900), pick(1, 300), pick(1, 300)});
        const auto b = obs(fb, {pick(0, 900), pick(0, 900), pick(1, 300), pick(1, 300)});
        const int f = pick(fa + 1, fb - 1);
        const BoxGeom ab = lerp_box(a, b, f);
        REQUIRE(ab == lerp_box(b, a, f));
        // independent oracle: exact rational value t = (f - fa) / (fb - fa), half-up
        auto oracle = [&](int va, int vb) {
            const long long num = static_cast<long long>(va) * (fb - fa) + static_cast<long long>(vb - va) * (f - fa);
            const long long den = fb - fa;
            long long q = num / den, r = num % den;
            if (r < 0) { r += den; --q; }
            return static_cast<int>(2 * r >= den ? q + 1 : q);
        };
        REQUIRE(ab.x == oracle(a.box.x, b.box.x));
        REQUIRE(ab.y == oracle(a.box.y, b.box.y));
        REQUIRE(ab.w == oracle(a.box.w, b.box.w));
        REQUIRE(ab.h == oracle(a.box.h, b.box.h));
    }
}

TEST_CASE("round_half_up_div handles negatives") {
    CHECK(round_half_up_div(5, 2) == 3);
    CHECK(round_half_up_div(-5, 2) == -2);
    CHECK(round_half_up_div(-7, 3) == -2);
    CHECK(round_half_up_div(7, 3) == 2);
}

TEST_CASE("clamp_to_frame") {
    CHECK(clamp_to_frame({-10, -10, 30, 30}, 100, 100) == BoxGeom{0, 0, 20, 20});
    CHECK(clamp_to_frame({90, 90, 30, 30}, 100, 100) == BoxGeom{90, 90, 10, 10});
    CHECK_FALSE(clamp_to_frame({200, 0, 10, 10}, 100, 100).has_value());
}

TEST_CASE("validate_box") {
    CHECK_NOTHROW(validate_box({0, 0, 1, 1}));
    CHECK_THROWS_AS(validate_box({0, 0, 0, 1}), ValidationError);
    CHECK_THROWS_AS(validate_box({-1, 0, 1, 1}), ValidationError);
}

TEST_CASE("validate_chain") {
    FaceChain c{"c0", {}, SubjectTag::untagged};
    CHECK_THROWS_AS(validate_chain(c, 30), ValidationError);
    for (int f : {0, 10, 40}) {
        auto o = obs(f, {});
        o.chain_id = "c0";
        c.observations.push_back(o);
    }
    CHECK_NOTHROW(validate_chain(c, 30));
    CHECK_THROWS_AS(validate_chain(c, 29), ValidationError);
    std::swap(c.observations[0], c.observations[1]);
    CHECK_THROWS_AS(validate_chain(c, 30), ValidationError);
}

TEST_CASE("enum names round-trip") {
    for (auto p : {Provenance::detected, Provenance::manual, Provenance::interpolated})
        CHECK(parse_provenance(to_string(p)) == p);
    for (auto t : {SubjectTag::untagged, SubjectTag::key_subject, SubjectTag::other})
        CHECK(parse_subject_tag(to_string(t)) == t);
    for (auto k : {KeyFrameKind::subject_enter, KeyFrameKind::subject_leave, KeyFrameKind::chain_start,
                   KeyFrameKind::chain_end, KeyFrameKind::supplemental})
        CHECK(parse_keyframe_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_subject_tag("friend"), ValidationError);
}

TEST_CASE("session serialization") {
    SUBCASE("empty session round-trips") {
        AnnotationSession s;
        s.manifest.session_id = "empty";
        CHECK(deserialize_session(serialize_session(s)) == s);
    }
    SUBCASE("two chains and a region round-trip") {
        AnnotationSession s;
        s.manifest = {"two", 100, 60.0, 320, 240, "frames"};
        s.regions = {{10, 50}};
        for (int c = 0; c < 2; ++c) {
            FaceChain chain{"c" + std::to_string(c), {}, c == 0 ? SubjectTag::key_subject : SubjectTag::other};
            for (int f = 10; f <= 30; f += 10) {
                auto o = obs(f, {c * 100, 0, 40, 40});
                o.chain_id = chain.id;
                chain.observations.push_back(o);
            }
            s.chains.push_back(chain);
        }
        CHECK(deserialize_session(serialize_session(s)) == s);
    }
    SUBCASE("truncated bytes give a parse error with an offset") {
        AnnotationSession s;
        const std::string bytes = serialize_session(s);
        const std::string cut = bytes.substr(0, bytes.size() / 2);
        try {
            deserialize_session(cut);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.byte_offset() <= cut.size());
        }
    }
    SUBCASE("schema violation reports end of input") {
        try {
            deserialize_session("{\"format\":\"deid.session/1\"}");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.byte_offset() == 27);
        }
    }
}

TEST_CASE("property: session round-trip is the identity") {
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 300; ++i) {
        const AnnotationSession s = random_session(rng);
        const std::string bytes = serialize_session(s);
        const AnnotationSession back = deserialize_session(bytes);
        REQUIRE(back == s);
        REQUIRE(serialize_session(back) == bytes);
    }
}

TEST_CASE("detections round-trip") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const auto s = random_session(rng);
        REQUIRE(deserialize_detections(serialize_detections(s.detections)) == s.detections);
    }
}

TEST_CASE("frame directory scanning") {
    TempDir dir;
    CHECK(frame_file_name(0) == "000000.png");
    CHECK(frame_file_name(1234) == "001234.png");
    CHECK_THROWS_AS(scan_frame_directory(dir.path()), ValidationError);

    Image img(8, 6);
    for (int f = 0; f < 3; ++f) save_png(img, dir / frame_file_name(f));
    auto info = scan_frame_directory(dir.path());
    CHECK(info.frame_count == 3);
    CHECK(info.width == 8);
    CHECK(info.height == 6);

    save_png(img, dir / frame_file_name(4));
    CHECK_THROWS_AS(scan_frame_directory(dir.path()), ValidationError);
    std::filesystem::remove(dir / frame_file_name(4));
    save_png(Image(9, 6), dir / frame_file_name(3));
    CHECK_THROWS_AS(scan_frame_directory(dir.path()), ValidationError);
}

TEST_CASE("png round-trip and checksum outside boxes") {
    TempDir dir;
    Image img(13, 7);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 31);
    save_png(img, dir / "a.png");
    CHECK(load_png(dir / "a.png") == img);
    CHECK(png_dimensions(dir / "a.png") == std::pair{13, 7});

    const BoxGeom box{2, 2, 4, 3};
    Image changed = img;
    changed.at(3, 3, 1) ^= 0xff;
    const BoxGeom boxes[] = {box};
    CHECK(checksum_outside(img, boxes) == checksum_outside(changed, boxes));
    CHECK(checksum_outside(img, {}) != checksum_outside(changed, {}));
}

TEST_CASE("crop and paste") {
    Image img(10, 10, 1);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) img.at(x, y) = static_cast<std::uint8_t>(y * 10 + x);
    const Image crop = crop_image(img, {2, 3, 4, 2});
    CHECK(crop.width == 4);
    CHECK(crop.at(0, 0) == 32);
    CHECK(crop.at(3, 1) == 45);
    Image copy(10, 10, 1);
    paste_image(copy, crop, 2, 3);
    CHECK(copy.at(5, 4) == 45);
    CHECK_THROWS_AS(crop_image(img, {8, 8, 4, 4}), DomainError);
}
