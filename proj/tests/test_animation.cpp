#include <fstream>

#include "doctest.h"
#include "faceedit/animation.hpp"
#include "faceedit/errors.hpp"
#include "test_support.hpp"

using namespace faceedit;
using testutil::TempDir;

TEST_CASE("animation save/load round-trip") {
    TempDir dir("anim_roundtrip");
    Rng rng(11);
    Animation anim = testutil::random_animation(200, 34, rng);
    save_animation(anim, dir.file("a.json"));
    Animation back = load_animation(dir.file("a.json"));

    CHECK(back.length() == 200);
    CHECK(back.n_shapes() == 34);
    CHECK(back.fps == anim.fps);
    CHECK(back.names == anim.names);
    CHECK((back.frames - anim.frames).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("animation loader edge cases") {
    TempDir dir("anim_edges");

    SUBCASE("single all-zero frame is the neutral pose") {
        Animation anim = testutil::constant_animation(1, 34, 0.0);
        save_animation(anim, dir.file("zero.json"));
        Animation back = load_animation(dir.file("zero.json"));
        CHECK(back.length() == 1);
        CHECK(back.frames.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("out-of-range weight clamps with the flag, rejects without") {
        std::ofstream out(dir.file("over.json"));
        out << R"({"fps": 25, "names": ["a", "b"], "frames": [[0.2, 1.3]]})";
        out.close();
        CHECK_THROWS_AS(load_animation(dir.file("over.json")), DataError);
        Animation clamped = load_animation(dir.file("over.json"), /*clamp=*/true);
        CHECK(clamped.frames(0, 1) == 1.0);
        CHECK(clamped.frames(0, 0) == 0.2);
    }

    SUBCASE("row width mismatch rejected") {
        std::ofstream out(dir.file("ragged.json"));
        out << R"({"fps": 25, "names": ["a", "b"], "frames": [[0.2, 0.3], [0.1]]})";
        out.close();
        CHECK_THROWS_AS(load_animation(dir.file("ragged.json")), DataError);
    }

    SUBCASE("non-finite weight rejected") {
        std::ofstream out(dir.file("nan.json"));
        out << R"({"fps": 25, "names": ["a"], "frames": [[1e999]]})";
        out.close();
        CHECK_THROWS(load_animation(dir.file("nan.json")));
    }

    SUBCASE("empty frames rejected on save and load") {
        Animation anim;
        anim.names = {"a"};
        anim.frames.resize(0, 1);
        CHECK_THROWS_AS(save_animation(anim, dir.file("empty.json")), DataError);
        std::ofstream out(dir.file("empty.json"));
        out << R"({"fps": 25, "names": ["a"], "frames": []})";
        out.close();
        CHECK_THROWS_AS(load_animation(dir.file("empty.json")), DataError);
    }

    SUBCASE("parse failure") {
        std::ofstream out(dir.file("garbage.json"));
        out << "not json";
        out.close();
        CHECK_THROWS_AS(load_animation(dir.file("garbage.json")), DataError);
    }
}

TEST_CASE("resample") {
    Rng rng(5);

    SUBCASE("identity at the source rate") {
        Animation anim = testutil::random_animation(50, 4, rng);
        Animation same = resample(anim, anim.fps);
        CHECK(same.frames == anim.frames);
        CHECK(same.fps == anim.fps);
    }

    SUBCASE("constant signal halves the frame count") {
        Animation anim = testutil::constant_animation(100, 3, 0.37, 50.0);
        Animation down = resample(anim, 25.0);
        CHECK(std::abs(down.length() - 50) <= 1);
        CHECK((down.frames.array() - 0.37).abs().maxCoeff() <= 1e-12);
    }

    SUBCASE("linear ramp matches the closed form") {
        // ramp 0 -> 1 over 100 frames at 50 fps; at 25 fps frame k sits at
        // source position 2k, value 2k/99
        Animation anim = testutil::constant_animation(100, 1, 0.0, 50.0);
        for (int t = 0; t < 100; ++t)
            anim.frames(t, 0) = t / 99.0;
        Animation down = resample(anim, 25.0);
        REQUIRE(down.length() == 50);
        for (int k = 0; k < down.length(); ++k)
            CHECK(testutil::close(down.frames(k, 0), 2.0 * k / 99.0, 1e-9));
    }

    SUBCASE("non-positive target rejected") {
        Animation anim = testutil::constant_animation(10, 1, 0.5);
        CHECK_THROWS_AS(resample(anim, 0.0), DataError);
    }
}

TEST_CASE("distance rig") {
    const DistanceRig& rig = canonical_rig();
    REQUIRE(rig.n_distances() == 6);
    REQUIRE(rig.n_shapes() == 34);

    SUBCASE("neutral pose maps to the offsets") {
        Animation neutral = testutil::constant_animation(3, 34, 0.0);
        neutral.names = canonical_shape_names();
        DistanceTrack track = compute_distances(neutral, rig);
        for (int t = 0; t < 3; ++t)
            CHECK((track.values.row(t).transpose() - rig.b).cwiseAbs().maxCoeff() == 0.0);
        CHECK((rig.b.array() >= 0.0).all());
    }

    SUBCASE("a full blink closes the eyelid to zero") {
        Animation anim = testutil::constant_animation(1, 34, 0.0);
        anim.names = canonical_shape_names();
        anim.frames(0, canonical_shape_index("eye_blink_left")) = 1.0;
        anim.frames(0, canonical_shape_index("eye_blink_right")) = 1.0;
        DistanceTrack track = compute_distances(anim, rig);
        CHECK(track.values(0, 4) == 0.0);  // eyelid-right
        CHECK(track.values(0, 5) == 0.0);  // eyelid-left
    }

    SUBCASE("affinity in the weights") {
        Rng rng(3);
        Animation a = testutil::random_animation(8, 34, rng);
        Animation b = testutil::random_animation(8, 34, rng);
        const double lambda = 0.3;
        Animation mix = a;
        mix.frames = lambda * a.frames + (1.0 - lambda) * b.frames;
        Eigen::MatrixXd expected = lambda * compute_distances(a, rig).values +
                                   (1.0 - lambda) * compute_distances(b, rig).values;
        CHECK((compute_distances(mix, rig).values - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }

    SUBCASE("dimension mismatch rejected") {
        Animation anim = testutil::constant_animation(2, 7, 0.1);
        CHECK_THROWS_AS(compute_distances(anim, rig), DataError);
    }

    SUBCASE("rig json round-trip") {
        TempDir dir("rig_roundtrip");
        save_rig(rig, dir.file("rig.json"));
        DistanceRig back = load_rig(dir.file("rig.json"));
        CHECK((back.A - rig.A).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.b - rig.b).cwiseAbs().maxCoeff() == 0.0);
        CHECK(back.distance_names == rig.distance_names);
    }
}

TEST_CASE("viseme vocabulary") {
    const VisemeVocabulary& vocab = viseme_vocabulary();
    REQUIRE(vocab.n_classes() == 18);
    CHECK(vocab.classes[0] == "sil");

    SUBCASE("known phoneme groups") {
        auto class_of = [&](const std::string& ph) {
            return vocab.classes[phoneme_to_viseme(ph, vocab)];
        };
        CHECK(class_of("b") == "M + B + P");
        CHECK(class_of("m") == "M + B + P");
        CHECK(class_of("p") == "M + B + P");
        CHECK(class_of("f") == "F + V");
        CHECK(class_of("v") == "F + V");
        CHECK(phoneme_to_viseme("sil", vocab) == 0);
    }

    SUBCASE("unknown phonemes rejected") {
        CHECK_THROWS_AS(phoneme_to_viseme("xx", vocab), DataError);
    }

    SUBCASE("classes partition the phoneme inventory") {
        // every phoneme maps to exactly one class by construction of the
        // map; check every class is hit and indices are in range
        std::vector<int> hits(vocab.n_classes(), 0);
        for (const auto& [ph, cls] : vocab.phoneme_map) {
            REQUIRE(cls >= 0);
            REQUIRE(cls < vocab.n_classes());
            ++hits[cls];
        }
        for (int c = 0; c < vocab.n_classes(); ++c)
            CHECK(hits[c] >= 1);
    }
}

TEST_CASE("phoneme timeline io") {
    TempDir dir("timeline");
    PhonemeTimeline timeline;
    timeline.fps = 25.0;
    timeline.phonemes = {"sil", "b", "ɹ", "sil"};
    save_phoneme_timeline(timeline, dir.file("t.json"));
    PhonemeTimeline back = load_phoneme_timeline(dir.file("t.json"));
    CHECK(back.fps == 25.0);
    CHECK(back.phonemes == timeline.phonemes);
}
