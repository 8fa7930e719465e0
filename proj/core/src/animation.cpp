#include "faceedit/animation.hpp"

#include <cmath>
#include <fstream>

#include "faceedit/errors.hpp"
#include "json.hpp"

namespace faceedit {

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("parse failure in " + path + ": " + e.what());
    }
    return j;
}

void write_json_file(const json& j, const std::string& path, int indent = -1) {
    std::ofstream out(path);
    if (!out)
        throw RuntimeAbort("cannot write " + path);
    out << j.dump(indent) << '\n';
    if (!out)
        throw RuntimeAbort("I/O failure writing " + path);
}

}  // namespace

void validate_animation(Animation& anim, bool clamp) {
    if (!(anim.fps > 0.0))
        throw DataError("animation fps must be positive");
    const int L = anim.length();
    const int N = anim.n_shapes();
    if (L < 1)
        throw DataError("animation must have at least one frame");
    if (N < 1 || static_cast<int>(anim.names.size()) != N)
        throw DataError("blendshape name count does not match frame width");
    for (int t = 0; t < L; ++t) {
        for (int c = 0; c < N; ++c) {
            double w = anim.frames(t, c);
            if (!std::isfinite(w))
                throw DataError("non-finite weight at frame " + std::to_string(t));
            if (w < 0.0 || w > 1.0) {
                if (!clamp)
                    throw DataError("weight " + std::to_string(w) + " out of [0,1] at frame " +
                                    std::to_string(t) + ", channel " + std::to_string(c) +
                                    " (use clamp to coerce)");
                anim.frames(t, c) = std::clamp(w, 0.0, 1.0);
            }
        }
    }
}

Animation load_animation(const std::string& path, bool clamp) {
    const json j = read_json_file(path);
    Animation anim;
    try {
        anim.fps = j.at("fps").get<double>();
        anim.names = j.at("names").get<std::vector<std::string>>();
        const auto& rows = j.at("frames");
        if (!rows.is_array() || rows.empty())
            throw DataError(path + ": frames must be a non-empty array");
        const int L = static_cast<int>(rows.size());
        const int N = static_cast<int>(anim.names.size());
        anim.frames.resize(L, N);
        for (int t = 0; t < L; ++t) {
            const auto& row = rows[t];
            if (static_cast<int>(row.size()) != N)
                throw DataError(path + ": frame " + std::to_string(t) + " has " +
                                std::to_string(row.size()) + " weights, expected " +
                                std::to_string(N));
            for (int c = 0; c < N; ++c)
                anim.frames(t, c) = row[c].get<double>();
        }
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    validate_animation(anim, clamp);
    return anim;
}

void save_animation(const Animation& anim, const std::string& path) {
    Animation copy = anim;
    validate_animation(copy, /*clamp=*/false);
    json j;
    j["fps"] = anim.fps;
    j["names"] = anim.names;
    json rows = json::array();
    for (int t = 0; t < anim.length(); ++t) {
        json row = json::array();
        for (int c = 0; c < anim.n_shapes(); ++c)
            row.push_back(anim.frames(t, c));
        rows.push_back(std::move(row));
    }
    j["frames"] = std::move(rows);
    write_json_file(j, path);
}

Animation resample(const Animation& anim, double target_fps) {
    if (!(target_fps > 0.0))
        throw DataError("target fps must be positive");
    const int L = anim.length();
    const double ratio = anim.fps / target_fps;
    // Target grid covers the same duration [0, (L-1)/fps].
    const int L_out = L == 1 ? 1 : static_cast<int>(std::floor((L - 1) / ratio)) + 1;

    Animation out;
    out.fps = target_fps;
    out.names = anim.names;
    out.frames.resize(L_out, anim.n_shapes());
    for (int t = 0; t < L_out; ++t) {
        const double pos = t * ratio;
        const int lo = std::min(static_cast<int>(std::floor(pos)), L - 1);
        const int hi = std::min(lo + 1, L - 1);
        const double frac = pos - lo;
        if (frac == 0.0 || lo == hi)
            out.frames.row(t) = anim.frames.row(lo);
        else
            out.frames.row(t) = (1.0 - frac) * anim.frames.row(lo) + frac * anim.frames.row(hi);
    }
    return out;
}

DistanceTrack compute_distances(const Animation& anim, const DistanceRig& rig) {
    if (anim.n_shapes() != rig.n_shapes())
        throw DataError("animation has " + std::to_string(anim.n_shapes()) +
                        " shapes but rig expects " + std::to_string(rig.n_shapes()));
    DistanceTrack track;
    track.fps = anim.fps;
    track.values = anim.frames * rig.A.transpose();
    track.values.rowwise() += rig.b.transpose();
    return track;
}

int phoneme_to_viseme(const std::string& phoneme, const VisemeVocabulary& vocab) {
    auto it = vocab.phoneme_map.find(phoneme);
    if (it == vocab.phoneme_map.end())
        throw DataError("unknown phoneme symbol \"" + phoneme + "\"");
    return it->second;
}

DistanceRig load_rig(const std::string& path) {
    const json j = read_json_file(path);
    DistanceRig rig;
    try {
        const auto& rows = j.at("A");
        const int R = static_cast<int>(rows.size());
        if (R < 1)
            throw DataError(path + ": rig matrix is empty");
        const int N = static_cast<int>(rows[0].size());
        rig.A.resize(R, N);
        for (int r = 0; r < R; ++r) {
            if (static_cast<int>(rows[r].size()) != N)
                throw DataError(path + ": ragged rig matrix");
            for (int c = 0; c < N; ++c)
                rig.A(r, c) = rows[r][c].get<double>();
        }
        const auto& bv = j.at("b");
        if (static_cast<int>(bv.size()) != R)
            throw DataError(path + ": offset size does not match matrix rows");
        rig.b.resize(R);
        for (int r = 0; r < R; ++r)
            rig.b(r) = bv[r].get<double>();
        rig.distance_names = j.at("distance_names").get<std::vector<std::string>>();
        if (static_cast<int>(rig.distance_names.size()) != R)
            throw DataError(path + ": distance name count mismatch");
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    if (!rig.A.allFinite() || !rig.b.allFinite())
        throw DataError(path + ": rig contains non-finite entries");
    return rig;
}

void save_rig(const DistanceRig& rig, const std::string& path) {
    json j;
    json rows = json::array();
    for (int r = 0; r < rig.A.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < rig.A.cols(); ++c)
            row.push_back(rig.A(r, c));
        rows.push_back(std::move(row));
    }
    j["A"] = std::move(rows);
    json b = json::array();
    for (int r = 0; r < rig.b.size(); ++r)
        b.push_back(rig.b(r));
    j["b"] = std::move(b);
    j["distance_names"] = rig.distance_names;
    write_json_file(j, path, 1);
}

PhonemeTimeline load_phoneme_timeline(const std::string& path) {
    const json j = read_json_file(path);
    PhonemeTimeline timeline;
    try {
        timeline.fps = j.at("fps").get<double>();
        timeline.phonemes = j.at("phonemes").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    if (!(timeline.fps > 0.0))
        throw DataError(path + ": fps must be positive");
    if (timeline.phonemes.empty())
        throw DataError(path + ": empty phoneme list");
    return timeline;
}

void save_phoneme_timeline(const PhonemeTimeline& timeline, const std::string& path) {
    json j;
    j["fps"] = timeline.fps;
    j["phonemes"] = timeline.phonemes;
    write_json_file(j, path);
}

const std::vector<std::string>& canonical_shape_names() {
    static const std::vector<std::string> names = {
        "eye_blink_left",        "eye_blink_right",       "eye_wide_left",
        "eye_wide_right",        "eye_squint_left",       "eye_squint_right",
        "brow_down_left",        "brow_down_right",       "brow_inner_up",
        "brow_outer_up_left",    "brow_outer_up_right",   "jaw_open",
        "jaw_left",              "jaw_right",             "jaw_forward",
        "mouth_close",           "mouth_funnel",          "mouth_pucker",
        "mouth_left",            "mouth_right",           "mouth_smile_left",
        "mouth_smile_right",     "mouth_frown_left",      "mouth_frown_right",
        "mouth_dimple_left",     "mouth_dimple_right",    "mouth_stretch_left",
        "mouth_stretch_right",   "mouth_press_left",      "mouth_press_right",
        "mouth_upper_up_left",   "mouth_upper_up_right",  "mouth_lower_down_left",
        "mouth_lower_down_right"};
    return names;
}

int canonical_shape_index(const std::string& name) {
    const auto& names = canonical_shape_names();
    for (int i = 0; i < static_cast<int>(names.size()); ++i)
        if (names[i] == name)
            return i;
    throw DataError("unknown canonical shape \"" + name + "\"");
}

namespace {

enum Dist { kGapLeft = 0, kGapMid, kGapRight, kWidth, kEyelidRight, kEyelidLeft };

int shape_index(const std::string& name) {
    return canonical_shape_index(name);
}

DistanceRig build_canonical_rig() {
    DistanceRig rig;
    rig.distance_names = {"lip-gap-left", "lip-gap-mid",  "lip-gap-right",
                          "mouth-width",  "eyelid-right", "eyelid-left"};
    rig.b.resize(kNumDistances);
    rig.b << 0.8, 1.0, 0.8, 5.2, 1.1, 1.1;
    rig.A = Eigen::MatrixXd::Zero(kNumDistances, kCanonicalShapes);

    auto set = [&](const std::string& shape, Dist d, double v) {
        rig.A(d, shape_index(shape)) = v;
    };

    // Blink columns cancel the neutral eyelid opening exactly, so a full
    // blink closes the lid to zero.
    set("eye_blink_left", kEyelidLeft, -rig.b(kEyelidLeft));
    set("eye_blink_right", kEyelidRight, -rig.b(kEyelidRight));
    set("eye_wide_left", kEyelidLeft, 0.25);
    set("eye_wide_right", kEyelidRight, 0.25);
    set("eye_squint_left", kEyelidLeft, -0.35);
    set("eye_squint_right", kEyelidRight, -0.35);

    set("jaw_open", kGapLeft, 1.8);
    set("jaw_open", kGapMid, 2.2);
    set("jaw_open", kGapRight, 1.8);
    set("jaw_open", kWidth, -0.4);

    // Full closure cancels the neutral lip gaps.
    set("mouth_close", kGapLeft, -rig.b(kGapLeft));
    set("mouth_close", kGapMid, -rig.b(kGapMid));
    set("mouth_close", kGapRight, -rig.b(kGapRight));

    set("mouth_funnel", kGapLeft, 0.2);
    set("mouth_funnel", kGapMid, 0.5);
    set("mouth_funnel", kGapRight, 0.2);
    set("mouth_funnel", kWidth, -1.8);

    set("mouth_pucker", kGapLeft, 0.1);
    set("mouth_pucker", kGapMid, 0.2);
    set("mouth_pucker", kGapRight, 0.1);
    set("mouth_pucker", kWidth, -2.2);

    set("mouth_smile_left", kGapLeft, 0.1);
    set("mouth_smile_left", kWidth, 1.1);
    set("mouth_smile_right", kGapRight, 0.1);
    set("mouth_smile_right", kWidth, 1.1);

    set("mouth_frown_left", kGapLeft, -0.05);
    set("mouth_frown_left", kWidth, 0.25);
    set("mouth_frown_right", kGapRight, -0.05);
    set("mouth_frown_right", kWidth, 0.25);

    set("mouth_stretch_left", kGapLeft, 0.1);
    set("mouth_stretch_left", kWidth, 0.9);
    set("mouth_stretch_right", kGapRight, 0.1);
    set("mouth_stretch_right", kWidth, 0.9);

    set("mouth_press_left", kGapLeft, -0.3);
    set("mouth_press_left", kGapMid, -0.15);
    set("mouth_press_right", kGapRight, -0.3);
    set("mouth_press_right", kGapMid, -0.15);

    set("mouth_upper_up_left", kGapLeft, 0.45);
    set("mouth_upper_up_left", kGapMid, 0.25);
    set("mouth_upper_up_right", kGapRight, 0.45);
    set("mouth_upper_up_right", kGapMid, 0.25);

    set("mouth_lower_down_left", kGapLeft, 0.45);
    set("mouth_lower_down_left", kGapMid, 0.25);
    set("mouth_lower_down_right", kGapRight, 0.45);
    set("mouth_lower_down_right", kGapMid, 0.25);

    // jaw_left/right/forward, mouth_left/right, dimples and all brow shapes
    // leave the six distances untouched (all-zero columns).
    return rig;
}

VisemeVocabulary build_viseme_vocabulary() {
    // Vocabulary order: vowel classes first, consonant classes after,
    // "sil" at index 0.
    static const std::vector<std::pair<std::string, std::vector<std::string>>> table = {
        {"sil", {"sil"}},
        {"AO + OY", {"a", "ɔ"}},
        {"AA + AE + AY", {"æ", "ɑ"}},
        {"EH + EY", {"e", "ɛ", "eɪ"}},
        {"IH + IY + EE + IX", {"i", "ɪ", "ɨ"}},
        {"OH + OW", {"o", "ɒ"}},
        {"AH + ER", {"ʌ", "ə", "ɚ", "ɝ"}},
        {"UW + AW + UH", {"u", "ʊ", "aʊ"}},
        {"JH", {"j", "ʤ"}},
        {"G + K + H", {"g", "k", "q", "ɢ"}},
        {"L + N + T + D", {"l", "n", "t", "d", "ʟ", "ɫ", "ɾ"}},
        {"S + Z", {"s", "z", "ɣ"}},
        {"Sh + Ch + Zh", {"ʃ", "ʧ", "ʒ"}},
        {"TH + DH", {"θ", "ð"}},
        {"F + V", {"f", "v"}},
        {"M + B + P", {"b", "m", "p"}},
        {"W", {"w", "ʍ"}},
        {"R", {"ɹ"}},
    };
    VisemeVocabulary vocab;
    for (int c = 0; c < static_cast<int>(table.size()); ++c) {
        vocab.classes.push_back(table[c].first);
        for (const auto& ph : table[c].second) {
            auto [it, inserted] = vocab.phoneme_map.emplace(ph, c);
            if (!inserted)
                throw RuntimeAbort("phoneme " + ph + " assigned to two viseme classes");
        }
    }
    return vocab;
}

}  // namespace

const DistanceRig& canonical_rig() {
    static const DistanceRig rig = build_canonical_rig();
    return rig;
}

const VisemeVocabulary& viseme_vocabulary() {
    static const VisemeVocabulary vocab = build_viseme_vocabulary();
    return vocab;
}

}  // namespace faceedit
