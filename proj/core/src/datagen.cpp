#include "faceedit/datagen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "faceedit/errors.hpp"
#include "json.hpp"

namespace faceedit {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& viseme_representative_phonemes() {
    static const std::vector<std::string> reps = {
        "sil", "a", "æ", "e", "i", "o", "ʌ", "u", "j",
        "g",   "l", "s",      "ʃ", "θ", "f", "b", "w", "ɹ"};
    return reps;
}

Eigen::VectorXd viseme_target_pose(int viseme_class) {
    static const std::vector<std::vector<std::pair<std::string, double>>> poses = [] {
        using P = std::vector<std::pair<std::string, double>>;
        std::vector<P> table(kNumVisemes);
        table[0] = {};  // sil -> neutral
        table[1] = {{"jaw_open", 0.55}, {"mouth_funnel", 0.30}};
        table[2] = {{"jaw_open", 0.70}, {"mouth_stretch_left", 0.15}, {"mouth_stretch_right", 0.15}};
        table[3] = {{"jaw_open", 0.40}, {"mouth_smile_left", 0.25}, {"mouth_smile_right", 0.25}};
        table[4] = {{"jaw_open", 0.20}, {"mouth_smile_left", 0.45}, {"mouth_smile_right", 0.45}};
        table[5] = {{"jaw_open", 0.45}, {"mouth_funnel", 0.55}, {"mouth_pucker", 0.20}};
        table[6] = {{"jaw_open", 0.50}};
        table[7] = {{"jaw_open", 0.25}, {"mouth_pucker", 0.70}, {"mouth_funnel", 0.40}};
        table[8] = {{"jaw_open", 0.20},
                    {"mouth_funnel", 0.20},
                    {"mouth_upper_up_left", 0.10},
                    {"mouth_upper_up_right", 0.10}};
        table[9] = {{"jaw_open", 0.30}};
        table[10] = {{"jaw_open", 0.25},
                     {"mouth_upper_up_left", 0.20},
                     {"mouth_upper_up_right", 0.20}};
        table[11] = {{"jaw_open", 0.12}, {"mouth_smile_left", 0.20}, {"mouth_smile_right", 0.20}};
        table[12] = {{"jaw_open", 0.15}, {"mouth_funnel", 0.45}, {"mouth_pucker", 0.30}};
        table[13] = {{"jaw_open", 0.18},
                     {"mouth_upper_up_left", 0.25},
                     {"mouth_upper_up_right", 0.25}};
        table[14] = {{"jaw_open", 0.10},
                     {"mouth_close", 0.45},
                     {"mouth_press_left", 0.30},
                     {"mouth_press_right", 0.30}};
        table[15] = {{"jaw_open", 0.03},
                     {"mouth_close", 0.95},
                     {"mouth_press_left", 0.50},
                     {"mouth_press_right", 0.50}};
        table[16] = {{"jaw_open", 0.15}, {"mouth_pucker", 0.80}, {"mouth_funnel", 0.30}};
        table[17] = {{"jaw_open", 0.20}, {"mouth_pucker", 0.35}};
        return table;
    }();
    if (viseme_class < 0 || viseme_class >= kNumVisemes)
        throw DataError("viseme class out of range");
    Eigen::VectorXd pose = Eigen::VectorXd::Zero(kCanonicalShapes);
    for (const auto& [name, value] : poses[viseme_class])
        pose(canonical_shape_index(name)) = value;
    return pose;
}

namespace {

constexpr int kOnsetLeadFrames = 4;
// Frames labeled bilabial must show a closed mid lip gap; frames still in
// transit get relabeled to their left neighbour.
constexpr double kBilabialGapFraction = 0.22;

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Per-frame viseme class schedule: utterances of a few visemes separated by
// silences. Returns one class per frame.
std::vector<int> sample_viseme_schedule(int length, Rng& rng) {
    std::vector<int> classes(length, 0);
    int cursor = 0;
    while (cursor < length) {
        const int sil_len = static_cast<int>(uniform_int(rng, 5, 20));
        cursor += sil_len;
        if (cursor >= length)
            break;
        const int n_vis = static_cast<int>(uniform_int(rng, 3, 8));
        for (int i = 0; i < n_vis && cursor < length; ++i) {
            const int cls = static_cast<int>(uniform_int(rng, 1, kNumVisemes - 1));
            const int span = static_cast<int>(uniform_int(rng, 5, 12));
            for (int t = cursor; t < std::min(cursor + span, length); ++t)
                classes[t] = cls;
            cursor += span;
        }
    }
    return classes;
}

}  // namespace

SynthResult synth_sequence(const CorpusConfig& cfg, Rng& rng) {
    if (cfg.length < 1 || !(cfg.fps > 0.0))
        throw DataError("corpus config needs positive length and fps");
    const int L = cfg.length;
    const double dt = 1.0 / cfg.fps;

    SynthResult out;
    out.anim.fps = cfg.fps;
    out.anim.names = canonical_shape_names();
    out.anim.frames = Eigen::MatrixXd::Zero(L, kCanonicalShapes);
    out.timeline.fps = cfg.fps;
    out.timeline.phonemes.assign(L, "sil");

    const bool speech = cfg.speech_freq_hi > 0.0;
    std::vector<int> classes(L, 0);
    if (speech) {
        classes = sample_viseme_schedule(L, rng);

        // Spring target anticipates onsets out of silence, holds through the
        // labeled span.
        std::vector<int> target(L, 0);
        for (int t = 0; t < L; ++t)
            target[t] = classes[t];
        for (int t = 0; t < L; ++t) {
            if (classes[t] != 0)
                continue;
            for (int k = 1; k <= kOnsetLeadFrames && t + k < L; ++k) {
                if (classes[t + k] != 0) {
                    target[t] = classes[t + k];
                    break;
                }
            }
        }

        const double freq = uniform(rng, cfg.speech_freq_lo, cfg.speech_freq_hi);
        const double omega = 2.0 * M_PI * std::max(freq, 0.5);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(kCanonicalShapes);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(kCanonicalShapes);
        for (int t = 0; t < L; ++t) {
            const Eigen::VectorXd goal = viseme_target_pose(target[t]);
            v += dt * (omega * omega * (goal - x) - 2.0 * omega * v);
            x += dt * v;
            out.anim.frames.row(t) = x.transpose();
        }
    }

    // Blinks: synchronized pulses reaching full closure at the apex.
    if (cfg.blink_rate > 0.0) {
        static const std::vector<std::vector<double>> pulses = {
            {0.5, 1.0, 0.5}, {0.4, 1.0, 1.0, 0.4}, {0.3, 0.85, 1.0, 0.85, 0.3}};
        const double mean_gap = 60.0 * cfg.fps / cfg.blink_rate;
        const int blink_l = canonical_shape_index("eye_blink_left");
        const int blink_r = canonical_shape_index("eye_blink_right");
        double t = uniform(rng, 0.0, mean_gap);
        while (t < L) {
            const auto& pulse = pulses[static_cast<size_t>(uniform_int(rng, 0, 2))];
            const int start = static_cast<int>(t);
            for (size_t k = 0; k < pulse.size(); ++k) {
                const int f = start + static_cast<int>(k);
                if (f >= L)
                    break;
                out.anim.frames(f, blink_l) = std::max(out.anim.frames(f, blink_l), pulse[k]);
                out.anim.frames(f, blink_r) = std::max(out.anim.frames(f, blink_r), pulse[k]);
            }
            double u = uniform01(rng);
            while (u <= 0.0)
                u = uniform01(rng);
            t += std::max(1.0, -std::log(u) * mean_gap);
        }
    }

    // Brow events: smoothstep attack, hold, smoothstep release.
    if (cfg.expression_rate > 0.0) {
        static const char* brow_shapes[] = {"brow_inner_up", "brow_outer_up_left",
                                            "brow_outer_up_right", "brow_down_left",
                                            "brow_down_right"};
        const int n_events =
            static_cast<int>(std::round(cfg.expression_rate * L / cfg.fps / 60.0));
        for (int e = 0; e < n_events; ++e) {
            const int ch = canonical_shape_index(
                brow_shapes[uniform_int(rng, 0, 4)]);
            const double amp = uniform(rng, 0.3, 0.9);
            const int start = static_cast<int>(uniform_int(rng, 0, std::max(0, L - 2)));
            const int attack = static_cast<int>(uniform_int(rng, 5, 15));
            const int hold = static_cast<int>(uniform_int(rng, 10, 40));
            const int release = static_cast<int>(uniform_int(rng, 5, 15));
            for (int f = start; f < std::min(L, start + attack + hold + release); ++f) {
                const int rel = f - start;
                double level;
                if (rel < attack)
                    level = smoothstep(static_cast<double>(rel + 1) / attack);
                else if (rel < attack + hold)
                    level = 1.0;
                else
                    level = smoothstep(
                        static_cast<double>(attack + hold + release - rel) / release);
                out.anim.frames(f, ch) = std::max(out.anim.frames(f, ch), amp * level);
            }
        }
    }

    out.anim.frames = out.anim.frames.cwiseMax(0.0).cwiseMin(1.0);

    // Label frames, demoting bilabial labels wherever the lips have not
    // closed yet so viseme supervision stays learnable.
    const auto& reps = viseme_representative_phonemes();
    const auto& rig = canonical_rig();
    const int gap_mid = 1;
    const double neutral_gap = rig.b(gap_mid);
    const int bilabial = 15;
    for (int t = 0; t < L; ++t) {
        int cls = classes[t];
        if (cls == bilabial) {
            const double gap =
                rig.A.row(gap_mid).dot(out.anim.frames.row(t)) + neutral_gap;
            if (gap > kBilabialGapFraction * neutral_gap)
                cls = t > 0 ? phoneme_to_viseme(out.timeline.phonemes[t - 1],
                                                viseme_vocabulary())
                            : 0;
        }
        out.timeline.phonemes[t] = reps[cls];
    }
    return out;
}

Animation add_tracker_noise(const Animation& anim, const NoiseConfig& cfg, Rng& rng) {
    if (cfg.jitter_std < 0 || cfg.spike_prob < 0 || cfg.spike_scale < 0 || cfg.drift_std < 0)
        throw DataError("noise config values must be non-negative");
    Animation out = anim;
    const int L = anim.length();
    const int N = anim.n_shapes();

    for (int t = 0; t < L; ++t) {
        const bool spike = cfg.spike_prob > 0.0 && uniform01(rng) < cfg.spike_prob;
        for (int c = 0; c < N; ++c) {
            double delta = 0.0;
            if (cfg.jitter_std > 0.0)
                delta += cfg.jitter_std * normal(rng);
            if (spike)
                delta += cfg.spike_scale * normal(rng);
            out.frames(t, c) += delta;
        }
    }
    if (cfg.drift_std > 0.0) {
        for (int c = 0; c < N; ++c) {
            double drift = 0.0;
            for (int t = 0; t < L; ++t) {
                drift += cfg.drift_std * normal(rng);
                out.frames(t, c) += drift;
            }
        }
    }
    out.frames = out.frames.cwiseMax(0.0).cwiseMin(1.0);
    return out;
}

CorpusManifest build_corpus(const CorpusConfig& cfg, const NoiseConfig& noise,
                            const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw RuntimeAbort("cannot create corpus directory " + out_dir);

    CorpusManifest manifest;
    manifest.seed = cfg.seed;
    manifest.fps = cfg.fps;
    manifest.duration_seconds = cfg.n_sequences * cfg.length / cfg.fps;

    json items = json::array();
    char name[64];
    for (int i = 0; i < cfg.n_sequences; ++i) {
        Rng seq_rng(derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(i)));
        SynthResult synth = synth_sequence(cfg, seq_rng);
        Rng noise_rng(derive_seed(cfg.seed, 2 * static_cast<std::uint64_t>(i) + 1));
        Animation noisy = add_tracker_noise(synth.anim, noise, noise_rng);

        std::snprintf(name, sizeof(name), "seq_%03d", i);
        CorpusItem item;
        item.clean = std::string(name) + "_clean.json";
        item.noisy = std::string(name) + "_noisy.json";
        item.phonemes = std::string(name) + "_phonemes.json";
        save_animation(synth.anim, (fs::path(out_dir) / item.clean).string());
        save_animation(noisy, (fs::path(out_dir) / item.noisy).string());
        save_phoneme_timeline(synth.timeline, (fs::path(out_dir) / item.phonemes).string());
        items.push_back({{"clean", item.clean}, {"noisy", item.noisy}, {"phonemes", item.phonemes}});

        item.clean = (fs::path(out_dir) / item.clean).string();
        item.noisy = (fs::path(out_dir) / item.noisy).string();
        item.phonemes = (fs::path(out_dir) / item.phonemes).string();
        manifest.items.push_back(std::move(item));
    }
    save_rig(canonical_rig(), (fs::path(out_dir) / "rig.json").string());

    json j;
    j["seed"] = cfg.seed;
    j["fps"] = cfg.fps;
    j["duration_seconds"] = manifest.duration_seconds;
    j["items"] = std::move(items);
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    if (!out)
        throw RuntimeAbort("cannot write corpus manifest");
    out << j.dump(1) << '\n';
    return manifest;
}

CorpusManifest load_corpus_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open corpus manifest " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    CorpusManifest manifest;
    const fs::path base = fs::path(path).parent_path();
    try {
        manifest.seed = j.at("seed").get<std::uint64_t>();
        manifest.fps = j.at("fps").get<double>();
        manifest.duration_seconds = j.value("duration_seconds", 0.0);
        for (const auto& item : j.at("items")) {
            CorpusItem ci;
            ci.clean = (base / item.at("clean").get<std::string>()).string();
            ci.noisy = (base / item.at("noisy").get<std::string>()).string();
            ci.phonemes = (base / item.at("phonemes").get<std::string>()).string();
            manifest.items.push_back(std::move(ci));
        }
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    if (manifest.items.empty())
        throw DataError(path + ": corpus has no items");
    return manifest;
}

std::vector<CorpusSequence> load_corpus(const CorpusManifest& manifest) {
    std::vector<CorpusSequence> sequences;
    sequences.reserve(manifest.items.size());
    for (const auto& item : manifest.items) {
        CorpusSequence seq;
        seq.clean = load_animation(item.clean);
        seq.noisy = load_animation(item.noisy);
        seq.phonemes = load_phoneme_timeline(item.phonemes);
        if (seq.phonemes.length() != seq.clean.length())
            throw DataError(item.phonemes + ": timeline length does not match animation");
        sequences.push_back(std::move(seq));
    }
    return sequences;
}

}  // namespace faceedit
