#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "faceedit/animation.hpp"
#include "faceedit/random.hpp"

namespace faceedit {

// Procedural stand-in for the unavailable capture corpora: mouth channels
// track a sampled viseme schedule through critically-damped second-order
// dynamics, eyelids blink, brows ramp.
struct CorpusConfig {
    int n_sequences = 64;
    int length = 200;
    double fps = kCanonicalFps;
    std::uint64_t seed = 0;
    double blink_rate = 18.0;       // blinks per minute
    double speech_freq_lo = 4.0;    // Hz band of the mouth spring; hi <= 0
    double speech_freq_hi = 7.0;    // disables speech entirely
    double expression_rate = 8.0;   // brow events per minute
};

// Simulated consumer-tracker degradation: per-frame Gaussian jitter,
// occasional whole-frame outliers, and a slow per-channel random walk.
// Output weights are clamped back to [0, 1].
struct NoiseConfig {
    double jitter_std = 0.02;
    double spike_prob = 0.05;
    double spike_scale = 0.25;
    double drift_std = 0.002;
};

struct SynthResult {
    Animation anim;
    PhonemeTimeline timeline;
};

SynthResult synth_sequence(const CorpusConfig& cfg, Rng& rng);

Animation add_tracker_noise(const Animation& anim, const NoiseConfig& cfg, Rng& rng);

struct CorpusItem {
    std::string clean;
    std::string noisy;
    std::string phonemes;
};

struct CorpusManifest {
    std::uint64_t seed = 0;
    double fps = kCanonicalFps;
    double duration_seconds = 0.0;
    std::vector<CorpusItem> items;  // paths resolved against the manifest dir
};

// Writes n_sequences clean/noisy/phoneme triples plus rig.json and
// manifest.json into out_dir; a pure function of (cfg, noise).
CorpusManifest build_corpus(const CorpusConfig& cfg, const NoiseConfig& noise,
                            const std::string& out_dir);

CorpusManifest load_corpus_manifest(const std::string& path);

struct CorpusSequence {
    Animation clean;
    Animation noisy;
    PhonemeTimeline phonemes;
};

std::vector<CorpusSequence> load_corpus(const CorpusManifest& manifest);

// Representative phoneme emitted for each viseme class in synthetic
// timelines (class 0 -> "sil", bilabials -> "b", ...).
const std::vector<std::string>& viseme_representative_phonemes();

// Mouth-channel pose targeted while a given viseme class is active,
// as a full 34-weight vector (non-mouth channels zero).
Eigen::VectorXd viseme_target_pose(int viseme_class);

}  // namespace faceedit
