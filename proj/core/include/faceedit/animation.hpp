#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <vector>

namespace faceedit {

// Frame count of the canonical rig and training sequences.
inline constexpr int kCanonicalShapes = 34;
inline constexpr double kCanonicalFps = 25.0;

// A blendshape clip: L frames of N weights at a fixed frame rate.
// Weights are dimensionless and expected to live in [0, 1].
struct Animation {
    double fps = kCanonicalFps;
    std::vector<std::string> names;  // one per blendshape column
    Eigen::MatrixXd frames;          // L x N, row = one frame

    int length() const { return static_cast<int>(frames.rows()); }
    int n_shapes() const { return static_cast<int>(frames.cols()); }
};

// Affine operator mapping a weight vector to the six salient inter-vertex
// distances: d(w) = A*w + b. Blendshape deformation is linear in the
// weights, so any fixed vertex-pair measurement is affine in them.
struct DistanceRig {
    Eigen::MatrixXd A;  // 6 x N
    Eigen::VectorXd b;  // 6
    std::vector<std::string> distance_names;

    int n_distances() const { return static_cast<int>(A.rows()); }
    int n_shapes() const { return static_cast<int>(A.cols()); }
};

inline constexpr int kNumDistances = 6;

// Per-frame distance measurements of an animation under a rig.
struct DistanceTrack {
    double fps = kCanonicalFps;
    Eigen::MatrixXd values;  // L x 6

    int length() const { return static_cast<int>(values.rows()); }
};

// The 18 viseme classes and the phoneme symbols belonging to each.
// Class 0 is always "sil".
struct VisemeVocabulary {
    std::vector<std::string> classes;
    std::unordered_map<std::string, int> phoneme_map;

    int n_classes() const { return static_cast<int>(classes.size()); }
};

inline constexpr int kNumVisemes = 18;

// Validates invariants and throws DataError on violation. `clamp` pins
// weights to [0, 1] instead of rejecting out-of-range values.
void validate_animation(Animation& anim, bool clamp);

Animation load_animation(const std::string& path, bool clamp = false);
void save_animation(const Animation& anim, const std::string& path);

// Per-channel linear interpolation onto the uniform grid at target_fps
// covering the same duration.
Animation resample(const Animation& anim, double target_fps);

DistanceTrack compute_distances(const Animation& anim, const DistanceRig& rig);

// Deterministic class index in [0, 18); unknown symbols throw.
int phoneme_to_viseme(const std::string& phoneme, const VisemeVocabulary& vocab);

DistanceRig load_rig(const std::string& path);
void save_rig(const DistanceRig& rig, const std::string& path);

// Phoneme timeline files: {"fps": 25, "phonemes": ["sil", "b", ...]},
// one symbol per frame.
struct PhonemeTimeline {
    double fps = kCanonicalFps;
    std::vector<std::string> phonemes;

    int length() const { return static_cast<int>(phonemes.size()); }
};

PhonemeTimeline load_phoneme_timeline(const std::string& path);
void save_phoneme_timeline(const PhonemeTimeline& timeline, const std::string& path);

// The shipped synthetic rig over the canonical 34-shape list. No mesh is
// involved; coefficients are chosen so that closures behave like a face:
// the blink columns cancel the neutral eyelid opening exactly, jaw/lip
// shapes move the three lip gaps and the mouth width.
const DistanceRig& canonical_rig();
const std::vector<std::string>& canonical_shape_names();
int canonical_shape_index(const std::string& name);

// 18 classes in vocabulary order ("sil" first), each phoneme in exactly one.
const VisemeVocabulary& viseme_vocabulary();

}  // namespace faceedit
