#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "faceedit/animation.hpp"
#include "faceedit/masking.hpp"
#include "faceedit/random.hpp"

namespace faceedit {

enum class ConstraintKind { None, Keyframes, Noisy, Visemes };

std::string to_string(ConstraintKind kind);
ConstraintKind constraint_kind_from_string(const std::string& name);

// Guidance channel width: full weight vectors for keyframes and noisy
// animations, one-hot visemes, nothing for unsupervised editing.
int constraint_width(ConstraintKind kind, int n_shapes = kCanonicalShapes);

// C_i = cmask ⊙ raw guidance. cmask rows are all ones exactly at frames the
// paired Mask erases, so guidance never leaks outside the edit.
struct ConstraintMatrix {
    ConstraintKind kind = ConstraintKind::None;
    Eigen::MatrixXd values;  // L x n_feat
    Eigen::MatrixXd cmask;   // L x n_feat, binary

    int length() const { return static_cast<int>(values.rows()); }
    int n_feat() const { return static_cast<int>(values.cols()); }
};

struct Keyframe {
    int frame = 0;
    Eigen::VectorXd weights;
};

struct KeyframeSpec {
    std::vector<Keyframe> entries;  // strictly increasing frames
};

// Training-time keyframe selection: inside each masked segment, walk
// forward with gaps uniform in [0, 0.8s] * fps frames; values copied from
// the ground truth. Zero gaps collapse into a single keyframe.
KeyframeSpec sample_training_keyframes(const Animation& gt, const Mask& mask, Rng& rng);

ConstraintMatrix build_keyframe_constraint(const KeyframeSpec& spec, const Mask& mask, int length,
                                           int n_shapes);
ConstraintMatrix build_noisy_constraint(const Animation& noisy, const Mask& mask);
ConstraintMatrix build_viseme_constraint(const std::vector<std::string>& timeline,
                                         const VisemeVocabulary& vocab, const Mask& mask);
// Empty-width constraint for unsupervised editing.
ConstraintMatrix build_none_constraint(const Mask& mask);

}  // namespace faceedit
