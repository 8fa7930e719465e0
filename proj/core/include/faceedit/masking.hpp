#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "faceedit/animation.hpp"
#include "faceedit/random.hpp"

namespace faceedit {

// Half-open frame interval [start, end).
struct Segment {
    int start = 0;
    int end = 0;

    int length() const { return end - start; }
    bool operator==(const Segment&) const = default;
};

// Marks the frames erased from an animation. Whole frames are erased
// (every coefficient), so the dense L x N view has constant rows.
class Mask {
public:
    Mask(int length, int n_cols, std::vector<Segment> segments);

    int length() const { return length_; }
    int n_cols() const { return n_cols_; }
    const std::vector<Segment>& segments() const { return segments_; }

    bool covers(int frame) const;
    bool empty() const { return segments_.empty(); }
    int masked_frame_count() const;

    // L x N binary matrix: row t is all ones iff frame t is erased.
    Eigen::MatrixXd dense() const;
    // L-vector of 0/1 frame flags.
    Eigen::VectorXd frame_flags() const;

private:
    int length_;
    int n_cols_;
    std::vector<Segment> segments_;  // sorted, disjoint, within [0, L)
};

struct MaskSamplerConfig {
    int min_segments = 1;
    int max_segments = 3;
    int min_len = 5;
    int max_len = 75;
};

// Uniform segment count in [min_segments, max_segments], uniform lengths in
// [min_len, max_len], starts uniform over feasible positions; overlapping
// placements merge.
Mask random_training_mask(int length, int n_cols, const MaskSamplerConfig& cfg, Rng& rng);

// Merges overlapping or touching user intervals; rejects out-of-bounds ones.
Mask segments_to_mask(const std::vector<Segment>& segments, int length,
                      int n_cols = kCanonicalShapes);

// X_i: zero the masked frames, keep the rest.
Animation apply_mask(const Animation& anim, const Mask& mask);

// X_rec: masked frames from `generated`, everything else from `base`.
// Exact splice, no blending.
Animation recompose(const Animation& base, const Mask& mask, const Animation& generated);
Eigen::MatrixXd recompose_frames(const Eigen::MatrixXd& base, const Mask& mask,
                                 const Eigen::MatrixXd& generated);

}  // namespace faceedit
