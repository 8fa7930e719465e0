#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "faceedit/animation.hpp"
#include "faceedit/constraints.hpp"
#include "faceedit/masking.hpp"
#include "faceedit/model.hpp"

namespace faceedit {

// User guidance accompanying an edit; the active member follows `kind`.
struct EditGuidance {
    ConstraintKind kind = ConstraintKind::None;
    KeyframeSpec keyframes;
    Animation noisy;
    std::vector<std::string> phonemes;  // one per frame
};

struct EditRequest {
    Animation animation;
    std::vector<Segment> segments;
    EditGuidance guidance;
    std::uint64_t seed = 0;
    // Post-process the fill so keyframe constraints are hit exactly,
    // shifting the generated curve by a tapered offset.
    bool exact_keyframes = false;
};

// Fills the requested segments with generated motion. Frames outside the
// segments are returned bit-identical to the input; generated weights are
// clamped to [0, 1]. The model must have been trained for the request's
// constraint kind.
Animation edit(const EditRequest& req, const ModelBundle& model);

enum class BaselineMethod { Linear, Cubic };

// Classical per-channel gap filling between segment boundaries: straight
// lines, or Hermite cubics matching boundary values and one-sided
// finite-difference slopes. Segments touching the sequence ends hold the
// available boundary value; a segment covering everything is an error.
Animation interpolate_baseline(const Animation& anim, const std::vector<Segment>& segments,
                               BaselineMethod method);

// Cubic Hermite over a span of `span` frames, u in [0,1]; tangents are in
// value-per-frame units.
double hermite_value(double p0, double m0, double p1, double m1, double span, double u);
double hermite_derivative(double p0, double m0, double p1, double m1, double span, double u);

// Edit-spec file: {"segments": [{"start": 10, "end": 30}, ...],
// "constraint": {"type": "keyframes"|"noisy"|"visemes"|"none", ...}}.
// Guidance file paths are resolved against the spec's directory.
struct EditSpec {
    std::vector<Segment> segments;
    EditGuidance guidance;
};

EditSpec load_edit_spec(const std::string& path);

}  // namespace faceedit
