#pragma once

#include <string>
#include <vector>

#include "faceedit/animation.hpp"
#include "faceedit/masking.hpp"

namespace faceedit {

// Result of fitting one sampled channel with piecewise cubic Beziers:
// split-on-max-error least squares until every span fits within tol.
// Control points are counted the way an animator would set keys: shared
// anchors once, zero-length handles not at all.
struct BezierFitResult {
    int control_points = 0;
    int n_segments = 0;
    double max_error = 0.0;
};

BezierFitResult bezier_keypoint_estimate(const std::vector<double>& curve, double tol = 0.01);

// Mean squared difference over all L x N weights.
double mse(const Animation& a, const Animation& b);

struct ChannelFit {
    std::string name;
    int control_points = 0;
    double max_error = 0.0;
};

struct SegmentReport {
    Segment segment;
    int n_frames = 0;
    int points_sum = 0;       // sum of control points across channels
    int points_max = 0;       // largest per-channel count
    std::string dominant_channel;
    double avg_error = 0.0;   // mean over channels of per-channel max error
    double distance_deviation = 0.0;  // mean |d(edited) - d(original)| over the span
    double artist_seconds_low = 0.0;  // 12 s per keyframe projection
    double artist_seconds_high = 0.0;  // 30 s per keyframe projection
    std::vector<ChannelFit> channels;
};

struct EditReport {
    double tolerance = 0.01;
    double inference_seconds = 0.0;
    std::vector<SegmentReport> rows;
};

// One row per edited segment, fitted on the edited animation.
EditReport edit_report(const Animation& original, const Animation& edited,
                       const std::vector<Segment>& segments, const DistanceRig& rig,
                       double tol = 0.01, double inference_seconds = 0.0);

void save_edit_report(const EditReport& report, const std::string& path);
std::string format_edit_report(const EditReport& report);

}  // namespace faceedit
