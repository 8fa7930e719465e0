#include "faceedit/masking.hpp"

#include <algorithm>

#include "faceedit/errors.hpp"

namespace faceedit {

namespace {

std::vector<Segment> merge_segments(std::vector<Segment> segments) {
    std::sort(segments.begin(), segments.end(),
              [](const Segment& a, const Segment& b) { return a.start < b.start; });
    std::vector<Segment> merged;
    for (const auto& seg : segments) {
        if (!merged.empty() && seg.start <= merged.back().end)
            merged.back().end = std::max(merged.back().end, seg.end);
        else
            merged.push_back(seg);
    }
    return merged;
}

}  // namespace

Mask::Mask(int length, int n_cols, std::vector<Segment> segments)
    : length_(length), n_cols_(n_cols), segments_(merge_segments(std::move(segments))) {
    if (length_ < 1)
        throw DataError("mask length must be at least 1");
    if (n_cols_ < 1)
        throw DataError("mask width must be at least 1");
    for (const auto& seg : segments_) {
        if (seg.start >= seg.end)
            throw DataError("mask segment start must precede end");
        if (seg.start < 0 || seg.end > length_)
            throw DataError("mask segment [" + std::to_string(seg.start) + ", " +
                            std::to_string(seg.end) + ") out of bounds for length " +
                            std::to_string(length_));
    }
}

bool Mask::covers(int frame) const {
    for (const auto& seg : segments_)
        if (frame >= seg.start && frame < seg.end)
            return true;
    return false;
}

int Mask::masked_frame_count() const {
    int n = 0;
    for (const auto& seg : segments_)
        n += seg.length();
    return n;
}

Eigen::MatrixXd Mask::dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(length_, n_cols_);
    for (const auto& seg : segments_)
        m.middleRows(seg.start, seg.length()).setOnes();
    return m;
}

Eigen::VectorXd Mask::frame_flags() const {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(length_);
    for (const auto& seg : segments_)
        f.segment(seg.start, seg.length()).setOnes();
    return f;
}

Mask random_training_mask(int length, int n_cols, const MaskSamplerConfig& cfg, Rng& rng) {
    if (length < 1)
        throw DataError("mask length must be at least 1");
    if (cfg.min_segments > cfg.max_segments || cfg.min_len > cfg.max_len)
        throw DataError("mask sampler ranges must satisfy min <= max");
    if (cfg.min_segments < 0 || cfg.min_len < 0)
        throw DataError("mask sampler ranges must be non-negative");
    if (cfg.max_segments > 0 && cfg.min_len > length)
        throw DataError("min segment length exceeds sequence length");

    const int count = static_cast<int>(uniform_int(rng, cfg.min_segments, cfg.max_segments));
    std::vector<Segment> segments;
    segments.reserve(count);
    for (int i = 0; i < count; ++i) {
        int len = static_cast<int>(uniform_int(rng, cfg.min_len, cfg.max_len));
        len = std::min(len, length);
        if (len < 1)
            continue;
        const int start = static_cast<int>(uniform_int(rng, 0, length - len));
        segments.push_back({start, start + len});
    }
    return Mask(length, n_cols, std::move(segments));
}

Mask segments_to_mask(const std::vector<Segment>& segments, int length, int n_cols) {
    return Mask(length, n_cols, segments);
}

Animation apply_mask(const Animation& anim, const Mask& mask) {
    if (mask.length() != anim.length())
        throw DataError("mask length " + std::to_string(mask.length()) +
                        " does not match animation length " + std::to_string(anim.length()));
    Animation out = anim;
    for (const auto& seg : mask.segments())
        out.frames.middleRows(seg.start, seg.length()).setZero();
    return out;
}

Eigen::MatrixXd recompose_frames(const Eigen::MatrixXd& base, const Mask& mask,
                                 const Eigen::MatrixXd& generated) {
    if (base.rows() != generated.rows() || base.cols() != generated.cols())
        throw DataError("recompose inputs must share dimensions");
    if (mask.length() != base.rows())
        throw DataError("mask length does not match sequence length");
    Eigen::MatrixXd out = base;
    for (const auto& seg : mask.segments())
        out.middleRows(seg.start, seg.length()) = generated.middleRows(seg.start, seg.length());
    return out;
}

Animation recompose(const Animation& base, const Mask& mask, const Animation& generated) {
    Animation out = base;
    out.frames = recompose_frames(base.frames, mask, generated.frames);
    return out;
}

}  // namespace faceedit
