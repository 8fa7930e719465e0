#include "faceedit/constraints.hpp"

#include <cmath>

#include "faceedit/errors.hpp"

namespace faceedit {

std::string to_string(ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::None: return "none";
        case ConstraintKind::Keyframes: return "keyframes";
        case ConstraintKind::Noisy: return "noisy";
        case ConstraintKind::Visemes: return "visemes";
    }
    return "none";
}

ConstraintKind constraint_kind_from_string(const std::string& name) {
    if (name == "none") return ConstraintKind::None;
    if (name == "keyframes") return ConstraintKind::Keyframes;
    if (name == "noisy") return ConstraintKind::Noisy;
    if (name == "visemes") return ConstraintKind::Visemes;
    throw DataError("unknown constraint kind \"" + name + "\"");
}

int constraint_width(ConstraintKind kind, int n_shapes) {
    switch (kind) {
        case ConstraintKind::None: return 0;
        case ConstraintKind::Keyframes:
        case ConstraintKind::Noisy: return n_shapes;
        case ConstraintKind::Visemes: return kNumVisemes;
    }
    return 0;
}

namespace {

Eigen::MatrixXd constraint_mask(const Mask& mask, int n_feat) {
    Eigen::MatrixXd cmask = Eigen::MatrixXd::Zero(mask.length(), n_feat);
    for (const auto& seg : mask.segments())
        cmask.middleRows(seg.start, seg.length()).setOnes();
    return cmask;
}

}  // namespace

KeyframeSpec sample_training_keyframes(const Animation& gt, const Mask& mask, Rng& rng) {
    if (mask.length() != gt.length())
        throw DataError("mask length does not match animation");
    const int max_gap = std::max(1, static_cast<int>(std::floor(0.8 * gt.fps)));
    KeyframeSpec spec;
    for (const auto& seg : mask.segments()) {
        int last = -1;
        int cursor = seg.start + static_cast<int>(uniform_int(rng, 0, max_gap));
        while (cursor < seg.end) {
            if (cursor != last) {
                spec.entries.push_back({cursor, gt.frames.row(cursor).transpose()});
                last = cursor;
            }
            // zero gaps land on the same frame and collapse into one keyframe
            cursor += static_cast<int>(uniform_int(rng, 0, max_gap));
        }
    }
    return spec;
}

ConstraintMatrix build_keyframe_constraint(const KeyframeSpec& spec, const Mask& mask, int length,
                                           int n_shapes) {
    if (mask.length() != length)
        throw DataError("mask length does not match requested constraint length");
    ConstraintMatrix c;
    c.kind = ConstraintKind::Keyframes;
    c.values = Eigen::MatrixXd::Zero(length, n_shapes);
    c.cmask = constraint_mask(mask, n_shapes);
    int prev = -1;
    for (const auto& kf : spec.entries) {
        if (kf.frame <= prev)
            throw DataError("keyframe frames must be strictly increasing");
        prev = kf.frame;
        if (kf.frame < 0 || kf.frame >= length || !mask.covers(kf.frame))
            throw DataError("keyframe at frame " + std::to_string(kf.frame) +
                            " lies outside the masked segments");
        if (kf.weights.size() != n_shapes)
            throw DataError("keyframe weight vector has wrong width");
        c.values.row(kf.frame) = kf.weights.transpose();
    }
    return c;
}

ConstraintMatrix build_noisy_constraint(const Animation& noisy, const Mask& mask) {
    if (mask.length() != noisy.length())
        throw DataError("noisy guide length does not match mask");
    ConstraintMatrix c;
    c.kind = ConstraintKind::Noisy;
    c.cmask = constraint_mask(mask, noisy.n_shapes());
    c.values = c.cmask.cwiseProduct(noisy.frames);
    return c;
}

ConstraintMatrix build_viseme_constraint(const std::vector<std::string>& timeline,
                                         const VisemeVocabulary& vocab, const Mask& mask) {
    if (static_cast<int>(timeline.size()) != mask.length())
        throw DataError("phoneme timeline length " + std::to_string(timeline.size()) +
                        " does not match mask length " + std::to_string(mask.length()));
    ConstraintMatrix c;
    c.kind = ConstraintKind::Visemes;
    c.values = Eigen::MatrixXd::Zero(mask.length(), vocab.n_classes());
    c.cmask = constraint_mask(mask, vocab.n_classes());
    for (const auto& seg : mask.segments())
        for (int t = seg.start; t < seg.end; ++t)
            c.values(t, phoneme_to_viseme(timeline[t], vocab)) = 1.0;
    return c;
}

ConstraintMatrix build_none_constraint(const Mask& mask) {
    ConstraintMatrix c;
    c.kind = ConstraintKind::None;
    c.values.resize(mask.length(), 0);
    c.cmask.resize(mask.length(), 0);
    return c;
}

}  // namespace faceedit
