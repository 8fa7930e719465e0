#include "faceedit/editing.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "faceedit/errors.hpp"
#include "json.hpp"

namespace faceedit {

namespace {

ConstraintMatrix build_edit_constraint(const EditRequest& req, const Mask& mask) {
    const int L = req.animation.length();
    const int N = req.animation.n_shapes();
    switch (req.guidance.kind) {
        case ConstraintKind::None:
            return build_none_constraint(mask);
        case ConstraintKind::Keyframes:
            return build_keyframe_constraint(req.guidance.keyframes, mask, L, N);
        case ConstraintKind::Noisy:
            return build_noisy_constraint(req.guidance.noisy, mask);
        case ConstraintKind::Visemes:
            return build_viseme_constraint(req.guidance.phonemes, viseme_vocabulary(), mask);
    }
    throw RuntimeAbort("unhandled constraint kind");
}

// Shift the fill so each keyframe is hit exactly, tapering the offset to
// zero at segment boundaries so the splice stays seamless.
void warp_to_keyframes(Eigen::MatrixXd& generated, const Mask& mask, const KeyframeSpec& spec) {
    for (const auto& seg : mask.segments()) {
        // Anchor offsets: zero just outside the segment, the required
        // correction at each keyframe inside it.
        std::vector<int> anchor_t;
        std::vector<Eigen::VectorXd> anchor_d;
        const int n = static_cast<int>(generated.cols());
        anchor_t.push_back(seg.start - 1);
        anchor_d.push_back(Eigen::VectorXd::Zero(n));
        for (const auto& kf : spec.entries) {
            if (kf.frame < seg.start || kf.frame >= seg.end)
                continue;
            anchor_t.push_back(kf.frame);
            anchor_d.push_back(kf.weights - generated.row(kf.frame).transpose());
        }
        if (anchor_t.size() == 1)
            continue;  // no keyframes inside this segment
        anchor_t.push_back(seg.end);
        anchor_d.push_back(Eigen::VectorXd::Zero(n));

        size_t k = 0;
        for (int t = seg.start; t < seg.end; ++t) {
            while (k + 1 < anchor_t.size() && anchor_t[k + 1] < t)
                ++k;
            const int t0 = anchor_t[k];
            const int t1 = anchor_t[k + 1];
            const double frac = t1 == t0 ? 0.0 : static_cast<double>(t - t0) / (t1 - t0);
            generated.row(t) +=
                ((1.0 - frac) * anchor_d[k] + frac * anchor_d[k + 1]).transpose();
        }
    }
}

}  // namespace

Animation edit(const EditRequest& req, const ModelBundle& model) {
    Animation anim = req.animation;
    validate_animation(anim, /*clamp=*/false);
    if (req.guidance.kind != model.kind)
        throw DataError("model was trained for constraint kind " + to_string(model.kind) +
                        " but the edit provides " + to_string(req.guidance.kind));
    const int N = model.generator.config().n_shapes;
    if (anim.n_shapes() != N)
        throw DataError("animation has " + std::to_string(anim.n_shapes()) +
                        " shapes, model expects " + std::to_string(N));
    if (req.segments.empty())
        return anim;

    const int L = anim.length();
    const Mask mask = segments_to_mask(req.segments, L, N);
    const ConstraintMatrix constraint = build_edit_constraint(req, mask);

    GeneratorInput input;
    input.masked_anim = apply_mask(anim, mask).frames;
    input.mask_channel = mask.frame_flags();
    input.noise.resize(L);
    Rng rng(req.seed);
    for (int t = 0; t < L; ++t)
        input.noise(t) = normal(rng);
    input.constraint = constraint.values;

    Eigen::MatrixXd generated = model.generator.forward(input, /*train_mode=*/false);
    if (req.exact_keyframes && req.guidance.kind == ConstraintKind::Keyframes)
        warp_to_keyframes(generated, mask, req.guidance.keyframes);
    generated = generated.cwiseMax(0.0).cwiseMin(1.0);

    Animation out = anim;
    out.frames = recompose_frames(anim.frames, mask, generated);
    return out;
}

double hermite_value(double p0, double m0, double p1, double m1, double span, double u) {
    const double u2 = u * u;
    const double u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * p0 + (u3 - 2 * u2 + u) * span * m0 +
           (-2 * u3 + 3 * u2) * p1 + (u3 - u2) * span * m1;
}

double hermite_derivative(double p0, double m0, double p1, double m1, double span, double u) {
    const double u2 = u * u;
    // d/du, then back to value-per-frame units.
    const double d = (6 * u2 - 6 * u) * p0 + (3 * u2 - 4 * u + 1) * span * m0 +
                     (-6 * u2 + 6 * u) * p1 + (3 * u2 - 2 * u) * span * m1;
    return d / span;
}

Animation interpolate_baseline(const Animation& anim, const std::vector<Segment>& segments,
                               BaselineMethod method) {
    Animation out = anim;
    if (segments.empty())
        return out;
    const int L = anim.length();
    const int N = anim.n_shapes();
    const Mask mask = segments_to_mask(segments, L, N);

    for (const auto& seg : mask.segments()) {
        const bool has_left = seg.start > 0;
        const bool has_right = seg.end < L;
        if (!has_left && !has_right)
            throw DataError("baseline interpolation needs at least one boundary frame");
        if (!has_left || !has_right) {
            const int anchor = has_left ? seg.start - 1 : seg.end;
            for (int t = seg.start; t < seg.end; ++t)
                out.frames.row(t) = anim.frames.row(anchor);
            continue;
        }

        const int span = seg.length() + 1;  // frames from seg.start-1 to seg.end
        const Eigen::RowVectorXd a = anim.frames.row(seg.start - 1);
        const Eigen::RowVectorXd b = anim.frames.row(seg.end);
        if (method == BaselineMethod::Linear) {
            for (int k = 0; k < seg.length(); ++k) {
                const double frac = static_cast<double>(k + 1) / span;
                out.frames.row(seg.start + k) = (1.0 - frac) * a + frac * b;
            }
        } else {
            Eigen::RowVectorXd m0 = Eigen::RowVectorXd::Zero(N);
            Eigen::RowVectorXd m1 = Eigen::RowVectorXd::Zero(N);
            if (seg.start - 2 >= 0)
                m0 = anim.frames.row(seg.start - 1) - anim.frames.row(seg.start - 2);
            if (seg.end + 1 < L)
                m1 = anim.frames.row(seg.end + 1) - anim.frames.row(seg.end);
            for (int k = 0; k < seg.length(); ++k) {
                const double u = static_cast<double>(k + 1) / span;
                for (int c = 0; c < N; ++c)
                    out.frames(seg.start + k, c) =
                        hermite_value(a(c), m0(c), b(c), m1(c), span, u);
            }
        }
        for (int t = seg.start; t < seg.end; ++t)
            out.frames.row(t) = out.frames.row(t).cwiseMax(0.0).cwiseMin(1.0);
    }
    return out;
}

EditSpec load_edit_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open edit spec " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    EditSpec spec;
    const auto base = std::filesystem::path(path).parent_path();
    try {
        for (const auto& s : j.at("segments"))
            spec.segments.push_back({s.at("start").get<int>(), s.at("end").get<int>()});
        if (!j.contains("constraint")) {
            spec.guidance.kind = ConstraintKind::None;
            return spec;
        }
        const auto& c = j.at("constraint");
        spec.guidance.kind = constraint_kind_from_string(c.at("type").get<std::string>());
        switch (spec.guidance.kind) {
            case ConstraintKind::None:
                break;
            case ConstraintKind::Keyframes:
                for (const auto& e : c.at("entries")) {
                    Keyframe kf;
                    kf.frame = e.at("frame").get<int>();
                    const auto w = e.at("weights").get<std::vector<double>>();
                    kf.weights = Eigen::Map<const Eigen::VectorXd>(w.data(),
                                                                   static_cast<int>(w.size()));
                    spec.guidance.keyframes.entries.push_back(std::move(kf));
                }
                break;
            case ConstraintKind::Noisy:
                spec.guidance.noisy =
                    load_animation((base / c.at("path").get<std::string>()).string());
                break;
            case ConstraintKind::Visemes:
                spec.guidance.phonemes =
                    load_phoneme_timeline((base / c.at("path").get<std::string>()).string())
                        .phonemes;
                break;
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    return spec;
}

}  // namespace faceedit
