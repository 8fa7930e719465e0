#include "faceedit/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "faceedit/constraints.hpp"
#include "faceedit/errors.hpp"

namespace faceedit {

namespace fs = std::filesystem;

ModelBundle init_bundle(const TrainConfig& cfg, const DistanceRig& rig) {
    if (!cfg.resume_from.empty()) {
        ModelBundle bundle = load_checkpoint(cfg.resume_from);
        if (bundle.kind != cfg.constraint_kind)
            throw DataError("checkpoint was trained for constraint kind " +
                            to_string(bundle.kind) + ", requested " +
                            to_string(cfg.constraint_kind));
        return bundle;
    }
    GeneratorConfig gen = cfg.generator;
    gen.n_feat = constraint_width(cfg.constraint_kind, gen.n_shapes);
    DiscriminatorConfig dis = cfg.discriminator;
    dis.seq_len = cfg.train_length;
    return make_bundle(cfg.constraint_kind, gen, dis, rig, cfg.seed);
}

namespace {

inline Eigen::MatrixXd sign_of(const Eigen::MatrixXd& m) {
    return m.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

struct StepSample {
    Mask mask;
};

ConstraintMatrix build_training_constraint(ConstraintKind kind, const CorpusSequence& seq,
                                           const Mask& mask, Rng& rng) {
    switch (kind) {
        case ConstraintKind::None:
            return build_none_constraint(mask);
        case ConstraintKind::Keyframes: {
            KeyframeSpec spec = sample_training_keyframes(seq.clean, mask, rng);
            return build_keyframe_constraint(spec, mask, seq.clean.length(),
                                             seq.clean.n_shapes());
        }
        case ConstraintKind::Noisy:
            return build_noisy_constraint(seq.noisy, mask);
        case ConstraintKind::Visemes:
            return build_viseme_constraint(seq.phonemes.phonemes, viseme_vocabulary(), mask);
    }
    throw RuntimeAbort("unhandled constraint kind");
}

}  // namespace

LossRecord train_step(ModelBundle& bundle, const std::vector<const CorpusSequence*>& batch,
                      const TrainConfig& cfg) {
    if (batch.empty())
        throw DataError("training batch is empty");
    const int B = static_cast<int>(batch.size());
    const int L = cfg.train_length;
    const int N = bundle.generator.config().n_shapes;
    for (const CorpusSequence* seq : batch) {
        if (seq->clean.length() != L)
            throw DataError("training sequences must have length " + std::to_string(L));
        if (seq->clean.n_shapes() != N)
            throw DataError("training sequences must have " + std::to_string(N) + " shapes");
    }
    const LossWeights& w = cfg.weights;
    const double inv_b = 1.0 / B;

    // Sample masks, guidance, and noise for the whole batch.
    std::vector<StepSample> samples;
    samples.reserve(B);
    std::vector<GeneratorInput> inputs(B);
    for (int b = 0; b < B; ++b) {
        const CorpusSequence& seq = *batch[b];
        Mask mask = random_training_mask(L, N, cfg.mask_sampler, bundle.rng);
        ConstraintMatrix c = build_training_constraint(bundle.kind, seq, mask, bundle.rng);
        GeneratorInput& in = inputs[b];
        in.masked_anim = apply_mask(seq.clean, mask).frames;
        in.mask_channel = mask.frame_flags();
        in.noise.resize(L);
        for (int t = 0; t < L; ++t)
            in.noise(t) = normal(bundle.rng);
        in.constraint = std::move(c.values);
        samples.push_back({std::move(mask)});
    }

    GeneratorTape tape;
    std::vector<Eigen::MatrixXd> gen_out =
        bundle.generator.forward_batch(inputs, /*train_mode=*/true, &bundle.rng, &tape);

    std::vector<Eigen::MatrixXd> x_rec(B), y_gt(B), y_rec(B);
    for (int b = 0; b < B; ++b) {
        x_rec[b] = recompose_frames(batch[b]->clean.frames, samples[b].mask, gen_out[b]);
        y_gt[b] = make_discriminator_input(batch[b]->clean.frames, bundle.rig).stacked();
        y_rec[b] = make_discriminator_input(x_rec[b], bundle.rig).stacked();
    }

    LossRecord record;
    record.iter = bundle.iteration;

    auto discriminator_half_step = [&] {
        const auto gen_before = param_checksum(std::as_const(bundle.generator).param_list());
        bundle.discriminator.refresh_spectral(cfg.power_iterations);

        std::vector<Eigen::MatrixXd> grads = bundle.discriminator.zero_grads();
        double sum_gt = 0.0, sum_rec = 0.0, hinge_real = 0.0, hinge_fake = 0.0, gp_sum = 0.0;
        for (int b = 0; b < B; ++b) {
            DiscriminatorTape dt_gt, dt_rec;
            const double s_gt = bundle.discriminator.score(y_gt[b], &dt_gt);
            const double s_rec = bundle.discriminator.score(y_rec[b], &dt_rec);
            sum_gt += s_gt;
            sum_rec += s_rec;
            if (cfg.loss_options.hinge) {
                hinge_real += std::max(0.0, 1.0 - s_gt);
                hinge_fake += std::max(0.0, 1.0 + s_rec);
                if (1.0 - s_gt > 0.0)
                    bundle.discriminator.backward_params(dt_gt, -inv_b, grads);
                if (1.0 + s_rec > 0.0)
                    bundle.discriminator.backward_params(dt_rec, inv_b, grads);
            } else {
                hinge_real += 1.0 - s_gt;
                hinge_fake += 1.0 + s_rec;
                bundle.discriminator.backward_params(dt_gt, -inv_b, grads);
                bundle.discriminator.backward_params(dt_rec, inv_b, grads);
            }
            AdversarialSample adv =
                make_adversarial_sample(y_gt[b], y_rec[b], samples[b].mask, bundle.rng);
            gp_sum += bundle.discriminator.gradient_penalty_param_grads(adv.u, adv.mask_ext,
                                                                        w.w_gp * inv_b, grads);
        }
        record.score_gt = sum_gt * inv_b;
        record.score_rec = sum_rec * inv_b;
        record.gp = gp_sum * inv_b;
        record.loss_d = hinge_real * inv_b + hinge_fake * inv_b + w.w_gp * record.gp;

        AdamConfig adam{cfg.learning_rate};
        bundle.dis_opt.update(bundle.discriminator.param_list(), grads, adam);
        // The raw kernels moved; re-derive W/sigma without another power step.
        bundle.discriminator.refresh_spectral(0);

        if (param_checksum(std::as_const(bundle.generator).param_list()) != gen_before)
            throw RuntimeAbort("generator parameters changed during discriminator update");
    };

    auto generator_half_step = [&] {
        const auto dis_before = param_checksum(std::as_const(bundle.discriminator).param_list());

        std::vector<Eigen::MatrixXd> d_out(B);
        double adv_term = 0.0, feat_sum = 0.0, dis_sum = 0.0;
        double masked_abs = 0.0;
        std::int64_t masked_entries = 0;
        for (int b = 0; b < B; ++b) {
            const CorpusSequence& seq = *batch[b];
            const Mask& mask = samples[b].mask;
            const Eigen::MatrixXd diff = gen_out[b] - seq.clean.frames;

            // Adversarial: d(1 - D(Y))/dX through the recomposition splice.
            Eigen::MatrixXd d_x;
            if (cfg.loss_options.adversarial_on_recomposed) {
                DiscriminatorTape dt;
                const double s = bundle.discriminator.score(y_rec[b], &dt);
                adv_term += 1.0 - s;
                Eigen::MatrixXd gy = bundle.discriminator.input_gradient(y_rec[b], nullptr, &dt);
                Eigen::MatrixXd g_anim =
                    gy.leftCols(N) + gy.rightCols(bundle.rig.n_distances()) * bundle.rig.A;
                d_x = Eigen::MatrixXd::Zero(L, N);
                for (const auto& seg : mask.segments())
                    d_x.middleRows(seg.start, seg.length()) =
                        -inv_b * g_anim.middleRows(seg.start, seg.length());
            } else {
                const Eigen::MatrixXd y_raw =
                    make_discriminator_input(gen_out[b], bundle.rig).stacked();
                DiscriminatorTape dt;
                const double s = bundle.discriminator.score(y_raw, &dt);
                adv_term += 1.0 - s;
                Eigen::MatrixXd gy = bundle.discriminator.input_gradient(y_raw, nullptr, &dt);
                d_x = -inv_b * (gy.leftCols(N) +
                                gy.rightCols(bundle.rig.n_distances()) * bundle.rig.A);
            }

            // Reconstruction term, Eq. 1 weighting.
            const double lf = loss_feat(gen_out[b], seq.clean.frames, mask, w.alpha_gt);
            feat_sum += lf;
            const Eigen::ArrayXXd m = mask.dense().array();
            d_x += (w.w_feat * inv_b / (L * N)) *
                   ((w.alpha_gt * (1.0 - m) + m) * sign_of(diff).array()).matrix();

            // Distance preservation term.
            const Eigen::MatrixXd d_diff = diff * bundle.rig.A.transpose();
            dis_sum += d_diff.array().abs().mean();
            d_x += (w.w_dis * inv_b / (L * bundle.rig.n_distances())) *
                   (sign_of(d_diff) * bundle.rig.A);

            d_out[b] = std::move(d_x);

            for (const auto& seg : mask.segments()) {
                masked_abs += diff.middleRows(seg.start, seg.length()).array().abs().sum();
                masked_entries += static_cast<std::int64_t>(seg.length()) * N;
            }
        }
        record.loss_feat = feat_sum * inv_b;
        record.loss_dis = dis_sum * inv_b;
        record.loss_g = adv_term * inv_b + w.w_feat * record.loss_feat +
                        w.w_dis * record.loss_dis;
        record.masked_l1 = masked_entries > 0 ? masked_abs / masked_entries : 0.0;

        std::vector<Eigen::MatrixXd> grads = bundle.generator.backward_batch(tape, d_out);
        AdamConfig adam{cfg.learning_rate};
        bundle.gen_opt.update(bundle.generator.param_list(), grads, adam);

        if (param_checksum(std::as_const(bundle.discriminator).param_list()) != dis_before)
            throw RuntimeAbort("discriminator parameters changed during generator update");
    };

    if (cfg.discriminator_first) {
        discriminator_half_step();
        generator_half_step();
    } else {
        generator_half_step();
        discriminator_half_step();
    }

    ++bundle.iteration;

    for (double v : {record.loss_g, record.loss_d, record.loss_feat, record.loss_dis, record.gp,
                     record.score_gt, record.score_rec}) {
        if (!std::isfinite(v))
            throw RuntimeAbort(
                "non-finite loss at iteration " + std::to_string(record.iter) +
                ": loss_G=" + std::to_string(record.loss_g) +
                " loss_D=" + std::to_string(record.loss_d) +
                " loss_feat=" + std::to_string(record.loss_feat) +
                " loss_dis=" + std::to_string(record.loss_dis) + " gp=" + std::to_string(record.gp) +
                " score_gt=" + std::to_string(record.score_gt) +
                " score_rec=" + std::to_string(record.score_rec));
    }
    return record;
}

void write_loss_trace(const std::vector<LossRecord>& records, const std::string& path,
                      bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out)
        throw RuntimeAbort("cannot write loss trace " + path);
    if (!append)
        out << "iter,loss_G,loss_D,loss_feat,loss_dis,gp,score_gt,score_rec\n";
    out.precision(17);
    for (const auto& r : records)
        out << r.iter << ',' << r.loss_g << ',' << r.loss_d << ',' << r.loss_feat << ','
            << r.loss_dis << ',' << r.gp << ',' << r.score_gt << ',' << r.score_rec << '\n';
}

TrainResult train(const TrainConfig& cfg, const CorpusManifest& manifest,
                  const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw RuntimeAbort("cannot create output directory " + out_dir);

    const std::vector<CorpusSequence> corpus = load_corpus(manifest);
    const DistanceRig& rig = canonical_rig();
    ModelBundle bundle = init_bundle(cfg, rig);

    const std::string trace_path = (fs::path(out_dir) / "loss_trace.csv").string();
    const bool resuming = !cfg.resume_from.empty();
    if (!resuming)
        write_loss_trace({}, trace_path, /*append=*/false);

    TrainResult result;
    std::vector<const CorpusSequence*> batch(cfg.batch_size);
    while (bundle.iteration < cfg.iterations) {
        for (int b = 0; b < cfg.batch_size; ++b)
            batch[b] = &corpus[static_cast<size_t>(
                uniform_int(bundle.rng, 0, static_cast<std::int64_t>(corpus.size()) - 1))];
        LossRecord record = train_step(bundle, batch, cfg);
        write_loss_trace({record}, trace_path, /*append=*/true);
        result.records.push_back(record);

        if (cfg.checkpoint_every > 0 && bundle.iteration % cfg.checkpoint_every == 0 &&
            bundle.iteration < cfg.iterations) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_%06lld.fec",
                          static_cast<long long>(bundle.iteration));
            save_checkpoint(bundle, (fs::path(out_dir) / name).string());
        }
    }
    result.final_checkpoint = (fs::path(out_dir) / "model.fec").string();
    save_checkpoint(bundle, result.final_checkpoint);
    return result;
}

}  // namespace faceedit
