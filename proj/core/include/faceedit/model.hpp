#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faceedit/animation.hpp"
#include "faceedit/constraints.hpp"
#include "faceedit/random.hpp"

namespace faceedit {

// ---------------------------------------------------------------------------
// Spectral normalization
// ---------------------------------------------------------------------------

// Persistent power-iteration vectors for one weight matrix.
struct SpectralState {
    Eigen::VectorXd u;  // rows(weight)
    Eigen::VectorXd v;  // cols(weight)

    void init(int rows, int cols, Rng& rng);
};

// Returns weight / sigma_hat, where sigma_hat = u' W v after n_iter
// alternating power steps. u and v are updated in place, so repeated calls
// sharpen the estimate. Convolution kernels are stored reshaped to
// (out_channels x in_channels*kernel) and normalized as that 2-D matrix.
Eigen::MatrixXd spectral_normalize(const Eigen::MatrixXd& weight, SpectralState& state,
                                   int n_iter, double* sigma_out = nullptr);

// ---------------------------------------------------------------------------
// Generator: stacked bidirectional LSTM + per-frame dense head
// ---------------------------------------------------------------------------

struct GeneratorConfig {
    int n_layers = 2;
    int hidden_units = 128;  // per direction
    int n_shapes = kCanonicalShapes;
    int n_feat = 0;  // constraint channel width
    double dropout_rate = 0.3;

    // masked animation + mask flag + noise + constraint channels
    int input_width() const { return n_shapes + 1 + 1 + n_feat; }
    int output_width() const { return n_shapes; }
};

// One frame stream fed to the generator. All blocks share L.
struct GeneratorInput {
    Eigen::MatrixXd masked_anim;   // L x n_shapes (X_i)
    Eigen::VectorXd mask_channel;  // L, 1 on erased frames
    Eigen::VectorXd noise;         // L, iid standard normal (z)
    Eigen::MatrixXd constraint;    // L x n_feat (C_i)

    int length() const { return static_cast<int>(masked_anim.rows()); }
};

struct LstmDirectionParams {
    Eigen::MatrixXd wx;    // in x 4H, gate order i f g o
    Eigen::MatrixXd wh;    // H x 4H
    Eigen::MatrixXd bias;  // 1 x 4H
};

// Cached activations of one forward pass, consumed by backward().
// Stacked matrices index row (t, b) as t*B + b.
struct GeneratorTape {
    int batch = 0;
    int length = 0;
    struct DirectionTrace {
        Eigen::MatrixXd gate_i, gate_f, gate_g, gate_o;  // LB x H
        Eigen::MatrixXd cell, tanh_cell;                 // LB x H
        Eigen::MatrixXd hidden;                          // LB x H
    };
    struct LayerTrace {
        Eigen::MatrixXd input;  // LB x in_l (post-dropout of previous layer)
        DirectionTrace fwd, bwd;
        Eigen::MatrixXd dropout_mask;  // LB x 2H scale factors, empty if unused
    };
    std::vector<LayerTrace> layers;
    Eigen::MatrixXd head_input;  // LB x 2H
};

class Generator {
public:
    Generator() = default;
    explicit Generator(const GeneratorConfig& cfg) : cfg_(cfg) {}

    const GeneratorConfig& config() const { return cfg_; }

    void init(Rng& rng);

    // Per-frame outputs, L x n_shapes. With train_mode off the pass is a
    // pure function of (params, input); with it on, dropout masks are drawn
    // from `rng`.
    Eigen::MatrixXd forward(const GeneratorInput& input, bool train_mode = false,
                            Rng* rng = nullptr, GeneratorTape* tape = nullptr) const;

    // Batched variant for training; all inputs must share L.
    std::vector<Eigen::MatrixXd> forward_batch(const std::vector<GeneratorInput>& inputs,
                                               bool train_mode, Rng* rng,
                                               GeneratorTape* tape = nullptr) const;

    // Parameter gradients of sum_b <d_outputs[b], output_b>.
    std::vector<Eigen::MatrixXd> backward_batch(const GeneratorTape& tape,
                                                const std::vector<Eigen::MatrixXd>& d_outputs) const;

    std::vector<Eigen::MatrixXd*> param_list();
    std::vector<const Eigen::MatrixXd*> param_list() const;
    std::vector<Eigen::MatrixXd> zero_grads() const;

    std::vector<LstmDirectionParams>& forward_layers() { return fwd_; }
    std::vector<LstmDirectionParams>& backward_layers() { return bwd_; }
    Eigen::MatrixXd& head_weight() { return w_head_; }
    Eigen::MatrixXd& head_bias() { return b_head_; }

private:
    GeneratorConfig cfg_;
    std::vector<LstmDirectionParams> fwd_;  // one per layer
    std::vector<LstmDirectionParams> bwd_;
    Eigen::MatrixXd w_head_;  // 2H x n_shapes
    Eigen::MatrixXd b_head_;  // 1 x n_shapes
};

// ---------------------------------------------------------------------------
// Discriminator: strided temporal convolutions + dense score
// ---------------------------------------------------------------------------

struct DiscriminatorConfig {
    int in_channels = kCanonicalShapes + kNumDistances;  // 40
    std::vector<int> channels = {64, 32, 16, 8};
    int kernel = 3;
    int stride = 2;
    int padding = 1;
    double leaky_slope = 0.2;
    int seq_len = 200;  // training length; fixes the dense layer input

    int conv_output_len() const;
};

// Y: an animation beside its six rig distances, one frame per row.
struct DiscriminatorInput {
    Eigen::MatrixXd anim;       // L x 34
    Eigen::MatrixXd distances;  // L x 6

    Eigen::MatrixXd stacked() const {
        Eigen::MatrixXd y(anim.rows(), anim.cols() + distances.cols());
        y << anim, distances;
        return y;
    }
};

DiscriminatorInput make_discriminator_input(const Eigen::MatrixXd& frames, const DistanceRig& rig);

struct DiscriminatorTape {
    std::vector<Eigen::MatrixXd> inputs;  // per layer, channels x T (pre-conv)
    std::vector<Eigen::MatrixXd> preact;  // per layer, channels x T
    Eigen::VectorXd flat;                 // flattened final feature map
};

// Scores should rise on real sequences. Evaluations run against the cached
// spectrally-normalized kernels; call refresh_spectral() after any weight
// update (training does this once per step).
class Discriminator {
public:
    Discriminator() = default;
    explicit Discriminator(const DiscriminatorConfig& cfg);

    const DiscriminatorConfig& config() const { return cfg_; }

    void init(Rng& rng);

    // Runs n_iter power steps on every kernel and caches W/sigma.
    void refresh_spectral(int n_iter);

    double score(const Eigen::MatrixXd& y, DiscriminatorTape* tape = nullptr) const;
    double score(const DiscriminatorInput& input, DiscriminatorTape* tape = nullptr) const {
        return score(input.stacked(), tape);
    }

    // d(score * upstream)/d(params), appended into `grads`.
    void backward_params(const DiscriminatorTape& tape, double upstream,
                         std::vector<Eigen::MatrixXd>& grads) const;

    // dD/dY, shape L x 40.
    Eigen::MatrixXd input_gradient(const Eigen::MatrixXd& y,
                                   std::vector<Eigen::MatrixXd>* chain = nullptr,
                                   const DiscriminatorTape* reuse_tape = nullptr) const;

    // Parameter gradients of p = (||dD/dY ⊙ mask|| - 1)^2 at input y,
    // accumulated into `grads`; returns p. LeakyReLU branch patterns are
    // treated as locally constant, which is exact almost everywhere.
    double gradient_penalty_param_grads(const Eigen::MatrixXd& y, const Eigen::MatrixXd& mask_ext,
                                        double upstream, std::vector<Eigen::MatrixXd>& grads) const;

    std::vector<Eigen::MatrixXd*> param_list();
    std::vector<const Eigen::MatrixXd*> param_list() const;
    std::vector<Eigen::MatrixXd> zero_grads() const;

    int n_layers() const { return static_cast<int>(conv_w_.size()); }
    Eigen::MatrixXd& conv_weight(int i) { return conv_w_[i]; }
    const Eigen::MatrixXd& normalized_weight(int i) const { return conv_w_hat_[i]; }
    double sigma(int i) const { return sigma_[i]; }
    SpectralState& spectral_state(int i) { return sn_[i]; }
    Eigen::MatrixXd& dense_weight() { return w_dense_; }
    Eigen::MatrixXd& dense_bias() { return b_dense_; }

private:
    DiscriminatorConfig cfg_;
    std::vector<Eigen::MatrixXd> conv_w_;      // out_ch x in_ch*kernel
    std::vector<Eigen::MatrixXd> conv_b_;      // 1 x out_ch
    std::vector<Eigen::MatrixXd> conv_w_hat_;  // cached W/sigma
    std::vector<double> sigma_;
    std::vector<SpectralState> sn_;
    Eigen::MatrixXd w_dense_;  // 1 x (ch_last * T_last)
    Eigen::MatrixXd b_dense_;  // 1 x 1

    // Routes a gradient on the normalized kernel back to the raw one.
    Eigen::MatrixXd chain_spectral(int layer, const Eigen::MatrixXd& d_what) const;
};

// FNV-1a over the raw bytes of every parameter; used to verify that each
// half of a training step leaves the other network untouched.
std::uint64_t param_checksum(const std::vector<const Eigen::MatrixXd*>& params);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Eigen::MatrixXd> m, v;
    std::int64_t step = 0;

    void init(const std::vector<const Eigen::MatrixXd*>& params);
    void update(const std::vector<Eigen::MatrixXd*>& params,
                const std::vector<Eigen::MatrixXd>& grads, const AdamConfig& cfg);
};

// ---------------------------------------------------------------------------
// Bundle + checkpointing
// ---------------------------------------------------------------------------

// Everything needed to continue training or run inference: both networks,
// optimizer moments, power-iteration state, the RNG, and the rig. One bundle
// is trained per constraint kind and the kind is enforced at edit time.
struct ModelBundle {
    ConstraintKind kind = ConstraintKind::None;
    Generator generator;
    Discriminator discriminator;
    AdamState gen_opt, dis_opt;
    std::int64_t iteration = 0;
    std::uint64_t seed = 0;
    Rng rng;
    DistanceRig rig;
};

ModelBundle make_bundle(ConstraintKind kind, const GeneratorConfig& gen_cfg,
                        const DiscriminatorConfig& dis_cfg, const DistanceRig& rig,
                        std::uint64_t seed);

// Binary container with an embedded JSON manifest; round-trips bit-exactly.
void save_checkpoint(const ModelBundle& bundle, const std::string& path);
ModelBundle load_checkpoint(const std::string& path);

}  // namespace faceedit
