#include <cmath>

#include "faceedit/errors.hpp"
#include "faceedit/model.hpp"

namespace faceedit {

namespace {

int conv_len(int t_in, int kernel, int stride, int padding) {
    const int t_out = (t_in + 2 * padding - kernel) / stride + 1;
    if (t_out < 1)
        throw DataError("sequence too short after strided convolutions");
    return t_out;
}

// Columns of the patch matrix are receptive fields: out(c_in*K + k, tau) =
// x_padded(c_in, tau*stride + k).
Eigen::MatrixXd im2col(const Eigen::MatrixXd& x, int kernel, int stride, int padding) {
    const int in_ch = static_cast<int>(x.rows());
    const int t_in = static_cast<int>(x.cols());
    const int t_out = conv_len(t_in, kernel, stride, padding);
    Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(in_ch * kernel, t_out);
    for (int tau = 0; tau < t_out; ++tau) {
        for (int k = 0; k < kernel; ++k) {
            const int src = tau * stride + k - padding;
            if (src < 0 || src >= t_in)
                continue;
            for (int c = 0; c < in_ch; ++c)
                cols(c * kernel + k, tau) = x(c, src);
        }
    }
    return cols;
}

// Adjoint of im2col: scatter-add patches back onto the time axis.
Eigen::MatrixXd col2im(const Eigen::MatrixXd& cols, int in_ch, int t_in, int kernel, int stride,
                       int padding) {
    const int t_out = static_cast<int>(cols.cols());
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(in_ch, t_in);
    for (int tau = 0; tau < t_out; ++tau) {
        for (int k = 0; k < kernel; ++k) {
            const int dst = tau * stride + k - padding;
            if (dst < 0 || dst >= t_in)
                continue;
            for (int c = 0; c < in_ch; ++c)
                x(c, dst) += cols(c * kernel + k, tau);
        }
    }
    return x;
}

inline Eigen::MatrixXd leaky_relu(const Eigen::MatrixXd& z, double slope) {
    return z.array().max(z.array() * slope).matrix();
}

inline Eigen::MatrixXd leaky_mask(const Eigen::MatrixXd& z, double slope) {
    return (z.array() > 0.0).select(Eigen::MatrixXd::Ones(z.rows(), z.cols()),
                                    Eigen::MatrixXd::Constant(z.rows(), z.cols(), slope));
}

double xavier_limit(int fan_in, int fan_out) {
    return std::sqrt(6.0 / (fan_in + fan_out));
}

void fill_uniform(Eigen::MatrixXd& m, double limit, Rng& rng) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            m(r, c) = uniform(rng, -limit, limit);
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

}  // namespace

int DiscriminatorConfig::conv_output_len() const {
    int t = seq_len;
    for (size_t i = 0; i < channels.size(); ++i)
        t = conv_len(t, kernel, stride, padding);
    return t;
}

DiscriminatorInput make_discriminator_input(const Eigen::MatrixXd& frames,
                                            const DistanceRig& rig) {
    DiscriminatorInput input;
    input.anim = frames;
    input.distances = frames * rig.A.transpose();
    input.distances.rowwise() += rig.b.transpose();
    return input;
}

Discriminator::Discriminator(const DiscriminatorConfig& cfg) : cfg_(cfg) {
    if (cfg_.channels.empty() || cfg_.kernel < 1 || cfg_.stride < 1 || cfg_.padding < 0)
        throw DataError("invalid discriminator config");
    cfg_.conv_output_len();  // validates seq_len against the stack
}

void Discriminator::init(Rng& rng) {
    const int n = static_cast<int>(cfg_.channels.size());
    conv_w_.resize(n);
    conv_b_.resize(n);
    conv_w_hat_.resize(n);
    sigma_.assign(n, 1.0);
    sn_.resize(n);
    int in_ch = cfg_.in_channels;
    for (int i = 0; i < n; ++i) {
        const int out_ch = cfg_.channels[i];
        conv_w_[i].resize(out_ch, in_ch * cfg_.kernel);
        fill_uniform(conv_w_[i], xavier_limit(in_ch * cfg_.kernel, out_ch), rng);
        conv_b_[i] = Eigen::MatrixXd::Zero(1, out_ch);
        sn_[i].init(out_ch, in_ch * cfg_.kernel, rng);
        in_ch = out_ch;
    }
    const int flat = cfg_.channels.back() * cfg_.conv_output_len();
    w_dense_.resize(1, flat);
    fill_uniform(w_dense_, xavier_limit(flat, 1), rng);
    b_dense_ = Eigen::MatrixXd::Zero(1, 1);
    refresh_spectral(1);
}

void Discriminator::refresh_spectral(int n_iter) {
    for (size_t i = 0; i < conv_w_.size(); ++i)
        conv_w_hat_[i] = spectral_normalize(conv_w_[i], sn_[i], n_iter, &sigma_[i]);
}

double Discriminator::score(const Eigen::MatrixXd& y, DiscriminatorTape* tape) const {
    if (conv_w_hat_.empty())
        throw RuntimeAbort("discriminator used before init()");
    if (y.rows() != cfg_.seq_len)
        throw DataError("discriminator expects sequences of length " +
                        std::to_string(cfg_.seq_len) + ", got " + std::to_string(y.rows()));
    if (y.cols() != cfg_.in_channels)
        throw DataError("discriminator expects " + std::to_string(cfg_.in_channels) +
                        " input channels");

    Eigen::MatrixXd x = y.transpose();  // channels x time
    const int n = n_layers();
    if (tape) {
        tape->inputs.assign(n, {});
        tape->preact.assign(n, {});
    }
    for (int i = 0; i < n; ++i) {
        if (tape)
            tape->inputs[i] = x;
        Eigen::MatrixXd cols = im2col(x, cfg_.kernel, cfg_.stride, cfg_.padding);
        Eigen::MatrixXd z = conv_w_hat_[i] * cols;
        z.colwise() += conv_b_[i].row(0).transpose();
        if (tape)
            tape->preact[i] = z;
        x = i + 1 < n ? leaky_relu(z, cfg_.leaky_slope) : std::move(z);
    }
    Eigen::VectorXd flat = flatten(x);
    if (tape)
        tape->flat = flat;
    return w_dense_.row(0).dot(flat) + b_dense_(0, 0);
}

void Discriminator::backward_params(const DiscriminatorTape& tape, double upstream,
                                    std::vector<Eigen::MatrixXd>& grads) const {
    const int n = n_layers();
    // Grad slots: per layer {w, b}, then dense {w, b}.
    Eigen::VectorXd d_flat = upstream * w_dense_.row(0).transpose();
    grads[2 * n] += upstream * tape.flat.transpose();
    grads[2 * n + 1](0, 0) += upstream;

    const auto& z_last = tape.preact[n - 1];
    Eigen::MatrixXd dz = Eigen::Map<const Eigen::MatrixXd>(d_flat.data(), z_last.rows(),
                                                           z_last.cols());
    for (int i = n - 1; i >= 0; --i) {
        if (i < n - 1)
            dz = dz.cwiseProduct(leaky_mask(tape.preact[i], cfg_.leaky_slope));
        Eigen::MatrixXd cols = im2col(tape.inputs[i], cfg_.kernel, cfg_.stride, cfg_.padding);
        grads[2 * i] += chain_spectral(i, dz * cols.transpose());
        grads[2 * i + 1] += dz.rowwise().sum().transpose();
        if (i > 0) {
            Eigen::MatrixXd d_cols = conv_w_hat_[i].transpose() * dz;
            dz = col2im(d_cols, static_cast<int>(tape.inputs[i].rows()),
                        static_cast<int>(tape.inputs[i].cols()), cfg_.kernel, cfg_.stride,
                        cfg_.padding);
        }
    }
}

Eigen::MatrixXd Discriminator::input_gradient(const Eigen::MatrixXd& y,
                                              std::vector<Eigen::MatrixXd>* chain,
                                              const DiscriminatorTape* reuse_tape) const {
    DiscriminatorTape local;
    const DiscriminatorTape* tape = reuse_tape;
    if (!tape) {
        score(y, &local);
        tape = &local;
    }
    const int n = n_layers();
    if (chain)
        chain->assign(n, {});

    const auto& z_last = tape->preact[n - 1];
    Eigen::MatrixXd dz =
        Eigen::Map<const Eigen::MatrixXd>(w_dense_.data(), z_last.rows(), z_last.cols());
    for (int i = n - 1; i >= 0; --i) {
        if (i < n - 1)
            dz = dz.cwiseProduct(leaky_mask(tape->preact[i], cfg_.leaky_slope));
        if (chain)
            (*chain)[i] = dz;
        Eigen::MatrixXd d_cols = conv_w_hat_[i].transpose() * dz;
        dz = col2im(d_cols, static_cast<int>(tape->inputs[i].rows()),
                    static_cast<int>(tape->inputs[i].cols()), cfg_.kernel, cfg_.stride,
                    cfg_.padding);
    }
    return dz.transpose();  // back to L x channels
}

double Discriminator::gradient_penalty_param_grads(const Eigen::MatrixXd& y,
                                                   const Eigen::MatrixXd& mask_ext,
                                                   double upstream,
                                                   std::vector<Eigen::MatrixXd>& grads) const {
    if (mask_ext.rows() != y.rows() || mask_ext.cols() != y.cols())
        throw DataError("gradient-penalty mask must match input shape");
    const int n = n_layers();

    DiscriminatorTape tape;
    score(y, &tape);
    std::vector<Eigen::MatrixXd> delta;  // dD/dz_i, channel-major
    Eigen::MatrixXd g = input_gradient(y, &delta, &tape);

    const Eigen::MatrixXd gm = g.cwiseProduct(mask_ext);
    const double r = gm.norm();
    const double penalty = (r - 1.0) * (r - 1.0);

    // d penalty / d g, then push it forward through the transposed network;
    // the activation branch patterns stay frozen (exact almost everywhere).
    Eigen::MatrixXd gbar = (upstream * 2.0 * (r - 1.0) / std::max(r, 1e-12)) * gm;

    Eigen::MatrixXd s = gbar.transpose();  // channel-major
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd cols = im2col(s, cfg_.kernel, cfg_.stride, cfg_.padding);
        grads[2 * i] += chain_spectral(i, delta[i] * cols.transpose());
        s = conv_w_hat_[i] * cols;
        if (i < n - 1)
            s = s.cwiseProduct(leaky_mask(tape.preact[i], cfg_.leaky_slope));
    }
    grads[2 * n] += flatten(s).transpose();
    return penalty;
}

Eigen::MatrixXd Discriminator::chain_spectral(int layer, const Eigen::MatrixXd& d_what) const {
    const double s = sigma_[layer];
    const double inner = d_what.cwiseProduct(conv_w_hat_[layer]).sum();
    return d_what / s - (inner / s) * (sn_[layer].u * sn_[layer].v.transpose());
}

std::vector<Eigen::MatrixXd*> Discriminator::param_list() {
    std::vector<Eigen::MatrixXd*> list;
    for (size_t i = 0; i < conv_w_.size(); ++i) {
        list.push_back(&conv_w_[i]);
        list.push_back(&conv_b_[i]);
    }
    list.push_back(&w_dense_);
    list.push_back(&b_dense_);
    return list;
}

std::vector<const Eigen::MatrixXd*> Discriminator::param_list() const {
    auto mut = const_cast<Discriminator*>(this)->param_list();
    return {mut.begin(), mut.end()};
}

std::vector<Eigen::MatrixXd> Discriminator::zero_grads() const {
    std::vector<Eigen::MatrixXd> grads;
    for (const Eigen::MatrixXd* p : param_list())
        grads.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    return grads;
}

std::uint64_t param_checksum(const std::vector<const Eigen::MatrixXd*>& params) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const Eigen::MatrixXd* p : params) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->data());
        const size_t len = static_cast<size_t>(p->size()) * sizeof(double);
        for (size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

}  // namespace faceedit
