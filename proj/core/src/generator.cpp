#include <cmath>
#include <future>

#include "faceedit/errors.hpp"
#include "faceedit/model.hpp"

namespace faceedit {

namespace {

double xavier_limit(int fan_in, int fan_out) {
    return std::sqrt(6.0 / (fan_in + fan_out));
}

void fill_uniform(Eigen::MatrixXd& m, double limit, Rng& rng) {
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            m(r, c) = uniform(rng, -limit, limit);
}

inline Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& x) {
    return 1.0 / (1.0 + (-x).exp());
}

struct DirectionGrads {
    Eigen::MatrixXd dwx, dwh, dbias;
    Eigen::MatrixXd d_input;  // LB x in
};

// One bidirectional LSTM direction over a stacked sequence.
// Rows of `input` index (t, b) as t*B + b.
void run_direction(const LstmDirectionParams& p, const Eigen::MatrixXd& input, int length,
                   int batch, bool reverse, GeneratorTape::DirectionTrace& trace) {
    const int hidden = static_cast<int>(p.wh.rows());
    const int rows = length * batch;

    trace.gate_i.resize(rows, hidden);
    trace.gate_f.resize(rows, hidden);
    trace.gate_g.resize(rows, hidden);
    trace.gate_o.resize(rows, hidden);
    trace.cell.resize(rows, hidden);
    trace.tanh_cell.resize(rows, hidden);
    trace.hidden.resize(rows, hidden);

    // Input projections for every step in one multiply.
    Eigen::MatrixXd xproj = input * p.wx;
    xproj.rowwise() += p.bias.row(0);

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(batch, hidden);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(batch, hidden);
    Eigen::MatrixXd pre(batch, 4 * hidden);

    for (int step = 0; step < length; ++step) {
        const int t = reverse ? length - 1 - step : step;
        const int row0 = t * batch;
        pre.noalias() = h * p.wh;
        pre += xproj.middleRows(row0, batch);

        auto gi = sigmoid(pre.leftCols(hidden).array());
        auto gf = sigmoid(pre.middleCols(hidden, hidden).array());
        auto gg = pre.middleCols(2 * hidden, hidden).array().tanh();
        auto go = sigmoid(pre.rightCols(hidden).array());

        trace.gate_i.middleRows(row0, batch) = gi;
        trace.gate_f.middleRows(row0, batch) = gf;
        trace.gate_g.middleRows(row0, batch) = gg;
        trace.gate_o.middleRows(row0, batch) = go;

        c = (gf * c.array() + gi * gg).matrix();
        trace.cell.middleRows(row0, batch) = c;
        Eigen::MatrixXd tc = c.array().tanh().matrix();
        trace.tanh_cell.middleRows(row0, batch) = tc;
        h = (go * tc.array()).matrix();
        trace.hidden.middleRows(row0, batch) = h;
    }
}

DirectionGrads backprop_direction(const LstmDirectionParams& p, const Eigen::MatrixXd& input,
                                  const GeneratorTape::DirectionTrace& trace,
                                  const Eigen::MatrixXd& d_hidden, int length, int batch,
                                  bool reverse) {
    const int hidden = static_cast<int>(p.wh.rows());
    const int rows = length * batch;

    Eigen::MatrixXd dpre(rows, 4 * hidden);
    Eigen::MatrixXd dh_rec = Eigen::MatrixXd::Zero(batch, hidden);
    Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(batch, hidden);

    for (int step = length - 1; step >= 0; --step) {
        const int t = reverse ? length - 1 - step : step;
        const int row0 = t * batch;
        const int prev_t = reverse ? t + 1 : t - 1;
        const bool has_prev = step > 0;

        auto gi = trace.gate_i.middleRows(row0, batch).array();
        auto gf = trace.gate_f.middleRows(row0, batch).array();
        auto gg = trace.gate_g.middleRows(row0, batch).array();
        auto go = trace.gate_o.middleRows(row0, batch).array();
        auto tc = trace.tanh_cell.middleRows(row0, batch).array();

        Eigen::ArrayXXd dh = d_hidden.middleRows(row0, batch).array() + dh_rec.array();
        Eigen::ArrayXXd da_o = dh * tc * go * (1.0 - go);
        dc.array() += dh * go * (1.0 - tc * tc);

        Eigen::ArrayXXd c_prev;
        if (has_prev)
            c_prev = trace.cell.middleRows(prev_t * batch, batch).array();
        else
            c_prev = Eigen::ArrayXXd::Zero(batch, hidden);

        Eigen::ArrayXXd da_f = dc.array() * c_prev * gf * (1.0 - gf);
        Eigen::ArrayXXd da_i = dc.array() * gg * gi * (1.0 - gi);
        Eigen::ArrayXXd da_g = dc.array() * gi * (1.0 - gg * gg);

        auto block = dpre.middleRows(row0, batch);
        block.leftCols(hidden) = da_i;
        block.middleCols(hidden, hidden) = da_f;
        block.middleCols(2 * hidden, hidden) = da_g;
        block.rightCols(hidden) = da_o;

        dh_rec.noalias() = block * p.wh.transpose();
        dc = (dc.array() * gf).matrix();
    }

    // Hidden states one step earlier in processing order (zero at the start).
    Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(rows, hidden);
    for (int step = 1; step < length; ++step) {
        const int t = reverse ? length - 1 - step : step;
        const int prev_t = reverse ? t + 1 : t - 1;
        h_prev.middleRows(t * batch, batch) = trace.hidden.middleRows(prev_t * batch, batch);
    }

    DirectionGrads g;
    g.dwx.noalias() = input.transpose() * dpre;
    g.dwh.noalias() = h_prev.transpose() * dpre;
    g.dbias = dpre.colwise().sum();
    g.d_input.noalias() = dpre * p.wx.transpose();
    return g;
}

}  // namespace

void Generator::init(Rng& rng) {
    const int H = cfg_.hidden_units;
    if (cfg_.n_layers < 1 || H < 1 || cfg_.n_shapes < 1 || cfg_.n_feat < 0)
        throw DataError("invalid generator config");
    fwd_.resize(cfg_.n_layers);
    bwd_.resize(cfg_.n_layers);
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const int in = l == 0 ? cfg_.input_width() : 2 * H;
        for (LstmDirectionParams* p : {&fwd_[l], &bwd_[l]}) {
            p->wx.resize(in, 4 * H);
            p->wh.resize(H, 4 * H);
            p->bias = Eigen::MatrixXd::Zero(1, 4 * H);
            fill_uniform(p->wx, xavier_limit(in, 4 * H), rng);
            fill_uniform(p->wh, xavier_limit(H, 4 * H), rng);
            p->bias.block(0, H, 1, H).setOnes();  // forget gate bias
        }
    }
    w_head_.resize(2 * H, cfg_.n_shapes);
    fill_uniform(w_head_, xavier_limit(2 * H, cfg_.n_shapes), rng);
    b_head_ = Eigen::MatrixXd::Zero(1, cfg_.n_shapes);
}

Eigen::MatrixXd Generator::forward(const GeneratorInput& input, bool train_mode, Rng* rng,
                                   GeneratorTape* tape) const {
    return forward_batch({input}, train_mode, rng, tape).front();
}

std::vector<Eigen::MatrixXd> Generator::forward_batch(const std::vector<GeneratorInput>& inputs,
                                                      bool train_mode, Rng* rng,
                                                      GeneratorTape* tape) const {
    if (fwd_.empty())
        throw RuntimeAbort("generator used before init()");
    if (inputs.empty())
        throw DataError("empty generator batch");
    const int B = static_cast<int>(inputs.size());
    const int L = inputs.front().length();
    const int H = cfg_.hidden_units;
    for (const auto& in : inputs) {
        if (in.length() != L)
            throw DataError("generator batch sequences must share length");
        if (in.masked_anim.cols() != cfg_.n_shapes || in.constraint.cols() != cfg_.n_feat ||
            in.mask_channel.size() != L || in.noise.size() != L || in.constraint.rows() != L)
            throw DataError("generator input widths do not match config");
    }
    if (L < 1)
        throw DataError("generator input must have at least one frame");
    if (train_mode && cfg_.dropout_rate > 0.0 && cfg_.n_layers > 1 && rng == nullptr)
        throw DataError("training-mode forward needs a random source for dropout");

    GeneratorTape local;
    GeneratorTape& tp = tape ? *tape : local;
    tp.batch = B;
    tp.length = L;
    tp.layers.resize(cfg_.n_layers);

    // Stack the per-sequence blocks as rows (t, b).
    Eigen::MatrixXd x(L * B, cfg_.input_width());
    for (int b = 0; b < B; ++b) {
        const auto& in = inputs[b];
        for (int t = 0; t < L; ++t) {
            const int r = t * B + b;
            x.block(r, 0, 1, cfg_.n_shapes) = in.masked_anim.row(t);
            x(r, cfg_.n_shapes) = in.mask_channel(t);
            x(r, cfg_.n_shapes + 1) = in.noise(t);
            if (cfg_.n_feat > 0)
                x.block(r, cfg_.n_shapes + 2, 1, cfg_.n_feat) = in.constraint.row(t);
        }
    }

    for (int l = 0; l < cfg_.n_layers; ++l) {
        auto& layer = tp.layers[l];
        layer.input = std::move(x);

        auto run_fwd = [&] { run_direction(fwd_[l], layer.input, L, B, false, layer.fwd); };
        auto fut = std::async(std::launch::async,
                              [&] { run_direction(bwd_[l], layer.input, L, B, true, layer.bwd); });
        run_fwd();
        fut.get();

        Eigen::MatrixXd out(L * B, 2 * H);
        out.leftCols(H) = layer.fwd.hidden;
        out.rightCols(H) = layer.bwd.hidden;

        const bool drop = train_mode && cfg_.dropout_rate > 0.0 && l < cfg_.n_layers - 1;
        if (drop) {
            const double keep = 1.0 - cfg_.dropout_rate;
            layer.dropout_mask.resize(L * B, 2 * H);
            for (int r = 0; r < layer.dropout_mask.rows(); ++r)
                for (int c = 0; c < layer.dropout_mask.cols(); ++c)
                    layer.dropout_mask(r, c) = uniform01(*rng) < cfg_.dropout_rate ? 0.0 : 1.0 / keep;
            out = out.cwiseProduct(layer.dropout_mask);
        } else {
            layer.dropout_mask.resize(0, 0);
        }
        x = std::move(out);
    }

    tp.head_input = std::move(x);
    Eigen::MatrixXd out_stack = tp.head_input * w_head_;
    out_stack.rowwise() += b_head_.row(0);

    std::vector<Eigen::MatrixXd> outputs(B);
    for (int b = 0; b < B; ++b) {
        outputs[b].resize(L, cfg_.n_shapes);
        for (int t = 0; t < L; ++t)
            outputs[b].row(t) = out_stack.row(t * B + b);
    }
    if (!outputs.front().allFinite())
        throw RuntimeAbort("generator produced non-finite output");
    return outputs;
}

std::vector<Eigen::MatrixXd> Generator::backward_batch(
    const GeneratorTape& tape, const std::vector<Eigen::MatrixXd>& d_outputs) const {
    const int B = tape.batch;
    const int L = tape.length;
    const int H = cfg_.hidden_units;
    if (static_cast<int>(d_outputs.size()) != B)
        throw DataError("gradient batch size does not match tape");

    Eigen::MatrixXd d_out(L * B, cfg_.n_shapes);
    for (int b = 0; b < B; ++b)
        for (int t = 0; t < L; ++t)
            d_out.row(t * B + b) = d_outputs[b].row(t);

    std::vector<Eigen::MatrixXd> grads = zero_grads();
    // Param order: per layer fwd{wx,wh,b}, bwd{wx,wh,b}; then head.
    const int head_w_idx = cfg_.n_layers * 6;

    grads[head_w_idx].noalias() = tape.head_input.transpose() * d_out;
    grads[head_w_idx + 1] = d_out.colwise().sum();

    Eigen::MatrixXd d_layer_out = d_out * w_head_.transpose();  // LB x 2H

    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
        const auto& layer = tape.layers[l];
        if (layer.dropout_mask.size() > 0)
            d_layer_out = d_layer_out.cwiseProduct(layer.dropout_mask);

        Eigen::MatrixXd dh_fwd = d_layer_out.leftCols(H);
        Eigen::MatrixXd dh_bwd = d_layer_out.rightCols(H);

        DirectionGrads gf;
        auto fut = std::async(std::launch::async, [&] {
            return backprop_direction(bwd_[l], layer.input, layer.bwd, dh_bwd, L, B, true);
        });
        gf = backprop_direction(fwd_[l], layer.input, layer.fwd, dh_fwd, L, B, false);
        DirectionGrads gb = fut.get();

        grads[l * 6 + 0] = std::move(gf.dwx);
        grads[l * 6 + 1] = std::move(gf.dwh);
        grads[l * 6 + 2] = std::move(gf.dbias);
        grads[l * 6 + 3] = std::move(gb.dwx);
        grads[l * 6 + 4] = std::move(gb.dwh);
        grads[l * 6 + 5] = std::move(gb.dbias);

        if (l > 0)
            d_layer_out = gf.d_input + gb.d_input;
    }
    return grads;
}

std::vector<Eigen::MatrixXd*> Generator::param_list() {
    std::vector<Eigen::MatrixXd*> list;
    for (int l = 0; l < cfg_.n_layers; ++l) {
        for (LstmDirectionParams* p : {&fwd_[l], &bwd_[l]}) {
            list.push_back(&p->wx);
            list.push_back(&p->wh);
            list.push_back(&p->bias);
        }
    }
    list.push_back(&w_head_);
    list.push_back(&b_head_);
    return list;
}

std::vector<const Eigen::MatrixXd*> Generator::param_list() const {
    auto mut = const_cast<Generator*>(this)->param_list();
    return {mut.begin(), mut.end()};
}

std::vector<Eigen::MatrixXd> Generator::zero_grads() const {
    std::vector<Eigen::MatrixXd> grads;
    for (const Eigen::MatrixXd* p : param_list())
        grads.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    return grads;
}

}  // namespace faceedit
