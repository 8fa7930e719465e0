#include "faceedit/model.hpp"

namespace faceedit {

namespace {
constexpr double kSigmaFloor = 1e-12;
}

void SpectralState::init(int rows, int cols, Rng& rng) {
    u.resize(rows);
    v.resize(cols);
    for (int i = 0; i < rows; ++i)
        u(i) = normal(rng);
    double n = u.norm();
    u /= std::max(n, kSigmaFloor);
    v.setZero();
}

Eigen::MatrixXd spectral_normalize(const Eigen::MatrixXd& weight, SpectralState& state,
                                   int n_iter, double* sigma_out) {
    if (state.u.size() != weight.rows() || state.v.size() != weight.cols()) {
        // Caller did not seed the state; start from a fixed deterministic
        // direction instead of failing.
        state.u = Eigen::VectorXd::Constant(weight.rows(), 1.0 / std::sqrt(double(weight.rows())));
        state.v = Eigen::VectorXd::Zero(weight.cols());
    }
    for (int it = 0; it < n_iter; ++it) {
        state.v = weight.transpose() * state.u;
        state.v /= std::max(state.v.norm(), kSigmaFloor);
        state.u = weight * state.v;
        state.u /= std::max(state.u.norm(), kSigmaFloor);
    }
    double sigma = state.u.dot(weight * state.v);
    sigma = std::max(sigma, kSigmaFloor);
    if (sigma_out)
        *sigma_out = sigma;
    return weight / sigma;
}

}  // namespace faceedit
