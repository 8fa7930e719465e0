#include "faceedit/losses.hpp"

#include "faceedit/errors.hpp"

namespace faceedit {

double loss_feat(const Eigen::MatrixXd& gen_out, const Eigen::MatrixXd& gt, const Mask& mask,
                 double alpha_gt) {
    if (gen_out.rows() != gt.rows() || gen_out.cols() != gt.cols())
        throw DataError("loss_feat shapes differ");
    if (mask.length() != gen_out.rows())
        throw DataError("loss_feat mask length mismatch");
    const Eigen::ArrayXXd diff = (gen_out - gt).array().abs();
    const Eigen::ArrayXXd m = mask.dense().array();
    return (alpha_gt * (1.0 - m) * diff + m * diff).mean();
}

double loss_dis(const Eigen::MatrixXd& gen_out, const Eigen::MatrixXd& gt,
                const DistanceRig& rig) {
    if (gen_out.rows() != gt.rows() || gen_out.cols() != gt.cols())
        throw DataError("loss_dis shapes differ");
    if (gen_out.cols() != rig.n_shapes())
        throw DataError("loss_dis rig width mismatch");
    // The affine offset cancels in the difference.
    return ((gen_out - gt) * rig.A.transpose()).array().abs().mean();
}

double loss_generator(double d_score_on_rec, double l_feat, double l_dis,
                      const LossWeights& weights) {
    return (1.0 - d_score_on_rec) + weights.w_feat * l_feat + weights.w_dis * l_dis;
}

double loss_discriminator(double score_gt, double score_rec, double gp, const LossWeights& weights,
                          bool hinge) {
    const double real = hinge ? std::max(0.0, 1.0 - score_gt) : 1.0 - score_gt;
    const double fake = hinge ? std::max(0.0, 1.0 + score_rec) : 1.0 + score_rec;
    return real + fake + weights.w_gp * gp;
}

AdversarialSample make_adversarial_sample(const Eigen::MatrixXd& y_gt,
                                          const Eigen::MatrixXd& y_rec, const Mask& mask,
                                          Rng& rng) {
    if (y_gt.rows() != y_rec.rows() || y_gt.cols() != y_rec.cols())
        throw DataError("adversarial sample inputs must share shape");
    if (mask.length() != y_gt.rows())
        throw DataError("adversarial sample mask length mismatch");
    AdversarialSample s;
    s.y_gt = y_gt;
    s.y_rec = y_rec;
    s.t = uniform01(rng);
    s.u = s.t * y_gt + (1.0 - s.t) * y_rec;
    s.mask_ext = Eigen::MatrixXd::Zero(y_gt.rows(), y_gt.cols());
    for (const auto& seg : mask.segments())
        s.mask_ext.middleRows(seg.start, seg.length()).setOnes();
    return s;
}

double gradient_penalty(const Critic& critic, const std::vector<AdversarialSample>& batch) {
    if (batch.empty())
        throw DataError("gradient penalty needs at least one sample");
    double total = 0.0;
    for (const auto& s : batch) {
        const Eigen::MatrixXd g = critic.input_gradient_at(s.u);
        const double norm = g.cwiseProduct(s.mask_ext).norm();
        total += (norm - 1.0) * (norm - 1.0);
    }
    return total / static_cast<double>(batch.size());
}

}  // namespace faceedit
