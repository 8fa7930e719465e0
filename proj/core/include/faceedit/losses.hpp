#pragma once

#include <Eigen/Dense>
#include <vector>

#include "faceedit/animation.hpp"
#include "faceedit/masking.hpp"
#include "faceedit/model.hpp"
#include "faceedit/random.hpp"

namespace faceedit {

struct LossWeights {
    double w_feat = 1.0;
    double alpha_gt = 10.0;
    double w_gp = 10.0;
    double w_dis = 1.0;
};

struct LossOptions {
    // The printed discriminator objective omits max(0, .) but names the
    // hinge loss; the hinged form is the default, the literal one is kept
    // for ablation.
    bool hinge = true;
    // Evaluate the generator's adversarial term on the recomposed animation
    // (matching what the discriminator sees) rather than on raw output.
    bool adversarial_on_recomposed = true;
};

// Masked reconstruction error: mean over all L x N entries of
// alpha_gt * (1-M) ⊙ |gen - gt|  +  M ⊙ |gen - gt|.
double loss_feat(const Eigen::MatrixXd& gen_out, const Eigen::MatrixXd& gt, const Mask& mask,
                 double alpha_gt);

// Mean absolute gap between the six distance tracks of the two animations.
double loss_dis(const Eigen::MatrixXd& gen_out, const Eigen::MatrixXd& gt,
                const DistanceRig& rig);

// L_G = (1 - d_score) + w_feat * l_feat + w_dis * l_dis.
double loss_generator(double d_score_on_rec, double l_feat, double l_dis,
                      const LossWeights& weights);

// L_D = mean(max(0, 1 - s_gt)) + mean(max(0, 1 + s_rec)) + w_gp * gp,
// or the unhinged literal form when hinge is off.
double loss_discriminator(double score_gt, double score_rec, double gp, const LossWeights& weights,
                          bool hinge = true);

// One interpolate for the gradient penalty: U = t*Y_gt + (1-t)*Y_rec with
// the erase mask extended over all 40 channels.
struct AdversarialSample {
    Eigen::MatrixXd y_gt;      // L x 40
    Eigen::MatrixXd y_rec;     // L x 40
    double t = 0.0;
    Eigen::MatrixXd u;         // t*y_gt + (1-t)*y_rec
    Eigen::MatrixXd mask_ext;  // L x 40 binary
};

AdversarialSample make_adversarial_sample(const Eigen::MatrixXd& y_gt,
                                          const Eigen::MatrixXd& y_rec, const Mask& mask,
                                          Rng& rng);

// Anything scoring a sequence and exposing its input gradient can be
// penalized; the trained discriminator is the production critic.
class Critic {
public:
    virtual ~Critic() = default;
    virtual double score_input(const Eigen::MatrixXd& y) const = 0;
    virtual Eigen::MatrixXd input_gradient_at(const Eigen::MatrixXd& y) const = 0;
};

class DiscriminatorCritic : public Critic {
public:
    explicit DiscriminatorCritic(const Discriminator& d) : d_(d) {}
    double score_input(const Eigen::MatrixXd& y) const override { return d_.score(y); }
    Eigen::MatrixXd input_gradient_at(const Eigen::MatrixXd& y) const override {
        return d_.input_gradient(y);
    }

private:
    const Discriminator& d_;
};

// Mean over samples of (||∇_U D(U) ⊙ mask|| - 1)^2.
double gradient_penalty(const Critic& critic, const std::vector<AdversarialSample>& batch);

// One row per training iteration; the first eight fields are the trace CSV.
struct LossRecord {
    std::int64_t iter = 0;
    double loss_g = 0.0;
    double loss_d = 0.0;
    double loss_feat = 0.0;
    double loss_dis = 0.0;
    double gp = 0.0;
    double score_gt = 0.0;
    double score_rec = 0.0;
    // Not part of the CSV: mean |gen - gt| over masked entries, used by the
    // desk-scale learning checks.
    double masked_l1 = 0.0;
};

}  // namespace faceedit
