#pragma once

#include <memory>

#include "pairstab/core.hpp"

namespace pairstab {

// Certified constants of a pairwise loss over its domain Omega:
//   L      Lipschitz constant of w -> loss(w, z, z')
//   beta   smoothness (Lipschitz constant of the gradient)
//   gamma  strong-convexity modulus (0 for merely convex or non-convex)
//   rho    sup of the loss over Omega x Z x Z (+inf if unbounded)
//   b      bound on sup_{z,z'} min_{w in Omega} ||grad(w, z, z')||
// L and beta are upper envelopes, gamma a lower envelope; empirical
// certification (certify_constants) must stay on the right side of each.
struct LossMeta {
    double L = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double rho = std::numeric_limits<double>::infinity();
    double b = 0.0;
    bool range_unit = false;  // loss values confined to [0, 1]
    bool convex = false;      // convex in the parameter for every example pair
};

// A pairwise loss: value and gradient (w.r.t. the model parameter) over a
// parameter domain, plus certified constants and canonical samplers for
// probe examples and feasible parameters. Implementations are immutable and
// value/add_grad are pure, so losses are freely shared across workers.
class PairwiseLoss {
public:
    virtual ~PairwiseLoss() = default;

    virtual double value(const Param& w, const Example& z, const Example& zp) const = 0;
    // acc += scale * grad(w, z, zp). Hot path of the SGD engine.
    virtual void add_grad(const Param& w, const Example& z, const Example& zp,
                          double scale, Param& acc) const = 0;

    Param grad(const Param& w, const Example& z, const Example& zp) const;

    const LossMeta& meta() const { return meta_; }
    const Domain& domain() const { return domain_; }
    ParamShape param_shape() const { return shape_; }
    int param_dim() const { return dim_; }
    Param zero_param() const { return Param::zeros(shape_, dim_); }

    // Random example within this loss's (B1, B2) bounds.
    virtual Example sample_example(Rng& rng) const = 0;
    // Random feasible parameter; shrink < 1 keeps it strictly interior.
    virtual Param sample_param(Rng& rng, double shrink = 1.0) const;

    // Bounds the sampled examples respect (the B1/B2 the loss was built for).
    double example_feature_bound() const { return feature_bound_; }
    double example_label_bound() const { return label_bound_; }

protected:
    PairwiseLoss(LossMeta meta, Domain domain, ParamShape shape, int dim,
                 double feature_bound, double label_bound)
        : meta_(meta), domain_(domain), shape_(shape), dim_(dim),
          feature_bound_(feature_bound), label_bound_(label_bound) {}

    LossMeta meta_;
    Domain domain_;
    ParamShape shape_;
    int dim_;
    double feature_bound_ = 1.0;
    double label_bound_ = 1.0;
};

using LossPtr = std::shared_ptr<const PairwiseLoss>;

// Adapts a loss's canonical example sampler to the generic dataset
// generator, so experiments can build probe datasets matched to any loss.
class LossExampleSampler : public ExampleSampler {
public:
    explicit LossExampleSampler(LossPtr loss) : loss_(std::move(loss)) {
        if (!loss_) throw std::invalid_argument("LossExampleSampler: null loss");
    }
    Example sample(Rng& rng) const override { return loss_->sample_example(rng); }
    double feature_bound() const override { return loss_->example_feature_bound(); }
    double label_bound() const override { return loss_->example_label_bound(); }
    // feature dimension; equals the matrix side for the matrix-shaped losses
    int dim() const override { return loss_->param_dim(); }

private:
    LossPtr loss_;
};

// (1 - (x - x')^T w)^2 1{y=1, y'=-1} + (mu/2)||w||^2 on the ball of radius
// sqrt(2/mu). Strongly convex with gamma = mu.
LossPtr auc_squared_loss(double mu, double B1, int dim);

// log(1 + exp(I_{yy'} <M, (x-x')(x-x')^T>)) over PSD matrices with Frobenius
// norm <= r0; I_{yy'} = +1 when the labels agree, -1 otherwise. Convex.
LossPtr metric_logistic_loss(double B1, double r0, int dim);

// 1 - exp(-((y-y') - (x-x')^T w)^2 / (2 h^2)) on the ball of radius r0.
// Non-convex, values in [0, 1).
LossPtr mee_loss(double h, double B1, double B2, double r0, int dim);

// Piecewise (quadratic core, linear tails) convex pair of wells at +-r in the
// first coordinate; the pair label signs pick f1, f2 or their average. The
// domain is the ball of radius 2r, so both well minimizers and the witness
// points of the two-point construction are feasible. n_construction is the
// sample size of the construction the loss is paired with (n >= 2).
LossPtr synthetic_convex_loss(double beta, double r, int n_construction, int dim);

// Quadratic wells (beta/2)||w -+ r e1||^2; beta-smooth and beta-strongly
// convex. Same label dispatch and domain radius 2r.
LossPtr synthetic_strongly_convex_loss(double beta, double r, int dim);

// Order-free wrapper: loss(w, z, z') + loss(w, z', z). Opt-in; bound
// experiments use the as-written asymmetric forms.
LossPtr symmetrized(LossPtr base);

// Max relative error between the analytic gradient and a central finite
// difference over `trials` random (w, z, z') with w strictly interior.
// eps must lie in [1e-8, 1e-3].
double check_gradient(const PairwiseLoss& loss, int trials, double eps, SeedSpec seed);

struct EmpiricalConstants {
    double L_hat = 0.0;      // max sampled gradient norm
    double beta_hat = 0.0;   // max sampled gradient difference quotient
    double gamma_hat = 0.0;  // min sampled monotonicity quotient
};

// Samples (w, w', z, z') in Omega and estimates the loss constants from
// difference quotients. Estimates approach the true constants from the safe
// side: L_hat <= L, beta_hat <= beta, gamma_hat >= gamma.
EmpiricalConstants certify_constants(const PairwiseLoss& loss, int trials, SeedSpec seed);

}  // namespace pairstab
