#pragma once

#include <functional>

#include "pairstab/core.hpp"
#include "pairstab/losses.hpp"

namespace pairstab {

enum class TwoPointKind { Convex, StronglyConvex };

// Probabilities of the four sample cells (X1,+1), (X1,-1), (X2,+1), (X2,-1).
struct CellProbs {
    double x1_pos = 0.0;
    double x1_neg = 0.0;
    double x2_pos = 0.0;
    double x2_neg = 0.0;

    double sum() const { return x1_pos + x1_neg + x2_pos + x2_neg; }
    double positive_mass() const { return x1_pos + x2_pos; }
};

// Thrown when the construction parameters produce an invalid cell
// probability or an infeasible witness point.
class ConstructionError : public std::invalid_argument {
public:
    explicit ConstructionError(const std::string& what) : std::invalid_argument(what) {}
};

// The two-point testing problem: a pair of label distributions P1/P2 over
// four sample cells together with the matching piecewise pairwise loss whose
// population risks have explicitly computable minimizers. The label skew is
// eps = 1/sqrt(6 n_construction).
class TwoPointProblem {
public:
    TwoPointKind kind() const { return kind_; }
    double beta() const { return beta_; }
    double r() const { return r_; }
    double nu() const { return nu_; }
    int n_construction() const { return n_; }
    int dim() const { return d_; }
    double eps() const { return eps_; }
    const CellProbs& cells_p1() const { return p1_; }
    const CellProbs& cells_p2() const { return p2_; }
    const LossPtr& loss() const { return loss_; }
    const Domain& domain() const { return loss_->domain(); }

    // P_i(Z+), closed form: 1/2 +- eps/2.
    double positive_mass(int which) const;

    // Exact population risk under P_which (1 or 2) at w.
    double exact_risk(int which, const Param& w) const;
    // Exact minimizer (first coordinate +-delta, rest zero) and its risk.
    Param minimizer(int which) const;
    double min_risk() const;  // same for both distributions by symmetry
    double excess(int which, const Param& w) const;
    double separation() const;  // delta, half the distance between the minimizers

    // Canonical representative of a cell: features (+-B1, 0, ..., 0).
    Example representative(bool in_x1, double label) const;

    friend TwoPointProblem build_problem(TwoPointKind kind, double beta, double r, double nu,
                                         int n, int dim);

private:
    TwoPointProblem() = default;

    TwoPointKind kind_ = TwoPointKind::Convex;
    double beta_ = 0.0;
    double r_ = 0.0;
    double nu_ = 0.0;
    int n_ = 0;
    int d_ = 0;
    double eps_ = 0.0;
    double feature_scale_ = 1.0;
    CellProbs p1_, p2_;
    LossPtr loss_;
};

// Validates nu in (1, sqrt(6)/2), every cell probability in (0, 1), and (for
// the convex kind) that the domain contains the off-minimizer witness point.
TwoPointProblem build_problem(TwoPointKind kind, double beta, double r, double nu, int n,
                              int dim);

struct LecamReport {
    double delta = 0.0;            // separation of the two minimizers' first coordinates
    Param w_star_1, w_star_2;      // exact risk minimizers
    double risk_at_min = 0.0;      // inf R_i (equal for i = 1, 2)
    double excess_at_origin = 0.0; // R_i(0) - inf R_i, exact
    // Separation constant feeding the closed-form lower bound:
    // convex kind 3 beta r^2 / (8 sqrt(6n)), strongly convex beta r^2 / (12 n).
    double separation_value = 0.0;
    double kl_per_sample = 0.0;    // label-marginal KL(P1 || P2), closed form
    double kl_budget = 0.0;        // 1 / (2n)
    double lecam_lower_bound = 0.0;  // separation_value / 4 (testing factor from the KL budget)
};

LecamReport exact_risks(const TwoPointProblem& problem);

// Direct-summation oracles over the cell probabilities. The label-marginal
// form (cells pooled over X1/X2, which is all the risks depend on) reproduces
// the closed form; the joint four-cell form also conditions on the X split
// and is strictly larger whenever nu != 1/2, so it is exposed for diagnostics
// but never asserted equal to the closed form.
double kl_label_marginal(const CellProbs& p, const CellProbs& q);
double kl_joint_cells(const CellProbs& p, const CellProbs& q);

// i.i.d. sampler for P_which with the canonical cell representatives.
class TwoPointSampler : public ExampleSampler {
public:
    TwoPointSampler(const TwoPointProblem& problem, int which);
    Example sample(Rng& rng) const override;
    double feature_bound() const override { return 1.0; }
    double label_bound() const override { return 1.0; }
    int dim() const override { return dim_; }

private:
    CellProbs cells_;
    int dim_;
    Example reps_[4];
};

Dataset sample_dataset(const TwoPointProblem& problem, int which, int n_samples, SeedSpec seed);

// Monte-Carlo excess risk of an estimator under both distributions; the
// relevant quantity for the lower bound is the worst of the two means.
struct LecamTrialResult {
    double mean_excess_p1 = 0.0, se_p1 = 0.0;
    double mean_excess_p2 = 0.0, se_p2 = 0.0;
    double worst_mean = 0.0, worst_se = 0.0;
    int projected_outputs = 0;  // estimator outputs that had to be projected into Omega
};

using Estimator = std::function<Param(const Dataset&)>;

LecamTrialResult empirical_lecam(const TwoPointProblem& problem, const Estimator& estimator,
                                 int trials, SeedSpec seed);

}  // namespace pairstab
