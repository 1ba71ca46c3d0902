#pragma once

#include <memory>
#include <optional>

#include "pairstab/core.hpp"
#include "pairstab/losses.hpp"
#include "pairstab/minimax.hpp"

namespace pairstab {

// Population distribution descriptor: either a generic example sampler
// (population risk by Monte Carlo) or one side of a two-point problem
// (population risk in closed form).
class Distribution {
public:
    static Distribution sampler(std::shared_ptr<const ExampleSampler> s);
    static Distribution two_point(std::shared_ptr<const TwoPointProblem> p, int which);

    bool is_two_point() const { return problem_ != nullptr; }
    const ExampleSampler& example_sampler() const;
    const TwoPointProblem& problem() const { return *problem_; }
    int which() const { return which_; }

private:
    Distribution() = default;
    std::shared_ptr<const ExampleSampler> sampler_;
    std::shared_ptr<const TwoPointProblem> problem_;
    int which_ = 0;
};

// R_S(w) = (2 / (n(n-1))) sum_{i<j} loss(w, z_i, z_j), summed in ascending
// (i, j) order for bit-reproducibility.
double empirical_risk(const Param& w, const Dataset& data, const PairwiseLoss& loss);

struct PopulationRisk {
    double estimate = 0.0;
    double se = 0.0;  // 0 when the closed form was used
};

// Mean loss over mc_samples i.i.d. pairs (z, z') ~ D x D, or the exact
// closed-form risk for two-point distributions.
PopulationRisk population_risk(const Param& w, const Distribution& dist,
                               const PairwiseLoss& loss, int mc_samples, SeedSpec seed);

struct MinimizerResult {
    Param w;
    double projected_gradient_norm = 0.0;
    bool converged = false;
    long iterations = 0;
};

// Full-batch projected gradient descent on R_S with step 1/beta, stopping
// when the projected-gradient norm reaches tol. Never throws on
// non-convergence; callers gate on the returned flag/norm.
MinimizerResult empirical_minimizer(const Dataset& data, const PairwiseLoss& loss,
                                    double tol = 1e-10, long max_iters = 100000,
                                    std::optional<Param> start = std::nullopt);

struct RiskReport {
    double empirical = 0.0;
    double population = 0.0;
    double population_se = 0.0;
    double gen_gap = 0.0;    // population - empirical at w
    double opt_error = 0.0;  // R_S(w) - R_S(w*_S)
    double excess = 0.0;     // population(w) - population(w*) estimate
    double minimizer_gradient_norm = 0.0;
    bool minimizer_converged = false;
};

struct DecomposeOptions {
    int mc_samples = 100000;
    int population_restarts = 16;      // random restarts for the population minimizer
    int surrogate_samples = 100000;    // frozen pair sample defining the R surrogate
    double tol = 1e-10;
    long max_iters = 100000;
};

// Excess-risk / generalization-gap / optimization-error decomposition at w.
// For two-point distributions the population minimizer is exact; otherwise it
// is estimated by multi-start projected GD on a frozen Monte-Carlo surrogate.
RiskReport decompose(const Param& w, const Dataset& data, const Distribution& dist,
                     const PairwiseLoss& loss, SeedSpec seed, const DecomposeOptions& = {});

}  // namespace pairstab
