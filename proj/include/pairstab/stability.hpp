#pragma once

#include <utility>

#include "pairstab/core.hpp"
#include "pairstab/losses.hpp"
#include "pairstab/sgd.hpp"

namespace pairstab {

// Two datasets of equal size differing in exactly one slot.
struct NeighborPair {
    Dataset S;
    Dataset S_prime;
    int replaced_index = 0;  // 0-based
};

NeighborPair make_neighbor(const Dataset& base, int index, Example replacement);

using ProbePair = std::pair<Example, Example>;

// Twin SGD runs on a neighbor pair sharing one index path and seed.
struct CoupledRun {
    // delta[t-1] = ||w_t - w'_t|| for t = 1..T; delta[0] == 0 always.
    std::vector<double> delta;
    // Smallest t with delta_t > 0 (1-based); LONG_MAX when the runs never split.
    long first_divergence_step = 0;
    // Signed loss gaps loss(A(S), z, z') - loss(A(S'), z, z') per probe pair.
    std::vector<double> gap_last;
    std::vector<double> gap_avg;
    Param last_S, last_S_prime, avg_S, avg_S_prime;
};

// The stability arguments lean on the projection being non-expansive, so the
// laboratory defaults to the exact (Dykstra) mode on PSD domains; ball
// domains have the analytic exact projection either way.
CoupledRun coupled_run(const NeighborPair& pair, const PairwiseLoss& loss,
                       const StepSchedule& schedule, SamplingRule rule, long T,
                       SeedSpec alg_seed, bool projected,
                       const std::vector<ProbePair>& probes,
                       PsdProjectionMode projection_mode = PsdProjectionMode::Dykstra);

struct StabilityEstimate {
    double value = 0.0;
    double se = 0.0;  // replicate standard error at the arg-max probe
};

struct StabilityReport {
    // max over neighbor pairs, probes and both (S, S') orderings of the
    // replicate-mean signed gap
    StabilityEstimate last_signed, avg_signed;
    // max over neighbor pairs and probes of the replicate-mean absolute gap
    StabilityEstimate last_abs, avg_abs;
    int replicates = 0;
    int neighbor_pairs = 0;
    int probes = 0;
    // filled by callers that compare against a closed-form bound
    double bound_last = std::numeric_limits<double>::quiet_NaN();
    double bound_avg = std::numeric_limits<double>::quiet_NaN();
    double margin_last = std::numeric_limits<double>::quiet_NaN();
    double margin_avg = std::numeric_limits<double>::quiet_NaN();
};

struct StabilityProtocol {
    int replicates = 200;     // coupled runs per neighbor pair, varying only the path seed
    int neighbor_pairs = 8;   // K
    int probes = 100;         // M
    bool projected = true;
    PsdProjectionMode projection_mode = PsdProjectionMode::Dykstra;
};

// Estimates random uniform stability on explicit neighbor pairs: for every
// probe, average the loss gap over replicates (algorithm randomness only),
// then maximize over probes, pairs and orderings.
StabilityReport estimate_stability(const std::vector<NeighborPair>& pairs,
                                   const std::vector<ProbePair>& probes,
                                   const PairwiseLoss& loss, const StepSchedule& schedule,
                                   SamplingRule rule, long T, int replicates, SeedSpec seed,
                                   bool projected = true,
                                   PsdProjectionMode projection_mode = PsdProjectionMode::Dykstra);

// Default protocol: datasets of size n from the sampler, K neighbor pairs
// (uniform replaced slot, fresh replacement example), M probe pairs from
// D x D, then the explicit-pair estimator.
StabilityReport estimate_stability(const ExampleSampler& sampler, int n,
                                   const PairwiseLoss& loss, const StepSchedule& schedule,
                                   SamplingRule rule, long T, const StabilityProtocol& protocol,
                                   SeedSpec seed);

// Expansiveness regime claimed for the recursion's per-step coefficient.
enum class LossRegime { Smooth, ConvexSmooth, StronglyConvexSmooth };

struct RecursionCheck {
    std::vector<double> mean_delta;   // E[delta_t], t = 1..T (index t-1)
    std::vector<double> eta;          // eta_t used at step t = 2..T (index t-2)
    std::vector<double> residual;     // rhs_t - E[delta_t], t = 2..T (index t-2)
    std::vector<double> residual_se;  // paired replicate standard error
};

// Monte-Carlo check of the one-step recursion
//   E[delta_t] <= {min(eta_t,1)/n + (1-1/n) eta_t} E[delta_{t-1}] + 4 L alpha_{t-1}/n
// with eta_t from the claimed regime. Residuals are computed per replicate
// (paired), so their standard errors reflect the coupling.
RecursionCheck verify_recursion(const NeighborPair& pair, const PairwiseLoss& loss,
                                const StepSchedule& schedule, SamplingRule rule, long T,
                                int replicates, LossRegime regime, SeedSpec seed,
                                bool projected = true,
                                PsdProjectionMode projection_mode = PsdProjectionMode::Dykstra);

struct ConditionalDeltaStats {
    double p_nonzero = 0.0;       // empirical P{delta_{t0} != 0}
    double p_se = 0.0;
    double cond_mean_delta_T = 0.0;  // E[delta_T | delta_{t0} = 0]
    double cond_se = 0.0;
    int survivors = 0;            // replicates passing the filter
    int replicates = 0;
};

// Conditional divergence statistics at a cut step t0 in [2, n]. Throws
// InsufficientSamples when no replicate survives the filter.
ConditionalDeltaStats conditional_delta_stats(const NeighborPair& pair, const PairwiseLoss& loss,
                                              const StepSchedule& schedule, SamplingRule rule,
                                              long T, long t0, int replicates, SeedSpec seed,
                                              bool projected = true,
                                              PsdProjectionMode projection_mode = PsdProjectionMode::Dykstra);

}  // namespace pairstab
