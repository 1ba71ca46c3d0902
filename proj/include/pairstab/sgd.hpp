#pragma once

#include "pairstab/core.hpp"
#include "pairstab/losses.hpp"

namespace pairstab {

enum class SamplingRule { RandomSelection, RandomPermutation };

// Index sequence xi_1..xi_T (stored 0-based). Depends only on
// (rule, n, T, seed) so twin runs on neighboring datasets can share it, and
// it is independent of dataset contents by construction.
struct IndexPath {
    std::vector<int> xi;  // length T
    SamplingRule rule = SamplingRule::RandomSelection;
    int n = 0;
    SeedSpec seed;

    long steps() const { return static_cast<long>(xi.size()); }
};

// T >= 2 (the first update already averages over one previous example).
// Permutation rule: back-to-back fresh permutations of {0..n-1}, final block
// truncated. Selection rule: i.i.d. uniform indices.
IndexPath make_path(SamplingRule rule, int n, long T, SeedSpec seed);

struct RunOptions {
    bool projected = true;
    bool store_full = false;
    PsdProjectionMode projection_mode = PsdProjectionMode::ClampThenRescale;
    // 0 runs the exact update (the fresh example pairs with every previous
    // index). A positive value k caps the per-step pairing at k previous
    // indices drawn uniformly with replacement: an O(k) approximation that is
    // excluded from every bound-verification experiment.
    int reservoir = 0;
};

// One seeded run: w_1 = 0, last = w_T, average = (1/T) sum_{t=1}^T w_t
// (the zero first iterate counts toward the average).
struct Trajectory {
    Param last;
    Param average;
    std::vector<Param> iterates;  // w_1..w_T when store_full was set
    long T = 0;
};

// One update w -> G_t(w): average the gradients of the step-t example paired
// with every previously visited example (O(t) gradient evaluations), take the
// step alpha_{t-1}, then project if requested. t ranges over [2, T].
Param sgd_step(const Param& w, long t, const Dataset& data, const IndexPath& path,
               const PairwiseLoss& loss, const StepSchedule& schedule,
               bool projected = true,
               PsdProjectionMode projection_mode = PsdProjectionMode::ClampThenRescale);

Trajectory run_sgd(const Dataset& data, const PairwiseLoss& loss, const StepSchedule& schedule,
                   SamplingRule rule, long T, SeedSpec seed, const RunOptions& options = {});

// Empirical expansiveness of the unprojected update operator G_t at step t:
// max over sampled feasible pairs (u, v) of ||G_t(u) - G_t(v)|| / ||u - v||.
double expansiveness_probe(const Dataset& data, const PairwiseLoss& loss,
                           const StepSchedule& schedule, long t, const IndexPath& path,
                           int trials, SeedSpec seed);

}  // namespace pairstab
