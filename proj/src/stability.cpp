#include "pairstab/stability.hpp"

#include <algorithm>
#include <cmath>

namespace pairstab {

NeighborPair make_neighbor(const Dataset& base, int index, Example replacement) {
    if (index < 0 || index >= base.size())
        throw std::invalid_argument("make_neighbor: index out of range");
    NeighborPair pair{base, base.with_replaced(index, std::move(replacement)), index};
    return pair;
}

CoupledRun coupled_run(const NeighborPair& pair, const PairwiseLoss& loss,
                       const StepSchedule& schedule, SamplingRule rule, long T,
                       SeedSpec alg_seed, bool projected, const std::vector<ProbePair>& probes,
                       PsdProjectionMode projection_mode) {
    if (T < 2) throw std::invalid_argument("coupled_run: need T >= 2");
    if (pair.S.size() != pair.S_prime.size())
        throw std::invalid_argument("coupled_run: datasets must have equal size");
    const IndexPath path = make_path(rule, pair.S.size(), T, alg_seed);

    CoupledRun out;
    out.delta.assign(static_cast<std::size_t>(T), 0.0);
    out.first_divergence_step = std::numeric_limits<long>::max();

    Param w = loss.zero_param();
    Param wp = loss.zero_param();
    Param grad = loss.zero_param();
    Param avg = loss.zero_param();
    Param avgp = loss.zero_param();
    const Domain& dom = loss.domain();

    for (long t = 2; t <= T; ++t) {
        const double alpha = schedule(t - 1);
        const double inv = 1.0 / static_cast<double>(t - 1);

        const Example& fresh = pair.S[path.xi[static_cast<std::size_t>(t - 1)]];
        grad.set_zero();
        for (long j = 0; j < t - 1; ++j)
            loss.add_grad(w, fresh, pair.S[path.xi[static_cast<std::size_t>(j)]], inv, grad);
        w.add_scaled(grad, -alpha);
        if (!w.all_finite()) throw NumericalOverflow(t, w.norm());
        if (projected) w = project(w, dom, projection_mode);

        const Example& freshp = pair.S_prime[path.xi[static_cast<std::size_t>(t - 1)]];
        grad.set_zero();
        for (long j = 0; j < t - 1; ++j)
            loss.add_grad(wp, freshp, pair.S_prime[path.xi[static_cast<std::size_t>(j)]], inv, grad);
        wp.add_scaled(grad, -alpha);
        if (!wp.all_finite()) throw NumericalOverflow(t, wp.norm());
        if (projected) wp = project(wp, dom, projection_mode);

        const double d = distance(w, wp);
        out.delta[static_cast<std::size_t>(t - 1)] = d;
        if (d > 0.0 && out.first_divergence_step == std::numeric_limits<long>::max())
            out.first_divergence_step = t;

        avg.add_scaled(w, 1.0);
        avgp.add_scaled(wp, 1.0);
    }
    avg.scale(1.0 / static_cast<double>(T));
    avgp.scale(1.0 / static_cast<double>(T));

    out.gap_last.reserve(probes.size());
    out.gap_avg.reserve(probes.size());
    for (const ProbePair& probe : probes) {
        out.gap_last.push_back(loss.value(w, probe.first, probe.second) -
                               loss.value(wp, probe.first, probe.second));
        out.gap_avg.push_back(loss.value(avg, probe.first, probe.second) -
                              loss.value(avgp, probe.first, probe.second));
    }
    out.last_S = std::move(w);
    out.last_S_prime = std::move(wp);
    out.avg_S = std::move(avg);
    out.avg_S_prime = std::move(avgp);
    return out;
}

namespace {

struct GapAccumulator {
    std::vector<double> sum, sumsq;          // signed gap moments per probe
    std::vector<double> abs_sum, abs_sumsq;  // absolute gap moments per probe

    explicit GapAccumulator(std::size_t probes)
        : sum(probes, 0.0), sumsq(probes, 0.0), abs_sum(probes, 0.0), abs_sumsq(probes, 0.0) {}

    void add(const std::vector<double>& gaps) {
        for (std::size_t p = 0; p < gaps.size(); ++p) {
            const double g = gaps[p];
            sum[p] += g;
            sumsq[p] += g * g;
            abs_sum[p] += std::abs(g);
            abs_sumsq[p] += g * g;
        }
    }
};

double se_from_moments(double sum, double sumsq, int count) {
    const double mean = sum / count;
    const double var = std::max(0.0, (sumsq - count * mean * mean) / std::max(count - 1, 1));
    return std::sqrt(var / count);
}

void fold_max_abs_mean(const std::vector<double>& sum, const std::vector<double>& sumsq,
                       int replicates, StabilityEstimate& best) {
    for (std::size_t p = 0; p < sum.size(); ++p) {
        const double mean = std::abs(sum[p]) / replicates;
        if (mean > best.value) {
            best.value = mean;
            best.se = se_from_moments(sum[p], sumsq[p], replicates);
        }
    }
}

void fold_max_mean(const std::vector<double>& sum, const std::vector<double>& sumsq,
                   int replicates, StabilityEstimate& best) {
    for (std::size_t p = 0; p < sum.size(); ++p) {
        const double mean = sum[p] / replicates;
        if (mean > best.value) {
            best.value = mean;
            best.se = se_from_moments(sum[p], sumsq[p], replicates);
        }
    }
}

}  // namespace

StabilityReport estimate_stability(const std::vector<NeighborPair>& pairs,
                                   const std::vector<ProbePair>& probes, const PairwiseLoss& loss,
                                   const StepSchedule& schedule, SamplingRule rule, long T,
                                   int replicates, SeedSpec seed, bool projected,
                                   PsdProjectionMode projection_mode) {
    if (pairs.empty()) throw std::invalid_argument("estimate_stability: need neighbor pairs");
    if (probes.size() < 50) throw std::invalid_argument("estimate_stability: need probes >= 50");
    if (replicates < 100) throw std::invalid_argument("estimate_stability: need replicates >= 100");

    StabilityReport report;
    report.replicates = replicates;
    report.neighbor_pairs = static_cast<int>(pairs.size());
    report.probes = static_cast<int>(probes.size());

    const std::size_t n_probes = probes.size();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        // per-replicate gap rows, reduced in replicate order afterwards
        std::vector<std::vector<double>> rows_last(static_cast<std::size_t>(replicates));
        std::vector<std::vector<double>> rows_avg(static_cast<std::size_t>(replicates));
        parallel_for(replicates, [&](long rep) {
            const SeedSpec alg_seed = derive_seed(seed, k + 1, static_cast<std::uint64_t>(rep));
            CoupledRun run = coupled_run(pairs[k], loss, schedule, rule, T, alg_seed, projected,
                                         probes, projection_mode);
            rows_last[static_cast<std::size_t>(rep)] = std::move(run.gap_last);
            rows_avg[static_cast<std::size_t>(rep)] = std::move(run.gap_avg);
        });
        GapAccumulator acc_last(n_probes);
        GapAccumulator acc_avg(n_probes);
        for (int rep = 0; rep < replicates; ++rep) {
            acc_last.add(rows_last[static_cast<std::size_t>(rep)]);
            acc_avg.add(rows_avg[static_cast<std::size_t>(rep)]);
        }
        // Definition-style estimate: sup over pairs/probes of the replicate
        // mean; both (S, S') orderings are covered by the absolute mean.
        fold_max_abs_mean(acc_last.sum, acc_last.sumsq, replicates, report.last_signed);
        fold_max_abs_mean(acc_avg.sum, acc_avg.sumsq, replicates, report.avg_signed);
        fold_max_mean(acc_last.abs_sum, acc_last.abs_sumsq, replicates, report.last_abs);
        fold_max_mean(acc_avg.abs_sum, acc_avg.abs_sumsq, replicates, report.avg_abs);
    }
    return report;
}

StabilityReport estimate_stability(const ExampleSampler& sampler, int n, const PairwiseLoss& loss,
                                   const StepSchedule& schedule, SamplingRule rule, long T,
                                   const StabilityProtocol& protocol, SeedSpec seed) {
    if (protocol.neighbor_pairs < 1 || protocol.probes < 1)
        throw std::invalid_argument("estimate_stability: protocol needs K >= 1 and M >= 1");
    const Dataset base = generate_dataset(sampler, n, derive_seed(seed, 0x0da7a));
    Rng rng(derive_seed(seed, 0x0d1ce));
    std::vector<NeighborPair> pairs;
    pairs.reserve(static_cast<std::size_t>(protocol.neighbor_pairs));
    for (int k = 0; k < protocol.neighbor_pairs; ++k) {
        const int index = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
        Example replacement = sampler.sample(rng);
        pairs.push_back(make_neighbor(base, index, std::move(replacement)));
    }
    std::vector<ProbePair> probes;
    probes.reserve(static_cast<std::size_t>(protocol.probes));
    for (int m = 0; m < protocol.probes; ++m) {
        Example z = sampler.sample(rng);
        Example zp = sampler.sample(rng);
        probes.emplace_back(std::move(z), std::move(zp));
    }
    return estimate_stability(pairs, probes, loss, schedule, rule, T, protocol.replicates, seed,
                              protocol.projected, protocol.projection_mode);
}

namespace {

double eta_for_step(LossRegime regime, const LossMeta& meta, double alpha) {
    switch (regime) {
        case LossRegime::Smooth:
            return 1.0 + alpha * meta.beta;
        case LossRegime::ConvexSmooth:
            if (!meta.convex)
                throw PreconditionError("verify_recursion: convex regime needs a convex loss");
            if (alpha > 2.0 / meta.beta + 1e-12)
                throw PreconditionError("verify_recursion: convex regime needs alpha_t <= 2/beta");
            return 1.0;
        case LossRegime::StronglyConvexSmooth:
            if (!meta.convex || meta.gamma <= 0.0)
                throw PreconditionError("verify_recursion: strongly convex regime needs gamma > 0");
            if (alpha > 2.0 / (meta.beta + meta.gamma) + 1e-12)
                throw PreconditionError(
                    "verify_recursion: strongly convex regime needs alpha_t <= 2/(beta+gamma)");
            return 1.0 - meta.beta * meta.gamma * alpha / (meta.beta + meta.gamma);
    }
    throw std::logic_error("verify_recursion: unknown regime");
}

// All delta curves for a replicate batch, row per replicate.
std::vector<std::vector<double>> delta_curves(const NeighborPair& pair, const PairwiseLoss& loss,
                                              const StepSchedule& schedule, SamplingRule rule,
                                              long T, int replicates, SeedSpec seed,
                                              bool projected, PsdProjectionMode projection_mode) {
    std::vector<std::vector<double>> deltas(static_cast<std::size_t>(replicates));
    const std::vector<ProbePair> no_probes;
    parallel_for(replicates, [&](long rep) {
        const SeedSpec alg_seed = derive_seed(seed, 0x5eed, static_cast<std::uint64_t>(rep));
        CoupledRun run = coupled_run(pair, loss, schedule, rule, T, alg_seed, projected, no_probes,
                                     projection_mode);
        deltas[static_cast<std::size_t>(rep)] = std::move(run.delta);
    });
    return deltas;
}

}  // namespace

RecursionCheck verify_recursion(const NeighborPair& pair, const PairwiseLoss& loss,
                                const StepSchedule& schedule, SamplingRule rule, long T,
                                int replicates, LossRegime regime, SeedSpec seed, bool projected,
                                PsdProjectionMode projection_mode) {
    if (replicates < 2) throw std::invalid_argument("verify_recursion: need replicates >= 2");
    const LossMeta& meta = loss.meta();
    const double n = static_cast<double>(pair.S.size());
    const double L = meta.L;

    RecursionCheck check;
    check.eta.reserve(static_cast<std::size_t>(T - 1));
    for (long t = 2; t <= T; ++t) check.eta.push_back(eta_for_step(regime, meta, schedule(t - 1)));

    const auto deltas =
        delta_curves(pair, loss, schedule, rule, T, replicates, seed, projected, projection_mode);

    check.mean_delta.assign(static_cast<std::size_t>(T), 0.0);
    for (const auto& row : deltas)
        for (long t = 0; t < T; ++t) check.mean_delta[static_cast<std::size_t>(t)] += row[static_cast<std::size_t>(t)];
    for (double& v : check.mean_delta) v /= replicates;

    check.residual.reserve(static_cast<std::size_t>(T - 1));
    check.residual_se.reserve(static_cast<std::size_t>(T - 1));
    for (long t = 2; t <= T; ++t) {
        const double eta = check.eta[static_cast<std::size_t>(t - 2)];
        const double coeff = std::min(eta, 1.0) / n + (1.0 - 1.0 / n) * eta;
        const double drive = 4.0 * L * schedule(t - 1) / n;
        // paired residual: same replicate on both sides of the recursion
        double sum = 0.0;
        double sumsq = 0.0;
        for (const auto& row : deltas) {
            const double res =
                coeff * row[static_cast<std::size_t>(t - 2)] + drive - row[static_cast<std::size_t>(t - 1)];
            sum += res;
            sumsq += res * res;
        }
        check.residual.push_back(sum / replicates);
        check.residual_se.push_back(se_from_moments(sum, sumsq, replicates));
    }
    return check;
}

ConditionalDeltaStats conditional_delta_stats(const NeighborPair& pair, const PairwiseLoss& loss,
                                              const StepSchedule& schedule, SamplingRule rule,
                                              long T, long t0, int replicates, SeedSpec seed,
                                              bool projected, PsdProjectionMode projection_mode) {
    if (t0 < 2 || t0 > pair.S.size())
        throw std::invalid_argument("conditional_delta_stats: need 2 <= t0 <= n");
    if (t0 > T) throw std::invalid_argument("conditional_delta_stats: need t0 <= T");
    if (replicates < 2) throw std::invalid_argument("conditional_delta_stats: need replicates >= 2");

    const auto deltas =
        delta_curves(pair, loss, schedule, rule, T, replicates, seed, projected, projection_mode);

    ConditionalDeltaStats out;
    out.replicates = replicates;
    double cond_sum = 0.0;
    double cond_sumsq = 0.0;
    int nonzero = 0;
    for (const auto& row : deltas) {
        // coupling keeps the twin iterates bitwise equal until the replaced
        // slot is first drawn, so the zero test is exact
        if (row[static_cast<std::size_t>(t0 - 1)] != 0.0) {
            ++nonzero;
        } else {
            const double dT = row[static_cast<std::size_t>(T - 1)];
            cond_sum += dT;
            cond_sumsq += dT * dT;
            ++out.survivors;
        }
    }
    out.p_nonzero = static_cast<double>(nonzero) / replicates;
    out.p_se = std::sqrt(std::max(0.0, out.p_nonzero * (1.0 - out.p_nonzero)) / replicates);
    if (out.survivors == 0)
        throw InsufficientSamples("conditional_delta_stats: no replicate had delta_{t0} = 0");
    out.cond_mean_delta_T = cond_sum / out.survivors;
    out.cond_se = se_from_moments(cond_sum, cond_sumsq, out.survivors);
    return out;
}

}  // namespace pairstab
