#include "pairstab/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pairstab {

IndexPath make_path(SamplingRule rule, int n, long T, SeedSpec seed) {
    if (n < 2) throw std::invalid_argument("make_path: need n >= 2");
    if (T < 2) throw std::invalid_argument("make_path: need T >= 2");
    IndexPath path;
    path.rule = rule;
    path.n = n;
    path.seed = seed;
    path.xi.reserve(static_cast<std::size_t>(T));
    Rng rng(seed);
    if (rule == SamplingRule::RandomSelection) {
        for (long t = 0; t < T; ++t)
            path.xi.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n))));
    } else {
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        long produced = 0;
        while (produced < T) {
            // Fisher-Yates with the unbiased bounded draw
            for (int i = n - 1; i > 0; --i) {
                const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
                std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
            }
            for (int i = 0; i < n && produced < T; ++i, ++produced)
                path.xi.push_back(perm[static_cast<std::size_t>(i)]);
        }
    }
    return path;
}

namespace {

void accumulate_mean_grad(const Param& w, long t, const Dataset& data, const IndexPath& path,
                          const PairwiseLoss& loss, Param& grad) {
    grad.set_zero();
    const Example& fresh = data[path.xi[static_cast<std::size_t>(t - 1)]];
    const double inv = 1.0 / static_cast<double>(t - 1);
    for (long j = 0; j < t - 1; ++j)
        loss.add_grad(w, fresh, data[path.xi[static_cast<std::size_t>(j)]], inv, grad);
}

void apply_step(Param& w, const Param& grad, double alpha, long t, const Domain& dom,
                bool projected, PsdProjectionMode mode) {
    w.add_scaled(grad, -alpha);
    if (!w.all_finite()) throw NumericalOverflow(t, w.norm());
    if (projected) w = project(w, dom, mode);
}

}  // namespace

Param sgd_step(const Param& w, long t, const Dataset& data, const IndexPath& path,
               const PairwiseLoss& loss, const StepSchedule& schedule, bool projected,
               PsdProjectionMode projection_mode) {
    if (t < 2 || t > path.steps()) throw std::invalid_argument("sgd_step: need 2 <= t <= T");
    Param grad = loss.zero_param();
    accumulate_mean_grad(w, t, data, path, loss, grad);
    Param next = w;
    apply_step(next, grad, schedule(t - 1), t, loss.domain(), projected, projection_mode);
    return next;
}

Trajectory run_sgd(const Dataset& data, const PairwiseLoss& loss, const StepSchedule& schedule,
                   SamplingRule rule, long T, SeedSpec seed, const RunOptions& options) {
    if (options.reservoir < 0) throw std::invalid_argument("run_sgd: reservoir must be >= 0");
    const IndexPath path = make_path(rule, data.size(), T, seed);
    Rng reservoir_rng(derive_seed(seed, 0x4e5e4f14));
    Trajectory traj;
    traj.T = T;
    Param w = loss.zero_param();
    Param grad = loss.zero_param();
    Param avg_sum = loss.zero_param();  // w_1 = 0 contributes nothing but counts
    if (options.store_full) {
        traj.iterates.reserve(static_cast<std::size_t>(T));
        traj.iterates.push_back(w);
    }
    for (long t = 2; t <= T; ++t) {
        if (options.reservoir > 0 && t - 1 > options.reservoir) {
            grad.set_zero();
            const Example& fresh = data[path.xi[static_cast<std::size_t>(t - 1)]];
            const double inv = 1.0 / static_cast<double>(options.reservoir);
            for (int k = 0; k < options.reservoir; ++k) {
                const long j = static_cast<long>(
                    reservoir_rng.next_below(static_cast<std::uint64_t>(t - 1)));
                loss.add_grad(w, fresh, data[path.xi[static_cast<std::size_t>(j)]], inv, grad);
            }
        } else {
            accumulate_mean_grad(w, t, data, path, loss, grad);
        }
        apply_step(w, grad, schedule(t - 1), t, loss.domain(), options.projected,
                   options.projection_mode);
        avg_sum.add_scaled(w, 1.0);
        if (options.store_full) traj.iterates.push_back(w);
    }
    avg_sum.scale(1.0 / static_cast<double>(T));
    traj.last = std::move(w);
    traj.average = std::move(avg_sum);
    return traj;
}

double expansiveness_probe(const Dataset& data, const PairwiseLoss& loss,
                           const StepSchedule& schedule, long t, const IndexPath& path,
                           int trials, SeedSpec seed) {
    if (trials < 100) throw std::invalid_argument("expansiveness_probe: trials must be >= 100");
    if (t < 2 || t > path.steps()) throw std::invalid_argument("expansiveness_probe: need 2 <= t <= T");
    Rng rng(seed);
    const double alpha = schedule(t - 1);
    Param gu = loss.zero_param();
    Param gv = loss.zero_param();
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        const Param u = loss.sample_param(rng);
        const Param v = loss.sample_param(rng);
        const double duv = distance(u, v);
        if (duv < 1e-9) continue;
        accumulate_mean_grad(u, t, data, path, loss, gu);
        accumulate_mean_grad(v, t, data, path, loss, gv);
        double out2 = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double d = (u[i] - alpha * gu[i]) - (v[i] - alpha * gv[i]);
            out2 += d * d;
        }
        worst = std::max(worst, std::sqrt(out2) / duv);
    }
    return worst;
}

}  // namespace pairstab
