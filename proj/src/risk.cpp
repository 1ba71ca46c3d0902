#include "pairstab/risk.hpp"

#include <algorithm>
#include <cmath>

namespace pairstab {

Distribution Distribution::sampler(std::shared_ptr<const ExampleSampler> s) {
    if (!s) throw std::invalid_argument("Distribution: null sampler");
    Distribution d;
    d.sampler_ = std::move(s);
    return d;
}

Distribution Distribution::two_point(std::shared_ptr<const TwoPointProblem> p, int which) {
    if (!p) throw std::invalid_argument("Distribution: null problem");
    if (which != 1 && which != 2) throw std::invalid_argument("Distribution: which must be 1 or 2");
    Distribution d;
    d.problem_ = std::move(p);
    d.which_ = which;
    d.sampler_ = std::make_shared<TwoPointSampler>(*d.problem_, which);
    return d;
}

const ExampleSampler& Distribution::example_sampler() const {
    if (!sampler_) throw std::logic_error("Distribution: no sampler available");
    return *sampler_;
}

double empirical_risk(const Param& w, const Dataset& data, const PairwiseLoss& loss) {
    const int n = data.size();
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) sum += loss.value(w, data[i], data[j]);
    return 2.0 * sum / (static_cast<double>(n) * (n - 1));
}

PopulationRisk population_risk(const Param& w, const Distribution& dist,
                               const PairwiseLoss& loss, int mc_samples, SeedSpec seed) {
    PopulationRisk out;
    if (dist.is_two_point()) {
        out.estimate = dist.problem().exact_risk(dist.which(), w);
        out.se = 0.0;
        return out;
    }
    if (mc_samples < 1000)
        throw std::invalid_argument("population_risk: need mc_samples >= 1000");
    Rng rng(seed);
    const ExampleSampler& sampler = dist.example_sampler();
    double sum = 0.0;
    double sumsq = 0.0;
    for (int s = 0; s < mc_samples; ++s) {
        const Example z = sampler.sample(rng);
        const Example zp = sampler.sample(rng);
        const double v = loss.value(w, z, zp);
        sum += v;
        sumsq += v * v;
    }
    out.estimate = sum / mc_samples;
    const double var = std::max(0.0, (sumsq - mc_samples * out.estimate * out.estimate) /
                                         std::max(mc_samples - 1, 1));
    out.se = std::sqrt(var / mc_samples);
    return out;
}

namespace {

// grad of R_S at w (same normalized i<j sum as empirical_risk)
void empirical_risk_grad(const Param& w, const Dataset& data, const PairwiseLoss& loss,
                         Param& grad) {
    grad.set_zero();
    const int n = data.size();
    const double norm = 2.0 / (static_cast<double>(n) * (n - 1));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) loss.add_grad(w, data[i], data[j], norm, grad);
}

struct ProjectedGdResult {
    Param w;
    double pg_norm = 0.0;
    bool converged = false;
    long iterations = 0;
};

// Projected GD with step 1/beta on an arbitrary risk surface given by a
// gradient callback. The projected gradient (w - proj(w - step g)) / step is
// the stationarity measure on constrained domains.
ProjectedGdResult projected_gd(Param w, const Domain& dom, double step, double tol,
                               long max_iters,
                               const std::function<void(const Param&, Param&)>& grad_at) {
    ProjectedGdResult res;
    Param grad = w;
    for (long it = 0; it < max_iters; ++it) {
        grad_at(w, grad);
        Param next = w;
        next.add_scaled(grad, -step);
        next = project(next, dom, PsdProjectionMode::ClampThenRescale);
        res.pg_norm = distance(w, next) / step;
        res.iterations = it + 1;
        w = std::move(next);
        if (res.pg_norm <= tol) {
            res.converged = true;
            break;
        }
    }
    res.w = std::move(w);
    return res;
}

}  // namespace

MinimizerResult empirical_minimizer(const Dataset& data, const PairwiseLoss& loss, double tol,
                                    long max_iters, std::optional<Param> start) {
    if (tol < 1e-12) throw std::invalid_argument("empirical_minimizer: tol must be >= 1e-12");
    Param w0 = start ? *start : loss.zero_param();
    const double step = 1.0 / loss.meta().beta;
    auto grad_at = [&](const Param& w, Param& g) { empirical_risk_grad(w, data, loss, g); };
    ProjectedGdResult res = projected_gd(std::move(w0), loss.domain(), step, tol, max_iters, grad_at);
    MinimizerResult out;
    out.w = std::move(res.w);
    out.projected_gradient_norm = res.pg_norm;
    out.converged = res.converged;
    out.iterations = res.iterations;
    return out;
}

RiskReport decompose(const Param& w, const Dataset& data, const Distribution& dist,
                     const PairwiseLoss& loss, SeedSpec seed, const DecomposeOptions& opt) {
    RiskReport rep;
    rep.empirical = empirical_risk(w, data, loss);
    const PopulationRisk pop = population_risk(w, dist, loss, opt.mc_samples, derive_seed(seed, 1));
    rep.population = pop.estimate;
    rep.population_se = pop.se;
    rep.gen_gap = rep.population - rep.empirical;

    const MinimizerResult mins = empirical_minimizer(data, loss, opt.tol, opt.max_iters);
    rep.minimizer_gradient_norm = mins.projected_gradient_norm;
    rep.minimizer_converged = mins.converged;
    rep.opt_error = rep.empirical - empirical_risk(mins.w, data, loss);

    if (dist.is_two_point()) {
        rep.excess = dist.problem().excess(dist.which(), w);
        return rep;
    }

    // Population minimizer estimate: multi-start projected GD on a frozen
    // Monte-Carlo pair sample standing in for R.
    Rng rng(derive_seed(seed, 2));
    const ExampleSampler& sampler = dist.example_sampler();
    std::vector<std::pair<Example, Example>> pairs;
    pairs.reserve(static_cast<std::size_t>(opt.surrogate_samples));
    for (int s = 0; s < opt.surrogate_samples; ++s)
        pairs.emplace_back(sampler.sample(rng), sampler.sample(rng));
    auto surrogate_grad = [&](const Param& at, Param& g) {
        g.set_zero();
        const double norm = 1.0 / static_cast<double>(pairs.size());
        for (const auto& [z, zp] : pairs) loss.add_grad(at, z, zp, norm, g);
    };
    auto surrogate_value = [&](const Param& at) {
        double s = 0.0;
        for (const auto& [z, zp] : pairs) s += loss.value(at, z, zp);
        return s / static_cast<double>(pairs.size());
    };
    const double step = 1.0 / loss.meta().beta;
    Param best = loss.zero_param();
    double best_value = surrogate_value(best);
    for (int restart = 0; restart < opt.population_restarts; ++restart) {
        Rng start_rng = rng.split(static_cast<std::uint64_t>(restart) + 101);
        Param w0 = restart == 0 ? loss.zero_param() : loss.sample_param(start_rng);
        ProjectedGdResult res =
            projected_gd(std::move(w0), loss.domain(), step, opt.tol, opt.max_iters, surrogate_grad);
        const double v = surrogate_value(res.w);
        if (v < best_value) {
            best_value = v;
            best = std::move(res.w);
        }
    }
    const PopulationRisk pop_at_best =
        population_risk(best, dist, loss, opt.mc_samples, derive_seed(seed, 3));
    rep.excess = rep.population - pop_at_best.estimate;
    return rep;
}

}  // namespace pairstab
