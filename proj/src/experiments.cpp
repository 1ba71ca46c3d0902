#include "pairstab/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "pairstab/bounds.hpp"
#include "pairstab/losses.hpp"
#include "pairstab/minimax.hpp"
#include "pairstab/risk.hpp"
#include "pairstab/sgd.hpp"
#include "pairstab/stability.hpp"

namespace pairstab {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Strict config access: every key must be consumed exactly once, and a final
// check rejects unknown keys with a field-level message.
// ---------------------------------------------------------------------------

class StrictObject {
public:
    StrictObject(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_ + ": expected a JSON object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& require(const std::string& key) {
        if (!node_.contains(key)) throw ConfigError(path_ + "." + key + ": missing required field");
        consumed_.insert(key);
        return node_.at(key);
    }

    const json* optional(const std::string& key) {
        if (!node_.contains(key)) return nullptr;
        consumed_.insert(key);
        return &node_.at(key);
    }

    template <typename T>
    T get(const std::string& key) {
        try {
            return require(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(path_ + "." + key + ": " + e.what());
        }
    }

    template <typename T>
    T get_or(const std::string& key, T fallback) {
        const json* v = optional(key);
        if (!v) return fallback;
        try {
            return v->get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(path_ + "." + key + ": " + e.what());
        }
    }

    StrictObject child(const std::string& key) { return StrictObject(require(key), path_ + "." + key); }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it)
            if (!consumed_.count(it.key()))
                throw ConfigError(path_ + "." + it.key() + ": unknown field");
    }

    const std::string& path() const { return path_; }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> consumed_;
};

double positive(double v, const std::string& where) {
    if (!(v > 0)) throw ConfigError(where + ": must be positive");
    return v;
}

// ---------------------------------------------------------------------------
// Sub-config parsers
// ---------------------------------------------------------------------------

struct NamedLoss {
    LossPtr loss;
    std::string label;
};

NamedLoss parse_loss(StrictObject obj) {
    const std::string name = obj.get<std::string>("name");
    NamedLoss out;
    out.label = name;
    if (name == "auc-squared") {
        const double mu = positive(obj.get<double>("mu"), obj.path() + ".mu");
        const double B1 = positive(obj.get<double>("B1"), obj.path() + ".B1");
        const int d = obj.get_or<int>("dim", 2);
        out.loss = auc_squared_loss(mu, B1, d);
    } else if (name == "metric-logistic") {
        const double B1 = positive(obj.get<double>("B1"), obj.path() + ".B1");
        const double r0 = positive(obj.get<double>("r0"), obj.path() + ".r0");
        const int d = obj.get_or<int>("dim", 3);
        out.loss = metric_logistic_loss(B1, r0, d);
    } else if (name == "mee") {
        const double h = positive(obj.get<double>("h"), obj.path() + ".h");
        const double B1 = positive(obj.get<double>("B1"), obj.path() + ".B1");
        const double B2 = positive(obj.get<double>("B2"), obj.path() + ".B2");
        const double r0 = positive(obj.get<double>("r0"), obj.path() + ".r0");
        const int d = obj.get_or<int>("dim", 2);
        out.loss = mee_loss(h, B1, B2, r0, d);
    } else if (name == "synthetic-convex") {
        const double beta = positive(obj.get<double>("beta"), obj.path() + ".beta");
        const double r = positive(obj.get<double>("r"), obj.path() + ".r");
        const int n = obj.get_or<int>("n_construction", 6);
        const int d = obj.get_or<int>("dim", 2);
        out.loss = synthetic_convex_loss(beta, r, n, d);
    } else if (name == "synthetic-strongly-convex") {
        const double beta = positive(obj.get<double>("beta"), obj.path() + ".beta");
        const double r = positive(obj.get<double>("r"), obj.path() + ".r");
        const int d = obj.get_or<int>("dim", 2);
        out.loss = synthetic_strongly_convex_loss(beta, r, d);
    } else {
        throw ConfigError(obj.path() + ".name: unknown loss '" + name + "'");
    }
    if (obj.get_or<bool>("symmetrized", false)) {
        out.loss = symmetrized(out.loss);
        out.label += "+symmetrized";
    }
    obj.finish();
    return out;
}

std::shared_ptr<const ExampleSampler> parse_sampler(StrictObject obj) {
    const std::string name = obj.get<std::string>("name");
    std::shared_ptr<const ExampleSampler> out;
    if (name == "gaussian-classification") {
        const int d = obj.get<int>("dim");
        const double B1 = obj.get<double>("B1");
        const double p = obj.get_or<double>("positive_prob", 0.5);
        out = std::make_shared<GaussianClassificationSampler>(d, B1, p);
    } else if (name == "linear-regression") {
        const int d = obj.get<int>("dim");
        const double B1 = obj.get<double>("B1");
        const double B2 = obj.get<double>("B2");
        const double sigma = obj.get_or<double>("noise_sigma", 0.1);
        auto w = obj.get<std::vector<double>>("true_w");
        out = std::make_shared<LinearRegressionSampler>(d, B1, B2, sigma, std::move(w));
    } else if (name == "two-point") {
        const std::string kind_name = obj.get<std::string>("kind");
        const TwoPointKind kind = kind_name == "convex" ? TwoPointKind::Convex
                                 : kind_name == "strongly-convex"
                                     ? TwoPointKind::StronglyConvex
                                     : throw ConfigError(obj.path() + ".kind: unknown kind '" + kind_name + "'");
        const double beta = obj.get<double>("beta");
        const double r = obj.get<double>("r");
        const double nu = obj.get_or<double>("nu", 1.1);
        const int n = obj.get<int>("n_construction");
        const int d = obj.get_or<int>("dim", 2);
        const int which = obj.get_or<int>("which", 1);
        auto problem = std::make_shared<TwoPointProblem>(build_problem(kind, beta, r, nu, n, d));
        out = std::make_shared<TwoPointSampler>(*problem, which);
    } else {
        throw ConfigError(obj.path() + ".name: unknown data generator '" + name + "'");
    }
    obj.finish();
    return out;
}

StepSchedule parse_schedule(StrictObject obj, const LossMeta* meta) {
    const std::string kind = obj.get<std::string>("kind");
    StepSchedule out = StepSchedule::constant(1.0);
    if (kind == "constant") {
        out = StepSchedule::constant(obj.get<double>("alpha"));
    } else if (kind == "power") {
        out = StepSchedule::power(obj.get<double>("c"), obj.get<double>("a"));
    } else if (kind == "staircase-strong") {
        double gamma = obj.get_or<double>("gamma", meta ? meta->gamma : 0.0);
        if (gamma <= 0)
            throw ConfigError(obj.path() + ".gamma: must be positive (or inherited from a strongly convex loss)");
        out = StepSchedule::staircase_strong(gamma);
    } else if (kind == "constant-horizon") {
        out = StepSchedule::constant_horizon(obj.get<double>("c"), obj.get<double>("a"),
                                             obj.get<long>("T"));
    } else {
        throw ConfigError(obj.path() + ".kind: unknown schedule '" + kind + "'");
    }
    obj.finish();
    return out;
}

SamplingRule parse_rule(const std::string& name, const std::string& where) {
    if (name == "selection") return SamplingRule::RandomSelection;
    if (name == "permutation") return SamplingRule::RandomPermutation;
    throw ConfigError(where + ": unknown sampling rule '" + name + "'");
}

std::vector<long> parse_T_grid(StrictObject& obj) {
    const json& node = obj.require("T");
    std::vector<long> grid;
    if (node.is_array())
        grid = node.get<std::vector<long>>();
    else
        grid.push_back(node.get<long>());
    if (grid.empty()) throw ConfigError(obj.path() + ".T: empty grid");
    for (long T : grid)
        if (T < 2) throw ConfigError(obj.path() + ".T: every horizon must be >= 2");
    return grid;
}

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

struct RowBuilder {
    std::string experiment;
    std::uint64_t seed = 0;
    std::vector<ResultRow>* rows = nullptr;

    void add(std::string params, std::string metric, double value, double se, double bound,
             bool pass) const {
        ResultRow row;
        row.experiment = experiment;
        row.params = std::move(params);
        row.metric = std::move(metric);
        row.value = value;
        row.se = se;
        row.bound = bound;
        row.pass = pass;
        row.seed = seed;
        rows->push_back(std::move(row));
    }
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// gradient-audit
// ---------------------------------------------------------------------------

std::vector<NamedLoss> default_catalogue() {
    std::vector<NamedLoss> out;
    out.push_back({auc_squared_loss(2.0, 1.0, 2), "auc-squared"});
    out.push_back({metric_logistic_loss(2.0, 1.0, 3), "metric-logistic"});
    out.push_back({mee_loss(1.0, 1.0, 1.0, 1.0, 2), "mee"});
    out.push_back({synthetic_convex_loss(1.0, 1.0, 6, 2), "synthetic-convex"});
    out.push_back({synthetic_strongly_convex_loss(1.0, 1.0, 2), "synthetic-strongly-convex"});
    return out;
}

void run_gradient_audit(StrictObject& cfg, const RowBuilder& rb) {
    const int trials = cfg.get_or<int>("trials", 100);
    const double eps = cfg.get_or<double>("eps", 1e-5);
    const int constants_trials = cfg.get_or<int>("constants_trials", 10000);
    const double fd_tolerance = cfg.get_or<double>("fd_tolerance", 1e-5);

    std::vector<NamedLoss> losses;
    if (const json* arr = cfg.optional("losses")) {
        if (!arr->is_array()) throw ConfigError(cfg.path() + ".losses: expected an array");
        for (std::size_t i = 0; i < arr->size(); ++i)
            losses.push_back(parse_loss(StrictObject((*arr)[i], cfg.path() + ".losses[" +
                                                                    std::to_string(i) + "]")));
    } else {
        losses = default_catalogue();
    }

    const SeedSpec seed{rb.seed, 0};
    for (const NamedLoss& nl : losses) {
        const std::string params = "loss=" + nl.label;
        const double fd = check_gradient(*nl.loss, trials, eps, derive_seed(seed, 1));
        rb.add(params, "fd_max_rel_error", fd, kNaN, fd_tolerance, fd <= fd_tolerance);

        const EmpiricalConstants est = certify_constants(*nl.loss, constants_trials, derive_seed(seed, 2));
        const LossMeta& meta = nl.loss->meta();
        rb.add(params, "L_hat", est.L_hat, kNaN, meta.L, est.L_hat <= meta.L + 1e-9);
        rb.add(params, "beta_hat", est.beta_hat, kNaN, meta.beta, est.beta_hat <= meta.beta + 1e-9);
        // the gamma envelope is a claim only convex losses make
        if (meta.convex)
            rb.add(params, "gamma_hat", est.gamma_hat, kNaN, meta.gamma,
                   est.gamma_hat >= meta.gamma - 1e-9);
    }
}

// ---------------------------------------------------------------------------
// expansiveness
// ---------------------------------------------------------------------------

void run_expansiveness(StrictObject& cfg, const RowBuilder& rb) {
    NamedLoss nl = parse_loss(cfg.child("loss"));
    const int n = cfg.get_or<int>("n", 20);
    const long T = cfg.get_or<long>("T", 50);
    const int trials = cfg.get_or<int>("trials", 1000);
    std::vector<long> t_grid = cfg.get_or<std::vector<long>>("t_grid", {2, T});
    std::vector<std::string> regimes;
    if (const json* arr = cfg.optional("regimes")) {
        regimes = arr->get<std::vector<std::string>>();
    } else {
        regimes.push_back("smooth");
        if (nl.loss->meta().convex) regimes.push_back("convex");
        if (nl.loss->meta().convex && nl.loss->meta().gamma > 0) regimes.push_back("strongly-convex");
    }

    const SeedSpec seed{rb.seed, 0};
    const LossMeta& meta = nl.loss->meta();
    const Dataset data =
        generate_dataset(LossExampleSampler(nl.loss), n, derive_seed(seed, 0xda7a));

    for (const std::string& regime : regimes) {
        double alpha = 0.0;
        double bound = 0.0;
        if (regime == "smooth") {
            alpha = 1.0 / meta.beta;
            bound = 1.0 + alpha * meta.beta;
        } else if (regime == "convex") {
            if (!meta.convex) throw ConfigError("expansiveness: convex regime needs a convex loss");
            alpha = 2.0 / meta.beta;
            bound = 1.0;
        } else if (regime == "strongly-convex") {
            if (!meta.convex || meta.gamma <= 0)
                throw ConfigError("expansiveness: strongly-convex regime needs gamma > 0");
            alpha = 2.0 / (meta.beta + meta.gamma);
            bound = 1.0 - meta.beta * meta.gamma * alpha / (meta.beta + meta.gamma);
        } else {
            throw ConfigError("expansiveness.regimes: unknown regime '" + regime + "'");
        }
        const StepSchedule schedule = StepSchedule::constant(alpha);
        for (long t : t_grid) {
            const IndexPath path = make_path(SamplingRule::RandomSelection, n, T,
                                             derive_seed(seed, 0x9a7, static_cast<std::uint64_t>(t)));
            const double ratio = expansiveness_probe(data, *nl.loss, schedule, t, path, trials,
                                                     derive_seed(seed, 0x9b8, static_cast<std::uint64_t>(t)));
            rb.add("loss=" + nl.label + ";regime=" + regime + ";t=" + std::to_string(t),
                   "expansiveness_ratio", ratio, kNaN, bound, ratio <= bound + 1e-9);
        }
    }
}

// ---------------------------------------------------------------------------
// stability-sweep
// ---------------------------------------------------------------------------

void run_stability_sweep(StrictObject& cfg, const RowBuilder& rb) {
    NamedLoss nl = parse_loss(cfg.child("loss"));
    const LossMeta& meta = nl.loss->meta();
    std::shared_ptr<const ExampleSampler> sampler;
    if (cfg.has("data"))
        sampler = parse_sampler(cfg.child("data"));
    else
        sampler = std::make_shared<LossExampleSampler>(nl.loss);
    const int n = cfg.get<int>("n");
    const std::vector<long> T_grid = parse_T_grid(cfg);
    const SamplingRule rule = parse_rule(cfg.get_or<std::string>("rule", "selection"),
                                         cfg.path() + ".rule");
    const StepSchedule schedule = parse_schedule(cfg.child("schedule"), &meta);
    StabilityProtocol protocol;
    protocol.replicates = cfg.get_or<int>("replicates", 200);
    protocol.neighbor_pairs = cfg.get_or<int>("neighbor_pairs", 8);
    protocol.probes = cfg.get_or<int>("probes", 100);
    protocol.projected = cfg.get_or<bool>("projected", true);
    const std::string bound_kind = cfg.get<std::string>("bound");

    const SeedSpec seed{rb.seed, 0};
    for (std::size_t i = 0; i < T_grid.size(); ++i) {
        const long T = T_grid[i];
        StabilityReport rep;
        try {
            rep = estimate_stability(*sampler, n, *nl.loss, schedule, rule, T, protocol,
                                     derive_seed(seed, 0x57ab, i));
        } catch (const NumericalOverflow& e) {
            // a blown-up replicate fails this grid point, not the whole sweep
            rb.add("loss=" + nl.label + ";T=" + std::to_string(T) + ";n=" + std::to_string(n),
                   "aborted_overflow", static_cast<double>(e.step()), kNaN, kNaN, false);
            continue;
        }

        BoundParams p;
        p.L = meta.L;
        p.beta = meta.beta;
        p.gamma = meta.gamma;
        p.rho = meta.rho;
        p.n = n;
        p.T = T;
        p.schedule = schedule;
        p.range_unit = meta.range_unit;
        const std::string params = "loss=" + nl.label + ";T=" + std::to_string(T) +
                                   ";n=" + std::to_string(n);
        if (bound_kind == "convex") {
            const double bl = stability_bound(StabilityBoundKind::ConvexLast, p);
            const double ba = stability_bound(StabilityBoundKind::ConvexAvg, p);
            rep.bound_last = bl;
            rep.bound_avg = ba;
            rep.margin_last = bl - rep.last_signed.value;
            rep.margin_avg = ba - rep.avg_signed.value;
            rb.add(params, "eps_hat_last", rep.last_signed.value, rep.last_signed.se, bl,
                   rep.last_signed.value + 3 * rep.last_signed.se <= bl);
            rb.add(params, "eps_hat_avg", rep.avg_signed.value, rep.avg_signed.se, ba,
                   rep.avg_signed.value + 3 * rep.avg_signed.se <= ba);
        } else if (bound_kind == "sconvex-const") {
            const double bl = stability_bound(StabilityBoundKind::SconvexConstLast, p);
            const double ba = stability_bound(StabilityBoundKind::SconvexConstAvg, p);
            const double cap = 8.0 * meta.L * meta.L / (meta.gamma * n);
            rb.add(params, "eps_hat_last", rep.last_signed.value, rep.last_signed.se, bl,
                   rep.last_signed.value + 3 * rep.last_signed.se <= bl);
            rb.add(params, "eps_hat_avg", rep.avg_signed.value, rep.avg_signed.se, ba,
                   rep.avg_signed.value + 3 * rep.avg_signed.se <= ba);
            rb.add(params, "eps_hat_last_vs_cap", rep.last_signed.value, rep.last_signed.se, cap,
                   rep.last_signed.value + 3 * rep.last_signed.se <= cap);
        } else if (bound_kind == "sconvex-staircase") {
            const double bl = stability_bound(StabilityBoundKind::SconvexStaircaseLast, p);
            rb.add(params, "eps_hat_last", rep.last_signed.value, rep.last_signed.se, bl,
                   rep.last_signed.value + 3 * rep.last_signed.se <= bl);
        } else if (bound_kind == "nonconvex") {
            if (schedule.kind() != StepSchedule::Kind::Power || schedule.a() != 1.0)
                throw ConfigError("stability-sweep: nonconvex bound needs an alpha_t = c/t schedule");
            p.c = schedule.c();
            const double bl = stability_bound(StabilityBoundKind::NonconvexLast, p);
            rb.add(params, "eps_hat_last_abs", rep.last_abs.value, rep.last_abs.se, bl,
                   rep.last_abs.value + 3 * rep.last_abs.se <= bl);
        } else {
            throw ConfigError(cfg.path() + ".bound: unknown bound kind '" + bound_kind + "'");
        }
    }
}

// ---------------------------------------------------------------------------
// recursion-check
// ---------------------------------------------------------------------------

void run_recursion_check(StrictObject& cfg, const RowBuilder& rb) {
    NamedLoss nl = parse_loss(cfg.child("loss"));
    const LossMeta& meta = nl.loss->meta();
    std::shared_ptr<const ExampleSampler> sampler;
    if (cfg.has("data"))
        sampler = parse_sampler(cfg.child("data"));
    else
        sampler = std::make_shared<LossExampleSampler>(nl.loss);
    const int n = cfg.get<int>("n");
    const long T = cfg.get<long>("T");
    const int replicates = cfg.get_or<int>("replicates", 2000);
    const StepSchedule schedule = parse_schedule(cfg.child("schedule"), &meta);
    const std::string regime_name = cfg.get_or<std::string>("regime", "convex");
    const LossRegime regime = regime_name == "convex" ? LossRegime::ConvexSmooth
                              : regime_name == "strongly-convex" ? LossRegime::StronglyConvexSmooth
                              : regime_name == "smooth"
                                  ? LossRegime::Smooth
                                  : throw ConfigError("recursion-check.regime: unknown regime '" +
                                                      regime_name + "'");
    std::vector<std::string> rule_names;
    const std::string rules = cfg.get_or<std::string>("rule", "both");
    if (rules == "both") {
        rule_names = {"selection", "permutation"};
    } else {
        rule_names = {rules};
    }
    std::vector<long> t0_grid = cfg.get_or<std::vector<long>>("t0_grid", {2, 5, 10});
    const bool per_step_rows = cfg.get_or<bool>("per_step_rows", false);

    const SeedSpec seed{rb.seed, 0};
    const Dataset base = generate_dataset(*sampler, n, derive_seed(seed, 0xda7a));
    Rng rng(derive_seed(seed, 0xd1ce));
    const int index = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    const NeighborPair pair = make_neighbor(base, index, sampler->sample(rng));

    for (const std::string& rule_name : rule_names) {
        const SamplingRule rule = parse_rule(rule_name, "recursion-check.rule");
        const RecursionCheck check = verify_recursion(pair, *nl.loss, schedule, rule, T, replicates,
                                                      regime, derive_seed(seed, 0x3ec, rule_name.size()));
        double worst_margin = std::numeric_limits<double>::infinity();
        long worst_t = 2;
        for (long t = 2; t <= T; ++t) {
            const double res = check.residual[static_cast<std::size_t>(t - 2)];
            const double se = check.residual_se[static_cast<std::size_t>(t - 2)];
            const double margin = res + 3 * se;
            if (margin < worst_margin) {
                worst_margin = margin;
                worst_t = t;
            }
            if (per_step_rows)
                rb.add("loss=" + nl.label + ";rule=" + rule_name + ";t=" + std::to_string(t),
                       "recursion_residual", res, se, 0.0, margin >= 0.0);
        }
        rb.add("loss=" + nl.label + ";rule=" + rule_name + ";worst_t=" + std::to_string(worst_t),
               "recursion_min_margin", worst_margin, kNaN, 0.0, worst_margin >= 0.0);

        for (long t0 : t0_grid) {
            if (t0 < 2 || t0 > n) throw ConfigError("recursion-check.t0_grid: need 2 <= t0 <= n");
            const ConditionalDeltaStats stats =
                conditional_delta_stats(pair, *nl.loss, schedule, rule, T, t0, replicates,
                                        derive_seed(seed, 0xc0d, static_cast<std::uint64_t>(t0)));
            const double cap = static_cast<double>(t0) / n;
            const std::string params =
                "loss=" + nl.label + ";rule=" + rule_name + ";t0=" + std::to_string(t0);
            rb.add(params, "p_delta_nonzero", stats.p_nonzero, stats.p_se, cap,
                   stats.p_nonzero <= cap + 3 * stats.p_se);
            rb.add(params, "conditional_survivors", stats.survivors, kNaN, 30.0,
                   stats.survivors >= 30);
        }
    }
}

// ---------------------------------------------------------------------------
// minimax
// ---------------------------------------------------------------------------

struct GridMin {
    double argmin = 0.0;
    double value = 0.0;
};

// 1-D grid minimization of the exact risk over the first coordinate with a
// parabolic refinement of the winning bracket.
GridMin grid_minimize(const TwoPointProblem& problem, int which, long points) {
    const double r0 = problem.domain().radius;
    const double lo = -r0;
    const double hi = r0;
    Param w = problem.loss()->zero_param();
    auto risk_at = [&](double u) {
        w[0] = u;
        return problem.exact_risk(which, w);
    };
    GridMin best;
    best.value = std::numeric_limits<double>::infinity();
    const double step = (hi - lo) / static_cast<double>(points - 1);
    for (long i = 0; i < points; ++i) {
        const double u = lo + step * static_cast<double>(i);
        const double v = risk_at(u);
        if (v < best.value) {
            best.value = v;
            best.argmin = u;
        }
    }
    // parabolic refinement (the risk is smooth near its interior minimum)
    const double u0 = best.argmin;
    const double f0 = risk_at(u0 - step), f1 = best.value, f2 = risk_at(u0 + step);
    const double denom = f0 - 2 * f1 + f2;
    if (denom > 0) {
        const double shift = 0.5 * step * (f0 - f2) / denom;
        const double refined = u0 + std::clamp(shift, -step, step);
        const double fv = risk_at(refined);
        if (fv <= best.value) {
            best.value = fv;
            best.argmin = refined;
        }
    }
    return best;
}

void minimax_rows_for_kind(TwoPointKind kind, StrictObject& cfg, const RowBuilder& rb) {
    const double beta = cfg.get_or<double>("beta", 1.0);
    const double r = cfg.get_or<double>("r", 1.0);
    const double nu = cfg.get_or<double>("nu", 1.1);
    const int n = cfg.get_or<int>("n_construction", 6);
    const int d = cfg.get_or<int>("dim", 2);
    const long grid_points = cfg.get_or<long>("grid_points", 1000001);
    const double tol = cfg.get_or<double>("tolerance", 1e-6);

    const TwoPointProblem problem = build_problem(kind, beta, r, nu, n, d);
    const LecamReport rep = exact_risks(problem);
    const std::string kind_name = kind == TwoPointKind::Convex ? "convex" : "strongly-convex";
    const std::string params = "kind=" + kind_name + ";beta=" + fmt(beta) + ";r=" + fmt(r) +
                               ";n=" + std::to_string(n);

    const GridMin g1 = grid_minimize(problem, 1, grid_points);
    rb.add(params, "delta_closed_vs_grid", rep.delta, kNaN, g1.argmin,
           std::abs(rep.delta - g1.argmin) <= tol);

    const double origin_risk = problem.exact_risk(1, problem.loss()->zero_param());
    const double grid_excess = origin_risk - g1.value;
    rb.add(params, "excess_origin_closed_vs_grid", rep.excess_at_origin, kNaN, grid_excess,
           std::abs(rep.excess_at_origin - grid_excess) <= tol);
    rb.add(params, "separation_value_vs_grid_excess", rep.separation_value, kNaN, grid_excess,
           std::abs(rep.separation_value - grid_excess) <= tol);

    const double kl_direct = kl_label_marginal(problem.cells_p1(), problem.cells_p2());
    rb.add(params, "kl_closed_vs_direct", rep.kl_per_sample, kNaN, kl_direct,
           std::abs(rep.kl_per_sample - kl_direct) <= tol);
    rb.add(params, "kl_within_budget", rep.kl_per_sample, kNaN, rep.kl_budget,
           rep.kl_per_sample <= rep.kl_budget);

    // first-coordinate stationarity of the exact risk at its minimizer
    const double eps = problem.eps();
    double stat = 0.0;
    if (kind == TwoPointKind::Convex) {
        stat = (0.5 + 0.5 * eps) * beta * (rep.delta - r) + (0.5 - 0.5 * eps) * beta * r * 0.5;
    } else {
        stat = beta * (rep.delta - r * eps);
    }
    rb.add(params, "stationarity_residual", std::abs(stat), kNaN, 1e-10, std::abs(stat) <= 1e-10);

    if (kind == TwoPointKind::StronglyConvex) {
        // sampled second-difference quotients of the exact risk must sit at beta
        Rng rng(derive_seed(SeedSpec{rb.seed, 0}, 0xeed));
        Param w = problem.loss()->zero_param();
        double worst = 0.0;
        const double h = 1e-4;
        for (int trial = 0; trial < 200; ++trial) {
            const double u = (2.0 * rng.next_double() - 1.0) * 0.9 * problem.domain().radius;
            w[0] = u;
            const double f0 = problem.exact_risk(1, w);
            w[0] = u + h;
            const double fp = problem.exact_risk(1, w);
            w[0] = u - h;
            const double fm = problem.exact_risk(1, w);
            worst = std::max(worst, std::abs((fp - 2 * f0 + fm) / (h * h) - beta));
        }
        rb.add(params, "hessian_second_difference", worst, kNaN, 1e-6, worst <= 1e-6);
    }
}

void run_minimax(StrictObject& cfg, const RowBuilder& rb) {
    const std::string kind = cfg.get_or<std::string>("kind", "both");
    if (kind == "convex" || kind == "both") minimax_rows_for_kind(TwoPointKind::Convex, cfg, rb);
    if (kind == "strongly-convex" || kind == "both")
        minimax_rows_for_kind(TwoPointKind::StronglyConvex, cfg, rb);
    if (kind != "convex" && kind != "strongly-convex" && kind != "both")
        throw ConfigError("minimax.kind: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// tradeoff-audit
// ---------------------------------------------------------------------------

void run_tradeoff_audit(StrictObject& cfg, const RowBuilder& rb) {
    const SeedSpec seed{rb.seed, 0};

    {  // trade-off inequality: closed-form stability bound + measured opt error vs minimax
        StrictObject sub = cfg.child("tradeoff");
        const double beta = sub.get_or<double>("beta", 1.0);
        const double r = sub.get_or<double>("r", 1.0);
        const double nu = sub.get_or<double>("nu", 1.1);
        const int nc = sub.get_or<int>("n_construction", 6);
        const int d = sub.get_or<int>("dim", 2);
        const long T = sub.get_or<long>("T", 100);
        const int reps = sub.get_or<int>("replicates", 100);
        const StepSchedule schedule = parse_schedule(sub.child("schedule"), nullptr);
        sub.finish();

        const TwoPointProblem problem = build_problem(TwoPointKind::Convex, beta, r, nu, nc, d);
        const LossPtr loss = problem.loss();
        const int n_data = std::max(nc, 2);

        std::vector<double> opt(static_cast<std::size_t>(reps));
        parallel_for(reps, [&](long rep) {
            const Dataset data = sample_dataset(problem, 1, n_data,
                                                derive_seed(seed, 0xdd, static_cast<std::uint64_t>(rep)));
            const Trajectory traj = run_sgd(data, *loss, schedule, SamplingRule::RandomSelection, T,
                                            derive_seed(seed, 0xee, static_cast<std::uint64_t>(rep)));
            const MinimizerResult mins = empirical_minimizer(data, *loss, 1e-10, 200000);
            opt[static_cast<std::size_t>(rep)] =
                empirical_risk(traj.last, data, *loss) - empirical_risk(mins.w, data, *loss);
        });
        double mean = 0.0;
        for (double v : opt) mean += v;
        mean /= reps;
        double var = 0.0;
        for (double v : opt) var += (v - mean) * (v - mean);
        const double se = std::sqrt(var / std::max(reps - 1, 1) / reps);

        BoundParams p;
        p.L = loss->meta().L;
        p.beta = loss->meta().beta;
        p.n = n_data;
        p.T = T;
        p.schedule = schedule;
        const double stab = stability_bound(StabilityBoundKind::ConvexLast, p);
        const double mm =
            minimax_lower_bound(MinimaxKind::Convex, beta, loss->domain().diameter(), n_data);
        const TradeoffAudit audit = tradeoff_audit(stab, std::max(mean, 0.0), mm, 3 * se);
        rb.add("kind=convex;n=" + std::to_string(n_data) + ";T=" + std::to_string(T),
               "tradeoff_two_stab_plus_opt", 2 * stab + mean, se, mm, audit.holds);
    }

    {  // generalization against twice the empirical stability
        StrictObject sub = cfg.child("generalization");
        NamedLoss nl = parse_loss(sub.child("loss"));
        auto sampler = parse_sampler(sub.child("data"));
        const int n = sub.get_or<int>("n", 30);
        const long T = sub.get_or<long>("T", 100);
        const int draws = sub.get_or<int>("draws", 200);
        const int mc_samples = sub.get_or<int>("mc_samples", 20000);
        StabilityProtocol protocol;
        protocol.replicates = sub.get_or<int>("replicates", 200);
        protocol.neighbor_pairs = sub.get_or<int>("neighbor_pairs", 8);
        protocol.probes = sub.get_or<int>("probes", 100);
        const StepSchedule schedule = parse_schedule(sub.child("schedule"), &nl.loss->meta());
        const SamplingRule rule = parse_rule(sub.get_or<std::string>("rule", "selection"),
                                             sub.path() + ".rule");
        sub.finish();

        const StabilityReport stab = estimate_stability(*sampler, n, *nl.loss, schedule, rule, T,
                                                        protocol, derive_seed(seed, 0xab1e));

        const Distribution dist = Distribution::sampler(sampler);
        std::vector<double> gaps(static_cast<std::size_t>(draws));
        parallel_for(draws, [&](long i) {
            const Dataset data =
                generate_dataset(*sampler, n, derive_seed(seed, 0x5a, static_cast<std::uint64_t>(i)));
            const Trajectory traj = run_sgd(data, *nl.loss, schedule, rule, T,
                                            derive_seed(seed, 0x5b, static_cast<std::uint64_t>(i)));
            const PopulationRisk pop =
                population_risk(traj.last, dist, *nl.loss, mc_samples,
                                derive_seed(seed, 0x5c, static_cast<std::uint64_t>(i)));
            gaps[static_cast<std::size_t>(i)] = pop.estimate - empirical_risk(traj.last, data, *nl.loss);
        });
        double mean = 0.0;
        for (double v : gaps) mean += v;
        mean /= draws;
        double var = 0.0;
        for (double v : gaps) var += (v - mean) * (v - mean);
        const double se_gap = std::sqrt(var / std::max(draws - 1, 1) / draws);

        const double eps_hat = stab.last_signed.value;
        const double combined_se = std::sqrt(se_gap * se_gap +
                                             4.0 * stab.last_signed.se * stab.last_signed.se);
        const double bound = 2.0 * eps_hat + 3.0 * combined_se;
        rb.add("loss=" + nl.label + ";n=" + std::to_string(n) + ";T=" + std::to_string(T),
               "generalization_abs_mean_gap", std::abs(mean), se_gap, bound,
               std::abs(mean) <= bound);
    }
}

// ---------------------------------------------------------------------------
// dispatch and emission
// ---------------------------------------------------------------------------

std::vector<ResultRow> dispatch(const json& root) {
    StrictObject cfg(root, "config");
    const std::string experiment = cfg.get<std::string>("experiment");
    const std::uint64_t seed = cfg.get_or<std::uint64_t>("seed", 1);
    // consumed by the CLI layer, tolerated here so one file drives both
    cfg.optional("output");
    cfg.optional("format");

    std::vector<ResultRow> rows;
    RowBuilder rb{experiment, seed, &rows};
    if (experiment == "gradient-audit")
        run_gradient_audit(cfg, rb);
    else if (experiment == "expansiveness")
        run_expansiveness(cfg, rb);
    else if (experiment == "stability-sweep")
        run_stability_sweep(cfg, rb);
    else if (experiment == "recursion-check")
        run_recursion_check(cfg, rb);
    else if (experiment == "minimax")
        run_minimax(cfg, rb);
    else if (experiment == "tradeoff-audit")
        run_tradeoff_audit(cfg, rb);
    else
        throw ConfigError("config.experiment: unknown experiment '" + experiment + "'");
    cfg.finish();
    return rows;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {
        "stability-sweep", "recursion-check", "expansiveness",
        "minimax",         "gradient-audit",  "tradeoff-audit",
    };
    return names;
}

std::vector<ResultRow> run_experiment_json(const std::string& json_text) {
    return run_experiment_json(json_text, "", "");
}

std::vector<ResultRow> run_experiment_json(const std::string& json_text,
                                           const std::string& experiment_override,
                                           const std::string& seed_override) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be a JSON object");
    if (!experiment_override.empty()) root["experiment"] = experiment_override;
    if (!seed_override.empty()) {
        std::uint64_t seed = 0;
        const auto [ptr, ec] = std::from_chars(seed_override.data(),
                                               seed_override.data() + seed_override.size(), seed);
        if (ec != std::errc{} || ptr != seed_override.data() + seed_override.size())
            throw ConfigError("config.seed: override is not a valid unsigned integer");
        root["seed"] = seed;
    }
    return dispatch(root);
}

namespace {

std::string csv_cell(double v) { return fmt(v); }

void sort_rows(std::vector<ResultRow>& rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.experiment != b.experiment) return a.experiment < b.experiment;
        if (a.params != b.params) return a.params < b.params;
        return a.metric < b.metric;
    });
}

}  // namespace

void emit(std::vector<ResultRow> rows, EmitFormat format, std::ostream& out) {
    sort_rows(rows);
    if (format == EmitFormat::Csv) {
        out << "experiment,params,metric,value,stderr,bound,pass,seed\n";
        for (const ResultRow& r : rows) {
            out << r.experiment << ',' << r.params << ',' << r.metric << ',' << csv_cell(r.value)
                << ',' << csv_cell(r.se) << ',' << csv_cell(r.bound) << ','
                << (r.pass ? "true" : "false") << ',' << r.seed << '\n';
        }
        return;
    }
    json arr = json::array();
    for (const ResultRow& r : rows) {
        json obj = json::object();
        obj["experiment"] = r.experiment;
        obj["params"] = r.params;
        obj["metric"] = r.metric;
        obj["value"] = r.value;
        obj["stderr"] = r.se;
        obj["bound"] = r.bound;
        obj["pass"] = r.pass;
        obj["seed"] = r.seed;
        arr.push_back(std::move(obj));
    }
    out << arr.dump(2) << '\n';
}

void emit_to_file(std::vector<ResultRow> rows, EmitFormat format, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("emit: cannot open '" + path + "' for writing");
    emit(std::move(rows), format, out);
    if (!out) throw std::runtime_error("emit: write to '" + path + "' failed");
}

bool all_pass(const std::vector<ResultRow>& rows) {
    for (const ResultRow& r : rows)
        if (!r.pass) return false;
    return true;
}

}  // namespace pairstab
