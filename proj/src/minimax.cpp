#include "pairstab/minimax.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace pairstab {

namespace {

void check_cell(double p, const char* name) {
    if (!(p > 0.0 && p < 1.0)) {
        std::ostringstream msg;
        msg << "build_problem: cell " << name << " has probability " << p
            << " outside (0, 1)";
        throw ConstructionError(msg.str());
    }
}

}  // namespace

TwoPointProblem build_problem(TwoPointKind kind, double beta, double r, double nu, int n,
                              int dim) {
    if (beta <= 0 || r <= 0) throw ConstructionError("build_problem: beta and r must be positive");
    if (n < 1) throw ConstructionError("build_problem: n must be >= 1");
    if (dim < 1) throw ConstructionError("build_problem: dim must be >= 1");
    const double nu_hi = 0.5 * std::sqrt(6.0);
    if (!(nu > 1.0 && nu < nu_hi))
        throw ConstructionError("build_problem: nu must lie in (1, sqrt(6)/2)");

    TwoPointProblem p;
    p.kind_ = kind;
    p.beta_ = beta;
    p.r_ = r;
    p.nu_ = nu;
    p.n_ = n;
    p.d_ = dim;
    p.eps_ = 1.0 / std::sqrt(6.0 * n);

    const double e = p.eps_;
    p.p1_.x1_pos = 0.5 * (0.5 + nu * e);
    p.p1_.x1_neg = 0.5 * (0.5 - nu * e);
    p.p1_.x2_pos = 0.5 * (0.5 - (nu - 1.0) * e);
    p.p1_.x2_neg = 0.5 * (0.5 + (nu - 1.0) * e);
    p.p2_.x1_pos = 0.5 * (0.5 - nu * e);
    p.p2_.x1_neg = 0.5 * (0.5 + nu * e);
    p.p2_.x2_pos = 0.5 * (0.5 + (nu - 1.0) * e);
    p.p2_.x2_neg = 0.5 * (0.5 - (nu - 1.0) * e);
    check_cell(p.p1_.x1_pos, "(X1,+1) of P1");
    check_cell(p.p1_.x1_neg, "(X1,-1) of P1");
    check_cell(p.p1_.x2_pos, "(X2,+1) of P1");
    check_cell(p.p1_.x2_neg, "(X2,-1) of P1");
    check_cell(p.p2_.x1_pos, "(X1,+1) of P2");
    check_cell(p.p2_.x1_neg, "(X1,-1) of P2");
    check_cell(p.p2_.x2_pos, "(X2,+1) of P2");
    check_cell(p.p2_.x2_neg, "(X2,-1) of P2");

    p.loss_ = kind == TwoPointKind::Convex ? synthetic_convex_loss(beta, r, std::max(n, 2), dim)
                                           : synthetic_strongly_convex_loss(beta, r, dim);

    // Both minimizers and (for the convex kind) the off-minimizer witness
    // 2 delta e1 must be feasible.
    const double delta = p.separation();
    const double needed = kind == TwoPointKind::Convex ? 4.0 * delta : 2.0 * delta;
    if (p.loss_->domain().diameter() < needed) {
        std::ostringstream msg;
        msg << "build_problem: domain diameter " << p.loss_->domain().diameter()
            << " cannot hold the witness points (need >= " << needed << ")";
        throw ConstructionError(msg.str());
    }
    return p;
}

double TwoPointProblem::positive_mass(int which) const {
    if (which != 1 && which != 2) throw std::invalid_argument("positive_mass: which must be 1 or 2");
    return which == 1 ? 0.5 + 0.5 * eps_ : 0.5 - 0.5 * eps_;
}

Example TwoPointProblem::representative(bool in_x1, double label) const {
    Example e;
    e.x.assign(static_cast<std::size_t>(d_), 0.0);
    e.x[0] = in_x1 ? feature_scale_ : -feature_scale_;
    e.y = label;
    return e;
}

double TwoPointProblem::exact_risk(int which, const Param& w) const {
    // R_i(w) = P_i(Z+) f1(w) + P_i(Z-) f2(w); evaluate the wells through the
    // loss with same-label representative pairs.
    const double pos = positive_mass(which);
    const Example zp = representative(true, 1.0);
    const Example zn = representative(true, -1.0);
    const double f1 = loss_->value(w, zp, zp);
    const double f2 = loss_->value(w, zn, zn);
    return pos * f1 + (1.0 - pos) * f2;
}

double TwoPointProblem::separation() const {
    if (kind_ == TwoPointKind::Convex)
        return 0.5 * r_ + r_ / (1.0 + std::sqrt(6.0 * n_));
    return r_ * eps_;
}

Param TwoPointProblem::minimizer(int which) const {
    if (which != 1 && which != 2) throw std::invalid_argument("minimizer: which must be 1 or 2");
    Param w = loss_->zero_param();
    w[0] = which == 1 ? separation() : -separation();
    return w;
}

double TwoPointProblem::min_risk() const {
    return exact_risk(1, minimizer(1));
}

double TwoPointProblem::excess(int which, const Param& w) const {
    return exact_risk(which, w) - min_risk();
}

double kl_label_marginal(const CellProbs& p, const CellProbs& q) {
    const double pp = p.positive_mass();
    const double qp = q.positive_mass();
    return pp * std::log(pp / qp) + (1.0 - pp) * std::log((1.0 - pp) / (1.0 - qp));
}

double kl_joint_cells(const CellProbs& p, const CellProbs& q) {
    return p.x1_pos * std::log(p.x1_pos / q.x1_pos) + p.x1_neg * std::log(p.x1_neg / q.x1_neg) +
           p.x2_pos * std::log(p.x2_pos / q.x2_pos) + p.x2_neg * std::log(p.x2_neg / q.x2_neg);
}

LecamReport exact_risks(const TwoPointProblem& problem) {
    LecamReport rep;
    const double beta = problem.beta();
    const double r = problem.r();
    const double e = problem.eps();
    const int n = problem.n_construction();

    rep.delta = problem.separation();
    rep.w_star_1 = problem.minimizer(1);
    rep.w_star_2 = problem.minimizer(2);
    rep.risk_at_min = problem.min_risk();
    rep.excess_at_origin = problem.excess(1, problem.loss()->zero_param());

    rep.separation_value = problem.kind() == TwoPointKind::Convex
                               ? 3.0 * beta * r * r / (8.0 * std::sqrt(6.0 * n))
                               : beta * r * r / (12.0 * n);
    rep.kl_per_sample = e * std::log((1.0 + e) / (1.0 - e));
    rep.kl_budget = 1.0 / (2.0 * n);
    rep.lecam_lower_bound = 0.25 * rep.separation_value;
    return rep;
}

TwoPointSampler::TwoPointSampler(const TwoPointProblem& problem, int which)
    : cells_(which == 1 ? problem.cells_p1() : problem.cells_p2()), dim_(problem.dim()) {
    if (which != 1 && which != 2)
        throw std::invalid_argument("TwoPointSampler: which must be 1 or 2");
    reps_[0] = problem.representative(true, 1.0);
    reps_[1] = problem.representative(true, -1.0);
    reps_[2] = problem.representative(false, 1.0);
    reps_[3] = problem.representative(false, -1.0);
}

Example TwoPointSampler::sample(Rng& rng) const {
    const double u = rng.next_double();
    if (u < cells_.x1_pos) return reps_[0];
    if (u < cells_.x1_pos + cells_.x1_neg) return reps_[1];
    if (u < cells_.x1_pos + cells_.x1_neg + cells_.x2_pos) return reps_[2];
    return reps_[3];
}

Dataset sample_dataset(const TwoPointProblem& problem, int which, int n_samples, SeedSpec seed) {
    return generate_dataset(TwoPointSampler(problem, which), n_samples, seed);
}

LecamTrialResult empirical_lecam(const TwoPointProblem& problem, const Estimator& estimator,
                                 int trials, SeedSpec seed) {
    if (trials < 100) throw std::invalid_argument("empirical_lecam: trials must be >= 100");
    LecamTrialResult out;
    const int n = std::max(problem.n_construction(), 2);  // datasets need n >= 2
    std::vector<double> excess(static_cast<std::size_t>(trials));
    for (int which = 1; which <= 2; ++which) {
        std::atomic<int> projected_count{0};
        parallel_for(trials, [&](long trial) {
            const Dataset data = sample_dataset(problem, which,
                                                n, derive_seed(seed, static_cast<std::uint64_t>(which),
                                                               static_cast<std::uint64_t>(trial)));
            Param w = estimator(data);
            if (!problem.domain().contains(w)) {
                w = project(w, problem.domain());
                projected_count.fetch_add(1);
            }
            excess[static_cast<std::size_t>(trial)] = problem.excess(which, w);
        });
        double mean = 0.0;
        for (double v : excess) mean += v;
        mean /= trials;
        double var = 0.0;
        for (double v : excess) var += (v - mean) * (v - mean);
        var /= std::max(trials - 1, 1);
        const double se = std::sqrt(var / trials);
        if (which == 1) {
            out.mean_excess_p1 = mean;
            out.se_p1 = se;
        } else {
            out.mean_excess_p2 = mean;
            out.se_p2 = se;
        }
        out.projected_outputs += projected_count;
    }
    if (out.mean_excess_p1 >= out.mean_excess_p2) {
        out.worst_mean = out.mean_excess_p1;
        out.worst_se = out.se_p1;
    } else {
        out.worst_mean = out.mean_excess_p2;
        out.worst_se = out.se_p2;
    }
    return out;
}

}  // namespace pairstab
