#include "pairstab/bounds.hpp"

#include <cmath>
#include <sstream>

namespace pairstab {

namespace {

void require(bool ok, const char* inequality) {
    if (!ok) throw PreconditionError(std::string("bound precondition violated: ") + inequality);
}

const StepSchedule& schedule_of(const BoundParams& p) {
    if (!p.schedule) throw PreconditionError("bound precondition violated: schedule missing");
    return *p.schedule;
}

void require_common(const BoundParams& p) {
    require(p.L > 0, "L > 0");
    require(p.beta > 0, "beta > 0");
    require(p.n >= 2, "n >= 2");
    require(p.T >= 2, "T >= 2");
}

void require_convex_regime(const BoundParams& p) {
    const StepSchedule& s = schedule_of(p);
    for (long t = 1; t < p.T; ++t)
        require(s(t) <= 2.0 / p.beta + 1e-12, "alpha_t <= 2/beta");
}

void require_sconvex_const_regime(const BoundParams& p) {
    require(p.gamma > 0, "gamma > 0");
    const StepSchedule& s = schedule_of(p);
    require(s.kind() == StepSchedule::Kind::Constant ||
                s.kind() == StepSchedule::Kind::ConstantHorizon,
            "constant step size");
    require(s(1) <= 2.0 / (p.beta + p.gamma) + 1e-12, "alpha <= 2/(beta+gamma)");
}

}  // namespace

long smoothness_condition_ceil(double beta, double gamma) {
    return static_cast<long>(std::ceil(beta / gamma - 1e-12));
}

double stability_bound(StabilityBoundKind kind, const BoundParams& p) {
    require_common(p);
    const double L2 = p.L * p.L;
    const double n = static_cast<double>(p.n);
    const double T = static_cast<double>(p.T);
    switch (kind) {
        case StabilityBoundKind::ConvexLast: {
            require_convex_regime(p);
            const StepSchedule& s = schedule_of(p);
            double sum = 0.0;
            for (long t = 1; t < p.T; ++t) sum += s(t);
            return 4.0 * L2 / n * sum;
        }
        case StabilityBoundKind::ConvexAvg: {
            require_convex_regime(p);
            const StepSchedule& s = schedule_of(p);
            // sum_{t=2..T} sum_{j<t} alpha_j = sum_{j<T} (T-j) alpha_j
            double sum = 0.0;
            for (long j = 1; j < p.T; ++j) sum += static_cast<double>(p.T - j) * s(j);
            return 4.0 * L2 / (T * n) * sum;
        }
        case StabilityBoundKind::SconvexConstLast: {
            require_sconvex_const_regime(p);
            const double eta = 1.0 - schedule_of(p)(1) * p.gamma / 2.0;
            return 8.0 * L2 / (p.gamma * n) * (1.0 - std::pow(eta, T - 1.0));
        }
        case StabilityBoundKind::SconvexConstAvg: {
            require_sconvex_const_regime(p);
            const double eta = 1.0 - schedule_of(p)(1) * p.gamma / 2.0;
            double sum = 0.0;
            for (long t = 2; t <= p.T; ++t) sum += 1.0 - std::pow(eta, static_cast<double>(t - 1));
            return 8.0 * L2 / (p.gamma * T * n) * sum;
        }
        case StabilityBoundKind::SconvexStaircaseLast: {
            require(p.gamma > 0, "gamma > 0");
            require(std::isfinite(p.rho) && p.rho >= 0, "rho finite");
            const StepSchedule& s = schedule_of(p);
            require(s.kind() == StepSchedule::Kind::StaircaseStrong, "alpha_t = 2/(gamma t)");
            require(std::abs(s.gamma() - p.gamma) <= 1e-12 * std::max(1.0, p.gamma),
                    "schedule gamma matches the loss gamma");
            const long cbg = smoothness_condition_ceil(p.beta, p.gamma);
            require(p.T >= cbg + 1, "T >= ceil(beta/gamma) + 1");
            return 8.0 * L2 / (p.gamma * n) * (1.0 - static_cast<double>(cbg) / (T - 1.0)) +
                   p.rho / n * (1.0 + static_cast<double>(cbg));
        }
        case StabilityBoundKind::NonconvexLast: {
            require(p.range_unit, "loss range in [0, 1]");
            require(p.c > 0, "c > 0");
            require(p.n >= 2, "n >= 2");
            const StepSchedule& s = schedule_of(p);
            for (long t = 1; t < p.T; ++t)
                require(s(t) * static_cast<double>(t) <= p.c + 1e-12, "alpha_t <= c/t");
            const double bc = p.beta * p.c;
            return (1.0 + 1.0 / bc) / (n - 1.0) * std::pow(4.0 * p.c * L2, 1.0 / (1.0 + bc)) *
                   std::pow(T - 1.0, bc / (1.0 + bc));
        }
    }
    throw std::logic_error("stability_bound: unknown kind");
}

double minimax_lower_bound(MinimaxKind kind, double beta, double omega_diam, long n) {
    if (beta <= 0 || omega_diam <= 0)
        throw std::invalid_argument("minimax_lower_bound: beta and |Omega| must be positive");
    if (n < 1) throw std::invalid_argument("minimax_lower_bound: n must be >= 1");
    const double d2 = omega_diam * omega_diam;
    if (kind == MinimaxKind::Convex) return 3.0 * beta * d2 / (128.0 * std::sqrt(6.0 * n));
    return beta * d2 / (32.0 * static_cast<double>(n));
}

namespace {

// Effective schedule scale for the averaged-output rate bound: c for the
// fixed-horizon schedule, c/(1-a) for the decaying one.
double effective_c(const BoundParams& p) {
    const StepSchedule& s = schedule_of(p);
    if (s.kind() == StepSchedule::Kind::ConstantHorizon) {
        require(p.a >= 0 && p.a < 1, "a in [0, 1)");
        return p.c;
    }
    if (s.kind() == StepSchedule::Kind::Power) {
        require(p.a > 0 && p.a < 1, "a in (0, 1)");
        return p.c / (1.0 - p.a);
    }
    throw PreconditionError(
        "bound precondition violated: rate bound needs a constant-horizon or power schedule");
}

}  // namespace

double opt_error_rate_threshold(const BoundParams& p) {
    require(p.omega_diam > 0, "|Omega| > 0");
    require(p.beta > 0, "beta > 0");
    require(p.c > 0, "c > 0");
    const double L = p.omega_diam * p.beta + p.b;
    const double ce = effective_c(p);
    const double base = 3.0 * p.beta * p.omega_diam * p.omega_diam /
                        (2048.0 * std::sqrt(6.0) * ce * L * L);
    return std::pow(base, 1.0 / (1.0 - p.a));
}

double opt_error_lower_bound(OptErrorBoundKind kind, const BoundParams& p) {
    require(p.omega_diam > 0, "|Omega| > 0");
    require(p.beta > 0, "beta > 0");
    require(p.b >= 0, "b >= 0");
    const double L = p.omega_diam * p.beta + p.b;  // the class Lipschitz constant
    const double L2 = L * L;
    const double n = static_cast<double>(p.n);
    const double diam2 = p.omega_diam * p.omega_diam;
    switch (kind) {
        case OptErrorBoundKind::ConvexRate: {
            require(p.T >= 2, "T >= 2");
            require(p.c > 0, "c > 0");
            require(p.c <= 2.0 / p.beta + 1e-12, "c <= 2/beta");
            const double ce = effective_c(p);
            const double c1 = 9.0 * p.beta * p.beta * diam2 * diam2 / (4194304.0 * ce * L2);
            return c1 / std::pow(static_cast<double>(p.T), 1.0 - p.a);
        }
        case OptErrorBoundKind::SconvexConst: {
            require(p.n >= 1, "n >= 1");
            require(p.T >= 1, "T >= 1");
            require(p.gamma > 0, "gamma > 0");
            require_sconvex_const_regime(p);
            const double alpha = schedule_of(p)(1);
            const double offset = (16.0 * L2 / p.gamma - p.beta * diam2 / 32.0) / n;
            return 16.0 * L2 / (p.gamma * n) * std::pow(1.0 - alpha * p.gamma / 2.0, p.T - 1.0) -
                   offset;
        }
        case OptErrorBoundKind::SconvexStaircase: {
            require(p.n >= 1, "n >= 1");
            require(p.T >= 2, "T >= 2");
            require(p.gamma > 0, "gamma > 0");
            const StepSchedule& s = schedule_of(p);
            require(s.kind() == StepSchedule::Kind::StaircaseStrong, "alpha_t = 2/(gamma t)");
            require(std::abs(s.gamma() - p.gamma) <= 1e-12 * std::max(1.0, p.gamma),
                    "schedule gamma matches the loss gamma");
            const double ratio = p.beta / p.gamma;
            const double offset = 2.0 * (p.beta * diam2 + p.b * p.omega_diam) / n * (ratio + 3.0) -
                                  p.beta * diam2 / (32.0 * n) +
                                  16.0 * L2 / (n * p.gamma) * std::log(ratio + 3.0);
            return 16.0 * L2 * (p.beta + p.gamma) / (p.gamma * p.gamma * n) *
                       std::log(static_cast<double>(p.T)) / static_cast<double>(p.T) -
                   offset;
        }
    }
    throw std::logic_error("opt_error_lower_bound: unknown kind");
}

TradeoffAudit tradeoff_audit(double stab, double opt, double minimax, double tolerance) {
    if (stab < 0 || opt < 0)
        throw std::invalid_argument("tradeoff_audit: stability and optimization terms must be >= 0");
    TradeoffAudit out;
    out.slack = 2.0 * stab + opt - minimax;
    out.holds = out.slack >= -tolerance;
    return out;
}

}  // namespace pairstab
