#pragma once

#include <optional>

#include "pairstab/core.hpp"

namespace pairstab {

// Inputs to the closed-form bound evaluators. Only the fields a given bound
// consumes need to be meaningful; every evaluator validates its own regime
// and throws PreconditionError naming the violated inequality otherwise.
struct BoundParams {
    double L = 0.0;      // Lipschitz constant of the loss
    double beta = 0.0;   // smoothness
    double gamma = 0.0;  // strong convexity (0 when absent)
    double rho = std::numeric_limits<double>::infinity();  // sup of the loss
    double b = 0.0;      // bound on sup_{z,z'} min_w ||grad||
    long n = 0;          // sample size
    long T = 0;          // iterations
    std::optional<StepSchedule> schedule;
    double omega_diam = 0.0;  // |Omega|
    double c = 0.0;           // schedule scale where a formula needs it explicitly
    double a = 0.0;           // schedule exponent
    bool range_unit = false;  // loss values confined to [0, 1]
};

enum class StabilityBoundKind {
    ConvexLast,            // (4L^2/n) sum_{t<T} alpha_t;             needs alpha_t <= 2/beta
    ConvexAvg,             // (4L^2/(Tn)) sum_t sum_{j<t} alpha_j;    same regime
    SconvexConstLast,      // (8L^2/(gamma n))[1 - (1-alpha gamma/2)^{T-1}]; constant alpha <= 2/(beta+gamma)
    SconvexConstAvg,       // averaged-output version of the line above
    SconvexStaircaseLast,  // alpha_t = 2/(gamma t), T >= ceil(beta/gamma)+1
    NonconvexLast,         // alpha_t <= c/t and loss range in [0,1]
};

double stability_bound(StabilityBoundKind kind, const BoundParams& p);

enum class MinimaxKind { Convex, StronglyConvex };

// Convex: 3 beta |Omega|^2 / (128 sqrt(6n)); strongly convex: beta |Omega|^2 / (32 n).
double minimax_lower_bound(MinimaxKind kind, double beta, double omega_diam, long n);

enum class OptErrorBoundKind {
    ConvexRate,        // C1 / T^{1-a} with the explicit constant C1
    SconvexConst,      // geometric decay minus the fixed offset C
    SconvexStaircase,  // (ln T)/T scaling minus the fixed offset C
};

double opt_error_lower_bound(OptErrorBoundKind kind, const BoundParams& p);

// Horizon threshold tau_0 above which the ConvexRate bound is claimed.
double opt_error_rate_threshold(const BoundParams& p);

// Ceiling of beta/gamma with a 1e-12 downward nudge so exact integer ratios
// do not round up.
long smoothness_condition_ceil(double beta, double gamma);

struct TradeoffAudit {
    bool holds = false;
    double slack = 0.0;  // 2*stab + opt - minimax
};

// Checks 2*stab + opt >= minimax - tolerance.
TradeoffAudit tradeoff_audit(double stab, double opt, double minimax, double tolerance = 0.0);

}  // namespace pairstab
