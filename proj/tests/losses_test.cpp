#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pairstab/losses.hpp"
#include "test_support.hpp"

using namespace pairstab;

namespace {

Example ex(std::vector<double> x, double y) { return Example{std::move(x), y}; }

// Sampled envelope check shared by the catalogued losses: values nonnegative,
// value Lipschitz in L, gradient Lipschitz in beta, and strong monotonicity
// in gamma where claimed.
void check_envelopes(const PairwiseLoss& loss, int samples, std::uint64_t seed) {
    Rng rng({seed, 0});
    const LossMeta& meta = loss.meta();
    for (int i = 0; i < samples; ++i) {
        const Example z = loss.sample_example(rng);
        const Example zp = loss.sample_example(rng);
        const Param w = loss.sample_param(rng);
        const Param wp = loss.sample_param(rng);
        const double v = loss.value(w, z, zp);
        const double vp = loss.value(wp, z, zp);
        CHECK(v >= 0.0);
        const double dw = distance(w, wp);
        CHECK(std::abs(v - vp) <= meta.L * dw + 1e-9);
        const Param g = loss.grad(w, z, zp);
        const Param gp = loss.grad(wp, z, zp);
        CHECK(distance(g, gp) <= meta.beta * dw + 1e-9);
        if (meta.gamma > 0.0 && dw > 1e-12) {
            double inner = 0.0;
            for (std::size_t k = 0; k < g.size(); ++k) inner += (g[k] - gp[k]) * (w[k] - wp[k]);
            CHECK(inner >= meta.gamma * dw * dw - 1e-9);
        }
    }
}

}  // namespace

TEST_CASE("auc squared loss values and certified constants") {
    const LossPtr loss = auc_squared_loss(2.0, 1.0, 2);
    const Param zero = loss->zero_param();
    CHECK(loss->value(zero, ex({0.5, 0.1}, 1.0), ex({-0.2, 0.3}, -1.0)) == doctest::Approx(1.0));
    // indicator off: only the ridge term remains
    const Param w = Param::vector({0.6, -0.2});
    const double ridge = 0.5 * 2.0 * w.dot(w);
    CHECK(loss->value(w, ex({0.5, 0.1}, 1.0), ex({-0.2, 0.3}, 1.0)) == doctest::Approx(ridge));
    CHECK(loss->value(w, ex({0.5, 0.1}, -1.0), ex({-0.2, 0.3}, -1.0)) == doctest::Approx(ridge));

    const LossMeta& meta = loss->meta();
    CHECK(meta.L == doctest::Approx(14.0).epsilon(1e-12));
    CHECK(meta.beta == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(meta.gamma == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(meta.rho == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(loss->domain().radius == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(meta.convex);
    CHECK_THROWS_AS(auc_squared_loss(0.0, 1.0, 2), std::invalid_argument);
}

TEST_CASE("metric logistic loss values, gradient at zero, constants") {
    const LossPtr loss = metric_logistic_loss(2.0, 1.0, 3);
    const Param zero = loss->zero_param();
    const Example z = ex({0.5, -0.3, 0.2}, 1.0);
    const Example zp = ex({-0.1, 0.4, 0.0}, -1.0);
    CHECK(loss->value(zero, z, zp) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    CHECK(loss->meta().L == doctest::Approx(16.0).epsilon(1e-12));
    CHECK(loss->meta().beta == doctest::Approx(64.0).epsilon(1e-12));
    CHECK(loss->meta().gamma == 0.0);
    CHECK(loss->meta().convex);

    // grad at 0 is (1/2) I_{yy'} (x-x')(x-x')^T
    const Param g = loss->grad(zero, z, zp);
    const double ind = z.y == zp.y ? 1.0 : -1.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double expected = 0.5 * ind * (z.x[i] - zp.x[i]) * (z.x[j] - zp.x[j]);
            CHECK(g.matrix_at(i, j) == doctest::Approx(expected).epsilon(1e-12));
        }

    // vector-shaped parameter is rejected
    CHECK_THROWS_AS(loss->value(Param::vector({1.0, 2.0, 3.0}), z, zp), std::invalid_argument);
}

TEST_CASE("mee loss range and constants") {
    const LossPtr loss = mee_loss(1.0, 1.0, 1.0, 1.0, 2);
    // zero residual: (y - y') = (x - x')^T w
    const Param w = Param::vector({0.5, 0.0});
    const Example z = ex({0.8, 0.0}, 0.4);
    const Example zp = ex({0.0, 0.0}, 0.0);
    CHECK(loss->value(w, z, zp) == doctest::Approx(0.0).epsilon(1e-15));

    CHECK(loss->meta().L == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(loss->meta().beta == doctest::Approx(68.0).epsilon(1e-12));
    CHECK(loss->meta().range_unit);
    CHECK_FALSE(loss->meta().convex);
    CHECK_THROWS_AS(mee_loss(0.0, 1.0, 1.0, 1.0, 2), std::invalid_argument);

    Rng rng({21, 0});
    for (int i = 0; i < 10000; ++i) {
        const double v = loss->value(loss->sample_param(rng), loss->sample_example(rng),
                                     loss->sample_example(rng));
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("synthetic convex loss branch values and smooth seams") {
    const LossPtr loss = synthetic_convex_loss(1.0, 1.0, 6, 2);
    const Example pos = ex({1.0, 0.0}, 1.0);
    const Example neg = ex({-1.0, 0.0}, -1.0);

    CHECK(loss->value(Param::vector({1.0, 0.0}), pos, pos) == doctest::Approx(0.0));
    CHECK(loss->value(Param::vector({-1.0, 0.0}), pos, pos) == doctest::Approx(0.875).epsilon(1e-14));
    CHECK(loss->value(loss->zero_param(), pos, neg) == doctest::Approx(0.375).epsilon(1e-14));
    CHECK(loss->value(loss->zero_param(), neg, pos) == doctest::Approx(0.375).epsilon(1e-14));
    CHECK_THROWS_AS(synthetic_convex_loss(1.0, -1.0, 6, 2), std::invalid_argument);

    // continuity and C^1 match across both seams of the positive well: both
    // branches Taylor-extrapolated to the seam must agree to 1e-8
    const double beta = 1.0;
    const double h = 1e-4;
    for (double seam : {0.5, 1.5}) {
        const Param lo = Param::vector({seam - h, 0.0});
        const Param hi = Param::vector({seam + h, 0.0});
        const double v_lo = loss->value(lo, pos, pos);
        const double v_hi = loss->value(hi, pos, pos);
        const double s_lo = loss->grad(lo, pos, pos)[0];
        const double s_hi = loss->grad(hi, pos, pos)[0];
        // value extrapolation carries at most (beta/2) h^2 curvature error
        CHECK(std::abs((v_lo + h * s_lo) - (v_hi - h * s_hi)) <= beta * h * h + 1e-12);
        // slopes are linear or constant per branch, so extrapolation is exact
        const bool lo_quadratic = std::abs((seam - h) - 1.0) <= 0.5;
        const bool hi_quadratic = std::abs((seam + h) - 1.0) <= 0.5;
        const double seam_slope_lo = s_lo + (lo_quadratic ? beta * h : 0.0);
        const double seam_slope_hi = s_hi - (hi_quadratic ? beta * h : 0.0);
        CHECK(std::abs(seam_slope_lo - seam_slope_hi) <= 1e-8);
    }
}

TEST_CASE("synthetic strongly convex loss values") {
    const LossPtr loss = synthetic_strongly_convex_loss(1.0, 1.0, 3);
    const Example pos = ex({1.0, 0.0, 0.0}, 1.0);
    const Example neg = ex({-1.0, 0.0, 0.0}, -1.0);
    CHECK(loss->value(Param::vector({1.0, 0.0, 0.0}), pos, pos) == doctest::Approx(0.0));
    CHECK(loss->value(loss->zero_param(), pos, pos) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(loss->value(loss->zero_param(), pos, neg) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(loss->meta().gamma == doctest::Approx(loss->meta().beta));
}

TEST_CASE("finite-difference audit passes for the catalogue and catches corruption") {
    const std::vector<LossPtr> catalogue = {
        auc_squared_loss(2.0, 1.0, 2),      metric_logistic_loss(2.0, 1.0, 3),
        mee_loss(1.0, 1.0, 1.0, 1.0, 2),    synthetic_convex_loss(1.0, 1.0, 6, 2),
        synthetic_strongly_convex_loss(1.0, 1.0, 2),
    };
    std::uint64_t seed = 31;
    for (const LossPtr& loss : catalogue)
        CHECK(check_gradient(*loss, 100, 1e-5, {seed++, 0}) <= 1e-5);
    // quadratic loss: central differences are essentially exact
    CHECK(check_gradient(*catalogue[0], 100, 1e-5, {36, 0}) <= 1e-6);

    const testing::CorruptedGradientLoss corrupted(auc_squared_loss(2.0, 1.0, 2), 0.5);
    CHECK(check_gradient(corrupted, 100, 1e-5, {77, 0}) > 1e-2);

    CHECK_THROWS_AS(check_gradient(*catalogue[0], 100, 1e-2, {1, 0}), std::invalid_argument);
}

TEST_CASE("empirical constants stay inside the certified envelopes") {
    const EmpiricalConstants auc = certify_constants(*auc_squared_loss(2.0, 1.0, 2), 10000, {41, 0});
    CHECK(auc.L_hat <= 14.0);
    CHECK(auc.beta_hat <= 10.0);
    CHECK(auc.gamma_hat >= 2.0 - 1e-9);

    const EmpiricalConstants metric =
        certify_constants(*metric_logistic_loss(2.0, 1.0, 3), 10000, {43, 0});
    CHECK(metric.L_hat <= 16.0);
    CHECK(metric.beta_hat <= 64.0);

    const EmpiricalConstants mee = certify_constants(*mee_loss(1.0, 1.0, 1.0, 1.0, 2), 10000, {47, 0});
    CHECK(mee.L_hat <= 8.0);
    CHECK(mee.beta_hat <= 68.0);

    CHECK_THROWS_AS(certify_constants(*auc_squared_loss(2.0, 1.0, 2), 50, {1, 0}),
                    std::invalid_argument);
}

TEST_CASE("sampled lipschitz/smoothness/monotonicity envelopes hold") {
    check_envelopes(*auc_squared_loss(2.0, 1.0, 2), 10000, 51);
    check_envelopes(*metric_logistic_loss(2.0, 1.0, 3), 10000, 53);
    check_envelopes(*mee_loss(1.0, 1.0, 1.0, 1.0, 2), 10000, 57);
    check_envelopes(*synthetic_convex_loss(1.0, 1.0, 6, 2), 10000, 59);
    check_envelopes(*synthetic_strongly_convex_loss(1.0, 1.0, 2), 10000, 61);
}

TEST_CASE("symmetrized wrapper adds both orders") {
    const LossPtr base = auc_squared_loss(2.0, 1.0, 2);
    const LossPtr sym = symmetrized(base);
    Rng rng({63, 0});
    for (int i = 0; i < 100; ++i) {
        const Example z = sym->sample_example(rng);
        const Example zp = sym->sample_example(rng);
        const Param w = sym->sample_param(rng);
        CHECK(sym->value(w, z, zp) ==
              doctest::Approx(base->value(w, z, zp) + base->value(w, zp, z)).epsilon(1e-12));
        CHECK(sym->value(w, z, zp) == doctest::Approx(sym->value(w, zp, z)).epsilon(1e-12));
    }
}
