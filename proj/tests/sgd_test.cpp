#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "pairstab/sgd.hpp"
#include "test_support.hpp"

using namespace pairstab;

namespace {

Dataset auc_dataset(int n, std::uint64_t seed) {
    const GaussianClassificationSampler gauss(2, 1.0, 0.5);
    return generate_dataset(gauss, n, {seed, 0});
}

}  // namespace

TEST_CASE("permutation paths are back-to-back permutations") {
    const IndexPath path = make_path(SamplingRule::RandomPermutation, 3, 6, {1, 1});
    REQUIRE(path.xi.size() == 6);
    for (int block = 0; block < 2; ++block) {
        std::set<int> seen(path.xi.begin() + 3 * block, path.xi.begin() + 3 * (block + 1));
        CHECK(seen == std::set<int>{0, 1, 2});
    }
    // truncated final block is a prefix of a permutation (all distinct)
    const IndexPath trunc = make_path(SamplingRule::RandomPermutation, 4, 10, {2, 1});
    std::set<int> tail(trunc.xi.begin() + 8, trunc.xi.end());
    CHECK(tail.size() == 2);
}

TEST_CASE("selection paths have near-uniform frequencies") {
    const long T = 10000;
    const IndexPath path = make_path(SamplingRule::RandomSelection, 3, T, {3, 1});
    std::map<int, long> counts;
    for (int v : path.xi) counts[v]++;
    const double expected = static_cast<double>(T) / 3.0;
    const double sigma = std::sqrt(T * (1.0 / 3.0) * (2.0 / 3.0));
    for (int i = 0; i < 3; ++i)
        CHECK(std::abs(static_cast<double>(counts[i]) - expected) <= 3.0 * sigma);
}

TEST_CASE("paths are deterministic, data-independent, and validated") {
    const IndexPath a = make_path(SamplingRule::RandomSelection, 5, 100, {9, 9});
    const IndexPath b = make_path(SamplingRule::RandomSelection, 5, 100, {9, 9});
    CHECK(a.xi == b.xi);
    CHECK_THROWS_AS(make_path(SamplingRule::RandomSelection, 5, 1, {9, 9}), std::invalid_argument);
    CHECK_THROWS_AS(make_path(SamplingRule::RandomSelection, 1, 10, {9, 9}), std::invalid_argument);
}

TEST_CASE("update matches a hand-unrolled recursion on a quadratic loss") {
    // n = 2, T = 3, AUC squared loss (quadratic in w), explicit arithmetic
    const LossPtr loss = auc_squared_loss(2.0, 1.0, 2);
    std::vector<Example> ex = {{{0.5, 0.2}, 1.0}, {{-0.3, 0.4}, -1.0}};
    const Dataset data(ex, 1.0, 1.0);
    const SeedSpec seed{123, 5};
    const long T = 3;
    const StepSchedule sched = StepSchedule::constant(0.05);
    const IndexPath path = make_path(SamplingRule::RandomSelection, 2, T, seed);

    auto grad_at = [&](const std::vector<double>& w, const Example& z, const Example& zp) {
        std::vector<double> g(2, 0.0);
        if (z.y > 0 && zp.y < 0) {
            const double s0 = z.x[0] - zp.x[0];
            const double s1 = z.x[1] - zp.x[1];
            const double margin = 1.0 - (s0 * w[0] + s1 * w[1]);
            g[0] += -2.0 * margin * s0;
            g[1] += -2.0 * margin * s1;
        }
        g[0] += 2.0 * w[0];
        g[1] += 2.0 * w[1];
        return g;
    };

    // w2 = w1 - alpha_1 * grad(w1; xi_2, xi_1)
    std::vector<double> w = {0.0, 0.0};
    auto g = grad_at(w, data[path.xi[1]], data[path.xi[0]]);
    w[0] -= 0.05 * g[0];
    w[1] -= 0.05 * g[1];
    // w3 = w2 - (alpha_2 / 2) * (grad(w2; xi_3, xi_1) + grad(w2; xi_3, xi_2))
    auto g1 = grad_at(w, data[path.xi[2]], data[path.xi[0]]);
    auto g2 = grad_at(w, data[path.xi[2]], data[path.xi[1]]);
    w[0] -= 0.05 * 0.5 * (g1[0] + g2[0]);
    w[1] -= 0.05 * 0.5 * (g1[1] + g2[1]);

    RunOptions opt;
    opt.projected = false;
    const Trajectory traj = run_sgd(data, *loss, sched, SamplingRule::RandomSelection, T, seed, opt);
    CHECK(traj.last[0] == doctest::Approx(w[0]).epsilon(1e-12));
    CHECK(traj.last[1] == doctest::Approx(w[1]).epsilon(1e-12));
}

TEST_CASE("zero-gradient and contraction fixtures") {
    const testing::ConstantLoss constant(0.7, 2);
    const Dataset data = auc_dataset(4, 11);
    const IndexPath path = make_path(SamplingRule::RandomSelection, 4, 10, {4, 2});
    const Param w = Param::vector({0.4, -0.2});
    for (long t = 2; t <= 10; ++t) {
        const Param next = sgd_step(w, t, data, path, constant, StepSchedule::constant(0.3), false);
        CHECK(testing::params_equal(next, w));
    }

    // pair-independent quadratic: G_t(w) = (1 - alpha) w for every t
    const testing::QuadraticParamLoss quad(2, {0.0, 0.0});
    for (long t = 2; t <= 10; ++t) {
        const Param next = sgd_step(w, t, data, path, quad, StepSchedule::constant(0.1), false);
        CHECK(next[0] == doctest::Approx(0.9 * w[0]).epsilon(1e-14));
        CHECK(next[1] == doctest::Approx(0.9 * w[1]).epsilon(1e-14));
    }
}

TEST_CASE("step gradient equals the mean of single-pair gradients") {
    const LossPtr loss = metric_logistic_loss(1.0, 1.0, 2);
    const Dataset data = auc_dataset(6, 13);
    const long T = 12;
    const IndexPath path = make_path(SamplingRule::RandomPermutation, 6, T, {6, 3});
    Rng rng({91, 0});
    const Param w = loss->sample_param(rng);
    for (long t : {2L, 5L, 12L}) {
        const StepSchedule sched = StepSchedule::constant(0.01);
        const Param next = sgd_step(w, t, data, path, *loss, sched, false);
        Param mean = loss->zero_param();
        for (long j = 0; j < t - 1; ++j) {
            const Param g = loss->grad(w, data[path.xi[t - 1]], data[path.xi[j]]);
            mean.add_scaled(g, 1.0 / static_cast<double>(t - 1));
        }
        Param expected = w;
        expected.add_scaled(mean, -0.01);
        CHECK(distance(next, expected) <= 1e-12);
    }
}

TEST_CASE("run outputs: averaging, determinism, projection") {
    const LossPtr loss = auc_squared_loss(2.0, 1.0, 2);
    const Dataset data = auc_dataset(8, 17);
    const StepSchedule sched = StepSchedule::power(0.05, 0.5);

    // T = 2: average = (w1 + w2)/2 = last/2
    const Trajectory short_run =
        run_sgd(data, *loss, sched, SamplingRule::RandomSelection, 2, {21, 4});
    CHECK(short_run.average[0] == doctest::Approx(short_run.last[0] / 2).epsilon(1e-15));
    CHECK(short_run.average[1] == doctest::Approx(short_run.last[1] / 2).epsilon(1e-15));

    const Trajectory a = run_sgd(data, *loss, sched, SamplingRule::RandomPermutation, 60, {22, 9});
    const Trajectory b = run_sgd(data, *loss, sched, SamplingRule::RandomPermutation, 60, {22, 9});
    CHECK(testing::params_equal(a.last, b.last));
    CHECK(testing::params_equal(a.average, b.average));

    RunOptions opt;
    opt.store_full = true;
    const Trajectory full = run_sgd(data, *loss, sched, SamplingRule::RandomSelection, 40, {23, 1}, opt);
    REQUIRE(full.iterates.size() == 40);
    CHECK(full.iterates[0].norm() == 0.0);
    Param mean = loss->zero_param();
    for (const Param& w : full.iterates) mean.add_scaled(w, 1.0 / 40.0);
    CHECK(distance(mean, full.average) <= 1e-12);
    for (const Param& w : full.iterates) CHECK(loss->domain().contains(w));
    CHECK(testing::params_equal(full.iterates.back(), full.last));
}

TEST_CASE("same path seed on different datasets of equal size") {
    const Dataset d1 = auc_dataset(7, 31);
    const Dataset d2 = auc_dataset(7, 37);
    const IndexPath p1 = make_path(SamplingRule::RandomPermutation, d1.size(), 30, {55, 1});
    const IndexPath p2 = make_path(SamplingRule::RandomPermutation, d2.size(), 30, {55, 1});
    CHECK(p1.xi == p2.xi);
    // but the trajectories differ through the data
    const LossPtr loss = auc_squared_loss(2.0, 1.0, 2);
    const StepSchedule sched = StepSchedule::constant(0.05);
    const Trajectory t1 = run_sgd(d1, *loss, sched, SamplingRule::RandomPermutation, 30, {55, 1});
    const Trajectory t2 = run_sgd(d2, *loss, sched, SamplingRule::RandomPermutation, 30, {55, 1});
    CHECK_FALSE(testing::params_equal(t1.last, t2.last));
}

TEST_CASE("diverging unprojected run raises a structured overflow") {
    const LossPtr loss = auc_squared_loss(2.0, 1.0, 2);
    const Dataset data = auc_dataset(6, 41);
    RunOptions opt;
    opt.projected = false;
    CHECK_THROWS_AS(run_sgd(data, *loss, StepSchedule::constant(1e155), SamplingRule::RandomSelection,
                            40, {77, 7}, opt),
                    NumericalOverflow);
    try {
        run_sgd(data, *loss, StepSchedule::constant(1e155), SamplingRule::RandomSelection, 40,
                {77, 7}, opt);
    } catch (const NumericalOverflow& e) {
        CHECK(e.step() >= 2);
    }
}

TEST_CASE("reservoir approximation caps the per-step pairing work") {
    const LossPtr loss = auc_squared_loss(2.0, 1.0, 2);
    const Dataset data = auc_dataset(10, 47);
    const StepSchedule sched = StepSchedule::power(0.05, 0.5);
    RunOptions opt;
    opt.reservoir = 4;
    const Trajectory a = run_sgd(data, *loss, sched, SamplingRule::RandomSelection, 60, {30, 2}, opt);
    const Trajectory b = run_sgd(data, *loss, sched, SamplingRule::RandomSelection, 60, {30, 2}, opt);
    CHECK(testing::params_equal(a.last, b.last));  // deterministic
    const Trajectory exact = run_sgd(data, *loss, sched, SamplingRule::RandomSelection, 60, {30, 2});
    CHECK_FALSE(testing::params_equal(a.last, exact.last));  // a different estimator
    CHECK(loss->domain().contains(a.last));
    // while the reservoir covers every previous index, the update is exact
    RunOptions wide;
    wide.reservoir = 1000;
    const Trajectory c = run_sgd(data, *loss, sched, SamplingRule::RandomSelection, 60, {30, 2}, wide);
    CHECK(testing::params_equal(c.last, exact.last));
    RunOptions bad;
    bad.reservoir = -1;
    CHECK_THROWS_AS(run_sgd(data, *loss, sched, SamplingRule::RandomSelection, 10, {30, 2}, bad),
                    std::invalid_argument);
}

TEST_CASE("expansiveness probe respects the three regimes") {
    const Dataset data = auc_dataset(12, 43);
    const long T = 30;
    const SeedSpec path_seed{81, 3};

    // strongly convex + smooth, alpha <= 2/(beta+gamma)
    const LossPtr auc = auc_squared_loss(2.0, 1.0, 2);
    const double beta = auc->meta().beta;
    const double gamma = auc->meta().gamma;
    const double alpha_c = 2.0 / (beta + gamma);
    const IndexPath path = make_path(SamplingRule::RandomSelection, 12, T, path_seed);
    for (long t : {2L, 15L, 30L}) {
        const double ratio = expansiveness_probe(data, *auc, StepSchedule::constant(alpha_c), t,
                                                 path, 1000, {82, static_cast<std::uint64_t>(t)});
        CHECK(ratio <= 1.0 - beta * gamma * alpha_c / (beta + gamma) + 1e-9);
    }

    // convex + smooth, alpha <= 2/beta: 1-expansive
    const LossPtr metric = metric_logistic_loss(1.0, 1.0, 2);
    const GaussianClassificationSampler gauss2(2, 1.0, 0.5);
    const Dataset mdata = generate_dataset(gauss2, 12, {83, 0});
    const IndexPath mpath = make_path(SamplingRule::RandomSelection, 12, T, path_seed);
    const double alpha_b = 2.0 / metric->meta().beta;
    for (long t : {2L, 30L}) {
        const double ratio = expansiveness_probe(mdata, *metric, StepSchedule::constant(alpha_b), t,
                                                 mpath, 1000, {84, static_cast<std::uint64_t>(t)});
        CHECK(ratio <= 1.0 + 1e-9);
    }

    // smooth only: 1 + alpha beta, any alpha
    const LossPtr mee = mee_loss(1.0, 1.0, 1.0, 1.0, 2);
    const LinearRegressionSampler lin(2, 1.0, 1.0, 0.2, {0.6, -0.4});
    const Dataset rdata = generate_dataset(lin, 12, {85, 0});
    const IndexPath rpath = make_path(SamplingRule::RandomSelection, 12, T, path_seed);
    const double alpha_a = 0.5 / mee->meta().beta;
    const double ratio = expansiveness_probe(rdata, *mee, StepSchedule::constant(alpha_a), 20,
                                             rpath, 1000, {86, 0});
    CHECK(ratio <= 1.0 + alpha_a * mee->meta().beta + 1e-9);
}
