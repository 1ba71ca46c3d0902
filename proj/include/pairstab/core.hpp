#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pairstab {

// Thrown when an SGD trajectory produces a non-finite iterate. Carries the
// step index and the parameter norm at the point of failure so replicate
// drivers can report which run blew up.
class NumericalOverflow : public std::runtime_error {
public:
    NumericalOverflow(long step, double param_norm);
    long step() const { return step_; }
    double param_norm() const { return param_norm_; }

private:
    long step_;
    double param_norm_;
};

// Thrown by conditional estimators when no replicate survives the filter.
class InsufficientSamples : public std::runtime_error {
public:
    explicit InsufficientSamples(const std::string& what)
        : std::runtime_error(what) {}
};

// Thrown by bound evaluators when the requested formula is used outside the
// step-size regime it is valid in. The message names the violated inequality.
class PreconditionError : public std::invalid_argument {
public:
    explicit PreconditionError(const std::string& what)
        : std::invalid_argument(what) {}
};

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

// Identifies one pseudo-random stream. Identical (master_seed, stream_id)
// always reproduces the identical stream; parallel consumers get distinct
// stream_ids so they never share state.
struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
};

// Derives a child seed on the same master. Pure function of its inputs.
SeedSpec derive_seed(const SeedSpec& s, std::uint64_t a, std::uint64_t b = 0);

// Counter-based generator (splitmix-style output function over a keyed
// counter). State is just (key, counter), so splitting streams is cheap and
// the sequence for a given SeedSpec is platform-independent.
class Rng {
public:
    explicit Rng(SeedSpec spec);

    std::uint64_t next_u64();
    double next_double();    // uniform in [0, 1)
    double next_gaussian();  // standard normal, Box-Muller
    std::uint64_t next_below(std::uint64_t n);  // uniform in {0, ..., n-1}, unbiased

    Rng split(std::uint64_t child_id) const;
    const SeedSpec& spec() const { return spec_; }

private:
    SeedSpec spec_;
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

enum class ParamShape { Vector, SymmetricMatrix };

// Model parameter: either a d-vector or a symmetric d x d matrix stored as a
// flat row-major array of d^2 entries. For the matrix shape the flat layout
// makes the Frobenius norm and trace inner product coincide with the plain
// Euclidean norm/dot on the flat data, so the SGD engine never branches on
// the shape.
class Param {
public:
    Param() = default;

    static Param zeros(ParamShape shape, int dim);
    static Param vector(std::vector<double> values);
    // Validates symmetry of the flat d x d data.
    static Param symmetric_matrix(int dim, std::vector<double> flat);

    ParamShape shape() const { return shape_; }
    int dim() const { return dim_; }          // vector length or matrix side
    std::size_t size() const { return v_.size(); }  // flat length

    double operator[](std::size_t i) const { return v_[i]; }
    double& operator[](std::size_t i) { return v_[i]; }
    double matrix_at(int i, int j) const { return v_[static_cast<std::size_t>(i) * dim_ + j]; }
    const std::vector<double>& flat() const { return v_; }

    double norm() const;
    double dot(const Param& other) const;
    void add_scaled(const Param& x, double a);  // *this += a * x
    void scale(double a);
    void set_zero();
    bool all_finite() const;

private:
    ParamShape shape_ = ParamShape::Vector;
    int dim_ = 0;
    std::vector<double> v_;
};

double distance(const Param& a, const Param& b);

// ---------------------------------------------------------------------------
// Examples and datasets
// ---------------------------------------------------------------------------

struct Example {
    std::vector<double> x;
    double y = 0.0;
};

// Immutable sample of n examples with certified bounds: every feature vector
// satisfies ||x|| <= B1 and every label |y| <= B2 (checked at construction).
class Dataset {
public:
    Dataset(std::vector<Example> examples, double feature_bound, double label_bound);

    int size() const { return static_cast<int>(examples_.size()); }
    const Example& operator[](int i) const { return examples_[static_cast<std::size_t>(i)]; }
    int dim() const { return examples_.empty() ? 0 : static_cast<int>(examples_[0].x.size()); }
    double feature_bound() const { return feature_bound_; }
    double label_bound() const { return label_bound_; }
    const std::vector<Example>& examples() const { return examples_; }

    // Copy with the example at `index` (0-based) replaced.
    Dataset with_replaced(int index, Example replacement) const;

private:
    std::vector<Example> examples_;
    double feature_bound_;
    double label_bound_;
};

// ---------------------------------------------------------------------------
// Parameter domains and projection
// ---------------------------------------------------------------------------

struct Domain {
    enum class Kind { Unconstrained, EuclideanBall, PsdFrobeniusBall };

    Kind kind = Kind::Unconstrained;
    double radius = 0.0;  // r0 for the ball kinds

    static Domain unconstrained();
    static Domain euclidean_ball(double r0);
    static Domain psd_frobenius_ball(double r0);

    // |Omega| = 2 r0 for the ball kinds, +inf otherwise.
    double diameter() const;
    bool contains(const Param& w) const;
};

enum class PsdProjectionMode {
    // Eigenvalue clamp at zero, then rescale the Frobenius norm into the
    // ball. Feasible and cheap but not the exact Euclidean projection onto
    // the intersection.
    ClampThenRescale,
    // Dykstra's alternating projections onto {PSD} and {||.||_F <= r0};
    // converges to the exact Euclidean projection, hence non-expansive.
    Dykstra,
};

Param project(const Param& w, const Domain& dom,
              PsdProjectionMode mode = PsdProjectionMode::ClampThenRescale);

// ---------------------------------------------------------------------------
// Step-size schedules
// ---------------------------------------------------------------------------

class StepSchedule {
public:
    enum class Kind { Constant, Power, StaircaseStrong, ConstantHorizon };

    static StepSchedule constant(double alpha);
    // alpha_t = c / t^a, a in (0, 1]
    static StepSchedule power(double c, double a);
    // alpha_t = 2 / (gamma t)
    static StepSchedule staircase_strong(double gamma);
    // alpha_t = c / T^a for a fixed horizon T, a in [0, 1)
    static StepSchedule constant_horizon(double c, double a, long horizon);

    // alpha_t for t >= 1.
    double operator()(long t) const;

    Kind kind() const { return kind_; }
    double c() const { return c_; }
    double a() const { return a_; }
    double gamma() const { return gamma_; }
    long horizon() const { return horizon_; }

private:
    StepSchedule() = default;
    Kind kind_ = Kind::Constant;
    double c_ = 0.0;
    double a_ = 0.0;
    double gamma_ = 0.0;
    long horizon_ = 0;
};

// ---------------------------------------------------------------------------
// Synthetic data generators
// ---------------------------------------------------------------------------

// Source of i.i.d. examples. Implementations must be pure given the Rng and
// must report the bounds their samples respect (before the generic rescaling
// applied by generate_dataset).
class ExampleSampler {
public:
    virtual ~ExampleSampler() = default;
    virtual Example sample(Rng& rng) const = 0;
    virtual double feature_bound() const = 0;
    virtual double label_bound() const = 0;
    virtual int dim() const = 0;
};

// Binary labels +-1 with P(y = +1) = positive_prob; features gaussian,
// deterministically rescaled into the B1 ball.
class GaussianClassificationSampler : public ExampleSampler {
public:
    GaussianClassificationSampler(int dim, double B1, double positive_prob);
    Example sample(Rng& rng) const override;
    double feature_bound() const override { return B1_; }
    double label_bound() const override { return 1.0; }
    int dim() const override { return dim_; }

private:
    int dim_;
    double B1_;
    double positive_prob_;
};

// y = <true_w, x> + noise, clipped into [-B2, B2]; features as above.
class LinearRegressionSampler : public ExampleSampler {
public:
    LinearRegressionSampler(int dim, double B1, double B2, double noise_sigma,
                            std::vector<double> true_w);
    Example sample(Rng& rng) const override;
    double feature_bound() const override { return B1_; }
    double label_bound() const override { return B2_; }
    int dim() const override { return dim_; }

private:
    int dim_;
    double B1_;
    double B2_;
    double noise_sigma_;
    std::vector<double> true_w_;
};

// Draws n i.i.d. examples, rescales features into the B1 ball by dividing by
// max(1, ||x||/B1) and clips labels into [-B2, B2], so the Dataset invariants
// hold by construction. Deterministic given the seed.
Dataset generate_dataset(const ExampleSampler& sampler, int n, SeedSpec seed);

// ---------------------------------------------------------------------------
// Worker-pool helpers
// ---------------------------------------------------------------------------

// Worker cap: PAIRSTAB_THREADS if set (positive integer), else hardware
// concurrency.
int worker_count();

// Runs fn(i) for i in [0, count) on up to worker_count() threads. Each index
// is processed exactly once; callers must write results into per-index slots
// so aggregation stays deterministic. Exceptions are captured and the first
// one is rethrown after all workers join.
void parallel_for(long count, const std::function<void(long)>& fn);

}  // namespace pairstab
