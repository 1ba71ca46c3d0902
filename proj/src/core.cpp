#include "pairstab/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace pairstab {

NumericalOverflow::NumericalOverflow(long step, double param_norm)
    : std::runtime_error("non-finite SGD iterate at step " + std::to_string(step) +
                         " (||w|| = " + std::to_string(param_norm) + ")"),
      step_(step),
      param_norm_(param_norm) {}

// ---------------------------------------------------------------------------
// Rng
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a + kGolden + (b << 1 | 1));
}

}  // namespace

SeedSpec derive_seed(const SeedSpec& s, std::uint64_t a, std::uint64_t b) {
    return SeedSpec{s.master_seed, combine(combine(s.stream_id, a), b)};
}

Rng::Rng(SeedSpec spec) : spec_(spec) {
    key_ = combine(mix64(spec.master_seed ^ 0x5851f42d4c957f2dULL), spec.stream_id);
}

std::uint64_t Rng::next_u64() {
    ++counter_;
    return mix64(key_ + kGolden * counter_);
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_gaussian() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    const std::uint64_t bucket = std::numeric_limits<std::uint64_t>::max() / n;
    const std::uint64_t limit = bucket * n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v / bucket;
}

Rng Rng::split(std::uint64_t child_id) const {
    return Rng(derive_seed(spec_, child_id));
}

// ---------------------------------------------------------------------------
// Param
// ---------------------------------------------------------------------------

Param Param::zeros(ParamShape shape, int dim) {
    if (dim <= 0) throw std::invalid_argument("Param: dimension must be positive");
    Param p;
    p.shape_ = shape;
    p.dim_ = dim;
    p.v_.assign(shape == ParamShape::Vector ? static_cast<std::size_t>(dim)
                                            : static_cast<std::size_t>(dim) * dim,
                0.0);
    return p;
}

Param Param::vector(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("Param: empty vector");
    Param p;
    p.shape_ = ParamShape::Vector;
    p.dim_ = static_cast<int>(values.size());
    p.v_ = std::move(values);
    return p;
}

Param Param::symmetric_matrix(int dim, std::vector<double> flat) {
    if (dim <= 0 || flat.size() != static_cast<std::size_t>(dim) * dim)
        throw std::invalid_argument("Param: flat data must have dim^2 entries");
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
            if (flat[static_cast<std::size_t>(i) * dim + j] !=
                flat[static_cast<std::size_t>(j) * dim + i])
                throw std::invalid_argument("Param: matrix data is not symmetric");
    Param p;
    p.shape_ = ParamShape::SymmetricMatrix;
    p.dim_ = dim;
    p.v_ = std::move(flat);
    return p;
}

double Param::norm() const {
    double s = 0.0;
    for (double x : v_) s += x * x;
    return std::sqrt(s);
}

double Param::dot(const Param& other) const {
    if (v_.size() != other.v_.size())
        throw std::invalid_argument("Param::dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < v_.size(); ++i) s += v_[i] * other.v_[i];
    return s;
}

void Param::add_scaled(const Param& x, double a) {
    if (v_.size() != x.v_.size())
        throw std::invalid_argument("Param::add_scaled: size mismatch");
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * x.v_[i];
}

void Param::scale(double a) {
    for (double& x : v_) x *= a;
}

void Param::set_zero() {
    std::fill(v_.begin(), v_.end(), 0.0);
}

bool Param::all_finite() const {
    for (double x : v_)
        if (!std::isfinite(x)) return false;
    return true;
}

double distance(const Param& a, const Param& b) {
    if (a.size() != b.size()) throw std::invalid_argument("distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

namespace {

double vec_norm(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

}  // namespace

Dataset::Dataset(std::vector<Example> examples, double feature_bound, double label_bound)
    : examples_(std::move(examples)), feature_bound_(feature_bound), label_bound_(label_bound) {
    if (examples_.size() < 2) throw std::invalid_argument("Dataset: need n >= 2 examples");
    if (feature_bound_ <= 0 || label_bound_ <= 0)
        throw std::invalid_argument("Dataset: bounds must be positive");
    const std::size_t d = examples_[0].x.size();
    for (const Example& e : examples_) {
        if (e.x.size() != d) throw std::invalid_argument("Dataset: inconsistent feature dimension");
        if (vec_norm(e.x) > feature_bound_ * (1.0 + 1e-12))
            throw std::invalid_argument("Dataset: feature norm exceeds the bound");
        if (std::abs(e.y) > label_bound_ * (1.0 + 1e-12))
            throw std::invalid_argument("Dataset: label magnitude exceeds the bound");
    }
}

Dataset Dataset::with_replaced(int index, Example replacement) const {
    if (index < 0 || index >= size())
        throw std::invalid_argument("Dataset::with_replaced: index out of range");
    std::vector<Example> ex = examples_;
    ex[static_cast<std::size_t>(index)] = std::move(replacement);
    return Dataset(std::move(ex), feature_bound_, label_bound_);
}

// ---------------------------------------------------------------------------
// Domain and projection
// ---------------------------------------------------------------------------

Domain Domain::unconstrained() { return Domain{Kind::Unconstrained, 0.0}; }

Domain Domain::euclidean_ball(double r0) {
    if (r0 <= 0) throw std::invalid_argument("Domain: radius must be positive");
    return Domain{Kind::EuclideanBall, r0};
}

Domain Domain::psd_frobenius_ball(double r0) {
    if (r0 <= 0) throw std::invalid_argument("Domain: radius must be positive");
    return Domain{Kind::PsdFrobeniusBall, r0};
}

double Domain::diameter() const {
    return kind == Kind::Unconstrained ? std::numeric_limits<double>::infinity() : 2.0 * radius;
}

namespace {

using EMatrix = Eigen::MatrixXd;

EMatrix to_matrix(const Param& w) {
    const int d = w.dim();
    EMatrix m(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = w.matrix_at(i, j);
    return m;
}

Param from_matrix(const EMatrix& m) {
    const int d = static_cast<int>(m.rows());
    std::vector<double> flat(static_cast<std::size_t>(d) * d);
    // symmetrize away round-off from the eigen reconstruction
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            flat[static_cast<std::size_t>(i) * d + j] = 0.5 * (m(i, j) + m(j, i));
    return Param::symmetric_matrix(d, std::move(flat));
}

double min_eigenvalue(const Param& w) {
    Eigen::SelfAdjointEigenSolver<EMatrix> es(to_matrix(w), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

EMatrix psd_clamp(const EMatrix& m) {
    Eigen::SelfAdjointEigenSolver<EMatrix> es(m);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

EMatrix frobenius_ball_project(const EMatrix& m, double r0) {
    const double f = m.norm();
    return f <= r0 ? m : EMatrix(m * (r0 / f));
}

}  // namespace

bool Domain::contains(const Param& w) const {
    switch (kind) {
        case Kind::Unconstrained:
            return true;
        case Kind::EuclideanBall:
            return w.norm() <= radius + 1e-12;
        case Kind::PsdFrobeniusBall:
            if (w.shape() != ParamShape::SymmetricMatrix) return false;
            return w.norm() <= radius + 1e-12 && min_eigenvalue(w) >= -1e-10;
    }
    return false;
}

Param project(const Param& w, const Domain& dom, PsdProjectionMode mode) {
    if (!w.all_finite()) throw std::invalid_argument("project: non-finite parameter");
    switch (dom.kind) {
        case Domain::Kind::Unconstrained:
            return w;
        case Domain::Kind::EuclideanBall: {
            const double norm = w.norm();
            if (norm <= dom.radius) return w;
            Param out = w;
            out.scale(dom.radius / norm);
            // guard against the scaled norm landing one ulp outside, which
            // would break exact idempotence
            while (out.norm() > dom.radius) out.scale(dom.radius / out.norm());
            return out;
        }
        case Domain::Kind::PsdFrobeniusBall: {
            if (w.shape() != ParamShape::SymmetricMatrix)
                throw std::invalid_argument("project: PSD domain needs a symmetric matrix parameter");
            if (mode == PsdProjectionMode::ClampThenRescale) {
                return from_matrix(frobenius_ball_project(psd_clamp(to_matrix(w)), dom.radius));
            }
            // When projecting onto one of the two sets already lands in the
            // intersection, that point is the exact projection onto the
            // intersection (the constrained minimizer lies in the subset).
            {
                const EMatrix clamped = psd_clamp(to_matrix(w));
                if (clamped.norm() <= dom.radius) return from_matrix(clamped);
                const EMatrix shrunk = frobenius_ball_project(to_matrix(w), dom.radius);
                Eigen::SelfAdjointEigenSolver<EMatrix> es(shrunk, Eigen::EigenvaluesOnly);
                if (es.eigenvalues().minCoeff() >= 0.0) return from_matrix(shrunk);
            }
            // Dykstra on the two convex sets; the correction terms make the
            // limit the exact Euclidean projection onto the intersection.
            EMatrix x = to_matrix(w);
            EMatrix p = EMatrix::Zero(x.rows(), x.cols());
            EMatrix q = EMatrix::Zero(x.rows(), x.cols());
            for (int sweep = 0; sweep < 500; ++sweep) {
                const EMatrix y = psd_clamp(x + p);
                const EMatrix p_next = x + p - y;
                const EMatrix x_next = frobenius_ball_project(y + q, dom.radius);
                const EMatrix q_next = y + q - x_next;
                const double change = (x_next - x).norm() + (p_next - p).norm() + (q_next - q).norm();
                x = x_next;
                p = p_next;
                q = q_next;
                if (change < 1e-10) break;
            }
            return from_matrix(x);
        }
    }
    throw std::logic_error("project: unknown domain kind");
}

// ---------------------------------------------------------------------------
// StepSchedule
// ---------------------------------------------------------------------------

StepSchedule StepSchedule::constant(double alpha) {
    if (alpha <= 0) throw std::invalid_argument("StepSchedule: alpha must be positive");
    StepSchedule s;
    s.kind_ = Kind::Constant;
    s.c_ = alpha;
    return s;
}

StepSchedule StepSchedule::power(double c, double a) {
    if (c <= 0) throw std::invalid_argument("StepSchedule: c must be positive");
    if (a <= 0 || a > 1) throw std::invalid_argument("StepSchedule: power exponent needs a in (0, 1]");
    StepSchedule s;
    s.kind_ = Kind::Power;
    s.c_ = c;
    s.a_ = a;
    return s;
}

StepSchedule StepSchedule::staircase_strong(double gamma) {
    if (gamma <= 0) throw std::invalid_argument("StepSchedule: gamma must be positive");
    StepSchedule s;
    s.kind_ = Kind::StaircaseStrong;
    s.gamma_ = gamma;
    return s;
}

StepSchedule StepSchedule::constant_horizon(double c, double a, long horizon) {
    if (c <= 0) throw std::invalid_argument("StepSchedule: c must be positive");
    if (a < 0 || a >= 1) throw std::invalid_argument("StepSchedule: horizon exponent needs a in [0, 1)");
    if (horizon < 1) throw std::invalid_argument("StepSchedule: horizon must be >= 1");
    StepSchedule s;
    s.kind_ = Kind::ConstantHorizon;
    s.c_ = c;
    s.a_ = a;
    s.horizon_ = horizon;
    return s;
}

double StepSchedule::operator()(long t) const {
    if (t < 1) throw std::invalid_argument("StepSchedule: t must be >= 1");
    switch (kind_) {
        case Kind::Constant:
            return c_;
        case Kind::Power:
            return c_ / std::pow(static_cast<double>(t), a_);
        case Kind::StaircaseStrong:
            return 2.0 / (gamma_ * static_cast<double>(t));
        case Kind::ConstantHorizon:
            return c_ / std::pow(static_cast<double>(horizon_), a_);
    }
    throw std::logic_error("StepSchedule: unknown kind");
}

// ---------------------------------------------------------------------------
// Samplers and dataset generation
// ---------------------------------------------------------------------------

namespace {

// Deterministic rescaling into the feature ball (no rejection sampling).
void rescale_into_ball(std::vector<double>& x, double B1) {
    const double norm = vec_norm(x);
    const double f = std::max(1.0, norm / B1);
    for (double& v : x) v /= f;
}

std::vector<double> gaussian_features(Rng& rng, int dim, double B1) {
    // sigma chosen so typical samples land well inside the ball
    const double sigma = B1 / (2.0 * std::sqrt(static_cast<double>(dim)));
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (double& v : x) v = sigma * rng.next_gaussian();
    rescale_into_ball(x, B1);
    return x;
}

}  // namespace

GaussianClassificationSampler::GaussianClassificationSampler(int dim, double B1,
                                                             double positive_prob)
    : dim_(dim), B1_(B1), positive_prob_(positive_prob) {
    if (dim <= 0) throw std::invalid_argument("sampler: dimension must be positive");
    if (B1 <= 0) throw std::invalid_argument("sampler: B1 must be positive");
    if (positive_prob <= 0 || positive_prob >= 1)
        throw std::invalid_argument("sampler: positive-class probability must be in (0, 1)");
}

Example GaussianClassificationSampler::sample(Rng& rng) const {
    Example e;
    e.x = gaussian_features(rng, dim_, B1_);
    e.y = rng.next_double() < positive_prob_ ? 1.0 : -1.0;
    return e;
}

LinearRegressionSampler::LinearRegressionSampler(int dim, double B1, double B2,
                                                 double noise_sigma, std::vector<double> true_w)
    : dim_(dim), B1_(B1), B2_(B2), noise_sigma_(noise_sigma), true_w_(std::move(true_w)) {
    if (dim <= 0) throw std::invalid_argument("sampler: dimension must be positive");
    if (B1 <= 0 || B2 <= 0) throw std::invalid_argument("sampler: bounds must be positive");
    if (noise_sigma < 0) throw std::invalid_argument("sampler: noise sigma must be >= 0");
    if (true_w_.size() != static_cast<std::size_t>(dim))
        throw std::invalid_argument("sampler: true_w dimension mismatch");
}

Example LinearRegressionSampler::sample(Rng& rng) const {
    Example e;
    e.x = gaussian_features(rng, dim_, B1_);
    double y = noise_sigma_ * rng.next_gaussian();
    for (int i = 0; i < dim_; ++i) y += true_w_[static_cast<std::size_t>(i)] * e.x[static_cast<std::size_t>(i)];
    e.y = std::clamp(y, -B2_, B2_);
    return e;
}

Dataset generate_dataset(const ExampleSampler& sampler, int n, SeedSpec seed) {
    if (n < 2) throw std::invalid_argument("generate_dataset: need n >= 2");
    Rng rng(seed);
    const double B1 = sampler.feature_bound();
    const double B2 = sampler.label_bound();
    std::vector<Example> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Example e = sampler.sample(rng);
        rescale_into_ball(e.x, B1);
        e.y = std::clamp(e.y, -B2, B2);
        out.push_back(std::move(e));
    }
    return Dataset(std::move(out), B1, B2);
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

int worker_count() {
    if (const char* env = std::getenv("PAIRSTAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(long count, const std::function<void(long)>& fn) {
    if (count <= 0) return;
    const int workers = static_cast<int>(std::min<long>(worker_count(), count));
    if (workers <= 1) {
        for (long i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace pairstab
