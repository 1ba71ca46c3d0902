#include "pairstab/losses.hpp"

#include <algorithm>
#include <cmath>

namespace pairstab {

Param PairwiseLoss::grad(const Param& w, const Example& z, const Example& zp) const {
    Param g = zero_param();
    add_grad(w, z, zp, 1.0, g);
    return g;
}

namespace {

double diff_dot(const Example& z, const Example& zp, const Param& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.x.size(); ++i) s += (z.x[i] - zp.x[i]) * w[i];
    return s;
}

std::vector<double> ball_point(Rng& rng, int dim, double radius) {
    // uniform in the ball: gaussian direction, radius ~ r * u^(1/d)
    std::vector<double> x(static_cast<std::size_t>(dim));
    double norm2 = 0.0;
    for (double& v : x) {
        v = rng.next_gaussian();
        norm2 += v * v;
    }
    const double norm = std::sqrt(std::max(norm2, 1e-300));
    const double target = radius * std::pow(rng.next_double(), 1.0 / dim);
    for (double& v : x) v *= target / norm;
    return x;
}

Example binary_label_example(Rng& rng, int dim, double B1) {
    Example e;
    e.x = ball_point(rng, dim, B1);
    e.y = rng.next_double() < 0.5 ? 1.0 : -1.0;
    return e;
}

double sigmoid(double u) {
    return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

double softplus(double u) {
    return u >= 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

// -------------------------------------------------------------------------

class AucSquaredLoss final : public PairwiseLoss {
public:
    AucSquaredLoss(double mu, double B1, int dim)
        : PairwiseLoss(make_meta(mu, B1), Domain::euclidean_ball(std::sqrt(2.0 / mu)),
                       ParamShape::Vector, dim, B1, 1.0),
          mu_(mu),
          B1_(B1) {}

    double value(const Param& w, const Example& z, const Example& zp) const override {
        double v = 0.5 * mu_ * w.dot(w);
        if (z.y > 0 && zp.y < 0) {
            const double m = 1.0 - diff_dot(z, zp, w);
            v += m * m;
        }
        return v;
    }

    void add_grad(const Param& w, const Example& z, const Example& zp,
                  double scale, Param& acc) const override {
        if (z.y > 0 && zp.y < 0) {
            const double m = 1.0 - diff_dot(z, zp, w);
            const double f = -2.0 * m * scale;
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f * (z.x[i] - zp.x[i]);
        }
        const double mu_scale = mu_ * scale;
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += mu_scale * w[i];
    }

    Example sample_example(Rng& rng) const override {
        return binary_label_example(rng, dim_, B1_);
    }

private:
    static LossMeta make_meta(double mu, double B1) {
        if (mu <= 0) throw std::invalid_argument("auc_squared_loss: mu must be positive");
        if (B1 <= 0) throw std::invalid_argument("auc_squared_loss: B1 must be positive");
        const double r0 = std::sqrt(2.0 / mu);
        LossMeta m;
        m.L = 4.0 * B1 + 8.0 * B1 * B1 * r0 + std::sqrt(2.0 * mu);
        m.beta = 8.0 * B1 * B1 + mu;
        m.gamma = mu;
        m.rho = 1.0 + (1.0 + 2.0 * B1 * r0) * (1.0 + 2.0 * B1 * r0);
        // same-label pairs: grad = mu w = 0 at the origin; mixed pairs: the
        // stationary point 2s/(2||s||^2 + mu) has norm <= r0/2, so it is feasible
        m.b = 0.0;
        m.convex = true;
        return m;
    }

    double mu_;
    double B1_;
};

// -------------------------------------------------------------------------

class MetricLogisticLoss final : public PairwiseLoss {
public:
    MetricLogisticLoss(double B1, double r0, int dim)
        : PairwiseLoss(make_meta(B1, r0), Domain::psd_frobenius_ball(r0),
                       ParamShape::SymmetricMatrix, dim, B1, 1.0),
          B1_(B1) {}

    double value(const Param& w, const Example& z, const Example& zp) const override {
        check_shape(w);
        return softplus(signed_form(w, z, zp));
    }

    void add_grad(const Param& w, const Example& z, const Example& zp,
                  double scale, Param& acc) const override {
        check_shape(w);
        const double ind = z.y == zp.y ? 1.0 : -1.0;
        const double f = scale * ind * sigmoid(signed_form(w, z, zp));
        const int d = dim_;
        for (int i = 0; i < d; ++i) {
            const double si = z.x[static_cast<std::size_t>(i)] - zp.x[static_cast<std::size_t>(i)];
            for (int j = 0; j < d; ++j) {
                const double sj = z.x[static_cast<std::size_t>(j)] - zp.x[static_cast<std::size_t>(j)];
                acc[static_cast<std::size_t>(i) * d + j] += f * si * sj;
            }
        }
    }

    Example sample_example(Rng& rng) const override {
        return binary_label_example(rng, dim_, B1_);
    }

    Param sample_param(Rng& rng, double shrink) const override {
        // random PSD matrix with Frobenius norm uniform in (0, shrink * r0]
        const int d = dim_;
        std::vector<double> a(static_cast<std::size_t>(d) * d);
        for (double& v : a) v = rng.next_gaussian();
        std::vector<double> m(static_cast<std::size_t>(d) * d, 0.0);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int k = 0; k < d; ++k)
                    s += a[static_cast<std::size_t>(i) * d + k] * a[static_cast<std::size_t>(j) * d + k];
                m[static_cast<std::size_t>(i) * d + j] = s;
            }
        double fnorm = 0.0;
        for (double v : m) fnorm += v * v;
        fnorm = std::sqrt(std::max(fnorm, 1e-300));
        const double target = domain_.radius * shrink * rng.next_double();
        for (double& v : m) v *= target / fnorm;
        // exact symmetry for the Param invariant
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j)
                m[static_cast<std::size_t>(j) * d + i] = m[static_cast<std::size_t>(i) * d + j];
        return Param::symmetric_matrix(d, std::move(m));
    }

private:
    static LossMeta make_meta(double B1, double r0) {
        if (B1 <= 0 || r0 <= 0)
            throw std::invalid_argument("metric_logistic_loss: B1 and r0 must be positive");
        LossMeta m;
        m.L = 4.0 * B1 * B1;
        m.beta = 4.0 * B1 * B1 * B1 * B1;
        m.gamma = 0.0;
        m.rho = softplus(4.0 * B1 * B1 * r0);  // |<M, ss^T>| <= ||M||_F ||s||^2
        // ||grad||_F = sigmoid(u) ||s||^2; at M = 0 this is ||s||^2 / 2 <= 2 B1^2
        m.b = 2.0 * B1 * B1;
        m.convex = true;
        return m;
    }

    void check_shape(const Param& w) const {
        if (w.shape() != ParamShape::SymmetricMatrix || w.dim() != dim_)
            throw std::invalid_argument("metric_logistic_loss: parameter must be a symmetric matrix of the loss dimension");
    }

    double signed_form(const Param& w, const Example& z, const Example& zp) const {
        const double ind = z.y == zp.y ? 1.0 : -1.0;
        const int d = dim_;
        double q = 0.0;
        for (int i = 0; i < d; ++i) {
            const double si = z.x[static_cast<std::size_t>(i)] - zp.x[static_cast<std::size_t>(i)];
            double row = 0.0;
            for (int j = 0; j < d; ++j)
                row += w[static_cast<std::size_t>(i) * d + j] *
                       (z.x[static_cast<std::size_t>(j)] - zp.x[static_cast<std::size_t>(j)]);
            q += si * row;
        }
        return ind * q;
    }

    double B1_;
};

// -------------------------------------------------------------------------

class MeeLoss final : public PairwiseLoss {
public:
    MeeLoss(double h, double B1, double B2, double r0, int dim)
        : PairwiseLoss(make_meta(h, B1, B2, r0), Domain::euclidean_ball(r0),
                       ParamShape::Vector, dim, B1, B2),
          h2_(h * h),
          B1_(B1),
          B2_(B2) {}

    double value(const Param& w, const Example& z, const Example& zp) const override {
        const double resid = (z.y - zp.y) - diff_dot(z, zp, w);
        return -std::expm1(-resid * resid / (2.0 * h2_));
    }

    void add_grad(const Param& w, const Example& z, const Example& zp,
                  double scale, Param& acc) const override {
        const double resid = (z.y - zp.y) - diff_dot(z, zp, w);
        const double f = -scale * (resid / h2_) * std::exp(-resid * resid / (2.0 * h2_));
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f * (z.x[i] - zp.x[i]);
    }

    Example sample_example(Rng& rng) const override {
        Example e;
        e.x = ball_point(rng, dim_, B1_);
        e.y = B2_ * (2.0 * rng.next_double() - 1.0);
        return e;
    }

private:
    static LossMeta make_meta(double h, double B1, double B2, double r0) {
        if (h <= 0) throw std::invalid_argument("mee_loss: bandwidth h must be positive");
        if (B1 <= 0 || B2 <= 0 || r0 <= 0)
            throw std::invalid_argument("mee_loss: B1, B2, r0 must be positive");
        const double h2 = h * h;
        const double s = B1 * B1 * r0 + B1 * B2;
        LossMeta m;
        m.L = 4.0 / h2 * s;
        m.beta = 4.0 / h2 * B1 * B1 + 16.0 / (h2 * h2) * s * s;
        m.gamma = 0.0;
        m.rho = 1.0;
        // min_w ||grad|| <= ||s|| max_u (u/h^2) e^{-u^2/(2h^2)} = 2 B1 e^{-1/2} / h
        m.b = 2.0 * B1 * std::exp(-0.5) / h;
        m.range_unit = true;
        return m;
    }

    double h2_;
    double B1_;
    double B2_;
};

// -------------------------------------------------------------------------
// Piecewise construction losses. f(u; r, beta) is the scalar well with vertex
// at r: quadratic within |u - r| <= r/2, linear tails matched in value and
// slope at the seam.

double well_value(double u, double vertex, double beta) {
    const double q = u - vertex;
    const double half_width = 0.5 * std::abs(vertex);
    if (std::abs(q) <= half_width) return 0.5 * beta * q * q;
    return beta * half_width * std::abs(q) - 0.5 * beta * half_width * half_width;
}

double well_slope(double u, double vertex, double beta) {
    const double q = u - vertex;
    const double half_width = 0.5 * std::abs(vertex);
    if (std::abs(q) <= half_width) return beta * q;
    return q > 0 ? beta * half_width : -beta * half_width;
}

class SyntheticConvexLoss final : public PairwiseLoss {
public:
    SyntheticConvexLoss(double beta, double r, int n_construction, int dim)
        : PairwiseLoss(make_meta(beta, r, n_construction), Domain::euclidean_ball(2.0 * r),
                       ParamShape::Vector, dim, 1.0, 1.0),
          beta_(beta),
          r_(r) {}

    double value(const Param& w, const Example& z, const Example& zp) const override {
        const double f1 = well_value(w[0], r_, beta_);
        const double f2 = well_value(w[0], -r_, beta_);
        if (z.y > 0 && zp.y > 0) return f1;
        if (z.y < 0 && zp.y < 0) return f2;
        return 0.5 * (f1 + f2);
    }

    void add_grad(const Param& w, const Example& z, const Example& zp,
                  double scale, Param& acc) const override {
        double slope;
        if (z.y > 0 && zp.y > 0)
            slope = well_slope(w[0], r_, beta_);
        else if (z.y < 0 && zp.y < 0)
            slope = well_slope(w[0], -r_, beta_);
        else
            slope = 0.5 * (well_slope(w[0], r_, beta_) + well_slope(w[0], -r_, beta_));
        acc[0] += scale * slope;
    }

    Example sample_example(Rng& rng) const override {
        // canonical two-point features; the loss dispatches on labels only
        Example e;
        e.x.assign(static_cast<std::size_t>(dim_), 0.0);
        e.x[0] = rng.next_double() < 0.5 ? 1.0 : -1.0;
        e.y = rng.next_double() < 0.5 ? 1.0 : -1.0;
        return e;
    }

private:
    static LossMeta make_meta(double beta, double r, int n_construction) {
        if (beta <= 0 || r <= 0)
            throw std::invalid_argument("synthetic_convex_loss: beta and r must be positive");
        if (n_construction < 2)
            throw std::invalid_argument("synthetic_convex_loss: construction sample size must be >= 2");
        LossMeta m;
        m.L = 0.5 * beta * r;
        m.beta = beta;
        m.gamma = 0.0;
        // sup over the radius-2r ball: linear tail at u = -2r against the well at +r
        m.rho = well_value(-2.0 * r, r, beta);
        m.b = 0.0;  // each well's slope vanishes at its vertex, the mixed slope at 0
        m.convex = true;
        return m;
    }

    double beta_;
    double r_;
};

class SyntheticStronglyConvexLoss final : public PairwiseLoss {
public:
    SyntheticStronglyConvexLoss(double beta, double r, int dim)
        : PairwiseLoss(make_meta(beta, r), Domain::euclidean_ball(2.0 * r),
                       ParamShape::Vector, dim, 1.0, 1.0),
          beta_(beta),
          r_(r) {}

    double value(const Param& w, const Example& z, const Example& zp) const override {
        double tail = 0.0;
        for (std::size_t i = 1; i < w.size(); ++i) tail += w[i] * w[i];
        const double d1 = w[0] - r_;
        const double d2 = w[0] + r_;
        const double f1 = 0.5 * beta_ * (d1 * d1 + tail);
        const double f2 = 0.5 * beta_ * (d2 * d2 + tail);
        if (z.y > 0 && zp.y > 0) return f1;
        if (z.y < 0 && zp.y < 0) return f2;
        return 0.5 * (f1 + f2);
    }

    void add_grad(const Param& w, const Example& z, const Example& zp,
                  double scale, Param& acc) const override {
        double shift;  // gradient is beta * (w - shift * r * e1)
        if (z.y > 0 && zp.y > 0)
            shift = 1.0;
        else if (z.y < 0 && zp.y < 0)
            shift = -1.0;
        else
            shift = 0.0;
        const double f = scale * beta_;
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f * w[i];
        acc[0] -= f * shift * r_;
    }

    Example sample_example(Rng& rng) const override {
        Example e;
        e.x.assign(static_cast<std::size_t>(dim_), 0.0);
        e.x[0] = rng.next_double() < 0.5 ? 1.0 : -1.0;
        e.y = rng.next_double() < 0.5 ? 1.0 : -1.0;
        return e;
    }

private:
    static LossMeta make_meta(double beta, double r) {
        if (beta <= 0 || r <= 0)
            throw std::invalid_argument("synthetic_strongly_convex_loss: beta and r must be positive");
        LossMeta m;
        m.L = 3.0 * beta * r;  // ||beta (w -+ r e1)|| <= beta (2r + r) on the radius-2r ball
        m.beta = beta;
        m.gamma = beta;
        m.rho = 4.5 * beta * r * r;
        m.b = 0.0;
        m.convex = true;
        return m;
    }

    double beta_;
    double r_;
};

// -------------------------------------------------------------------------

class SymmetrizedLoss final : public PairwiseLoss {
public:
    explicit SymmetrizedLoss(LossPtr base)
        : PairwiseLoss(doubled_meta(base->meta()), base->domain(), base->param_shape(),
                       base->param_dim(), base->example_feature_bound(),
                       base->example_label_bound()),
          base_(std::move(base)) {}

    double value(const Param& w, const Example& z, const Example& zp) const override {
        return base_->value(w, z, zp) + base_->value(w, zp, z);
    }

    void add_grad(const Param& w, const Example& z, const Example& zp,
                  double scale, Param& acc) const override {
        base_->add_grad(w, z, zp, scale, acc);
        base_->add_grad(w, zp, z, scale, acc);
    }

    Example sample_example(Rng& rng) const override { return base_->sample_example(rng); }
    Param sample_param(Rng& rng, double shrink) const override {
        return base_->sample_param(rng, shrink);
    }

private:
    static LossMeta doubled_meta(LossMeta m) {
        m.L *= 2.0;
        m.beta *= 2.0;
        m.gamma *= 2.0;
        m.rho *= 2.0;
        m.b *= 2.0;
        m.range_unit = false;
        return m;
    }

    LossPtr base_;
};

}  // namespace

Param PairwiseLoss::sample_param(Rng& rng, double shrink) const {
    switch (domain_.kind) {
        case Domain::Kind::EuclideanBall:
            return Param::vector(ball_point(rng, dim_, domain_.radius * shrink));
        case Domain::Kind::Unconstrained:
            return Param::vector(ball_point(rng, dim_, shrink));
        case Domain::Kind::PsdFrobeniusBall:
            throw std::logic_error("sample_param: PSD losses must override the sampler");
    }
    throw std::logic_error("sample_param: unknown domain kind");
}

LossPtr auc_squared_loss(double mu, double B1, int dim) {
    if (dim <= 0) throw std::invalid_argument("auc_squared_loss: dim must be positive");
    return std::make_shared<AucSquaredLoss>(mu, B1, dim);
}

LossPtr metric_logistic_loss(double B1, double r0, int dim) {
    if (dim <= 0) throw std::invalid_argument("metric_logistic_loss: dim must be positive");
    return std::make_shared<MetricLogisticLoss>(B1, r0, dim);
}

LossPtr mee_loss(double h, double B1, double B2, double r0, int dim) {
    if (dim <= 0) throw std::invalid_argument("mee_loss: dim must be positive");
    return std::make_shared<MeeLoss>(h, B1, B2, r0, dim);
}

LossPtr synthetic_convex_loss(double beta, double r, int n_construction, int dim) {
    if (dim <= 0) throw std::invalid_argument("synthetic_convex_loss: dim must be positive");
    return std::make_shared<SyntheticConvexLoss>(beta, r, n_construction, dim);
}

LossPtr synthetic_strongly_convex_loss(double beta, double r, int dim) {
    if (dim <= 0) throw std::invalid_argument("synthetic_strongly_convex_loss: dim must be positive");
    return std::make_shared<SyntheticStronglyConvexLoss>(beta, r, dim);
}

LossPtr symmetrized(LossPtr base) {
    if (!base) throw std::invalid_argument("symmetrized: null loss");
    return std::make_shared<SymmetrizedLoss>(std::move(base));
}

double check_gradient(const PairwiseLoss& loss, int trials, double eps, SeedSpec seed) {
    if (trials < 1) throw std::invalid_argument("check_gradient: trials must be >= 1");
    if (eps < 1e-8 || eps > 1e-3)
        throw std::invalid_argument("check_gradient: eps must lie in [1e-8, 1e-3]");
    Rng rng(seed);
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        const Example z = loss.sample_example(rng);
        const Example zp = loss.sample_example(rng);
        Param w = loss.sample_param(rng, 0.9);
        const Param g = loss.grad(w, z, zp);
        double diff2 = 0.0;
        double fd2 = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            w[i] = saved + eps;
            const double up = loss.value(w, z, zp);
            w[i] = saved - eps;
            const double down = loss.value(w, z, zp);
            w[i] = saved;
            const double fd = (up - down) / (2.0 * eps);
            diff2 += (fd - g[i]) * (fd - g[i]);
            fd2 += fd * fd;
        }
        const double scale = std::max({1.0, std::sqrt(fd2), g.norm()});
        worst = std::max(worst, std::sqrt(diff2) / scale);
    }
    return worst;
}

EmpiricalConstants certify_constants(const PairwiseLoss& loss, int trials, SeedSpec seed) {
    if (trials < 100) throw std::invalid_argument("certify_constants: trials must be >= 100");
    Rng rng(seed);
    EmpiricalConstants out;
    out.gamma_hat = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < trials; ++trial) {
        const Example z = loss.sample_example(rng);
        const Example zp = loss.sample_example(rng);
        const Param w = loss.sample_param(rng);
        const Param wp = loss.sample_param(rng);
        const double dist_w = distance(w, wp);
        const Param g = loss.grad(w, z, zp);
        const Param gp = loss.grad(wp, z, zp);
        out.L_hat = std::max({out.L_hat, g.norm(), gp.norm()});
        if (dist_w < 1e-9) continue;  // degenerate pair, quotients unstable
        double gd2 = 0.0;
        double inner = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double dg = g[i] - gp[i];
            gd2 += dg * dg;
            inner += dg * (w[i] - wp[i]);
        }
        out.beta_hat = std::max(out.beta_hat, std::sqrt(gd2) / dist_w);
        out.gamma_hat = std::min(out.gamma_hat, inner / (dist_w * dist_w));
    }
    return out;
}

}  // namespace pairstab
