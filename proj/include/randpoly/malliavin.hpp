#pragma once

// Add-one-cost difference operators and Monte Carlo estimates of the
// Malliavin-Stein error terms for functionals of K_t.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "bodies.hpp"
#include "error.hpp"
#include "functionals.hpp"
#include "hull.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace randpoly {

using Functional = std::function<double(const Polytope&)>;
using VectorFunctional = std::function<std::vector<double>(const Polytope&)>;

struct DiffSample
{
    Vec x;
    Vec y;
    double base_value = 0.0;
    double first_diff = 0.0;
    double second_diff = 0.0;
};

namespace detail {

inline void require_inside(const ConvexBody& body, const Vec& x)
{
    require(x.size() == body.dim(), "point dimension does not match body dimension");
    require(body.contains(x), "difference operator point must lie in the body");
}

/// hull(P + x), or P itself when x is already covered.
inline Polytope add_point(const Polytope& base, const Vec& x)
{
    if (!base.empty() && base.contains(x)) {
        return base;
    }
    const Vec pts[] = {x};
    return convex_hull_with(base, pts);
}

} // namespace detail

/// D_x F for the process realisation `cloud`.
inline double first_difference(const ConvexBody& body, const PointCloud& cloud, const Vec& x, const Functional& f)
{
    detail::require_inside(body, x);
    const Polytope base = convex_hull(cloud);
    if (!base.empty() && base.contains(x)) {
        return 0.0;
    }
    return f(detail::add_point(base, x)) - f(base);
}

/// D^2_{x,y} F = F(P+x+y) - F(P+x) - F(P+y) + F(P).
inline double second_difference(const ConvexBody& body, const PointCloud& cloud, const Vec& x, const Vec& y,
                                const Functional& f)
{
    detail::require_inside(body, x);
    detail::require_inside(body, y);
    const Polytope base = convex_hull(cloud);
    const bool x_in = !base.empty() && base.contains(x);
    const bool y_in = !base.empty() && base.contains(y);
    if (x_in || y_in) {
        return 0.0;
    }
    // evaluate in a canonical order so swapping x and y is bit-identical
    const bool swap = std::lexicographical_compare(y.begin(), y.end(), x.begin(), x.end());
    const Vec& a = swap ? y : x;
    const Vec& b = swap ? x : y;
    const Polytope pa = detail::add_point(base, a);
    const Polytope pb = detail::add_point(base, b);
    const Vec both[] = {a, b};
    const Polytope pab = convex_hull_with(base, both);
    return f(pab) - f(pa) - f(pb) + f(base);
}

inline DiffSample difference_sample(const ConvexBody& body, const PointCloud& cloud, const Vec& x, const Vec& y,
                                    const Functional& f)
{
    DiffSample s;
    s.x = x;
    s.y = y;
    s.base_value = f(convex_hull(cloud));
    s.first_diff = first_difference(body, cloud, x, f);
    s.second_diff = second_difference(body, cloud, x, y, f);
    return s;
}

/// Where the outer integration points are drawn.
struct Sampling
{
    enum class Kind { plain, boundary_shell };

    Kind kind = Kind::plain;
    /// eps_t = c log(t) / t for the floating-body inner radius of the shell
    double c = 2.0;
    /// explicit shell width; overrides c when positive
    double width = 0.0;

    static Sampling plain() { return {}; }
    static Sampling shell(double c = 2.0) { return {Kind::boundary_shell, c, 0.0}; }
    static Sampling shell_width(double w) { return {Kind::boundary_shell, 2.0, w}; }
};

struct MomentOptions
{
    int n_outer = 1000;
    int n_inner = 8;
    Sampling sampling;
    int workers = 1;
};

struct TauEstimate
{
    double tau1 = 0.0;
    double tau2 = 0.0;
    double tau3 = 0.0;
    double tau1_se = 0.0;
    double tau2_se = 0.0;
    double tau3_se = 0.0;
    int n_outer = 0;
    int n_inner = 0;
    std::string functional_label;
    double t = 0.0;
};

struct GammaEstimate
{
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double gamma3 = 0.0;
    double gamma1_se = 0.0;
    double gamma2_se = 0.0;
    double gamma3_se = 0.0;
    int m = 0;
    int n_outer = 0;
    int n_inner = 0;
    double t = 0.0;
};

/// Per-outer-point integrand values; their means are the gamma (or tau) estimates.
struct MomentSamples
{
    std::vector<double> g1;
    std::vector<double> g2;
    std::vector<double> g3;
};

/// Neumaier compensated sum.
class CompensatedSum
{
public:
    void add(double x)
    {
        const double s = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - s) + x;
        } else {
            comp_ += (x - s) + sum_;
        }
        sum_ = s;
    }

    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Inner radius of the boundary shell used for importance sampling in a ball.
inline double shell_inner_radius(const ConvexBody& body, double t, const Sampling& s)
{
    require(body.is_ball(), "boundary-shell sampling is implemented for balls only");
    const auto& ball = std::get<Ball>(body.shape());
    if (s.width > 0.0) {
        return std::max(0.0, ball.radius - s.width);
    }
    require(s.c > 0.0, "floating body constant c must be positive");
    const double eps = s.c * std::log(t) / t;
    const double half = 0.5 * body.volume();
    if (eps <= 0.0 || eps >= half) {
        return 0.0;
    }
    return ball_floating_body_radius(body.dim(), ball.radius, eps);
}

namespace detail {

/// Outer region: the body, or a spherical shell rho <= |x - c| <= r.
struct Region
{
    const ConvexBody* body = nullptr;
    bool shell = false;
    double inner = 0.0;
    double measure = 0.0;

    Vec sample(Philox& rng) const
    {
        if (!shell) {
            return sample_uniform(*body, rng);
        }
        const auto& ball = std::get<Ball>(body->shape());
        const int d = body->dim();
        std::normal_distribution<double> normal;
        Vec u(d);
        do {
            for (int i = 0; i < d; ++i) {
                u[i] = normal(rng);
            }
        } while (u.squaredNorm() == 0.0);
        u.normalize();
        const double rd = std::pow(ball.radius, d);
        const double pd = std::pow(inner, d);
        const double radius = std::pow(pd + rng.uniform() * (rd - pd), 1.0 / d);
        return ball.center + radius * u;
    }
};

inline Region make_region(const ConvexBody& body, double t, const Sampling& s)
{
    Region r;
    r.body = &body;
    r.measure = body.volume();
    if (s.kind == Sampling::Kind::boundary_shell) {
        r.shell = true;
        r.inner = shell_inner_radius(body, t, s);
        const auto& ball = std::get<Ball>(body.shape());
        const int d = body.dim();
        r.measure = unit_ball_volume(d) * (std::pow(ball.radius, d) - std::pow(r.inner, d));
    }
    return r;
}

/// Difference values of each component for one process draw and one outer triple.
struct DrawDiffs
{
    std::vector<double> d13, d23, d1, d2, d3;
};

inline DrawDiffs draw_differences(const Polytope& base, const Vec& x1, const Vec& x2, const Vec& x3,
                                  const VectorFunctional& f, const std::vector<double>& scale)
{
    const bool in1 = !base.empty() && base.contains(x1);
    const bool in2 = !base.empty() && base.contains(x2);
    const bool in3 = !base.empty() && base.contains(x3);
    const std::size_t m = scale.size();
    DrawDiffs out;
    out.d13.assign(m, 0.0);
    out.d23.assign(m, 0.0);
    out.d1.assign(m, 0.0);
    out.d2.assign(m, 0.0);
    out.d3.assign(m, 0.0);
    if (in1 && in2 && in3) {
        return out;
    }
    const std::vector<double> f0 = f(base);
    std::vector<double> f1 = f0;
    std::vector<double> f2 = f0;
    std::vector<double> f3 = f0;
    if (!in1) {
        f1 = f(add_point(base, x1));
    }
    if (!in2) {
        f2 = f(add_point(base, x2));
    }
    if (!in3) {
        f3 = f(add_point(base, x3));
    }
    std::vector<double> f13(m, 0.0);
    std::vector<double> f23(m, 0.0);
    if (!in1 && !in3) {
        const Vec pts[] = {x1, x3};
        f13 = f(convex_hull_with(base, pts));
    }
    if (!in2 && !in3) {
        const Vec pts[] = {x2, x3};
        f23 = f(convex_hull_with(base, pts));
    }
    require(f0.size() == m, "functional returned a vector of unexpected length");
    for (std::size_t i = 0; i < m; ++i) {
        out.d1[i] = (f1[i] - f0[i]) / scale[i];
        out.d2[i] = (f2[i] - f0[i]) / scale[i];
        out.d3[i] = (f3[i] - f0[i]) / scale[i];
        if (!in1 && !in3) {
            out.d13[i] = (f13[i] - f1[i] - f3[i] + f0[i]) / scale[i];
        }
        if (!in2 && !in3) {
            out.d23[i] = (f23[i] - f2[i] - f3[i] + f0[i]) / scale[i];
        }
    }
    return out;
}

struct OuterValue
{
    double g1 = 0.0;
    double g2 = 0.0;
    double g3 = 0.0;
};

/// Integrand values at one outer triple. Fourth moments entering a product are
/// taken from disjoint groups of draws (slot s uses draws k with k % G == s % G,
/// G = min(n_inner, 4)), so each product of means is a product of independent
/// unbiased estimates.
inline OuterValue outer_value(const ConvexBody& body, double t, const Region& region, const VectorFunctional& f,
                              const std::vector<double>& scale, int n_inner, std::uint64_t seed, std::uint64_t index)
{
    Philox point_rng = Philox::stream(seed, index, 0);
    const Vec x1 = region.sample(point_rng);
    const Vec x2 = region.sample(point_rng);
    const Vec x3 = region.sample(point_rng);
    const std::size_t m = scale.size();
    const int groups = std::min(n_inner, 4);

    // moment[q][g][i]: mean over group g of (factor q of component i)^4
    enum { A = 0, B = 1, C = 2, E = 3 };
    std::vector<std::vector<std::vector<double>>> moment(
        4, std::vector<std::vector<double>>(static_cast<std::size_t>(groups), std::vector<double>(m, 0.0)));
    std::vector<int> group_size(static_cast<std::size_t>(groups), 0);
    std::vector<double> abs3(m, 0.0);

    for (int k = 0; k < n_inner; ++k) {
        Philox rng = Philox::stream(seed, index, static_cast<std::uint64_t>(k) + 1);
        const Polytope base = convex_hull(sample_poisson_process(body, t, rng));
        const DrawDiffs dd = draw_differences(base, x1, x2, x3, f, scale);
        const auto g = static_cast<std::size_t>(k % groups);
        ++group_size[g];
        for (std::size_t i = 0; i < m; ++i) {
            moment[A][g][i] += std::pow(dd.d13[i], 4);
            moment[B][g][i] += std::pow(dd.d23[i], 4);
            moment[C][g][i] += std::pow(dd.d1[i], 4);
            moment[E][g][i] += std::pow(dd.d2[i], 4);
            abs3[i] += std::pow(std::abs(dd.d1[i]), 3) + std::pow(std::abs(dd.d2[i]), 3) +
                       std::pow(std::abs(dd.d3[i]), 3);
        }
    }
    for (int g = 0; g < groups; ++g) {
        for (auto& q : moment) {
            for (double& v : q[static_cast<std::size_t>(g)]) {
                v /= group_size[static_cast<std::size_t>(g)];
            }
        }
    }
    auto slot = [&](int q, int s, std::size_t i) { return moment[static_cast<std::size_t>(q)][static_cast<std::size_t>(s % groups)][i]; };

    const double w1 = t * region.measure;
    const double w3 = w1 * w1 * w1;
    OuterValue out;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            out.g1 += std::pow(slot(A, 0, i) * slot(B, 1, i) * slot(C, 2, j) * slot(E, 3, j), 0.25);
            out.g2 += std::pow(slot(A, 0, i) * slot(B, 1, i) * slot(A, 2, j) * slot(B, 3, j), 0.25);
        }
        out.g3 += abs3[i] / (3.0 * n_inner);
    }
    out.g1 *= w3;
    out.g2 *= w3;
    out.g3 *= w1;
    return out;
}

inline void mean_se(const std::vector<double>& x, double& mean, double& se)
{
    CompensatedSum sum;
    for (double v : x) {
        sum.add(v);
    }
    const auto n = static_cast<double>(x.size());
    mean = sum.value() / n;
    CompensatedSum sq;
    for (double v : x) {
        sq.add((v - mean) * (v - mean));
    }
    se = x.size() > 1 ? std::sqrt(sq.value() / (n - 1.0) / n) : 0.0;
}

inline GammaEstimate reduce_samples(const std::vector<OuterValue>& values)
{
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> c;
    for (const auto& v : values) {
        a.push_back(v.g1);
        b.push_back(v.g2);
        c.push_back(v.g3);
    }
    GammaEstimate g;
    mean_se(a, g.gamma1, g.gamma1_se);
    mean_se(b, g.gamma2, g.gamma2_se);
    mean_se(c, g.gamma3, g.gamma3_se);
    g.n_outer = static_cast<int>(values.size());
    return g;
}

inline GammaEstimate estimate_moments(const ConvexBody& body, double t, const VectorFunctional& f,
                                      const std::vector<double>& variances, const MomentOptions& opt, Philox& rng,
                                      MomentSamples* samples)
{
    require(t > 0.0 && std::isfinite(t), "intensity t must be positive");
    require(opt.n_inner >= 2, "n_inner must be >= 2 so moment products use independent draws");
    require(opt.n_outer >= 2, "n_outer must be >= 2");
    require(!variances.empty(), "need at least one component");
    std::vector<double> scale;
    for (double v : variances) {
        require(v > 0.0 && std::isfinite(v), "variance estimate must be positive");
        scale.push_back(std::sqrt(v));
    }
    const Region region = make_region(body, t, opt.sampling);
    const std::uint64_t hi = rng();
    const std::uint64_t seed = (hi << 32) | rng();

    std::vector<OuterValue> values(static_cast<std::size_t>(opt.n_outer));
    parallel_for(values.size(), opt.workers, [&](std::size_t o) {
        values[o] = outer_value(body, t, region, f, scale, opt.n_inner, seed, o);
    });
    if (samples != nullptr) {
        samples->g1.clear();
        samples->g2.clear();
        samples->g3.clear();
        for (const auto& v : values) {
            samples->g1.push_back(v.g1);
            samples->g2.push_back(v.g2);
            samples->g3.push_back(v.g3);
        }
    }
    GammaEstimate g = reduce_samples(values);
    g.m = static_cast<int>(variances.size());
    g.n_inner = opt.n_inner;
    g.t = t;
    return g;
}

} // namespace detail

/// Estimates from stored integrand samples (the reduction used by the estimators).
inline GammaEstimate gammas_from_samples(const MomentSamples& s)
{
    require(s.g1.size() == s.g2.size() && s.g1.size() == s.g3.size() && !s.g1.empty(), "malformed moment samples");
    std::vector<detail::OuterValue> values;
    for (std::size_t i = 0; i < s.g1.size(); ++i) {
        values.push_back({s.g1[i], s.g2[i], s.g3[i]});
    }
    return detail::reduce_samples(values);
}

/// tau_1, tau_2, tau_3 for the standardised functional (F - mean) / sqrt(variance_estimate).
inline TauEstimate estimate_taus(const ConvexBody& body, double t, const Functional& f, double variance_estimate,
                                 const MomentOptions& opt, Philox& rng, std::string label = {},
                                 MomentSamples* samples = nullptr)
{
    const VectorFunctional vf = [&f](const Polytope& p) { return std::vector<double>{f(p)}; };
    const GammaEstimate g = detail::estimate_moments(body, t, vf, {variance_estimate}, opt, rng, samples);
    TauEstimate tau;
    tau.tau1 = g.gamma1;
    tau.tau2 = g.gamma2;
    tau.tau3 = g.gamma3;
    tau.tau1_se = g.gamma1_se;
    tau.tau2_se = g.gamma2_se;
    tau.tau3_se = g.gamma3_se;
    tau.n_outer = g.n_outer;
    tau.n_inner = g.n_inner;
    tau.functional_label = std::move(label);
    tau.t = t;
    return tau;
}

/// gamma_1, gamma_2, gamma_3 for a vector functional; components are scaled by
/// the square roots of the covariance diagonal.
inline GammaEstimate estimate_gammas(const ConvexBody& body, double t, const VectorFunctional& f,
                                     const Eigen::MatrixXd& covariance_estimate, const MomentOptions& opt, Philox& rng,
                                     MomentSamples* samples = nullptr)
{
    require(covariance_estimate.rows() == covariance_estimate.cols() && covariance_estimate.rows() >= 1,
            "covariance estimate must be square");
    std::vector<double> variances(static_cast<std::size_t>(covariance_estimate.rows()));
    for (Eigen::Index i = 0; i < covariance_estimate.rows(); ++i) {
        variances[static_cast<std::size_t>(i)] = covariance_estimate(i, i);
    }
    return detail::estimate_moments(body, t, f, variances, opt, rng, samples);
}

inline double ms_bound_univariate(const TauEstimate& tau)
{
    return 2.0 * std::sqrt(tau.tau1) + std::sqrt(tau.tau2) + tau.tau3;
}

/// Delta-method standard error of the univariate bound.
inline double ms_bound_univariate_se(const TauEstimate& tau)
{
    auto dsqrt = [](double v, double se) { return v > 0.0 ? se / (2.0 * std::sqrt(v)) : std::sqrt(se); };
    const double a = 2.0 * dsqrt(tau.tau1, tau.tau1_se);
    const double b = dsqrt(tau.tau2, tau.tau2_se);
    return std::sqrt(a * a + b * b + tau.tau3_se * tau.tau3_se);
}

/// m sqrt(gamma_1) + (m/2) sqrt(gamma_2) + (m^2/4) gamma_3, the covariance-free part
/// of the multivariate bound.
inline double ms_bound_multivariate(const GammaEstimate& g)
{
    const double m = g.m;
    return m * std::sqrt(g.gamma1) + 0.5 * m * std::sqrt(g.gamma2) + 0.25 * m * m * g.gamma3;
}

/// The full multivariate bound including the covariance mismatch term.
inline double ms_bound_multivariate(const GammaEstimate& g, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& cov)
{
    require(sigma.rows() == g.m && sigma.cols() == g.m && cov.rows() == g.m && cov.cols() == g.m,
            "covariance matrices must be m x m");
    return 0.5 * g.m * (sigma - cov).cwiseAbs().sum() + ms_bound_multivariate(g);
}

} // namespace randpoly
