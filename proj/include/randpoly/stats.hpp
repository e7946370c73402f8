#pragma once

// Replication tables and the statistics computed on them: moments, correlation
// matrices, numeric rank, W1 distance to the standard normal, log-log rate fits,
// the oracle variance identity, floating-body containment and Mardia's tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "bodies.hpp"
#include "error.hpp"
#include "hull.hpp"
#include "rng.hpp"

namespace randpoly {

using Column = std::vector<double>;

/// Named columns of equal length, one row per replication at a fixed t.
class ReplicationTable
{
public:
    double t = 0.0;
    std::string body;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t n_reps() const { return columns_.empty() ? 0 : columns_.front().size(); }
    [[nodiscard]] const std::vector<std::string>& names() const { return names_; }
    [[nodiscard]] const std::vector<Column>& columns() const { return columns_; }

    [[nodiscard]] bool has(const std::string& name) const
    {
        return std::find(names_.begin(), names_.end(), name) != names_.end();
    }

    [[nodiscard]] const Column& column(const std::string& name) const
    {
        const auto it = std::find(names_.begin(), names_.end(), name);
        require(it != names_.end(), "no column named '" + name + "'");
        return columns_[static_cast<std::size_t>(it - names_.begin())];
    }

    void add_column(std::string name, Column values)
    {
        require(!has(name), "duplicate column '" + name + "'");
        require(columns_.empty() || values.size() == n_reps(), "column '" + name + "' has the wrong length");
        for (double v : values) {
            require(std::isfinite(v), "column '" + name + "' has a non-finite entry");
        }
        names_.push_back(std::move(name));
        columns_.push_back(std::move(values));
    }

    friend bool operator==(const ReplicationTable&, const ReplicationTable&) = default;

private:
    std::vector<std::string> names_;
    std::vector<Column> columns_;
};

inline double mean(const Column& x)
{
    require(!x.empty(), "mean of an empty column");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(const Column& x)
{
    require(x.size() >= 2, "variance needs at least two values");
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) {
        s += (v - m) * (v - m);
    }
    return s / static_cast<double>(x.size() - 1);
}

inline double standard_error(const Column& x)
{
    return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

/// Standard error of the sample variance, from the fourth central moment.
inline double variance_standard_error(const Column& x)
{
    const double n = static_cast<double>(x.size());
    const double m = mean(x);
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : x) {
        const double c = (v - m) * (v - m);
        m2 += c;
        m4 += c * c;
    }
    m2 /= n;
    m4 /= n;
    return std::sqrt(std::max(0.0, (m4 - (n - 3.0) / (n - 1.0) * m2 * m2) / n));
}

/// (x - mean) / sd with sample moments.
inline Column standardize(const Column& x)
{
    require(x.size() >= 2, "standardize needs at least two values");
    require(std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) != x.end(),
            "cannot standardize a constant column");
    const double m = mean(x);
    const double sd = std::sqrt(variance(x));
    require(sd > 0.0, "cannot standardize a column with zero variance");
    Column z(x.size());
    std::transform(x.begin(), x.end(), z.begin(), [&](double v) { return (v - m) / sd; });
    return z;
}

/// Phi^{-1}((i - 1/2)/n), i = 1..n.
inline std::vector<double> normal_scores(std::size_t n)
{
    const boost::math::normal_distribution<double> normal;
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = boost::math::quantile(normal, (static_cast<double>(i) + 0.5) / static_cast<double>(n));
    }
    return q;
}

/// w1_to_normal with precomputed normal_scores(x.size()).
inline double w1_to_normal(Column x, const std::vector<double>& scores)
{
    require(x.size() >= 2, "w1_to_normal needs at least two values");
    require(scores.size() == x.size(), "normal scores do not match the sample size");
    std::sort(x.begin(), x.end());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += std::abs(x[i] - scores[i]);
    }
    return s / static_cast<double>(x.size());
}

/// Quantile-coupling estimate (1/n) sum |X_(i) - Phi^{-1}((i - 1/2)/n)| of the
/// W1 distance between the sample and N(0,1).
inline double w1_to_normal(const Column& x)
{
    require(x.size() >= 2, "w1_to_normal needs at least two values");
    return w1_to_normal(x, normal_scores(x.size()));
}

/// Bootstrap standard error of w1_to_normal(standardize(x)).
inline double w1_bootstrap_se(const Column& x, int n_boot, std::uint64_t seed)
{
    require(x.size() >= 2 && n_boot >= 2, "bootstrap needs at least two values and two resamples");
    Philox rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    const std::vector<double> scores = normal_scores(x.size());
    Column stats;
    Column b(x.size());
    for (int k = 0; k < n_boot; ++k) {
        for (double& v : b) {
            v = x[pick(rng)];
        }
        if (std::adjacent_find(b.begin(), b.end(), std::not_equal_to<>()) == b.end()) {
            continue;
        }
        stats.push_back(w1_to_normal(standardize(b), scores));
    }
    return stats.size() >= 2 ? std::sqrt(variance(stats)) : 0.0;
}

/// Sample correlation matrix. Identical columns give exactly 1.
inline Eigen::MatrixXd correlation_matrix(const std::vector<Column>& cols)
{
    require(!cols.empty(), "need at least one column");
    const std::size_t n = cols.front().size();
    require(n >= 2, "correlation needs at least two replications");
    const auto m = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd centered(static_cast<Eigen::Index>(n), m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Column& c = cols[static_cast<std::size_t>(j)];
        require(c.size() == n, "columns must have equal length");
        const double mu = mean(c);
        for (std::size_t i = 0; i < n; ++i) {
            centered(static_cast<Eigen::Index>(i), j) = c[i] - mu;
        }
    }
    const Eigen::MatrixXd s = centered.transpose() * centered;
    Eigen::MatrixXd r(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        require(s(i, i) > 0.0, "correlation of a zero-variance column");
        for (Eigen::Index j = 0; j < m; ++j) {
            r(i, j) = s(i, j) / std::sqrt(s(i, i) * s(j, j));
        }
        r(i, i) = 1.0;
    }
    return r;
}

inline Eigen::MatrixXd correlation_matrix(const ReplicationTable& table, const std::vector<std::string>& names)
{
    std::vector<Column> cols;
    for (const auto& name : names) {
        cols.push_back(table.column(name));
    }
    return correlation_matrix(cols);
}

/// Standard error of a sample correlation coefficient, (1 - r^2) / sqrt(n - 3).
inline double correlation_standard_error(double r, std::size_t n)
{
    require(n > 3, "need more than three replications");
    return (1.0 - r * r) / std::sqrt(static_cast<double>(n) - 3.0);
}

struct RankResult
{
    int rank = 0;
    std::vector<double> eigenvalues;
};

/// Number of eigenvalues above tol * largest eigenvalue; eigenvalues are
/// returned in decreasing order.
inline RankResult numeric_rank(const Eigen::MatrixXd& a, double tol = 1e-8)
{
    require(a.rows() == a.cols() && a.rows() >= 1, "numeric_rank needs a square matrix");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "numeric_rank needs a symmetric matrix");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
    RankResult out;
    const Eigen::VectorXd ev = eig.eigenvalues();
    for (Eigen::Index i = ev.size() - 1; i >= 0; --i) {
        out.eigenvalues.push_back(ev[i]);
    }
    const double top = out.eigenvalues.front();
    for (double v : out.eigenvalues) {
        out.rank += v > tol * top ? 1 : 0;
    }
    return out;
}

struct RateFit
{
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_se = 0.0;
    std::vector<double> t_grid;
};

/// Least-squares line through (log t, log v).
inline RateFit rate_fit(const std::vector<double>& ts, const std::vector<double>& values)
{
    require(ts.size() == values.size(), "rate_fit needs matching t and value lists");
    require(ts.size() >= 3, "rate_fit needs at least three grid points");
    const std::size_t n = ts.size();
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        require(ts[i] > 0.0, "rate_fit needs positive t");
        require(values[i] > 0.0, "rate_fit needs positive values");
        x[i] = std::log(ts[i]);
        y[i] = std::log(values[i]);
    }
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    require(sxx > 0.0, "rate_fit needs distinct t values");
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        sse += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
    fit.slope_se = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
    fit.t_grid = ts;
    return fit;
}

/// Var[oracle] / ((1/t) mean[missed volume]).
inline double variance_identity_check(const Column& oracle, const Column& missed_volume, double t)
{
    require(t > 0.0, "intensity t must be positive");
    require(oracle.size() == missed_volume.size(), "oracle and missed-volume columns must have equal length");
    const double denom = mean(missed_volume) / t;
    require(denom > 0.0, "mean missed volume is zero");
    return variance(oracle) / denom;
}

/// Whether the concentric ball of the given radius lies inside the polytope.
inline bool contains_ball(const Polytope& poly, const Vec& center, double radius)
{
    if (!poly.full_dimensional()) {
        return false;
    }
    for (const Facet& f : poly.facets()) {
        if (f.offset - f.normal.dot(center) < radius) {
            return false;
        }
    }
    return true;
}

/// Per-replication indicators (1 or 0) that K_t contains the floating body of
/// parameter c log(t)/t. Replication r draws from the stream (seed, stream, r).
template <typename Loop>
Column sandwich_indicators(const ConvexBody& body, double t, double c, int n_reps, std::uint64_t seed,
                           std::uint64_t stream, Loop&& loop)
{
    require(body.is_ball(), "sandwich probability is implemented for balls only");
    require(t > 1.0 && std::isfinite(t), "sandwich probability needs t > 1");
    require(c > 0.0, "floating body constant c must be positive");
    require(n_reps >= 1, "n_reps must be >= 1");
    const auto& ball = std::get<Ball>(body.shape());
    const double eps = c * std::log(t) / t;
    require(eps < 0.5 * body.volume(), "floating body parameter is at least half the body volume");
    const double rho = ball_floating_body_radius(body.dim(), ball.radius, eps);
    Column out(static_cast<std::size_t>(n_reps));
    loop(out.size(), [&](std::size_t r) {
        Philox rng = Philox::stream(seed, stream, r);
        out[r] = contains_ball(convex_hull(sample_poisson_process(body, t, rng)), ball.center, rho) ? 1.0 : 0.0;
    });
    return out;
}

/// Fraction of n_reps hulls K_t containing the floating body of parameter c log(t)/t.
inline double sandwich_probability(const ConvexBody& body, double t, double c, int n_reps, std::uint64_t seed)
{
    const Column hits = sandwich_indicators(body, t, c, n_reps, seed, 0, [](std::size_t n, auto&& fn) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
    });
    return mean(hits);
}

struct MardiaResult
{
    double skewness = 0.0;
    double skewness_p = 0.0;
    double kurtosis = 0.0;
    double kurtosis_p = 0.0;
    bool pass = false;
    std::vector<std::size_t> used_columns;
};

/// Columns kept by a greedy pass that drops any column whose correlation
/// matrix with the kept ones loses numeric rank.
inline std::vector<std::size_t> full_rank_columns(const std::vector<Column>& cols, double tol = 1e-8)
{
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (variance(cols[j]) <= 0.0) {
            continue;
        }
        std::vector<Column> trial;
        for (std::size_t k : kept) {
            trial.push_back(cols[k]);
        }
        trial.push_back(cols[j]);
        if (numeric_rank(correlation_matrix(trial), tol).rank == static_cast<int>(trial.size())) {
            kept.push_back(j);
        }
    }
    return kept;
}

/// Mardia's multivariate skewness (n b1 / 6 against chi-square with
/// k(k+1)(k+2)/6 degrees of freedom) and kurtosis (normal approximation) tests.
/// Rank-deficient column sets are reduced to a full-rank subset first.
inline MardiaResult mardia_normality(const std::vector<Column>& cols, double alpha = 0.01)
{
    require(!cols.empty(), "need at least one column");
    const std::size_t n = cols.front().size();
    MardiaResult out;
    out.used_columns = full_rank_columns(cols);
    const auto k = static_cast<Eigen::Index>(out.used_columns.size());
    require(k >= 1, "no column with positive variance");
    require(n >= 20 * static_cast<std::size_t>(k), "Mardia tests need at least 20 replications per column");

    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const Column& c = cols[out.used_columns[static_cast<std::size_t>(j)]];
        const double mu = mean(c);
        for (std::size_t i = 0; i < n; ++i) {
            z(static_cast<Eigen::Index>(i), j) = c[i] - mu;
        }
    }
    const Eigen::MatrixXd s = z.transpose() * z / static_cast<double>(n);
    // whiten: y = z L^{-T} so that y_i . y_j = z_i^T S^{-1} z_j
    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    require(llt.info() == Eigen::Success, "covariance is not positive definite");
    const Eigen::MatrixXd y = llt.matrixL().solve(z.transpose()).transpose();

    double b1 = 0.0;
    double b2 = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const Eigen::VectorXd g = y * y.row(i).transpose();
        b1 += g.array().cube().sum();
        b2 += g[i] * g[i];
    }
    const double nn = static_cast<double>(n);
    b1 /= nn * nn;
    b2 /= nn;
    const double kk = static_cast<double>(k);
    out.skewness = nn * b1 / 6.0;
    const boost::math::chi_squared_distribution<double> chi(kk * (kk + 1.0) * (kk + 2.0) / 6.0);
    out.skewness_p = boost::math::cdf(boost::math::complement(chi, out.skewness));
    out.kurtosis = (b2 - kk * (kk + 2.0)) / std::sqrt(8.0 * kk * (kk + 2.0) / nn);
    const boost::math::normal_distribution<double> normal;
    out.kurtosis_p = 2.0 * boost::math::cdf(boost::math::complement(normal, std::abs(out.kurtosis)));
    out.pass = out.skewness_p > alpha && out.kurtosis_p > alpha;
    return out;
}

struct Interval
{
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap interval for the correlation of two columns.
inline Interval bootstrap_correlation_ci(const Column& x, const Column& y, int n_boot, std::uint64_t seed,
                                         double level = 0.95)
{
    require(x.size() == y.size() && x.size() >= 4, "bootstrap needs paired columns of length >= 4");
    require(n_boot >= 10, "n_boot must be >= 10");
    require(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    Philox rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    std::vector<double> stats;
    Column bx(x.size());
    Column by(y.size());
    for (int b = 0; b < n_boot; ++b) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const std::size_t k = pick(rng);
            bx[i] = x[k];
            by[i] = y[k];
        }
        const double vx = variance(bx);
        const double vy = variance(by);
        if (vx <= 0.0 || vy <= 0.0) {
            continue;
        }
        stats.push_back(correlation_matrix({bx, by})(0, 1));
    }
    require(stats.size() >= 2, "bootstrap resamples were all degenerate");
    std::sort(stats.begin(), stats.end());
    auto at = [&](double q) {
        const double pos = q * static_cast<double>(stats.size() - 1);
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < stats.size() ? stats[i] * (1.0 - frac) + stats[i + 1] * frac : stats[i];
    };
    return {at(0.5 * (1.0 - level)), at(1.0 - 0.5 * (1.0 - level))};
}

struct SummaryStats
{
    std::vector<std::string> names;
    std::vector<double> means;
    std::vector<double> variances;
    std::vector<double> variance_se;
    std::vector<double> w1_to_normal;
    Eigen::MatrixXd covariance;
    std::vector<std::string> covariance_names;
    int rank_estimate = 0;
    std::vector<double> eigenvalues;
};

/// Per-column moments and W1 distances; correlation matrix and rank over the
/// non-constant columns among `names`.
inline SummaryStats summarize(const ReplicationTable& table, const std::vector<std::string>& names)
{
    SummaryStats s;
    std::vector<Column> varying;
    for (const auto& name : names) {
        const Column& c = table.column(name);
        s.names.push_back(name);
        s.means.push_back(mean(c));
        const double v = variance(c);
        s.variances.push_back(v);
        s.variance_se.push_back(variance_standard_error(c));
        if (v > 0.0 && std::adjacent_find(c.begin(), c.end(), std::not_equal_to<>()) != c.end()) {
            s.w1_to_normal.push_back(w1_to_normal(standardize(c)));
            varying.push_back(c);
            s.covariance_names.push_back(name);
        } else {
            s.w1_to_normal.push_back(std::nan(""));
        }
    }
    if (!varying.empty()) {
        s.covariance = correlation_matrix(varying);
        const RankResult r = numeric_rank(s.covariance);
        s.rank_estimate = r.rank;
        s.eigenvalues = r.eigenvalues;
    }
    return s;
}

} // namespace randpoly
