#pragma once

// Convex bodies, uniform sampling and Poisson point processes restricted to a body.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace randpoly {

using Vec = Eigen::VectorXd;

/// Volume of the k-dimensional unit ball.
inline double unit_ball_volume(int k)
{
    return std::pow(std::numbers::pi, 0.5 * k) / std::tgamma(1.0 + 0.5 * k);
}

/// A finite set of points in R^d, stored contiguously.
struct PointCloud
{
    int dim = 0;
    std::vector<double> coords;

    PointCloud() = default;
    explicit PointCloud(int d) : dim(d) {}
    PointCloud(int d, std::vector<double> c) : dim(d), coords(std::move(c))
    {
        require(d >= 1 && coords.size() % static_cast<std::size_t>(d) == 0, "coordinate count must be a multiple of the dimension");
    }

    [[nodiscard]] std::size_t size() const { return dim == 0 ? 0 : coords.size() / static_cast<std::size_t>(dim); }
    [[nodiscard]] bool empty() const { return coords.empty(); }

    [[nodiscard]] std::span<const double> operator[](std::size_t i) const
    {
        return {coords.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }

    [[nodiscard]] Eigen::Map<const Vec> point(std::size_t i) const
    {
        return {coords.data() + i * static_cast<std::size_t>(dim), dim};
    }

    void push_back(std::span<const double> x)
    {
        require(static_cast<int>(x.size()) == dim, "point dimension does not match cloud dimension");
        coords.insert(coords.end(), x.begin(), x.end());
    }

    void push_back(const Vec& x) { push_back(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))); }

    friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct Ball
{
    Vec center;
    double radius = 1.0;
};

struct Ellipsoid
{
    Vec center;
    Vec semi_axes;
};

/// Axis-parallel cube [0, side]^d. Non-smooth; intended as an exact-answer test body.
struct Cube
{
    int dim = 1;
    double side = 1.0;
};

struct BoundingBox
{
    Vec lower;
    Vec upper;
};

class ConvexBody
{
public:
    using Shape = std::variant<Ball, Ellipsoid, Cube>;

    static ConvexBody ball(int dim, double radius = 1.0) { return ball(Vec::Zero(dim), radius); }

    static ConvexBody ball(Vec center, double radius)
    {
        require(center.size() >= 1, "ball dimension must be >= 1");
        require(radius > 0.0 && std::isfinite(radius), "ball radius must be positive");
        return ConvexBody(Ball{std::move(center), radius});
    }

    static ConvexBody ellipsoid(Vec center, Vec semi_axes)
    {
        require(center.size() >= 1 && center.size() == semi_axes.size(), "ellipsoid center/axes dimension mismatch");
        require((semi_axes.array() > 0.0).all() && semi_axes.allFinite(), "ellipsoid semi-axes must be positive");
        return ConvexBody(Ellipsoid{std::move(center), std::move(semi_axes)});
    }

    static ConvexBody cube(int dim, double side = 1.0)
    {
        require(dim >= 1, "cube dimension must be >= 1");
        require(side > 0.0 && std::isfinite(side), "cube side must be positive");
        return ConvexBody(Cube{dim, side});
    }

    [[nodiscard]] const Shape& shape() const { return shape_; }

    [[nodiscard]] int dim() const
    {
        return std::visit(
            [](const auto& s) -> int {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Cube>) {
                    return s.dim;
                } else {
                    return static_cast<int>(s.center.size());
                }
            },
            shape_);
    }

    [[nodiscard]] std::string kind() const
    {
        return std::visit(
            [](const auto& s) -> std::string {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Ball>) {
                    return "ball";
                } else if constexpr (std::is_same_v<T, Ellipsoid>) {
                    return "ellipsoid";
                } else {
                    return "cube";
                }
            },
            shape_);
    }

    /// Boundary is C^2 with positive Gaussian curvature.
    [[nodiscard]] bool is_smooth() const { return !std::holds_alternative<Cube>(shape_); }

    [[nodiscard]] bool is_ball() const { return std::holds_alternative<Ball>(shape_); }

    [[nodiscard]] double volume() const
    {
        return std::visit(
            [](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Ball>) {
                    return unit_ball_volume(static_cast<int>(s.center.size())) *
                           std::pow(s.radius, static_cast<double>(s.center.size()));
                } else if constexpr (std::is_same_v<T, Ellipsoid>) {
                    return unit_ball_volume(static_cast<int>(s.center.size())) * s.semi_axes.prod();
                } else {
                    return std::pow(s.side, s.dim);
                }
            },
            shape_);
    }

    [[nodiscard]] BoundingBox bbox() const
    {
        return std::visit(
            [](const auto& s) -> BoundingBox {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Ball>) {
                    return {s.center.array() - s.radius, s.center.array() + s.radius};
                } else if constexpr (std::is_same_v<T, Ellipsoid>) {
                    return {s.center - s.semi_axes, s.center + s.semi_axes};
                } else {
                    return {Vec::Zero(s.dim), Vec::Constant(s.dim, s.side)};
                }
            },
            shape_);
    }

    [[nodiscard]] bool contains(std::span<const double> x) const
    {
        require(static_cast<int>(x.size()) == dim(), "point dimension does not match body dimension");
        const Eigen::Map<const Vec> p(x.data(), static_cast<Eigen::Index>(x.size()));
        return std::visit(
            [&p](const auto& s) -> bool {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Ball>) {
                    return (p - s.center).squaredNorm() <= s.radius * s.radius;
                } else if constexpr (std::is_same_v<T, Ellipsoid>) {
                    return ((p - s.center).array() / s.semi_axes.array()).matrix().squaredNorm() <= 1.0;
                } else {
                    return (p.array() >= 0.0).all() && (p.array() <= s.side).all();
                }
            },
            shape_);
    }

    [[nodiscard]] bool contains(const Vec& x) const
    {
        return contains(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    }

    friend bool operator==(const ConvexBody& a, const ConvexBody& b)
    {
        if (a.shape_.index() != b.shape_.index()) {
            return false;
        }
        if (const auto* ba = std::get_if<Ball>(&a.shape_)) {
            const auto& bb = std::get<Ball>(b.shape_);
            return ba->radius == bb.radius && ba->center == bb.center;
        }
        if (const auto* ea = std::get_if<Ellipsoid>(&a.shape_)) {
            const auto& eb = std::get<Ellipsoid>(b.shape_);
            return ea->center == eb.center && ea->semi_axes == eb.semi_axes;
        }
        const auto& ca = std::get<Cube>(a.shape_);
        const auto& cb = std::get<Cube>(b.shape_);
        return ca.dim == cb.dim && ca.side == cb.side;
    }

private:
    explicit ConvexBody(Shape shape) : shape_(std::move(shape)) {}

    Shape shape_;
};

namespace detail {

inline void unit_ball_point(int d, Philox& rng, double* out)
{
    std::normal_distribution<double> normal;
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (int i = 0; i < d; ++i) {
            out[i] = normal(rng);
            norm2 += out[i] * out[i];
        }
    } while (norm2 == 0.0);
    const double radius = std::pow(rng.uniform(), 1.0 / d);
    const double scale = radius / std::sqrt(norm2);
    for (int i = 0; i < d; ++i) {
        out[i] *= scale;
    }
}

inline void sample_into(const ConvexBody& body, Philox& rng, double* out)
{
    const int d = body.dim();
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Ball>) {
                unit_ball_point(d, rng, out);
                for (int i = 0; i < d; ++i) {
                    out[i] = s.center[i] + s.radius * out[i];
                }
            } else if constexpr (std::is_same_v<T, Ellipsoid>) {
                unit_ball_point(d, rng, out);
                for (int i = 0; i < d; ++i) {
                    out[i] = s.center[i] + s.semi_axes[i] * out[i];
                }
            } else {
                for (int i = 0; i < d; ++i) {
                    out[i] = s.side * rng.uniform();
                }
            }
        },
        body.shape());
}

} // namespace detail

inline constexpr long kMaxConsecutiveRejections = 1'000'000;

/// Uniform point in the body by bounding-box rejection. Generic fallback; throws
/// NumericError after kMaxConsecutiveRejections misses.
inline Vec sample_by_rejection(const ConvexBody& body, Philox& rng)
{
    const BoundingBox box = body.bbox();
    Vec x(body.dim());
    for (long attempt = 0; attempt < kMaxConsecutiveRejections; ++attempt) {
        for (int i = 0; i < x.size(); ++i) {
            x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * rng.uniform();
        }
        if (body.contains(x)) {
            return x;
        }
    }
    throw NumericError("rejection sampler exceeded the consecutive rejection budget");
}

/// Uniform point in the body (direct radial/affine sampling for balls and ellipsoids).
inline Vec sample_uniform(const ConvexBody& body, Philox& rng)
{
    Vec x(body.dim());
    detail::sample_into(body, rng, x.data());
    return x;
}

/// Poisson process with intensity t * Lebesgue restricted to the body.
inline PointCloud sample_poisson_process(const ConvexBody& body, double t, Philox& rng)
{
    require(t > 0.0 && std::isfinite(t), "intensity t must be positive");
    const int d = body.dim();
    std::poisson_distribution<long> count_dist(t * body.volume());
    const long n = count_dist(rng);
    PointCloud cloud(d);
    cloud.coords.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(d));
    for (long i = 0; i < n; ++i) {
        detail::sample_into(body, rng, cloud.coords.data() + i * d);
    }
    return cloud;
}

/// Volume of the cap cut from a d-ball of radius r by a hyperplane at distance h from
/// the center, 0 <= h <= r.
inline double ball_cap_volume(int d, double r, double h)
{
    require(d >= 1 && r > 0.0, "invalid ball");
    require(h >= 0.0 && h <= r, "cap distance out of range");
    const double s = h / r;
    // I_{1-s^2}((d+1)/2, 1/2) written as a complement in s^2 keeps precision near the center
    return 0.5 * unit_ball_volume(d) * std::pow(r, d) * boost::math::ibetac(0.5, 0.5 * (d + 1), s * s);
}

/// Radius of the eps-floating body of a d-ball of radius r (a concentric ball):
/// the distance from the center at which a hyperplane cuts a cap of volume eps.
inline double ball_floating_body_radius(int d, double r, double eps)
{
    require(d >= 1 && r > 0.0, "invalid ball");
    const double half = 0.5 * unit_ball_volume(d) * std::pow(r, d);
    require(eps > 0.0 && eps <= half, "floating body parameter must lie in (0, half the ball volume]");
    if (eps == half) {
        return 0.0;
    }
    // cap volume is strictly decreasing in h
    double lo = 0.0;
    double hi = r;
    while (hi - lo > 1e-13 * r) {
        const double mid = 0.5 * (lo + hi);
        if (ball_cap_volume(d, r, mid) > eps) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace randpoly
