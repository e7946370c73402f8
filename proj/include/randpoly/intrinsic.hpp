#pragma once

// Intrinsic volumes of polytopes: exact formulas up to dimension 3 and Kubota's
// projection formula by Monte Carlo over Haar-random subspaces in any dimension.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "bodies.hpp"
#include "error.hpp"
#include "hull.hpp"
#include "rng.hpp"

namespace randpoly {

/// A j-dimensional linear subspace of R^d given by an orthonormal basis (d x j).
struct Subspace
{
    int ambient_dim = 0;
    int dim = 0;
    Eigen::MatrixXd basis;
};

inline double binomial(int n, int k)
{
    if (k < 0 || k > n) {
        return 0.0;
    }
    return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

/// C(d, j) kappa_d / (kappa_j kappa_{d-j}): V_j = constant * E[Lambda_j(K | L)].
inline double kubota_constant(int d, int j)
{
    return binomial(d, j) * unit_ball_volume(d) / (unit_ball_volume(j) * unit_ball_volume(d - j));
}

/// Haar-distributed subspace: orthonormalized d x j standard Gaussian matrix,
/// redrawn on numerical rank deficiency.
inline Subspace sample_haar_subspace(int d, int j, Philox& rng)
{
    require(1 <= j && j <= d, "subspace dimension must satisfy 1 <= j <= d");
    std::normal_distribution<double> normal;
    Eigen::MatrixXd g(d, j);
    while (true) {
        for (int c = 0; c < j; ++c) {
            for (int r = 0; r < d; ++r) {
                g(r, c) = normal(rng);
            }
        }
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        const Eigen::MatrixXd r = qr.matrixQR().topRows(j).template triangularView<Eigen::Upper>();
        const double scale = r.diagonal().cwiseAbs().maxCoeff();
        if (r.diagonal().cwiseAbs().minCoeff() <= 1e-10 * scale) {
            continue;
        }
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, j);
        // fix column signs so the basis is a deterministic function of g
        for (int c = 0; c < j; ++c) {
            if (r(c, c) < 0.0) {
                q.col(c) = -q.col(c);
            }
        }
        return Subspace{d, j, std::move(q)};
    }
}

/// Vertex images in subspace coordinates.
inline PointCloud project(const Polytope& poly, const Subspace& sub)
{
    require(sub.ambient_dim == poly.dim(), "subspace ambient dimension does not match polytope dimension");
    PointCloud out(sub.dim);
    const Eigen::MatrixXd images = sub.basis.transpose() * poly.vertices();
    out.coords.assign(images.data(), images.data() + images.size());
    return out;
}

/// j-volume of the projection of the polytope onto the subspace.
inline double projected_volume(const Polytope& poly, const Subspace& sub)
{
    if (poly.empty() || poly.affine_dim() < sub.dim) {
        return 0.0;
    }
    if (sub.dim == 1) {
        const Eigen::RowVectorXd images = sub.basis.col(0).transpose() * poly.vertices();
        return images.maxCoeff() - images.minCoeff();
    }
    return convex_hull(project(poly, sub)).volume();
}

struct McEstimate
{
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Kubota estimate of V_j from n_dirs Haar subspaces, with its Monte Carlo
/// standard error.
inline McEstimate intrinsic_volume_mc(const Polytope& poly, int j, int n_dirs, Philox& rng)
{
    const int d = poly.dim();
    require(1 <= j && j <= d, "intrinsic volume index must satisfy 1 <= j <= d");
    require(n_dirs >= 2, "n_dirs must be >= 2");
    if (poly.empty() || poly.affine_dim() < j) {
        return {0.0, 0.0};
    }
    if (j == d) {
        return {poly.volume(), 0.0};
    }
    double mean = 0.0;
    double m2 = 0.0;
    for (int k = 0; k < n_dirs; ++k) {
        const double x = projected_volume(poly, sample_haar_subspace(d, j, rng));
        const double delta = x - mean;
        mean += delta / (k + 1);
        m2 += delta * (x - mean);
    }
    const double c = kubota_constant(d, j);
    const double sd = std::sqrt(m2 / (n_dirs - 1));
    return {c * mean, c * sd / std::sqrt(static_cast<double>(n_dirs))};
}

namespace detail {

/// Intrinsic volumes of a full-dimensional polytope in R^d, d <= 3.
inline std::vector<double> full_intrinsic_volumes(const Polytope& poly)
{
    const int d = poly.dim();
    std::vector<double> v(static_cast<std::size_t>(d + 1), 0.0);
    v[0] = 1.0;
    v[static_cast<std::size_t>(d)] = poly.volume();
    if (d == 2) {
        v[1] = 0.5 * poly.surface_measure();
    } else if (d == 3) {
        v[2] = 0.5 * poly.surface_measure();
        // mean width term: edge length times exterior angle over 2 pi
        std::vector<std::vector<int>> incident(poly.num_vertices());
        const auto& facets = poly.facets();
        for (std::size_t f = 0; f < facets.size(); ++f) {
            for (int vtx : facets[f].vertices) {
                incident[static_cast<std::size_t>(vtx)].push_back(static_cast<int>(f));
            }
        }
        double sum = 0.0;
        for (const Face& edge : poly.faces()[1]) {
            const auto& a = incident[static_cast<std::size_t>(edge[0])];
            const auto& b = incident[static_cast<std::size_t>(edge[1])];
            std::vector<int> common;
            std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
            if (common.size() != 2) {
                throw NumericError("edge is not incident to exactly two facets");
            }
            const double cosine = std::clamp(
                facets[static_cast<std::size_t>(common[0])].normal.dot(facets[static_cast<std::size_t>(common[1])].normal),
                -1.0, 1.0);
            const double length = (poly.vertex(static_cast<std::size_t>(edge[0])) -
                                   poly.vertex(static_cast<std::size_t>(edge[1]))).norm();
            sum += length * std::acos(cosine);
        }
        v[1] = sum / (2.0 * std::numbers::pi);
    }
    return v;
}

} // namespace detail

/// (V_0, ..., V_d) for ambient dimension d <= 3. Lower-dimensional polytopes take
/// the values of their relative hull (intrinsic volumes do not depend on the
/// ambient space).
inline std::vector<double> exact_intrinsic_volumes(const Polytope& poly)
{
    const int d = poly.dim();
    if (d > 3) {
        throw InputError("exact intrinsic volumes are implemented for dimension <= 3; use intrinsic_volume_mc");
    }
    std::vector<double> v(static_cast<std::size_t>(d + 1), 0.0);
    switch (poly.degeneracy()) {
    case Degeneracy::empty:
        return v;
    case Degeneracy::point:
        v[0] = 1.0;
        return v;
    case Degeneracy::lower_dimensional: {
        const std::vector<double> rel = exact_intrinsic_volumes(*poly.relative());
        std::copy(rel.begin(), rel.end(), v.begin());
        return v;
    }
    case Degeneracy::full_dimensional:
        return detail::full_intrinsic_volumes(poly);
    }
    return v;
}

} // namespace randpoly
