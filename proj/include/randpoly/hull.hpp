#pragma once

// General-dimension convex hull with full face lattice.
//
// The boundary is built by Quickhull as a simplicial complex. Adjacent simplices
// lying in a common hyperplane (within tolerance) are merged into one facet, so
// non-simplicial inputs such as cube vertices produce their true facets. Faces of
// lower dimension are obtained by downward closure from the facets.
//
// Points are assumed to be in general position up to the tolerance
// 1e-12 * diameter; no exact predicates are used. A point within tolerance of a
// facet hyperplane is treated as lying on it, and among equidistant candidates the
// lowest input index is processed first.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "bodies.hpp"
#include "error.hpp"

namespace randpoly {

inline constexpr double kRelativeTolerance = 1e-12;

enum class Degeneracy { empty, point, lower_dimensional, full_dimensional };

inline const char* to_string(Degeneracy d)
{
    switch (d) {
    case Degeneracy::empty:
        return "empty";
    case Degeneracy::point:
        return "point";
    case Degeneracy::lower_dimensional:
        return "lower_dimensional";
    case Degeneracy::full_dimensional:
        return "full_dimensional";
    }
    return "?";
}

using Face = std::vector<int>;

/// A facet: sorted vertex indices, outward unit normal and offset (normal . x <= offset
/// inside), and (d-1)-volume.
struct Facet
{
    Face vertices;
    Vec normal;
    double offset = 0.0;
    double area = 0.0;
};

struct FVector
{
    std::vector<long> counts;

    [[nodiscard]] long operator[](std::size_t i) const { return counts[i]; }
    [[nodiscard]] std::size_t size() const { return counts.size(); }

    /// sum_i (-1)^i f_i
    [[nodiscard]] long euler_characteristic() const
    {
        long chi = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            chi += (i % 2 == 0 ? 1 : -1) * counts[i];
        }
        return chi;
    }

    friend bool operator==(const FVector&, const FVector&) = default;
};

class Polytope;
Polytope convex_hull(const PointCloud& cloud);

class Polytope
{
public:
    Polytope() = default;

    [[nodiscard]] int dim() const { return dim_; }
    /// Dimension of the affine hull; -1 when empty.
    [[nodiscard]] int affine_dim() const { return affine_dim_; }
    [[nodiscard]] Degeneracy degeneracy() const { return degeneracy_; }
    [[nodiscard]] bool empty() const { return degeneracy_ == Degeneracy::empty; }
    [[nodiscard]] bool full_dimensional() const { return degeneracy_ == Degeneracy::full_dimensional; }

    /// Vertex coordinates, one column per vertex.
    [[nodiscard]] const Eigen::MatrixXd& vertices() const { return vertices_; }
    [[nodiscard]] std::size_t num_vertices() const { return static_cast<std::size_t>(vertices_.cols()); }
    [[nodiscard]] Vec vertex(std::size_t i) const { return vertices_.col(static_cast<Eigen::Index>(i)); }

    /// Index of each vertex in the point cloud the hull was built from.
    [[nodiscard]] const std::vector<std::size_t>& source_indices() const { return source_; }

    /// faces()[i] lists the i-faces (i = 0..d-1) as sorted vertex-index sets. A
    /// lower-dimensional polytope lists itself as its single affine_dim()-face.
    [[nodiscard]] const std::vector<std::vector<Face>>& faces() const { return faces_; }

    /// Facets of a full-dimensional polytope; empty otherwise.
    [[nodiscard]] const std::vector<Facet>& facets() const { return facets_; }

    /// The polytope expressed in an orthonormal frame of its affine hull (only for
    /// lower-dimensional polytopes of affine dimension >= 1).
    [[nodiscard]] const Polytope* relative() const { return relative_.get(); }

    [[nodiscard]] double tolerance() const { return tolerance_; }

    /// d-dimensional volume; 0 unless full-dimensional.
    [[nodiscard]] double volume() const { return volume_; }

    /// Sum of facet (d-1)-volumes; throws NumericError unless full-dimensional.
    [[nodiscard]] double surface_measure() const
    {
        if (!full_dimensional()) {
            throw NumericError("surface measure is defined for full-dimensional polytopes only");
        }
        return surface_;
    }

    /// Closed membership within tolerance().
    [[nodiscard]] bool contains(std::span<const double> x) const
    {
        require(static_cast<int>(x.size()) == dim_, "point dimension does not match polytope dimension");
        const Eigen::Map<const Vec> p(x.data(), dim_);
        switch (degeneracy_) {
        case Degeneracy::empty:
            return false;
        case Degeneracy::point:
            return (p - vertices_.col(0)).norm() <= tolerance_;
        case Degeneracy::full_dimensional:
            return std::all_of(facets_.begin(), facets_.end(),
                               [&](const Facet& f) { return f.normal.dot(p) - f.offset <= tolerance_; });
        case Degeneracy::lower_dimensional: {
            const Vec local = frame_.transpose() * (p - origin_);
            if ((p - origin_ - frame_ * local).norm() > tolerance_) {
                return false;
            }
            return relative_->contains(std::span<const double>(local.data(), static_cast<std::size_t>(local.size())));
        }
        }
        return false;
    }

    [[nodiscard]] bool contains(const Vec& x) const
    {
        return contains(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    }

    /// The vertices as a point cloud (ambient coordinates).
    [[nodiscard]] PointCloud vertex_cloud() const
    {
        PointCloud cloud(dim_);
        cloud.coords.assign(vertices_.data(), vertices_.data() + vertices_.size());
        return cloud;
    }

private:
    friend struct HullBuilder;

    int dim_ = 0;
    int affine_dim_ = -1;
    Degeneracy degeneracy_ = Degeneracy::empty;
    Eigen::MatrixXd vertices_;
    std::vector<std::size_t> source_;
    std::vector<std::vector<Face>> faces_;
    std::vector<Facet> facets_;
    std::shared_ptr<const Polytope> relative_;
    Eigen::MatrixXd frame_;
    Vec origin_;
    double tolerance_ = 0.0;
    double volume_ = 0.0;
    double surface_ = 0.0;
};

namespace detail {

inline double factorial(int n)
{
    return std::tgamma(n + 1.0);
}

/// Greedy affinely independent subset (pivoted Gram-Schmidt). Returns the chosen
/// point indices; their count minus one is the affine dimension within eps. The
/// orthonormal directions spanning the affine hull are written to `frame`.
inline std::vector<int> affine_frame(const double* coords, int n, int d, double eps, Eigen::MatrixXd& frame)
{
    auto pt = [&](int i) { return Eigen::Map<const Vec>(coords + static_cast<std::ptrdiff_t>(i) * d, d); };
    std::vector<int> chosen;
    frame.resize(d, 0);
    if (n == 0) {
        return chosen;
    }
    int first = 0;
    for (int i = 1; i < n; ++i) {
        if (coords[static_cast<std::ptrdiff_t>(i) * d] < coords[static_cast<std::ptrdiff_t>(first) * d]) {
            first = i;
        }
    }
    chosen.push_back(first);
    const Vec origin = pt(first);
    std::vector<Vec> directions;
    for (int k = 0; k < d; ++k) {
        int best = -1;
        double best_dist = eps;
        for (int i = 0; i < n; ++i) {
            Vec r = pt(i) - origin;
            for (const Vec& b : directions) {
                r -= b.dot(r) * b;
            }
            const double dist = r.norm();
            if (dist > best_dist) {
                best_dist = dist;
                best = i;
            }
        }
        if (best < 0) {
            break;
        }
        Vec r = pt(best) - origin;
        for (const Vec& b : directions) {
            r -= b.dot(r) * b;
        }
        // second pass restores orthogonality lost to cancellation
        for (const Vec& b : directions) {
            r -= b.dot(r) * b;
        }
        directions.push_back(r.normalized());
        chosen.push_back(best);
    }
    frame.resize(d, static_cast<Eigen::Index>(directions.size()));
    for (std::size_t k = 0; k < directions.size(); ++k) {
        frame.col(static_cast<Eigen::Index>(k)) = directions[k];
    }
    return chosen;
}

/// Unit normal of the hyperplane through d points in R^d (sign arbitrary).
inline Vec hyperplane_normal(const std::vector<const double*>& pts, int d)
{
    Vec n(d);
    if (d == 2) {
        n << -(pts[1][1] - pts[0][1]), pts[1][0] - pts[0][0];
    } else if (d == 3) {
        const Eigen::Vector3d a(pts[1][0] - pts[0][0], pts[1][1] - pts[0][1], pts[1][2] - pts[0][2]);
        const Eigen::Vector3d b(pts[2][0] - pts[0][0], pts[2][1] - pts[0][1], pts[2][2] - pts[0][2]);
        n = a.cross(b);
    } else {
        Eigen::MatrixXd a(d, d - 1);
        for (int k = 1; k < d; ++k) {
            for (int i = 0; i < d; ++i) {
                a(i, k - 1) = pts[static_cast<std::size_t>(k)][i] - pts[0][i];
            }
        }
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        n = qr.householderQ() * Vec::Unit(d, d - 1);
    }
    return n.normalized();
}

/// (d-1)-volume of the simplex spanned by d points in R^d.
inline double simplex_facet_area(const std::vector<const double*>& pts, int d)
{
    if (d == 1) {
        return 1.0;
    }
    Eigen::MatrixXd a(d, d - 1);
    for (int k = 1; k < d; ++k) {
        for (int i = 0; i < d; ++i) {
            a(i, k - 1) = pts[static_cast<std::size_t>(k)][i] - pts[0][i];
        }
    }
    const double gram = (a.transpose() * a).determinant();
    return std::sqrt(std::max(gram, 0.0)) / factorial(d - 1);
}

struct HullFacet
{
    std::vector<int> verts;
    std::vector<int> neighbors; // neighbors[k] shares every vertex except verts[k]
    Vec normal;
    double offset = 0.0;
    std::vector<int> outside;
    int furthest = -1;
    double furthest_dist = 0.0;
    bool alive = true;
    unsigned visit = 0;
};

/// Quickhull for n points in R^d, d >= 2, whose affine hull is all of R^d.
class QuickHull
{
public:
    QuickHull(const double* coords, int n, int d, double eps, const std::vector<int>& simplex)
        : coords_(coords), n_(n), d_(d), eps_(eps)
    {
        build_initial(simplex);
        run();
    }

    [[nodiscard]] std::vector<HullFacet> take_facets()
    {
        std::vector<HullFacet> out;
        std::vector<int> remap(facets_.size(), -1);
        for (std::size_t f = 0; f < facets_.size(); ++f) {
            if (facets_[f].alive) {
                remap[f] = static_cast<int>(out.size());
                out.push_back(std::move(facets_[f]));
            }
        }
        for (HullFacet& f : out) {
            for (int& g : f.neighbors) {
                g = remap[static_cast<std::size_t>(g)];
            }
        }
        return out;
    }

    [[nodiscard]] const Vec& interior() const { return interior_; }

private:
    [[nodiscard]] const double* ptr(int i) const { return coords_ + static_cast<std::ptrdiff_t>(i) * d_; }

    [[nodiscard]] double distance(const HullFacet& f, int i) const
    {
        const double* p = ptr(i);
        double s = -f.offset;
        for (int k = 0; k < d_; ++k) {
            s += f.normal[k] * p[k];
        }
        return s;
    }

    void set_plane(HullFacet& f) const
    {
        std::vector<const double*> pts;
        pts.reserve(static_cast<std::size_t>(d_));
        for (int v : f.verts) {
            pts.push_back(ptr(v));
        }
        f.normal = hyperplane_normal(pts, d_);
        const Eigen::Map<const Vec> p0(pts[0], d_);
        f.offset = f.normal.dot(p0);
        if (f.normal.dot(interior_) - f.offset > 0.0) {
            f.normal = -f.normal;
            f.offset = -f.offset;
        }
    }

    int new_facet()
    {
        if (!free_.empty()) {
            const int id = free_.back();
            free_.pop_back();
            facets_[static_cast<std::size_t>(id)] = HullFacet{};
            return id;
        }
        facets_.emplace_back();
        return static_cast<int>(facets_.size()) - 1;
    }

    void assign(HullFacet& f, int point, double dist)
    {
        f.outside.push_back(point);
        if (dist > f.furthest_dist || (dist == f.furthest_dist && point < f.furthest)) {
            f.furthest_dist = dist;
            f.furthest = point;
        }
    }

    void build_initial(const std::vector<int>& simplex)
    {
        interior_ = Vec::Zero(d_);
        for (int v : simplex) {
            interior_ += Eigen::Map<const Vec>(ptr(v), d_);
        }
        interior_ /= static_cast<double>(simplex.size());

        const int m = d_ + 1;
        facets_.resize(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            HullFacet& f = facets_[static_cast<std::size_t>(i)];
            for (int k = 0; k < m; ++k) {
                if (k != i) {
                    f.verts.push_back(simplex[static_cast<std::size_t>(k)]);
                    f.neighbors.push_back(k);
                }
            }
            set_plane(f);
        }
        std::vector<char> in_simplex(static_cast<std::size_t>(n_), 0);
        for (int v : simplex) {
            in_simplex[static_cast<std::size_t>(v)] = 1;
        }
        for (int i = 0; i < n_; ++i) {
            if (in_simplex[static_cast<std::size_t>(i)]) {
                continue;
            }
            for (HullFacet& f : facets_) {
                const double dist = distance(f, i);
                if (dist > eps_) {
                    assign(f, i, dist);
                    break;
                }
            }
        }
    }

    void run()
    {
        std::vector<int> pending;
        for (int f = 0; f < static_cast<int>(facets_.size()); ++f) {
            pending.push_back(f);
        }
        std::vector<int> visible;
        std::vector<int> stack;
        std::vector<int> created;
        std::vector<int> orphans;
        std::map<std::vector<int>, std::pair<int, int>> ridges;

        while (!pending.empty()) {
            const int start = pending.back();
            pending.pop_back();
            {
                const HullFacet& f = facets_[static_cast<std::size_t>(start)];
                if (!f.alive || f.outside.empty()) {
                    continue;
                }
            }
            const int apex = facets_[static_cast<std::size_t>(start)].furthest;

            // visible region by flood fill from the start facet
            ++stamp_;
            visible.clear();
            stack.assign(1, start);
            facets_[static_cast<std::size_t>(start)].visit = stamp_;
            while (!stack.empty()) {
                const int f = stack.back();
                stack.pop_back();
                visible.push_back(f);
                for (int g : facets_[static_cast<std::size_t>(f)].neighbors) {
                    HullFacet& nb = facets_[static_cast<std::size_t>(g)];
                    if (nb.visit == stamp_) {
                        continue;
                    }
                    if (distance(nb, apex) > eps_) {
                        nb.visit = stamp_;
                        stack.push_back(g);
                    }
                }
            }

            // cone from the apex over the horizon ridges
            created.clear();
            ridges.clear();
            for (int f : visible) {
                for (int k = 0; k < d_; ++k) {
                    const int g = facets_[static_cast<std::size_t>(f)].neighbors[static_cast<std::size_t>(k)];
                    if (facets_[static_cast<std::size_t>(g)].visit == stamp_) {
                        continue;
                    }
                    const int id = new_facet();
                    HullFacet& nf = facets_[static_cast<std::size_t>(id)];
                    const HullFacet& vf = facets_[static_cast<std::size_t>(f)];
                    nf.verts = vf.verts;
                    nf.verts[static_cast<std::size_t>(k)] = apex;
                    nf.neighbors.assign(static_cast<std::size_t>(d_), -1);
                    nf.neighbors[static_cast<std::size_t>(k)] = g;
                    HullFacet& hf = facets_[static_cast<std::size_t>(g)];
                    for (int& back : hf.neighbors) {
                        if (back == f) {
                            back = id;
                        }
                    }
                    set_plane(nf);
                    created.push_back(id);
                    for (int q = 0; q < d_; ++q) {
                        if (q == k) {
                            continue;
                        }
                        std::vector<int> key;
                        key.reserve(static_cast<std::size_t>(d_ - 1));
                        for (int r = 0; r < d_; ++r) {
                            if (r != q) {
                                key.push_back(nf.verts[static_cast<std::size_t>(r)]);
                            }
                        }
                        std::sort(key.begin(), key.end());
                        auto [it, inserted] = ridges.try_emplace(std::move(key), id, q);
                        if (!inserted) {
                            const auto [other, other_q] = it->second;
                            nf.neighbors[static_cast<std::size_t>(q)] = other;
                            facets_[static_cast<std::size_t>(other)].neighbors[static_cast<std::size_t>(other_q)] = id;
                        }
                    }
                }
            }

            // redistribute outside points of the removed facets
            orphans.clear();
            for (int f : visible) {
                HullFacet& vf = facets_[static_cast<std::size_t>(f)];
                for (int p : vf.outside) {
                    if (p != apex) {
                        orphans.push_back(p);
                    }
                }
                vf.alive = false;
                vf.outside.clear();
                vf.outside.shrink_to_fit();
                free_.push_back(f);
            }
            std::sort(orphans.begin(), orphans.end());
            for (int p : orphans) {
                for (int id : created) {
                    HullFacet& nf = facets_[static_cast<std::size_t>(id)];
                    const double dist = distance(nf, p);
                    if (dist > eps_) {
                        assign(nf, p, dist);
                        break;
                    }
                }
            }
            for (int id : created) {
                if (!facets_[static_cast<std::size_t>(id)].outside.empty()) {
                    pending.push_back(id);
                }
            }
        }
    }

    const double* coords_;
    int n_;
    int d_;
    double eps_;
    Vec interior_;
    std::vector<HullFacet> facets_;
    std::vector<int> free_;
    unsigned stamp_ = 0;
};

inline int find_root(std::vector<int>& parent, int i)
{
    while (parent[static_cast<std::size_t>(i)] != i) {
        parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
        i = parent[static_cast<std::size_t>(i)];
    }
    return i;
}

inline int affine_rank(const Eigen::MatrixXd& pts, const Face& face, double eps)
{
    if (face.size() <= 1) {
        return static_cast<int>(face.size()) - 1;
    }
    Eigen::MatrixXd a(pts.rows(), static_cast<Eigen::Index>(face.size() - 1));
    for (std::size_t k = 1; k < face.size(); ++k) {
        a.col(static_cast<Eigen::Index>(k - 1)) = pts.col(face[k]) - pts.col(face[0]);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(0.0);
    int rank = 0;
    const Eigen::MatrixXd r = qr.matrixR().template triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < std::min(r.rows(), r.cols()); ++i) {
        if (std::abs(r(i, i)) > eps) {
            ++rank;
        }
    }
    return rank;
}

inline void sort_unique(std::vector<Face>& faces)
{
    std::sort(faces.begin(), faces.end());
    faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
}

/// All k-subsets of a sorted vertex set.
inline void append_subsets(const Face& set, std::size_t k, std::vector<Face>& out)
{
    const std::size_t n = set.size();
    if (k == 0 || k > n) {
        return;
    }
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        Face f(k);
        for (std::size_t i = 0; i < k; ++i) {
            f[i] = set[idx[i]];
        }
        out.push_back(std::move(f));
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + i - 1) {
            --i;
        }
        if (i == 0) {
            return;
        }
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

inline Face intersect(const Face& a, const Face& b)
{
    Face out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

} // namespace detail

struct HullBuilder
{
    static Polytope build(const double* coords, std::size_t n_points, int d, double eps)
    {
        Polytope poly;
        poly.dim_ = d;
        poly.tolerance_ = eps;
        poly.faces_.assign(static_cast<std::size_t>(d), {});
        const int n = static_cast<int>(n_points);
        if (n == 0) {
            poly.degeneracy_ = Degeneracy::empty;
            poly.affine_dim_ = -1;
            poly.vertices_.resize(d, 0);
            return poly;
        }
        Eigen::MatrixXd frame;
        const std::vector<int> simplex = detail::affine_frame(coords, n, d, eps, frame);
        const int k = static_cast<int>(simplex.size()) - 1;
        if (k == 0) {
            poly.degeneracy_ = Degeneracy::point;
            poly.affine_dim_ = 0;
            poly.vertices_ = Eigen::Map<const Vec>(coords + static_cast<std::ptrdiff_t>(simplex[0]) * d, d);
            poly.source_ = {static_cast<std::size_t>(simplex[0])};
            poly.faces_[0] = {{0}};
            return poly;
        }
        if (k < d) {
            return build_lower(coords, n, d, eps, simplex, frame);
        }
        if (d == 1) {
            return build_segment(coords, n, eps);
        }
        return build_full(coords, n, d, eps, simplex);
    }

private:
    static Polytope build_segment(const double* coords, int n, double eps)
    {
        int lo = 0;
        int hi = 0;
        for (int i = 1; i < n; ++i) {
            if (coords[i] < coords[lo]) {
                lo = i;
            }
            if (coords[i] > coords[hi]) {
                hi = i;
            }
        }
        Polytope poly;
        poly.dim_ = 1;
        poly.tolerance_ = eps;
        poly.degeneracy_ = Degeneracy::full_dimensional;
        poly.affine_dim_ = 1;
        poly.vertices_.resize(1, 2);
        poly.vertices_(0, 0) = coords[lo];
        poly.vertices_(0, 1) = coords[hi];
        poly.source_ = {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
        poly.faces_ = {{{0}, {1}}};
        poly.facets_ = {Facet{{0}, Vec::Constant(1, -1.0), -coords[lo], 1.0},
                        Facet{{1}, Vec::Constant(1, 1.0), coords[hi], 1.0}};
        poly.volume_ = coords[hi] - coords[lo];
        poly.surface_ = 2.0;
        return poly;
    }

    static Polytope build_lower(const double* coords, int n, int d, double eps, const std::vector<int>& simplex,
                                const Eigen::MatrixXd& frame)
    {
        const int k = static_cast<int>(frame.cols());
        const Vec origin = Eigen::Map<const Vec>(coords + static_cast<std::ptrdiff_t>(simplex[0]) * d, d);
        std::vector<double> local(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
        for (int i = 0; i < n; ++i) {
            const Eigen::Map<const Vec> p(coords + static_cast<std::ptrdiff_t>(i) * d, d);
            Eigen::Map<Vec>(local.data() + static_cast<std::ptrdiff_t>(i) * k, k) = frame.transpose() * (p - origin);
        }
        auto rel = std::make_shared<Polytope>(build(local.data(), static_cast<std::size_t>(n), k, eps));

        Polytope poly;
        poly.dim_ = d;
        poly.tolerance_ = eps;
        poly.degeneracy_ = Degeneracy::lower_dimensional;
        poly.affine_dim_ = rel->affine_dim();
        poly.source_ = rel->source_;
        poly.vertices_.resize(d, rel->vertices_.cols());
        for (std::size_t v = 0; v < poly.source_.size(); ++v) {
            poly.vertices_.col(static_cast<Eigen::Index>(v)) =
                Eigen::Map<const Vec>(coords + static_cast<std::ptrdiff_t>(poly.source_[v]) * d, d);
        }
        poly.faces_.assign(static_cast<std::size_t>(d), {});
        for (std::size_t i = 0; i < rel->faces_.size(); ++i) {
            poly.faces_[i] = rel->faces_[i];
        }
        Face all(poly.source_.size());
        std::iota(all.begin(), all.end(), 0);
        poly.faces_[static_cast<std::size_t>(k)] = {all};
        poly.frame_ = frame;
        poly.origin_ = origin;
        poly.relative_ = std::move(rel);
        return poly;
    }

    static Polytope build_full(const double* coords, int n, int d, double eps, const std::vector<int>& simplex)
    {
        detail::QuickHull qh(coords, n, d, eps, simplex);
        std::vector<detail::HullFacet> simplices = qh.take_facets();
        auto pt = [&](int i) { return coords + static_cast<std::ptrdiff_t>(i) * d; };

        // merge coplanar neighbours into true facets
        std::vector<int> parent(simplices.size());
        std::iota(parent.begin(), parent.end(), 0);
        bool merged = false;
        for (std::size_t f = 0; f < simplices.size(); ++f) {
            const auto& sf = simplices[f];
            for (int g : sf.neighbors) {
                const auto& sg = simplices[static_cast<std::size_t>(g)];
                for (int w : sg.verts) {
                    if (std::find(sf.verts.begin(), sf.verts.end(), w) != sf.verts.end()) {
                        continue;
                    }
                    const double dist = sf.normal.dot(Eigen::Map<const Vec>(pt(w), d)) - sf.offset;
                    if (std::abs(dist) <= eps && sf.normal.dot(sg.normal) > 0.0) {
                        const int a = detail::find_root(parent, static_cast<int>(f));
                        const int b = detail::find_root(parent, g);
                        if (a != b) {
                            parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
                            merged = true;
                        }
                    }
                }
            }
        }

        // volume by fan triangulation from the centroid of the boundary points
        Vec centroid = Vec::Zero(d);
        std::vector<int> used;
        for (const auto& s : simplices) {
            used.insert(used.end(), s.verts.begin(), s.verts.end());
        }
        std::sort(used.begin(), used.end());
        used.erase(std::unique(used.begin(), used.end()), used.end());
        for (int v : used) {
            centroid += Eigen::Map<const Vec>(pt(v), d);
        }
        centroid /= static_cast<double>(used.size());

        double volume = 0.0;
        std::map<int, std::size_t> group_index;
        std::vector<Facet> groups;
        std::vector<const double*> pts(static_cast<std::size_t>(d));
        Eigen::MatrixXd m(d, d);
        for (std::size_t f = 0; f < simplices.size(); ++f) {
            const auto& s = simplices[f];
            for (int k = 0; k < d; ++k) {
                pts[static_cast<std::size_t>(k)] = pt(s.verts[static_cast<std::size_t>(k)]);
                m.col(k) = Eigen::Map<const Vec>(pts[static_cast<std::size_t>(k)], d) - centroid;
            }
            volume += std::abs(m.determinant()) / detail::factorial(d);
            const double area = detail::simplex_facet_area(pts, d);
            const int root = detail::find_root(parent, static_cast<int>(f));
            auto [it, inserted] = group_index.try_emplace(root, groups.size());
            if (inserted) {
                groups.push_back(Facet{{}, simplices[static_cast<std::size_t>(root)].normal,
                                       simplices[static_cast<std::size_t>(root)].offset, 0.0});
            }
            Facet& g = groups[it->second];
            g.vertices.insert(g.vertices.end(), s.verts.begin(), s.verts.end());
            g.area += area;
        }
        for (Facet& g : groups) {
            std::sort(g.vertices.begin(), g.vertices.end());
            g.vertices.erase(std::unique(g.vertices.begin(), g.vertices.end()), g.vertices.end());
        }

        if (merged) {
            // drop boundary points that are not vertices: a vertex is the sole common
            // point of the facets containing it
            std::vector<int> keep;
            for (int v : used) {
                Face common;
                bool first = true;
                for (const Facet& g : groups) {
                    if (!std::binary_search(g.vertices.begin(), g.vertices.end(), v)) {
                        continue;
                    }
                    common = first ? g.vertices : detail::intersect(common, g.vertices);
                    first = false;
                }
                if (common.size() == 1) {
                    keep.push_back(v);
                }
            }
            for (Facet& g : groups) {
                Face filtered;
                std::set_intersection(g.vertices.begin(), g.vertices.end(), keep.begin(), keep.end(),
                                      std::back_inserter(filtered));
                g.vertices = std::move(filtered);
            }
            used = std::move(keep);
        }

        // compact vertex numbering in order of source index
        std::unordered_map<int, int> compact;
        Polytope poly;
        poly.dim_ = d;
        poly.tolerance_ = eps;
        poly.degeneracy_ = Degeneracy::full_dimensional;
        poly.affine_dim_ = d;
        poly.volume_ = volume;
        poly.vertices_.resize(d, static_cast<Eigen::Index>(used.size()));
        for (std::size_t i = 0; i < used.size(); ++i) {
            compact.emplace(used[i], static_cast<int>(i));
            poly.vertices_.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Vec>(pt(used[i]), d);
            poly.source_.push_back(static_cast<std::size_t>(used[i]));
        }
        for (Facet& g : groups) {
            for (int& v : g.vertices) {
                v = compact.at(v);
            }
            std::sort(g.vertices.begin(), g.vertices.end());
            poly.surface_ += g.area;
        }
        std::sort(groups.begin(), groups.end(), [](const Facet& a, const Facet& b) { return a.vertices < b.vertices; });
        poly.facets_ = std::move(groups);

        poly.faces_.assign(static_cast<std::size_t>(d), {});
        const bool simplicial = std::all_of(poly.facets_.begin(), poly.facets_.end(), [d](const Facet& f) {
            return static_cast<int>(f.vertices.size()) == d;
        });
        if (simplicial) {
            for (const Facet& f : poly.facets_) {
                for (int i = 0; i < d; ++i) {
                    detail::append_subsets(f.vertices, static_cast<std::size_t>(i + 1), poly.faces_[static_cast<std::size_t>(i)]);
                }
            }
            for (auto& level : poly.faces_) {
                detail::sort_unique(level);
            }
        } else {
            // every face is an intersection of facets
            std::vector<Face> all;
            std::vector<Face> work;
            for (const Facet& f : poly.facets_) {
                all.push_back(f.vertices);
            }
            detail::sort_unique(all);
            work = all;
            while (!work.empty()) {
                const Face face = std::move(work.back());
                work.pop_back();
                for (const Facet& f : poly.facets_) {
                    Face cut = detail::intersect(face, f.vertices);
                    if (cut.empty() || cut.size() == face.size()) {
                        continue;
                    }
                    auto it = std::lower_bound(all.begin(), all.end(), cut);
                    if (it == all.end() || *it != cut) {
                        all.insert(it, cut);
                        work.push_back(std::move(cut));
                    }
                }
            }
            for (Face& face : all) {
                const int rank = detail::affine_rank(poly.vertices_, face, eps);
                if (rank >= 0 && rank < d) {
                    poly.faces_[static_cast<std::size_t>(rank)].push_back(std::move(face));
                }
            }
            for (auto& level : poly.faces_) {
                detail::sort_unique(level);
            }
        }
        return poly;
    }
};

/// Tolerance used for a point cloud: 1e-12 times its bounding-box diagonal.
inline double hull_tolerance(const PointCloud& cloud)
{
    if (cloud.empty()) {
        return 0.0;
    }
    const std::size_t n = cloud.size();
    Vec lo = cloud.point(0);
    Vec hi = lo;
    for (std::size_t i = 1; i < n; ++i) {
        lo = lo.cwiseMin(cloud.point(i));
        hi = hi.cwiseMax(cloud.point(i));
    }
    const double diameter = (hi - lo).norm();
    return kRelativeTolerance * std::max(diameter, 1e-300);
}

/// Convex hull with full face lattice. Degenerate inputs are encoded in
/// Polytope::degeneracy(), never reported as errors.
inline Polytope convex_hull(const PointCloud& cloud)
{
    require(cloud.dim >= 1, "point cloud dimension must be >= 1");
    return HullBuilder::build(cloud.coords.data(), cloud.size(), cloud.dim, hull_tolerance(cloud));
}

inline Polytope convex_hull(const PointCloud& cloud, double tolerance)
{
    require(cloud.dim >= 1, "point cloud dimension must be >= 1");
    return HullBuilder::build(cloud.coords.data(), cloud.size(), cloud.dim, tolerance);
}

/// Hull of a polytope's vertices together with extra points.
inline Polytope convex_hull_with(const Polytope& poly, std::span<const Vec> extra)
{
    PointCloud cloud = poly.vertex_cloud();
    cloud.dim = poly.dim();
    for (const Vec& x : extra) {
        cloud.push_back(x);
    }
    return convex_hull(cloud);
}

inline FVector f_vector(const Polytope& poly)
{
    FVector f;
    for (const auto& level : poly.faces()) {
        f.counts.push_back(static_cast<long>(level.size()));
    }
    return f;
}

inline double volume(const Polytope& poly)
{
    return poly.volume();
}

inline double surface_measure(const Polytope& poly)
{
    return poly.surface_measure();
}

} // namespace randpoly
