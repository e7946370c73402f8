#pragma once

// Random inputs and constructed configurations shared by the test suites and
// the acceptance run.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include <randpoly/bodies.hpp>
#include <randpoly/hull.hpp>
#include <randpoly/rng.hpp>

namespace randpoly::fixture {

inline PointCloud random_ball_points(int d, int n, Philox& rng)
{
    const ConvexBody ball = ConvexBody::ball(d);
    PointCloud c(d);
    for (int i = 0; i < n; ++i) {
        c.push_back(sample_uniform(ball, rng));
    }
    return c;
}

inline std::set<std::vector<std::size_t>> facet_sources(const Polytope& p)
{
    std::set<std::vector<std::size_t>> out;
    for (const Facet& f : p.facets()) {
        std::vector<std::size_t> s;
        for (int v : f.vertices) {
            s.push_back(p.source_indices()[static_cast<std::size_t>(v)]);
        }
        std::sort(s.begin(), s.end());
        out.insert(s);
    }
    return out;
}

struct VisibilityCase
{
    PointCloud cloud;
    Vec x;
    Vec y;
};

// Regular polygon with x and y just beyond two opposite edges, so the regions of
// the boundary they see are disjoint.
inline VisibilityCase polygon_case(Philox& rng)
{
    const int n = 8 + static_cast<int>(rng() % 33);
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double radius = 0.5 + 0.3 * rng.uniform();
    VisibilityCase c{PointCloud(2), Vec(2), Vec(2)};
    for (int k = 0; k < n; ++k) {
        const double a = phase + 2.0 * std::numbers::pi * k / n;
        c.cloud.push_back(Vec{{radius * std::cos(a), radius * std::sin(a)}});
    }
    auto beyond_edge = [&](int k) {
        const double mid = phase + 2.0 * std::numbers::pi * (k + 0.5) / n;
        const double apothem = radius * std::cos(std::numbers::pi / n);
        const double lift = apothem + (radius - apothem) * (0.05 + 0.9 * rng.uniform());
        return Vec{{lift * std::cos(mid), lift * std::sin(mid)}};
    };
    const int k = static_cast<int>(rng() % static_cast<std::uint32_t>(n));
    c.x = beyond_edge(k);
    c.y = beyond_edge((k + n / 2) % n);
    return c;
}

// Box with x and y beyond opposite facets.
inline VisibilityCase box_case(Philox& rng)
{
    const Vec half{{0.2 + 0.2 * rng.uniform(), 0.2 + 0.2 * rng.uniform(), 0.2 + 0.2 * rng.uniform()}};
    VisibilityCase c{PointCloud(3), Vec(3), Vec(3)};
    for (int mask = 0; mask < 8; ++mask) {
        Vec v(3);
        for (int i = 0; i < 3; ++i) {
            v[i] = (mask >> i) & 1 ? half[i] : -half[i];
        }
        c.cloud.push_back(v);
    }
    const int axis = static_cast<int>(rng() % 3);
    auto beyond = [&](double sign) {
        Vec v(3);
        for (int i = 0; i < 3; ++i) {
            v[i] = (rng.uniform() - 0.5) * half[i];
        }
        v[axis] = sign * half[axis] * (1.0 + 0.5 * rng.uniform());
        return v;
    };
    c.x = beyond(1.0);
    c.y = beyond(-1.0);
    return c;
}

} // namespace randpoly::fixture
