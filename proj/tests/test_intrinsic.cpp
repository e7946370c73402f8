#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <randpoly/functionals.hpp>
#include <randpoly/intrinsic.hpp>

#include "oracles.hpp"

using namespace randpoly;

namespace {

PointCloud box_vertices(const Vec& lo, const Vec& hi)
{
    const int d = static_cast<int>(lo.size());
    PointCloud c(d);
    for (int mask = 0; mask < (1 << d); ++mask) {
        Vec x(d);
        for (int i = 0; i < d; ++i) {
            x[i] = (mask >> i) & 1 ? hi[i] : lo[i];
        }
        c.push_back(x);
    }
    return c;
}

Polytope unit_cube(int d)
{
    return convex_hull(box_vertices(Vec::Zero(d), Vec::Ones(d)));
}

Eigen::MatrixXd random_rotation(int d, Philox& rng)
{
    return sample_haar_subspace(d, d, rng).basis;
}

PointCloud transform(const PointCloud& c, const Eigen::MatrixXd& rot, const Vec& shift)
{
    PointCloud out(c.dim);
    for (std::size_t i = 0; i < c.size(); ++i) {
        out.push_back(Vec(rot * c.point(i) + shift));
    }
    return out;
}

PointCloud ball_points(int d, int n, Philox& rng)
{
    PointCloud c(d);
    const ConvexBody b = ConvexBody::ball(d);
    for (int i = 0; i < n; ++i) {
        c.push_back(sample_uniform(b, rng));
    }
    return c;
}

} // namespace

TEST(Kubota, ConstantMatchesKnownCases)
{
    // V_1 of the unit cube in R^3 is 3 while the mean projected length is 3/2
    EXPECT_NEAR(kubota_constant(3, 1), 2.0, 1e-14);
    EXPECT_NEAR(kubota_constant(2, 1), std::numbers::pi / 2.0, 1e-14);
    EXPECT_NEAR(kubota_constant(4, 4), 1.0, 1e-14);
}

TEST(HaarSubspace, Orthonormal)
{
    Philox rng(1);
    for (int d = 1; d <= 5; ++d) {
        for (int j = 1; j <= d; ++j) {
            const Subspace s = sample_haar_subspace(d, j, rng);
            EXPECT_LE((s.basis.transpose() * s.basis - Eigen::MatrixXd::Identity(j, j)).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
    EXPECT_THROW(sample_haar_subspace(3, 0, rng), InputError);
    EXPECT_THROW(sample_haar_subspace(3, 4, rng), InputError);
}

TEST(HaarSubspace, PlaneLinesHaveUniformAngle)
{
    Philox rng(2);
    std::vector<double> angles;
    for (int i = 0; i < 10000; ++i) {
        const Subspace s = sample_haar_subspace(2, 1, rng);
        double a = std::atan2(s.basis(1, 0), s.basis(0, 0));
        a = std::fmod(a + 2.0 * std::numbers::pi, std::numbers::pi);
        angles.push_back(a);
    }
    const double stat = oracle::ks_statistic(angles, [](double x) { return std::clamp(x / std::numbers::pi, 0.0, 1.0); });
    EXPECT_GT(oracle::ks_pvalue(stat, angles.size()), 0.01);
}

TEST(HaarSubspace, RotationInvariance)
{
    Philox rng(3);
    const PointCloud seg{3, {0.0, 0.0, 0.0, 1.0, 0.5, -0.2}};
    const Polytope p = convex_hull(seg);
    const Eigen::MatrixXd rot = random_rotation(3, rng);
    const Polytope q = convex_hull(transform(seg, rot, Vec::Zero(3)));
    std::vector<double> a;
    std::vector<double> b;
    for (int i = 0; i < 10000; ++i) {
        a.push_back(projected_volume(p, sample_haar_subspace(3, 1, rng)));
        b.push_back(projected_volume(q, sample_haar_subspace(3, 1, rng)));
    }
    const double stat = oracle::ks_two_sample(a, b);
    // two-sample statistic with effective size n/2
    EXPECT_GT(oracle::ks_pvalue(stat, a.size() / 2), 0.01);
}

TEST(Project, CoordinatePlaneAndLine)
{
    const Polytope cube = unit_cube(3);
    const Subspace plane{3, 2, Eigen::MatrixXd::Identity(3, 2)};
    const PointCloud shadow = project(cube, plane);
    EXPECT_EQ(shadow.dim, 2);
    EXPECT_NEAR(convex_hull(shadow).volume(), 1.0, 1e-14);

    const double length = 2.5;
    const Polytope seg = convex_hull(PointCloud{2, {0.0, 0.0, length, 0.0}});
    for (double theta : {0.0, 0.3, 1.0, std::numbers::pi / 2.0}) {
        Eigen::MatrixXd dir(2, 1);
        dir << std::cos(theta), std::sin(theta);
        EXPECT_NEAR(projected_volume(seg, Subspace{2, 1, dir}), length * std::abs(std::cos(theta)), 1e-14);
    }

    Philox rng(4);
    const Polytope body = convex_hull(ball_points(3, 50, rng));
    const Subspace identity{3, 3, Eigen::MatrixXd::Identity(3, 3)};
    EXPECT_NEAR(convex_hull(project(body, identity)).volume(), body.volume(), 1e-14);
    EXPECT_THROW(project(body, Subspace{2, 1, Eigen::MatrixXd::Identity(2, 1)}), InputError);
}

TEST(IntrinsicVolumeMc, UnitCube)
{
    Philox rng(5);
    const Polytope cube = unit_cube(3);
    for (int j = 1; j <= 2; ++j) {
        const McEstimate e = intrinsic_volume_mc(cube, j, 20000, rng);
        EXPECT_LE(std::abs(e.estimate - 3.0), 4.0 * e.std_error) << j;
        EXPECT_GT(e.std_error, 0.0);
    }
    const McEstimate full = intrinsic_volume_mc(cube, 3, 2, rng);
    EXPECT_NEAR(full.estimate, 1.0, 1e-14);
    EXPECT_EQ(full.std_error, 0.0);
    const Polytope cube4 = unit_cube(4);
    for (int j = 1; j <= 3; ++j) {
        const McEstimate e = intrinsic_volume_mc(cube4, j, 5000, rng);
        EXPECT_LE(std::abs(e.estimate - binomial(4, j)), 4.0 * e.std_error) << j;
    }
}

TEST(IntrinsicVolumeMc, Segment)
{
    Philox rng(6);
    const double length = 1.7;
    const Polytope seg = convex_hull(PointCloud{3, {0.1, 0.2, 0.3, 0.1 + length, 0.2, 0.3}});
    const McEstimate v1 = intrinsic_volume_mc(seg, 1, 20000, rng);
    EXPECT_LE(std::abs(v1.estimate - length), 4.0 * v1.std_error);
    EXPECT_EQ(intrinsic_volume_mc(seg, 2, 10, rng).estimate, 0.0);
    EXPECT_EQ(intrinsic_volume_mc(seg, 3, 10, rng).estimate, 0.0);
    EXPECT_THROW(intrinsic_volume_mc(seg, 1, 1, rng), InputError);
}

TEST(ExactIntrinsicVolumes, ClosedForms)
{
    const std::vector<double> cube = exact_intrinsic_volumes(unit_cube(3));
    ASSERT_EQ(cube.size(), 4u);
    EXPECT_NEAR(cube[0], 1.0, 1e-14);
    EXPECT_NEAR(cube[1], 3.0, 1e-13);
    EXPECT_NEAR(cube[2], 3.0, 1e-13);
    EXPECT_NEAR(cube[3], 1.0, 1e-13);

    const std::vector<double> square = exact_intrinsic_volumes(unit_cube(2));
    EXPECT_NEAR(square[1], 2.0, 1e-14);
    EXPECT_NEAR(square[2], 1.0, 1e-14);

    EXPECT_EQ(exact_intrinsic_volumes(convex_hull(PointCloud(3))), (std::vector<double>{0, 0, 0, 0}));
    EXPECT_EQ(exact_intrinsic_volumes(convex_hull(PointCloud{2, {0.3, 0.4}})), (std::vector<double>{1, 0, 0}));

    const Polytope flat = convex_hull(box_vertices(Vec{{0.0, 0.0, 0.5}}, Vec{{2.0, 1.0, 0.5}}));
    const std::vector<double> rect = exact_intrinsic_volumes(flat);
    EXPECT_NEAR(rect[1], 3.0, 1e-13);
    EXPECT_NEAR(rect[2], 2.0, 1e-13);
    EXPECT_EQ(rect[3], 0.0);

    EXPECT_THROW(exact_intrinsic_volumes(unit_cube(4)), InputError);
}

TEST(ExactIntrinsicVolumes, AgreesWithKubotaOnRandomHulls)
{
    Philox rng(8);
    int within = 0;
    constexpr int trials = 50;
    for (int trial = 0; trial < trials; ++trial) {
        const int d = 2 + trial % 2;
        const Polytope p = convex_hull(ball_points(d, 30, rng));
        const std::vector<double> exact = exact_intrinsic_volumes(p);
        bool ok = true;
        for (int j = 1; j < d; ++j) {
            const McEstimate e = intrinsic_volume_mc(p, j, 2000, rng);
            ok = ok && std::abs(e.estimate - exact[static_cast<std::size_t>(j)]) <= 4.0 * e.std_error;
        }
        within += ok;
    }
    // 4-sigma bands: a single excursion in 50 would already be unusual
    EXPECT_GE(within, trials - 1);
}

TEST(ExactIntrinsicVolumes, MotionInvariance)
{
    Philox rng(9);
    for (int d = 2; d <= 3; ++d) {
        const PointCloud c = ball_points(d, 100, rng);
        const Polytope p = convex_hull(c);
        const Polytope q = convex_hull(transform(c, random_rotation(d, rng), Vec::Constant(d, 3.7)));
        EXPECT_EQ(f_vector(p), f_vector(q));
        const auto vp = exact_intrinsic_volumes(p);
        const auto vq = exact_intrinsic_volumes(q);
        for (int j = 0; j <= d; ++j) {
            EXPECT_NEAR(vp[static_cast<std::size_t>(j)], vq[static_cast<std::size_t>(j)], 1e-9);
        }
    }
}

TEST(ExactIntrinsicVolumes, MonotoneUnderInclusion)
{
    Philox rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const PointCloud big = ball_points(3, 80, rng);
        PointCloud small(3);
        small.coords.assign(big.coords.begin(), big.coords.begin() + 3 * 40);
        const auto vs = exact_intrinsic_volumes(convex_hull(small));
        const auto vb = exact_intrinsic_volumes(convex_hull(big));
        for (std::size_t j = 0; j < vs.size(); ++j) {
            EXPECT_LE(vs[j], vb[j] + 1e-12);
        }
    }
}
