#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <randpoly/functionals.hpp>

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

Polytope box(const Vec& lo, const Vec& hi)
{
    return convex_hull(box_vertices(lo, hi));
}

} // namespace

TEST(EulerIndicator, EmptyAndPoint)
{
    EXPECT_EQ(euler_indicator(convex_hull(PointCloud(2))), 0.0);
    EXPECT_EQ(euler_indicator(convex_hull(PointCloud{2, {0.5, 0.5}})), 1.0);
}

TEST(EulerIndicator, SmallIntensityMean)
{
    const ConvexBody ball = ConvexBody::ball(2);
    const double t = 0.5;
    constexpr int reps = 10000;
    double sum = 0.0;
    for (int r = 0; r < reps; ++r) {
        Philox rng = Philox::stream(31, 0, static_cast<std::uint64_t>(r));
        sum += euler_indicator(convex_hull(sample_poisson_process(ball, t, rng)));
    }
    const double p = 1.0 - std::exp(-t * std::numbers::pi);
    EXPECT_NEAR(sum / reps, p, 3.0 * std::sqrt(p * (1.0 - p) / reps));
}

TEST(Valuation, SingleTermsAndZero)
{
    Philox rng(1);
    const ConvexBody ball = ConvexBody::ball(3);
    const Polytope p = convex_hull(sample_poisson_process(ball, 20.0, rng));
    EXPECT_NEAR(valuation(p, ValuationSpec::intrinsic(3, 3)), p.volume(), 1e-15);
    EXPECT_EQ(valuation(p, ValuationSpec{{0, 0, 0, 0}, "zero"}), 0.0);
    EXPECT_THROW(valuation(p, ValuationSpec{{1, 1}, "short"}), InputError);
    EXPECT_THROW(valuation(p, ValuationSpec::wills(3), EvalMode::mc(1), &rng), InputError);
}

TEST(Wills, ClosedForms)
{
    EXPECT_NEAR(wills(box(Vec::Zero(3), Vec::Ones(3))), 8.0, 1e-12);
    EXPECT_NEAR(wills(box(Vec::Zero(2), Vec::Ones(2))), 4.0, 1e-12);
    EXPECT_EQ(wills(convex_hull(PointCloud(3))), 0.0);
}

TEST(Wills, MonotoneInMcMode)
{
    Philox rng(2);
    const ConvexBody ball = ConvexBody::ball(3);
    PointCloud big = sample_poisson_process(ball, 30.0, rng);
    PointCloud small(3);
    small.coords.assign(big.coords.begin(), big.coords.begin() + 3 * static_cast<long>(big.size() / 2));
    const Polytope ps = convex_hull(small);
    const Polytope pb = convex_hull(big);
    double se = 0.0;
    double ws = 1.0;
    double wb = 1.0;
    for (int j = 1; j <= 3; ++j) {
        const McEstimate es = intrinsic_volume_mc(ps, j, 4096, rng);
        const McEstimate eb = intrinsic_volume_mc(pb, j, 4096, rng);
        ws += es.estimate;
        wb += eb.estimate;
        se += es.std_error * es.std_error + eb.std_error * eb.std_error;
    }
    EXPECT_LE(ws, wb + 4.0 * std::sqrt(se));
    EXPECT_LE(wills(ps), wills(pb) + 1e-12);
}

TEST(Valuation, HadwigerLinearity)
{
    Philox rng(3);
    const Polytope p = convex_hull(sample_poisson_process(ConvexBody::ball(3), 50.0, rng));
    const ValuationSpec s1{{1.0, 2.0, 0.5, 3.0}, "s1"};
    const ValuationSpec s2{{0.0, -1.0, 4.0, 0.25}, "s2"};
    const double a = 1.5;
    const double b = -0.75;
    ValuationSpec combined{{}, "combined"};
    for (std::size_t i = 0; i < 4; ++i) {
        combined.coeffs.push_back(a * s1.coeffs[i] + b * s2.coeffs[i]);
    }
    const double lhs = valuation(p, combined);
    const double rhs = a * valuation(p, s1) + b * valuation(p, s2);
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs));
}

TEST(Valuation, InclusionExclusionOnBoxes)
{
    const ValuationSpec spec{{0.7, 1.3, -0.4, 2.1}, "mixed"};
    // sharing a facet: the intersection is a lower-dimensional square
    {
        const double lhs = valuation(box(Vec{{0, 0, 0}}, Vec{{1, 1, 1}}), spec) +
                           valuation(box(Vec{{1, 0, 0}}, Vec{{2, 1, 1}}), spec);
        const double rhs = valuation(box(Vec{{0, 0, 0}}, Vec{{2, 1, 1}}), spec) +
                           valuation(box(Vec{{1, 0, 0}}, Vec{{1, 1, 1}}), spec);
        EXPECT_NEAR(lhs, rhs, 1e-9);
    }
    // overlapping boxes
    {
        const double lhs = valuation(box(Vec{{0, 0, 0}}, Vec{{2, 1, 1.5}}), spec) +
                           valuation(box(Vec{{1, 0, 0}}, Vec{{3, 1, 1.5}}), spec);
        const double rhs = valuation(box(Vec{{0, 0, 0}}, Vec{{3, 1, 1.5}}), spec) +
                           valuation(box(Vec{{1, 0, 0}}, Vec{{2, 1, 1.5}}), spec);
        EXPECT_NEAR(lhs, rhs, 1e-9);
    }
}

TEST(Valuation, CltGate)
{
    EXPECT_TRUE(ValuationSpec::wills(3).satisfies_clt_gate());
    EXPECT_TRUE((ValuationSpec{{0, 0, -1}, "neg"}).satisfies_clt_gate());
    EXPECT_FALSE((ValuationSpec{{1, 0, 0}, "euler only"}).satisfies_clt_gate());
    EXPECT_FALSE((ValuationSpec{{0, 1, -1}, "mixed sign"}).satisfies_clt_gate());
}

TEST(OracleEstimate, DirectFormula)
{
    // regular decagon of area 1/2
    const int n = 10;
    const double radius = std::sqrt(1.0 / (n * std::sin(2.0 * std::numbers::pi / n)));
    PointCloud c(2);
    for (int k = 0; k < n; ++k) {
        const double a = 2.0 * std::numbers::pi * k / n;
        c.push_back(Vec{{radius * std::cos(a), radius * std::sin(a)}});
    }
    const Polytope p = convex_hull(c);
    EXPECT_NEAR(p.volume(), 0.5, 1e-14);
    EXPECT_NEAR(oracle_estimate(p, 100.0), 0.6, 1e-14);
    EXPECT_EQ(oracle_estimate(convex_hull(PointCloud(2)), 100.0), 0.0);
    EXPECT_THROW(oracle_estimate(p, 0.0), InputError);
}

TEST(OracleEstimate, UnbiasedAndAboveVolume)
{
    const ConvexBody ball = ConvexBody::ball(2);
    const double t = 200.0;
    constexpr int reps = 2000;
    double sum = 0.0;
    double sum2 = 0.0;
    for (int r = 0; r < reps; ++r) {
        Philox rng = Philox::stream(77, 0, static_cast<std::uint64_t>(r));
        const Polytope p = convex_hull(sample_poisson_process(ball, t, rng));
        const double est = oracle_estimate(p, t);
        ASSERT_GE(est, p.volume());
        sum += est;
        sum2 += est * est;
    }
    const double mean = sum / reps;
    const double var = (sum2 - reps * mean * mean) / (reps - 1);
    EXPECT_LE(std::abs(mean - std::numbers::pi), 4.0 * std::sqrt(var / reps));
}

TEST(MultivariateRaw, Components)
{
    const PointCloud tetra{3, {0, 0, 0, 0.5, 0, 0, 0, 0.5, 0, 0, 0, 0.5}};
    const std::vector<double> v = multivariate_raw(convex_hull(tetra));
    ASSERT_EQ(v.size(), 6u);
    EXPECT_EQ(v[3], 4.0);
    EXPECT_EQ(v[4], 6.0);
    EXPECT_EQ(v[5], 4.0);

    Philox rng(4);
    const std::vector<double> w = multivariate_raw(convex_hull(sample_poisson_process(ConvexBody::ball(2), 100.0, rng)));
    ASSERT_EQ(w.size(), 4u);
    EXPECT_EQ(w[2], w[3]);

    EXPECT_EQ(multivariate_raw(convex_hull(PointCloud(2))), (std::vector<double>{0, 0, 0, 0}));
}
