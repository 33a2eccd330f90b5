#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "seqm/reparam.hpp"

namespace rp = seqm::reparam;
using seqm::model::ModelParams;

namespace {

ModelParams random_interior(std::mt19937_64 &rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ModelParams phi;
    phi.theta.epicentre = seqm::geo::GeoPoint(-89.0 + 178.0 * u(rng), -179.0 + 358.0 * u(rng));
    phi.theta.depth_km = 5.0 + 95.0 * (0.001 + 0.998 * u(rng));
    phi.theta.origin_time_s = 1e-3 + 200.0 * u(rng);
    phi.alpha = 0.001 + 0.998 * u(rng);
    phi.pi = 0.001 + 0.998 * u(rng);
    return phi;
}

double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

} // namespace

TEST(Logistic, MidpointLimitAndMonotone)
{
    EXPECT_DOUBLE_EQ(rp::logistic(0.0, 5.0, 100.0), 52.5);
    EXPECT_DOUBLE_EQ(rp::logistic(0.0, -90.0, 90.0), 0.0);
    EXPECT_DOUBLE_EQ(rp::logistic(800.0, 5.0, 100.0), 100.0);
    EXPECT_DOUBLE_EQ(rp::logistic(-800.0, 5.0, 100.0), 5.0);
    double prev = rp::logistic(-30.0, 0.0, 1.0);
    for (double x = -29.5; x <= 30.0; x += 0.5)
    {
        const double y = rp::logistic(x, 0.0, 1.0);
        EXPECT_GT(y, prev);
        prev = y;
    }
}

TEST(Logistic, OverflowGuardIsContinuous)
{
    // Both branches agree at the switch-over point.
    const double below = rp::logistic(35.0 - 1e-9, 5.0, 100.0);
    const double above = rp::logistic(35.0 + 1e-9, 5.0, 100.0);
    EXPECT_NEAR(below, above, 1e-12);
    EXPECT_TRUE(std::isfinite(rp::logistic(1e6, 5.0, 100.0)));
}

TEST(ToUnconstrained, Midpoints)
{
    EXPECT_NEAR(rp::logistic_inverse(52.5, 5.0, 100.0), 0.0, 1e-15);
    EXPECT_NEAR(rp::logistic_inverse(0.5, 0.0, 1.0), 0.0, 1e-15);
}

TEST(ToNatural, ExpMapForOriginTime)
{
    std::array<double, rp::kNumCoords> x{};
    x[rp::kOrigin] = std::log(12.0);
    const auto phi = rp::to_natural(std::span<const double, rp::kNumCoords>(x));
    EXPECT_NEAR(phi.theta.origin_time_s, 12.0, 1e-12);
    EXPECT_DOUBLE_EQ(phi.theta.epicentre.lat(), 0.0);
    EXPECT_DOUBLE_EQ(phi.theta.depth_km, 52.5);
    EXPECT_DOUBLE_EQ(phi.alpha, 0.5);
}

TEST(ToUnconstrained, RejectsBoundaryValues)
{
    ModelParams phi;
    phi.theta.depth_km = 5.0;
    phi.theta.origin_time_s = 10.0;
    EXPECT_THROW((void)rp::to_unconstrained(phi), std::domain_error);
    phi.theta.depth_km = 50.0;
    phi.alpha = 1.0;
    EXPECT_THROW((void)rp::to_unconstrained(phi), std::domain_error);
    phi.alpha = 0.5;
    phi.theta.origin_time_s = 0.0;
    EXPECT_THROW((void)rp::to_unconstrained(phi), std::domain_error);
}

TEST(Reparam, RoundTripOnRandomDraws)
{
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 1000; ++i)
    {
        const auto phi = random_interior(rng);
        const auto back = rp::to_natural(rp::to_unconstrained(phi));
        const auto a = rp::natural_values(phi);
        const auto b = rp::natural_values(back);
        for (std::size_t j = 0; j < rp::kNumCoords; ++j)
        {
            EXPECT_LT(std::abs(a[j] - b[j]), 1e-10 * std::max(1.0, std::abs(a[j]))) << "coordinate " << j;
        }
    }
}

TEST(Reparam, NaturalValuesInsideSupports)
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 5.0);
    for (int i = 0; i < 1000; ++i)
    {
        std::array<double, rp::kNumCoords> x{};
        for (auto &v : x) { v = n(rng); }
        const auto v = rp::natural_values(rp::to_natural(std::span<const double, rp::kNumCoords>(x)));
        for (std::size_t j = 0; j < rp::kNumCoords; ++j)
        {
            const auto &s = rp::kSupports[j];
            EXPECT_GT(v[j], s.lower);
            if (s.kind == rp::MapKind::Logistic) { EXPECT_LT(v[j], s.upper); }
        }
    }
}

TEST(Jacobian, ClosedFormPoints)
{
    // g'(0) = (ub - lb) / 4
    std::array<double, rp::kNumCoords> x{};
    const std::span<const double, rp::kNumCoords> xs(x);
    EXPECT_NEAR(rp::log_abs_jacobian(xs, 2), std::log(1.0 / 4.0), 1e-14);
    EXPECT_NEAR(rp::log_abs_jacobian(xs, 3), std::log(1.0 / 4.0), 1e-14);
    EXPECT_NEAR(rp::log_abs_derivative(0.0, rp::kSupports[rp::kOrigin]), 0.0, 1e-15);
    const double block1 = std::log(180.0 / 4) + std::log(360.0 / 4) + std::log(95.0 / 4) + 0.0;
    EXPECT_NEAR(rp::log_abs_jacobian(xs, 1), block1, 1e-12);
    EXPECT_NEAR(rp::log_abs_jacobian(xs), block1 + 2 * std::log(0.25), 1e-12);
}

TEST(Jacobian, MatchesCentralFiniteDifferences)
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int i = 0; i < 100; ++i)
    {
        std::array<double, rp::kNumCoords> x{};
        for (auto &v : x) { v = u(rng); }
        for (int k = 1; k <= 3; ++k)
        {
            const auto &b = rp::block_spec(k);
            double fd_log = 0.0;
            for (std::size_t j = b.first; j < b.first + b.dim; ++j)
            {
                const double h = 1e-5;
                auto xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                const double gp = rp::natural_values(rp::to_natural(std::span<const double, rp::kNumCoords>(xp)))[j];
                const double gm = rp::natural_values(rp::to_natural(std::span<const double, rp::kNumCoords>(xm)))[j];
                fd_log += std::log(std::abs((gp - gm) / (2 * h)));
            }
            const double analytic = rp::log_abs_jacobian(std::span<const double, rp::kNumCoords>(x), k);
            // Compare derivatives, not their logs.
            EXPECT_LT(rel_err(std::exp(analytic), std::exp(fd_log)), 1e-6) << "block " << k;
        }
    }
}

TEST(Jacobian, FiniteForExtremeInputs)
{
    for (double x : {-700.0, -40.0, 0.0, 40.0, 700.0})
    {
        for (const auto &s : rp::kSupports) { EXPECT_TRUE(std::isfinite(rp::log_abs_derivative(x, s))) << x; }
    }
}

TEST(Jacobian, ChangeOfVariablesPreservesMassOnASlice)
{
    // Depth is uniform on [5, 100]; the mass of [20, 40] is 20 / 95. Integrate
    // the pushed-back density p(g(x)) |g'(x)| over the matching x interval by Monte Carlo.
    const auto &s = rp::kSupports[rp::kDepth];
    const double a = rp::to_unconstrained_coord(20.0, s);
    const double b = rp::to_unconstrained_coord(40.0, s);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(a, b);
    const int n = 200000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) { acc += std::exp(rp::log_abs_derivative(u(rng), s)) / 95.0; }
    const double mass = (b - a) * acc / n;
    EXPECT_NEAR(mass / (20.0 / 95.0), 1.0, 0.01);
}

TEST(BlockSpec, DimensionsAndIndices)
{
    EXPECT_EQ(rp::block_spec(1).dim, 4u);
    EXPECT_EQ(rp::block_spec(2).dim, 1u);
    EXPECT_EQ(rp::block_spec(3).dim, 1u);
    EXPECT_THROW((void)rp::block_spec(0), std::out_of_range);
    rp::TransformedParams t;
    t.values = {1, 2, 3, 4, 5, 6};
    EXPECT_EQ(t.block(1).size(), 4u);
    EXPECT_EQ(t.block(3)[0], 6.0);
}
