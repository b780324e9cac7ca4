#include "causal_gap/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace causal_gap;

TEST(Integrate, Polynomials) {
    // G7/K15 is exact for degree <= 22 on a single panel.
    const auto r = integrate([](double x) { return x * x * x * x * x - 3 * x * x + 2; }, -1.0, 2.0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, (64.0 - 1.0) / 6.0 - (8.0 + 1.0) + 6.0, 1e-13);
}

TEST(Integrate, SmoothTranscendental) {
    EXPECT_NEAR(integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi).value, 2.0, 1e-12);
    EXPECT_NEAR(integrate([](double x) { return std::exp(-x * x); }, -8.0, 8.0).value, std::sqrt(std::numbers::pi),
                1e-12);
    EXPECT_NEAR(integrate([](double x) { return 1.0 / (1.0 + x * x); }, 0.0, 1.0).value, std::numbers::pi / 4, 1e-13);
}

TEST(Integrate, ReversedBoundsFlipSign) {
    auto f = [](double x) { return std::cos(x) + x; };
    const double fwd = integrate(f, 0.3, 1.7).value;
    EXPECT_NEAR(integrate(f, 1.7, 0.3).value, -fwd, 1e-14);
    EXPECT_EQ(integrate(f, 1.0, 1.0).value, 0.0);
}

TEST(Integrate, IntegrableEndpointSingularity) {
    const auto r = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value, 2.0, 1e-8);
}

TEST(Integrate, BreakpointsHandleJumps) {
    auto step = [](double x) { return x < 0.3 ? 1.0 : 5.0; };
    const double bp[] = {0.3};
    const auto with = integrate(step, 0.0, 1.0, {}, bp);
    EXPECT_TRUE(with.converged);
    EXPECT_NEAR(with.value, 0.3 + 3.5, 1e-14);
    EXPECT_LE(with.evaluations, 30u);

    const auto without = integrate(step, 0.0, 1.0);
    EXPECT_NEAR(without.value, 3.8, 1e-8);
    EXPECT_GT(without.evaluations, with.evaluations);
}

TEST(Integrate, BreakpointsOutsideRangeAreIgnored) {
    const double bp[] = {-4.0, 0.5, 0.5, 9.0};
    EXPECT_NEAR(integrate([](double x) { return std::abs(x - 0.5); }, 0.0, 1.0, {}, bp).value, 0.25, 1e-15);
}

TEST(IntegrateVec, ComponentsAgreeWithScalarCalls) {
    auto f = [](double x) { return std::array<double, 3>{std::exp(-x * x / 2), x * std::exp(-x * x / 2),
                                                         x * x * std::exp(-x * x / 2)}; };
    const auto r = integrate_vec<3>(f, -10.0, 10.0);
    EXPECT_TRUE(r.converged);
    const double s = std::sqrt(2 * std::numbers::pi);
    EXPECT_NEAR(r.value[0], s, 1e-10);
    EXPECT_NEAR(r.value[1], 0.0, 1e-12);
    EXPECT_NEAR(r.value[2], s, 1e-10);
}

TEST(IntegrateVec, ReferenceScaleLetsAVanishingMomentConverge) {
    auto f = [](double x) { return std::array<double, 2>{1.0 + x * x, std::sin(40.0 * x) * std::abs(x)}; };
    QuadOptions opt;
    opt.abs_tol = 0.0;
    opt.rel_tol = 1e-10;
    opt.max_subdivisions = 200;
    const std::array<double, 2> scale{0.0, 1.0};
    const auto r = integrate_vec<2>(f, -1.0, 1.0, opt, {}, scale);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.value[1], 0.0, 1e-9);
}

TEST(Integrate, RejectsInfiniteBounds) {
    auto f = [](double x) { return std::exp(-x); };
    EXPECT_THROW(integrate(f, 0.0, std::numeric_limits<double>::infinity()), DomainError);
    EXPECT_THROW(integrate(f, std::nan(""), 1.0), DomainError);
}

TEST(IntegrateOrThrow, RaisesToleranceErrorWhenBudgetIsTooSmall) {
    QuadOptions opt;
    opt.abs_tol = 1e-15;
    opt.rel_tol = 1e-15;
    opt.max_subdivisions = 3;
    auto wild = [](double x) { return std::sin(1.0 / (x + 1e-3)); };
    EXPECT_THROW(integrate_or_throw(wild, 0.0, 1.0, opt, {}, "wild"), ToleranceError);
    try {
        integrate_or_throw(wild, 0.0, 1.0, opt, {}, "wild");
    } catch (const ToleranceError& e) {
        EXPECT_NE(std::string(e.what()).find("wild"), std::string::npos);
    }
    EXPECT_NEAR(integrate_or_throw([](double x) { return x; }, 0.0, 2.0, {}, {}, "line"), 2.0, 1e-15);
}
