#include "causal_gap/population.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace causal_gap;

namespace {

BivariateAnm uni_uni(double beta) {
    return {NoiseSpec::uniform(-1, 1), Mechanism::linear(beta), NoiseSpec::uniform(-1, 1), {}};
}

const std::vector<double> kBetas = {0.25, 0.5, 1.0, 2.0, 3.0, 5.0};

}  // namespace

TEST(RatioUniformLinear, KnownValues) {
    EXPECT_EQ(ratio_uniform_linear(1.0).exp_delta_sq, 1.0);
    EXPECT_EQ(ratio_uniform_linear(1.0).delta, 0.0);
    EXPECT_NEAR(ratio_uniform_linear(3.0).exp_delta_sq, 50.0 / 54.0, 1e-12);
    const auto r2 = ratio_uniform_linear(2.0);
    EXPECT_NEAR(r2.exp_delta_sq, 0.9375, 1e-15);
    EXPECT_NEAR(r2.sigma_bwd[0] * r2.sigma_bwd[0], 1.0 / 16.0, 1e-15);
    EXPECT_NEAR(ratio_uniform_linear(1.0 / 3.0).exp_delta_sq, ratio_uniform_linear(3.0).exp_delta_sq, 1e-14);
    EXPECT_NEAR(ratio_uniform_linear(-2.0).exp_delta_sq, 0.9375, 1e-15);
}

TEST(RatioUniformLinear, ZeroBetaIsADomainError) {
    EXPECT_THROW(ratio_uniform_linear(0.0), DomainError);
    EXPECT_THROW(ratio_uniform_linear(std::nan("")), DomainError);
}

TEST(RatioUniformLinear, ReportIsInternallyConsistent) {
    for (double b : {0.1, 0.7, 1.0, 4.0, 30.0}) {
        const auto r = ratio_uniform_linear(b);
        EXPECT_NEAR(r.exp_delta_sq, std::exp(2.0 * r.delta), 1e-12);
        // Ratio of residual-variance products.
        const double prod_b = r.sigma_bwd[0] * r.sigma_bwd[0] * r.sigma_bwd[1] * r.sigma_bwd[1];
        const double prod_f = r.sigma_fwd[0] * r.sigma_fwd[0] * r.sigma_fwd[1] * r.sigma_fwd[1];
        EXPECT_NEAR(prod_b / prod_f, r.exp_delta_sq, 1e-12) << b;
    }
}

TEST(RatioUniformLinear, GammaCurveDecreasesThenIncreases) {
    double prev = uniform_linear_ratio(1.0);
    for (double g = 1.01; g < 3.0; g += 0.01) {
        const double v = uniform_linear_ratio(g);
        EXPECT_LT(v, prev) << g;
        prev = v;
    }
    prev = uniform_linear_ratio(3.0);
    for (double g = 3.01; g <= 20.0; g += 0.01) {
        const double v = uniform_linear_ratio(g);
        EXPECT_GT(v, prev) << g;
        prev = v;
    }
}

TEST(RatioUniformLinear, AgreesWithQuadrature) {
    for (double b : kBetas) {
        const auto q = population_gap(uni_uni(b), Fit::homoskedastic);
        EXPECT_NE(q.method, GapMethod::closed_form);
        EXPECT_NEAR(q.exp_delta_sq, ratio_uniform_linear(b).exp_delta_sq, 1e-6) << b;
        EXPECT_NEAR(q.sigma_bwd[0] * q.sigma_bwd[0], uniform_linear_backward_variance(b), 1e-6) << b;
    }
}

TEST(RatioUniformLinear, BackwardVarianceMatchesMonteCarlo) {
    const std::size_t n = 1000000;
    for (double b : kBetas) {
        const auto d = sample_bivariate(uni_uni(b), n, 1000 + static_cast<std::uint64_t>(b * 100));
        const auto est = testutil::binned_conditional_variance(d.columns[0], d.columns[1], 1000);
        EXPECT_NEAR(est.mean, uniform_linear_backward_variance(b), 3.0 * est.se) << b;
    }
}

TEST(RatioUniformLinear, LimitsApproachOne) {
    for (double b : {1e-3, 1e3}) {
        EXPECT_NEAR(ratio_uniform_linear(b).exp_delta_sq, 1.0, 1e-2) << b;
        EXPECT_NEAR(population_gap(uni_uni(b), Fit::homoskedastic).exp_delta_sq, 1.0, 1e-2) << b;
    }
}

TEST(BackwardConditionalStats, UniformUniformIsUniformOnAnInterval) {
    for (double b : {0.5, 1.0, 2.0}) {
        for (double x2 = -(1.0 + b) + 0.05; x2 < 1.0 + b; x2 += 0.173) {
            const double lo = std::max(-1.0, (x2 - 1.0) / b), hi = std::min(1.0, (x2 + 1.0) / b);
            const auto cs = backward_conditional_stats(uni_uni(b), {}, x2);
            EXPECT_NEAR(cs.mean, 0.5 * (lo + hi), 1e-8) << b << " " << x2;
            EXPECT_NEAR(cs.variance, (hi - lo) * (hi - lo) / 12.0, 1e-8) << b << " " << x2;
            EXPECT_NEAR(cs.density, 0.25 * (hi - lo), 1e-8) << b << " " << x2;
        }
    }
    EXPECT_NEAR(backward_conditional_stats(uni_uni(1.0), {}, 0.0).mean, 0.0, 1e-14);
}

TEST(BackwardConditionalStats, OutsideSupportIsADomainError) {
    EXPECT_THROW(backward_conditional_stats(uni_uni(1.0), {}, 2.5), DomainError);
}

TEST(BackwardConditionalStats, GaussianCauseUniformNoiseMatchesMonteCarlo) {
    const BivariateAnm m{NoiseSpec::gaussian(0, 1), Mechanism::linear(1.0), NoiseSpec::uniform(-1, 1), {}};
    const auto cs = backward_conditional_stats(m, {}, 0.0);
    // X1 | X2 = 0 is a standard normal truncated to [-1, 1].
    const double z = 2.0 * normal_cdf(1.0) - 1.0;
    EXPECT_NEAR(cs.variance, 1.0 - 2.0 * normal_pdf(1.0) / z, 1e-12);
    EXPECT_NEAR(cs.density, 0.5 * z, 1e-12);

    const auto d = sample_bivariate(m, 10000000, 99);
    double s = 0.0, s2 = 0.0, s4 = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        if (std::abs(d.columns[1][i]) < 0.01) {
            s += d.columns[0][i];
            s2 += d.columns[0][i] * d.columns[0][i];
            s4 += std::pow(d.columns[0][i], 4);
            ++k;
        }
    }
    const double mean = s / k, var = s2 / k - mean * mean;
    EXPECT_NEAR(cs.mean, mean, 3.0 * std::sqrt(var / k));
    EXPECT_NEAR(cs.variance, var, 3.0 * std::sqrt((s4 / k - var * var) / k));
}

TEST(BackwardConditionalStats, ChiSquareNoiseMatchesSliceQuadrature) {
    const BivariateAnm m{NoiseSpec::gaussian(0, 1), Mechanism::linear(0.8), NoiseSpec::chi1_centered(1.0), {}};
    for (double x2 : {-2.0, -0.5, 0.0, 1.0, 3.0}) {
        // The noise x2 - 0.8 x is at least -1, so x <= (x2 + 1) / 0.8.
        const double hi = (x2 + 1.0) / 0.8, lo = hi - 30.0;
        auto joint = [&](double x) { return normal_pdf(x) * m.noise.pdf(x2 - 0.8 * x); };
        const double f = testutil::tanh_sinh(joint, lo, hi, 1.0 / 256.0, 4.0);
        const double m1 = testutil::tanh_sinh([&](double x) { return x * joint(x); }, lo, hi, 1.0 / 256.0, 4.0) / f;
        const double m2 =
            testutil::tanh_sinh([&](double x) { return (x - m1) * (x - m1) * joint(x); }, lo, hi, 1.0 / 256.0, 4.0) /
            f;
        const auto cs = backward_conditional_stats(m, {}, x2);
        EXPECT_NEAR(cs.density / f, 1.0, 1e-6) << x2;
        EXPECT_NEAR(cs.mean, m1, 1e-6) << x2;
        EXPECT_NEAR(cs.variance / m2, 1.0, 1e-6) << x2;
    }
}

TEST(BackwardConditionalStats, ChiSquareNoiseNextToTheLowerEdge) {
    // Slices a few ulps to 1e-2 wide at the lower end of the effect support.
    // There the density is F_e(x2 - x2_min) / (2 a |b|).
    const double a = 1.1210054226156114, b = -0.9089380879625184;
    const BivariateAnm m{NoiseSpec::uniform(-a, a), Mechanism::linear(b), NoiseSpec::chi1_centered(1.369265306636428),
                         {}};
    const double x2_min = b * a + m.noise.support().lo;
    for (double off : {3e-9, 1e-7, 1e-6, 7.7e-6, 1e-5, 1e-4, 1e-2}) {
        const double y = x2_min + off;
        const auto cs = backward_conditional_stats(m, {}, y);
        const double expect = m.noise.cdf(y - b * a) / (2.0 * a * std::abs(b));
        EXPECT_NEAR(cs.density / expect, 1.0, 1e-6) << off;
        EXPECT_LE(cs.mean, a);
        EXPECT_GE(cs.variance, 0.0);
    }
}

TEST(PopulationGap, EqualityCases) {
    EXPECT_LE(std::abs(population_gap(uni_uni(1.0), Fit::homoskedastic).delta), 1e-6);
    const auto ga_ga = make_scenario("ga-ga-power", 2.0).model(1.0);
    EXPECT_LE(std::abs(population_gap(ga_ga, Fit::homoskedastic).delta), 1e-6);
}

TEST(PopulationGap, HeteroskedasticFitGoesNegativeAtUnitSlope) {
    const auto r = population_gap(uni_uni(1.0), Fit::heteroskedastic);
    EXPECT_LT(r.delta, -1e-3);
    EXPECT_EQ(r.fit, Fit::heteroskedastic);
}

TEST(PopulationGap, GaussianUniformLinearMinimumNearPointTwoOne) {
    const Scenario sc = make_scenario("ga-uni-linear");
    double best = 10.0, arg = 0.0;
    for (double b = 0.15; b <= 0.3 + 1e-12; b += 0.005) {
        const double v = population_gap(sc.model(b), Fit::homoskedastic).exp_delta_sq;
        if (v < best) {
            best = v;
            arg = b;
        }
    }
    EXPECT_NEAR(best, 0.92, 0.005);
    EXPECT_GE(arg, 0.18);
    EXPECT_LE(arg, 0.24);
}

TEST(PopulationGap, ReportsAreConsistent) {
    for (const auto& name : scenario_names()) {
        const Scenario sc = make_scenario(name);
        for (double v : {0.5, 1.5}) {
            const auto pair = population_gaps(sc.model(v));
            for (const auto* r : {&pair.homoskedastic, &pair.heteroskedastic}) {
                EXPECT_NEAR(r->exp_delta_sq, std::exp(2.0 * r->delta), 1e-12 * r->exp_delta_sq) << name;
                for (double s : {r->sigma_fwd[0], r->sigma_fwd[1], r->sigma_bwd[0], r->sigma_bwd[1]}) {
                    EXPECT_TRUE(std::isfinite(s) && s > 0.0) << name;
                }
            }
        }
    }
}

TEST(PopulationGap, HeteroskedasticNeverExceedsHomoskedastic) {
    for (const auto& name : scenario_names()) {
        const Scenario sc = make_scenario(name);
        const auto grid = sc.param == "beta" ? make_grid(0.1, 10.0, 9, true) : make_grid(0.4, 2.8, 9, false);
        for (double v : grid) {
            const auto pair = population_gaps(sc.model(v));
            EXPECT_LE(pair.heteroskedastic.delta, pair.homoskedastic.delta + 1e-10) << name << " " << v;
        }
    }
}

TEST(PopulationGap, SignOfSlopeDoesNotMatter) {
    for (const char* name : {"uni-uni-linear", "ga-uni-linear"}) {
        const Scenario sc = make_scenario(name);
        for (double b : {0.3, 1.7}) {
            EXPECT_NEAR(population_gap(sc.model(b), Fit::homoskedastic).delta,
                        population_gap(sc.model(-b), Fit::homoskedastic).delta, 1e-8)
                << name;
        }
    }
    for (double nu : {0.6, 1.32, 2.2}) {
        const auto plus = make_scenario("ga-uni-power", 0.5).model(nu);
        const auto minus = make_scenario("ga-uni-power", -0.5).model(nu);
        EXPECT_NEAR(population_gap(plus, Fit::homoskedastic).delta, population_gap(minus, Fit::homoskedastic).delta,
                    1e-8);
    }
}

TEST(PopulationGap, IndependenceGivesZeroGap) {
    const auto r = population_gap(uni_uni(0.0), Fit::homoskedastic);
    EXPECT_EQ(r.delta, 0.0);
}

TEST(EvenFunctionGap, EqualsVarianceRatio) {
    struct Case {
        BivariateAnm model;
        double var_h;  // Var(h(X1)) from independent moment formulas
    };
    const double e_abs = std::sqrt(2.0 / std::numbers::pi);  // E|Z|
    std::vector<Case> cases;
    // Gaussian cause: Var(beta |Z|^nu / sqrt(V(nu))) = beta^2 (1 - E|Z|^nu^2 / V(nu)).
    cases.push_back({{NoiseSpec::gaussian(0, 1), Mechanism::even_power(1.0, 2.0), NoiseSpec::uniform(-1, 1), {}},
                     2.0 / 3.0});
    cases.push_back({{NoiseSpec::gaussian(0, 1), Mechanism::even_power(0.7, 1.0), NoiseSpec::gaussian(0, 0.5), {}},
                     0.49 * (1.0 - e_abs * e_abs)});
    cases.push_back({{NoiseSpec::gaussian(0, 1), Mechanism::even_power(-1.5, 3.0), NoiseSpec::chi1_centered(2.0), {}},
                     2.25 * (1.0 - 8.0 / (15.0 * std::numbers::pi))});
    // Uniform cause on [-a, a]: E|X|^k = a^k / (k + 1); V(nu) normalization is the Gaussian one.
    {
        const double a = 2.0, nu = 1.5, beta = 1.2;
        const double m1 = std::pow(a, nu) / (nu + 1.0), m2 = std::pow(a, 2 * nu) / (2 * nu + 1.0);
        cases.push_back({{NoiseSpec::uniform(-a, a), Mechanism::even_power(beta, nu), NoiseSpec::uniform(-1, 1), {}},
                         beta * beta * (m2 - m1 * m1) / power_norm(nu)});
    }
    {
        const double nu = 0.5, beta = 2.0;
        const double m1 = 1.0 / (nu + 1.0), m2 = 1.0 / (2 * nu + 1.0);
        cases.push_back({{NoiseSpec::uniform(-1, 1), Mechanism::even_power(beta, nu), NoiseSpec::gaussian(0, 2.0), {}},
                         beta * beta * (m2 - m1 * m1) / power_norm(nu)});
    }
    for (const auto& c : cases) {
        const auto r = even_function_gap(c.model);
        const double ve = c.model.noise.variance();
        EXPECT_NEAR(r.exp_delta_sq, (c.var_h + ve) / ve, 1e-10) << c.model.describe();
        EXPECT_GT(r.exp_delta_sq, 1.0);
    }
}

TEST(EvenFunctionGap, SquareMechanismWithUniformNoiseGivesThree) {
    // Var(Z^2 / sqrt(3)) = 2/3, Var(E2) = 1/3.
    const BivariateAnm m{NoiseSpec::gaussian(0, 1), Mechanism::even_power(1.0, 2.0), NoiseSpec::uniform(-1, 1), {}};
    EXPECT_NEAR(even_function_gap(m).exp_delta_sq, 3.0, 1e-12);
}

TEST(EvenFunctionGap, ZeroCoefficientAndContract) {
    const BivariateAnm zero{NoiseSpec::gaussian(0, 1), Mechanism::even_power(0.0, 2.0), NoiseSpec::uniform(-1, 1), {}};
    EXPECT_EQ(even_function_gap(zero).exp_delta_sq, 1.0);
    const BivariateAnm odd{NoiseSpec::gaussian(0, 1), Mechanism::power(1.0, 2.0), NoiseSpec::uniform(-1, 1), {}};
    EXPECT_THROW(even_function_gap(odd), ValidationError);
    const BivariateAnm skew{NoiseSpec::chi1_centered(1.0), Mechanism::even_power(1.0, 2.0), NoiseSpec::uniform(-1, 1),
                            {}};
    EXPECT_THROW(even_function_gap(skew), ValidationError);
}

TEST(EvenFunctionGap, AgreesWithSliceQuadrature) {
    const BivariateAnm m{NoiseSpec::gaussian(0, 1), Mechanism::even_power(1.0, 2.0), NoiseSpec::uniform(-1, 1), {}};
    EXPECT_NEAR(population_gap(m, Fit::homoskedastic).exp_delta_sq, even_function_gap(m).exp_delta_sq, 1e-6);
}

TEST(Curve, UniformLinearMinimumAtGammaThree) {
    const auto grid = make_grid(1.0, 20.0, 1901, false);
    const auto rows = curve(make_scenario("uni-uni-linear"), grid, Fit::homoskedastic);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        if (rows[k].report.exp_delta_sq < rows[arg].report.exp_delta_sq) arg = k;
    }
    EXPECT_NEAR(rows[arg].param, 3.0, 1e-9);
}

TEST(Curve, GaussianPowerGapVanishesOnlyAtLinearity) {
    const auto grid = make_grid(0.5, 2.5, 21, false);
    const auto rows = curve(make_scenario("ga-ga-power", 2.0), grid, Fit::homoskedastic);
    for (const auto& r : rows) {
        if (std::abs(r.param - 1.0) < 1e-12) EXPECT_LE(std::abs(r.report.delta), 1e-6);
        else EXPECT_GT(r.report.delta, 1e-6) << r.param;
    }
}

TEST(Curve, UniformNoisePowerMinimumAwayFromLinearity) {
    const auto grid = make_grid(0.9, 1.8, 91, false);
    const auto rows = curve(make_scenario("ga-uni-power", 0.5), grid, Fit::homoskedastic);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        if (rows[k].report.delta < rows[arg].report.delta) arg = k;
    }
    EXPECT_GE(rows[arg].param, 1.25);
    EXPECT_LE(rows[arg].param, 1.40);
}

TEST(Curve, IndependentOfThreadCount) {
    const Scenario sc = make_scenario("ga-chi2-power", 1.0);
    const auto grid = make_grid(0.5, 2.0, 8, false);
    const auto a = curve(sc, grid, Fit::heteroskedastic, {}, 1);
    const auto b = curve(sc, grid, Fit::heteroskedastic, {}, 4);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].param, b[k].param);
        EXPECT_EQ(a[k].report.delta, b[k].report.delta);
    }
}

TEST(Scenario, NamesAndGrid) {
    EXPECT_THROW(make_scenario("nope"), ValidationError);
    EXPECT_EQ(make_scenario("ga-ga-power-het").fixed_beta, 2.0);
    EXPECT_EQ(make_scenario("uni-uni-het").default_fit, Fit::heteroskedastic);
    const auto g = make_grid(0.05, 20.0, 60, true);
    ASSERT_EQ(g.size(), 60u);
    EXPECT_DOUBLE_EQ(g.front(), 0.05);
    EXPECT_DOUBLE_EQ(g.back(), 20.0);
    EXPECT_NEAR(g[1] / g[0], g[59] / g[58], 1e-12);
}

TEST(QuadratureConfig, Validation) {
    QuadratureConfig c;
    c.abs_tol = 0.0;
    EXPECT_THROW(population_gap(uni_uni(2.0), Fit::homoskedastic, c), ValidationError);
    QuadratureConfig d;
    d.max_subdivisions = 0;
    EXPECT_THROW(population_gap(uni_uni(2.0), Fit::homoskedastic, d), ValidationError);
}
