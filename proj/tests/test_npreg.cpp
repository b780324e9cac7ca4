#include "causal_gap/npreg.hpp"
#include "causal_gap/rng.hpp"
#include "causal_gap/specfun.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace causal_gap;

namespace {

struct Xy {
    std::vector<double> x, y;
};

Xy make_data(std::size_t n, std::uint64_t seed, double lo, double hi, const std::function<double(double)>& f,
             double noise_sd) {
    Rng rng(seed, 0);
    Xy d;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = lo + (hi - lo) * rng.uniform();
        d.x.push_back(x);
        d.y.push_back(f(x) + noise_sd * rng.normal());
    }
    return d;
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k);
    return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(FitMean, RecoversALine) {
    const auto d = make_data(500, 1, -1.0, 1.0, [](double x) { return 2.0 * x; }, 0.1);
    const auto fit = fit_mean(d.x, d.y);
    double ss = 0.0;
    int k = 0;
    for (double q = -0.95; q <= 0.95; q += 0.01, ++k) ss += std::pow(fit.predict(q) - 2.0 * q, 2);
    EXPECT_LT(std::sqrt(ss / k), 0.05);
}

TEST(FitMean, RecoversASine) {
    const auto d = make_data(2000, 2, -2.0, 2.0, [](double x) { return std::sin(3.0 * x); }, 0.2);
    const auto fit = fit_mean(d.x, d.y);
    double ss = 0.0;
    int k = 0;
    for (double q = -1.95; q <= 1.95; q += 0.01, ++k) ss += std::pow(fit.predict(q) - std::sin(3.0 * q), 2);
    EXPECT_LT(std::sqrt(ss / k), 0.08);
}

TEST(FitMean, ConstantResponseIsReproduced) {
    const auto d = make_data(300, 3, 0.0, 5.0, [](double) { return 4.25; }, 0.0);
    for (double h : {0.01, 0.3, 5.0}) {
        const auto fit = fit_mean_at(d.x, d.y, h);
        for (double f : fit.fitted) EXPECT_NEAR(f, 4.25, 1e-10);
    }
    const auto fit = fit_mean(d.x, d.y);
    for (double f : fit.fitted) EXPECT_NEAR(f, 4.25, 1e-10);
}

TEST(FitMean, AffineResponseIsReproducedAtEveryBandwidth) {
    for (std::size_t n : {400u, 6000u}) {
        const auto d = make_data(n, 4, -3.0, 3.0, [](double x) { return 1.5 - 0.7 * x; }, 0.0);
        for (double h : {0.02, 0.2, 1.0, 10.0}) {
            const auto fit = fit_mean_at(d.x, d.y, h);
            for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(fit.fitted[i], d.y[i], 1e-8) << n << " h=" << h;
            EXPECT_NEAR(fit.predict(4.0), 1.5 - 2.8, 1e-8);
            EXPECT_NEAR(fit.predict(-5.0), 1.5 + 3.5, 1e-8);
        }
    }
}

TEST(FitMean, ResidualsAreResponseMinusFitted) {
    const auto d = make_data(400, 5, 0.0, 1.0, [](double x) { return x * x; }, 0.3);
    const auto fit = fit_mean(d.x, d.y);
    ASSERT_EQ(fit.residuals.size(), d.x.size());
    for (std::size_t i = 0; i < d.x.size(); ++i) EXPECT_EQ(fit.residuals[i], d.y[i] - fit.fitted[i]);
    EXPECT_GT(fit.bandwidth, 0.0);
    EXPECT_EQ(fit.bandwidth_grid.size(), 25u);
}

TEST(FitMean, BandwidthShrinksWithSampleSize) {
    auto f = [](double x) { return std::sin(3.0 * x); };
    const auto small = fit_mean(make_data(200, 6, -2, 2, f, 0.3).x, make_data(200, 6, -2, 2, f, 0.3).y);
    const auto large = fit_mean(make_data(2000, 6, -2, 2, f, 0.3).x, make_data(2000, 6, -2, 2, f, 0.3).y);
    EXPECT_LT(large.bandwidth, small.bandwidth);
}

TEST(FitMean, TinyBandwidthInterpolates) {
    std::vector<double> x, y;
    Rng rng(7, 0);
    for (int i = 0; i < 200; ++i) {
        x.push_back(i / 199.0);
        y.push_back(rng.normal());
    }
    const auto fit = fit_mean_at(x, y, 1e-4);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_NEAR(fit.fitted[i], y[i], 1e-9);
        EXPECT_NEAR(fit.predict(x[i]), y[i], 1e-9);
    }
}

TEST(FitMean, BinnedAndExactPathsAgree) {
    const auto d = make_data(6000, 8, -2, 2, [](double x) { return std::tanh(2 * x); }, 0.3);
    SmootherOptions exact;
    exact.exact_max_n = 100000;
    const auto fe = fit_mean(d.x, d.y, exact);
    const auto fb = fit_mean(d.x, d.y);
    EXPECT_FALSE(fe.binned);
    EXPECT_TRUE(fb.binned);
    EXPECT_NEAR(fb.bandwidth / fe.bandwidth, 1.0, 0.25);
    EXPECT_NEAR(residual_variance(fb) / residual_variance(fe), 1.0, 2e-3);
}

TEST(FitMean, InputValidation) {
    std::vector<double> x(30, 1.0), y(30, 0.0);
    EXPECT_THROW(fit_mean(x, y), ValidationError);
    std::vector<double> short_x(10), short_y(10);
    std::iota(short_x.begin(), short_x.end(), 0.0);
    EXPECT_THROW(fit_mean(short_x, short_y), ValidationError);
    std::vector<double> a(30), b(29);
    std::iota(a.begin(), a.end(), 0.0);
    EXPECT_THROW(fit_mean(a, b), ValidationError);
}

TEST(FitMean, DeterministicAndOrderFree) {
    auto d = make_data(800, 9, -1, 1, [](double x) { return x * x * x; }, 0.2);
    const auto a = fit_mean(d.x, d.y);
    // Reverse the sample: same bandwidth and same fitted values per point.
    std::reverse(d.x.begin(), d.x.end());
    std::reverse(d.y.begin(), d.y.end());
    const auto b = fit_mean(d.x, d.y);
    EXPECT_EQ(a.bandwidth, b.bandwidth);
    for (std::size_t i = 0; i < d.x.size(); ++i) EXPECT_NEAR(a.fitted[i], b.fitted[d.x.size() - 1 - i], 1e-12);
}

TEST(FitVariance, HomoskedasticLevel) {
    const auto d = make_data(2000, 10, 0, 1, [](double x) { return std::cos(4 * x); }, 0.5);
    const auto v = fit_variance(fit_mean(d.x, d.y));
    for (double q = 0.1; q <= 0.9; q += 0.02) {
        EXPECT_GT(v.predict(q), 0.7 * 0.25) << q;
        EXPECT_LT(v.predict(q), 1.3 * 0.25) << q;
    }
}

TEST(FitVariance, TracksMultiplicativeNoise) {
    Rng rng(11, 0);
    std::vector<double> x, y;
    for (int i = 0; i < 2000; ++i) {
        const double a = -2.0 + 4.0 * rng.uniform();
        x.push_back(a);
        y.push_back(a * rng.normal());
    }
    const auto v = fit_variance(fit_mean(x, y));
    std::vector<double> x2(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) x2[i] = x[i] * x[i];
    EXPECT_GT(pearson(ranks(v.fitted), ranks(x2)), 0.8);
}

TEST(FitVariance, FloorHolds) {
    const auto d = make_data(300, 12, 0, 1, [](double x) { return 3.0 * x - 1.0; }, 0.0);
    const auto v = fit_variance(fit_mean(d.x, d.y));
    double vy = 0.0, my = std::accumulate(d.y.begin(), d.y.end(), 0.0) / d.y.size();
    for (double a : d.y) vy += (a - my) * (a - my);
    vy /= d.y.size() - 1;
    EXPECT_NEAR(v.floor, 1e-10 * vy, 1e-12 * vy);
    for (double f : v.fitted) EXPECT_GE(f, v.floor);
    for (double q = -0.5; q <= 1.5; q += 0.05) EXPECT_GE(v.predict(q), v.floor);
    // Residuals are at rounding level, so the floor is what comes back.
    for (double f : v.fitted) EXPECT_NEAR(f, v.floor, 1e-3 * v.floor + 1e-20);

    const auto noisy = make_data(1000, 13, -1, 1, [](double x) { return x; }, 1.0);
    const auto vn = fit_variance(fit_mean(noisy.x, noisy.y));
    for (double f : vn.fitted) EXPECT_GE(f, vn.floor);
}

TEST(ResidualVariance, Values) {
    const auto flat = make_data(100, 14, 0, 1, [](double x) { return 2 * x; }, 0.0);
    EXPECT_NEAR(residual_variance(fit_mean(flat.x, flat.y)), 0.0, 1e-20);

    const auto indep = make_data(5000, 15, 0, 1, [](double) { return 0.0; }, std::sqrt(2.0));
    const double rv = residual_variance(fit_mean(indep.x, indep.y));
    EXPECT_NEAR(rv, 2.0, 3.0 * 2.0 * std::sqrt(2.0 / 5000.0));

    // X2 = X1 + E2 with uniform laws on [-1, 1]: residual variance about 1/3.
    Rng rng(16, 0);
    std::vector<double> x, y;
    for (int i = 0; i < 5000; ++i) {
        const double a = 2 * rng.uniform() - 1;
        x.push_back(a);
        y.push_back(a + 2 * rng.uniform() - 1);
    }
    EXPECT_NEAR(residual_variance(fit_mean(x, y)), 1.0 / 3.0, 0.02);
}
