#pragma once

#include "causal_gap/error.hpp"
#include "causal_gap/npreg.hpp"
#include "causal_gap/parallel.hpp"
#include "causal_gap/rng.hpp"
#include "causal_gap/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace causal_gap {

struct HsicOptions {
    std::size_t median_points = 1000;
    std::size_t max_n = 5000;
    std::size_t jobs = 1;
};

struct HsicResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t permutations = 0;
    double bandwidth_x = 1.0;
    double bandwidth_y = 1.0;
    std::size_t n_used = 0;
};

namespace detail {

/// Median pairwise distance on at most `cap` evenly spaced points; falls back
/// to the median nonzero distance under heavy ties, and to 0 when constant.
inline double median_distance(std::span<const double> v, std::size_t cap) {
    const std::size_t n = v.size();
    const std::size_t m = std::min(n, cap);
    std::vector<double> pts(m);
    for (std::size_t k = 0; k < m; ++k) pts[k] = v[k * n / m];
    std::vector<double> d;
    d.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) d.push_back(std::abs(pts[i] - pts[j]));
    }
    auto median = [](std::vector<double>& a) {
        const std::size_t h = a.size() / 2;
        std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(h), a.end());
        double hi = a[h];
        if (a.size() % 2 == 1) return hi;
        const double lo = *std::max_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(h));
        return 0.5 * (lo + hi);
    };
    if (d.empty()) return 0.0;
    double med = median(d);
    if (med > 0.0) return med;
    std::vector<double> nz;
    for (double a : d) {
        if (a > 0.0) nz.push_back(a);
    }
    return nz.empty() ? 0.0 : median(nz);
}

/// Symmetric Gaussian Gram matrix, row-major n x n.
inline std::vector<double> gram(std::span<const double> v, double bw) {
    const std::size_t n = v.size();
    std::vector<double> k(n * n);
    const double c = -0.5 / (bw * bw);
    for (std::size_t i = 0; i < n; ++i) {
        k[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = v[i] - v[j];
            k[i * n + j] = k[j * n + i] = std::exp(c * d * d);
        }
    }
    return k;
}

/// H K H in place.
inline void centre(std::vector<double>& k, std::size_t n) {
    std::vector<double> row(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += k[i * n + j];
        row[i] = s / static_cast<double>(n);
        total += s;
    }
    total /= static_cast<double>(n) * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = k[i * n + j] - row[i] - row[j] + total;
            k[i * n + j] = k[j * n + i] = v;
        }
    }
}

/// (1/n^2) sum_ij Kc_ij L_{pi(i) pi(j)} over the upper triangle.
inline double permuted_statistic(const std::vector<double>& kc, const std::vector<double>& l, std::size_t n,
                                 const std::vector<std::size_t>& pi) {
    double diag = 0.0, off = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* krow = &kc[i * n];
        const double* lrow = &l[pi[i] * n];
        diag += krow[i] * lrow[pi[i]];
        double s = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) s += krow[j] * lrow[pi[j]];
        off += s;
    }
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    return (diag + 2.0 * off) / nn;
}

struct HsicSetup {
    std::vector<double> kc, l;
    std::size_t n = 0;
    double bw_x = 1.0, bw_y = 1.0;
    bool degenerate = false;
};

inline HsicSetup hsic_setup(std::span<const double> x, std::span<const double> y, const HsicOptions& opt) {
    detail::require(x.size() == y.size(), "hsic: x and y must have equal length");
    detail::require(x.size() >= 20, "hsic: need at least 20 points");
    HsicSetup s;
    s.n = x.size();
    const double mx = median_distance(x, opt.median_points);
    const double my = median_distance(y, opt.median_points);
    if (mx == 0.0 || my == 0.0) {
        s.degenerate = true;  // a constant input has a zero centred Gram matrix
        return s;
    }
    s.bw_x = mx;
    s.bw_y = my;
    s.kc = gram(x, mx);
    centre(s.kc, s.n);
    s.l = gram(y, my);
    return s;
}

// Seeded subsample without replacement, in the original order.
inline std::vector<std::size_t> subsample(std::size_t n, std::size_t m, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed, 0);
    for (std::size_t k = 0; k < m; ++k) std::swap(idx[k], idx[k + rng.below(n - k)]);
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    std::vector<std::size_t> pi(n);
    std::iota(pi.begin(), pi.end(), std::size_t{0});
    Rng rng(seed, stream);
    for (std::size_t k = n; k > 1; --k) std::swap(pi[k - 1], pi[rng.below(k)]);
    return pi;
}

}  // namespace detail

/// Biased HSIC V-statistic (1/n^2) trace(K H L H), Gaussian kernels with
/// median-heuristic bandwidths.
inline double hsic_statistic(std::span<const double> x, std::span<const double> y, const HsicOptions& opt = {}) {
    const auto s = detail::hsic_setup(x, y, opt);
    if (s.degenerate) return 0.0;
    std::vector<std::size_t> id(s.n);
    std::iota(id.begin(), id.end(), std::size_t{0});
    return detail::permuted_statistic(s.kc, s.l, s.n, id);
}

/// Permutation test with p = (1 + #{T_b >= T}) / (B + 1). Permutation b is
/// drawn from substream b + 1 of `seed`; inputs longer than max_n are first
/// subsampled from substream 0.
inline HsicResult hsic_test(std::span<const double> x, std::span<const double> y, std::size_t permutations,
                            std::uint64_t seed, const HsicOptions& opt = {}) {
    detail::require(permutations >= 99, "hsic_test: need at least 99 permutations");
    detail::require(x.size() == y.size(), "hsic_test: x and y must have equal length");
    std::vector<double> xs(x.begin(), x.end()), ys(y.begin(), y.end());
    if (xs.size() > opt.max_n) {
        const auto idx = detail::subsample(xs.size(), opt.max_n, seed);
        std::vector<double> a(idx.size()), b(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            a[k] = x[idx[k]];
            b[k] = y[idx[k]];
        }
        xs.swap(a);
        ys.swap(b);
    }
    const auto s = detail::hsic_setup(xs, ys, opt);
    HsicResult r;
    r.permutations = permutations;
    r.n_used = xs.size();
    r.bandwidth_x = s.bw_x;
    r.bandwidth_y = s.bw_y;
    if (s.degenerate) {
        r.statistic = 0.0;
        r.p_value = 1.0;
        return r;
    }
    std::vector<std::size_t> id(s.n);
    std::iota(id.begin(), id.end(), std::size_t{0});
    r.statistic = detail::permuted_statistic(s.kc, s.l, s.n, id);
    std::vector<double> null(permutations);
    parallel_for(permutations, opt.jobs, [&](std::size_t b) {
        null[b] = detail::permuted_statistic(s.kc, s.l, s.n, detail::shuffled(s.n, seed, b + 1));
    });
    std::size_t exceed = 0;
    for (double t : null) exceed += t >= r.statistic ? 1 : 0;
    r.p_value = static_cast<double>(1 + exceed) / static_cast<double>(permutations + 1);
    return r;
}

struct DependenceDirection {
    Decision decision = Decision::tie;
    HsicResult fwd;  // HSIC(x, residual of y on x)
    HsicResult bwd;  // HSIC(y, residual of x on y)
    double bandwidth_fwd = 0.0;
    double bandwidth_bwd = 0.0;
};

/// Regress each way with the local-linear smoother and prefer the direction
/// whose residuals are less dependent on the regressor.
inline DependenceDirection direction_by_dependence(std::span<const double> x, std::span<const double> y,
                                                   std::size_t permutations, std::uint64_t seed,
                                                   const HsicOptions& opt = {},
                                                   const SmootherOptions& smoother = {}) {
    detail::require(x.size() == y.size(), "direction_by_dependence: x and y must have equal length");
    detail::require(x.size() >= 50, "direction_by_dependence: need at least 50 points");
    const SmootherFit fy = fit_mean(x, y, smoother);
    const SmootherFit fx = fit_mean(y, x, smoother);
    DependenceDirection d;
    d.bandwidth_fwd = fy.bandwidth;
    d.bandwidth_bwd = fx.bandwidth;
    d.fwd = hsic_test(x, fy.residuals, permutations, seed, opt);
    d.bwd = hsic_test(y, fx.residuals, permutations, seed, opt);
    if (d.fwd.statistic < d.bwd.statistic) d.decision = Decision::forward;
    else if (d.bwd.statistic < d.fwd.statistic) d.decision = Decision::backward;
    return d;
}

}  // namespace causal_gap
