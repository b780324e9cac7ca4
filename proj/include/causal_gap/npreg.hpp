#pragma once

#include "causal_gap/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace causal_gap {

struct SmootherOptions {
    std::size_t grid_count = 25;
    double grid_lo = 0.01;  // times sd(x)
    double grid_hi = 1.0;
    /// Above this many points the kernel sums are computed on a linear-binned
    /// grid instead of pairwise.
    std::size_t exact_max_n = 1000;
    /// Kernel support cut, in bandwidths.
    double cut = 8.0;
    /// Grid cells per bandwidth in the binned path.
    double cells_per_bandwidth = 16.0;
    std::size_t max_cells = std::size_t{1} << 18;
};

/// Local-linear fit with a Gaussian kernel. `x_train`/`y_train` keep the
/// caller's order; `fitted` and `residuals` are aligned with them.
struct SmootherFit {
    std::vector<double> x_train, y_train;
    double bandwidth = 0.0;
    std::vector<double> fitted;
    std::vector<double> residuals;
    double loocv_score = 0.0;
    /// Lower bound applied to every fitted and predicted value (-inf if none).
    double floor = -std::numeric_limits<double>::infinity();
    bool binned = false;
    std::vector<double> bandwidth_grid;
    std::vector<double> loocv_grid;  // NaN where the bandwidth was singular

    /// Training data sorted by x, used by predict().
    std::vector<double> xs, ys;
    double cut = 8.0;

    std::size_t size() const { return x_train.size(); }

    double predict(double q) const;
    std::vector<double> predict(std::span<const double> q) const {
        std::vector<double> out(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) out[i] = predict(q[i]);
        return out;
    }

    static constexpr const char* kDescription = "local-linear, gaussian kernel, LOOCV bandwidth";
};

namespace detail {

inline constexpr double kKernelMassFloor = 1e-12;
inline constexpr double kDetRelFloor = 1e-10;

struct LocalSums {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, t0 = 0.0, t1 = 0.0;
    void add(double w, double d, double y) {
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
        t0 += w * y;
        t1 += w * d * y;
    }
};

enum class LocalStatus { ok, constant, empty };

struct LocalLine {
    LocalStatus status = LocalStatus::empty;
    double value = 0.0;
    double slope = 0.0;
    double self_weight = 1.0;  // hat-matrix diagonal for a unit-kernel point at the centre
};

inline LocalLine solve_local(const LocalSums& s) {
    LocalLine l;
    if (!(s.s0 >= kKernelMassFloor)) return l;
    const double det = s.s0 * s.s2 - s.s1 * s.s1;
    if (!(det > kDetRelFloor * s.s0 * s.s2) || !(s.s2 > 0.0)) {
        l.status = LocalStatus::constant;
        l.value = s.t0 / s.s0;
        l.self_weight = 1.0 / s.s0;
        return l;
    }
    l.status = LocalStatus::ok;
    l.value = (s.s2 * s.t0 - s.s1 * s.t1) / det;
    l.slope = (s.s0 * s.t1 - s.s1 * s.t0) / det;
    l.self_weight = s.s2 / det;
    return l;
}

inline double kernel(double u) { return std::exp(-0.5 * u * u); }

inline double sample_sd(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double a : v) ss += (a - mean) * (a - mean);
    return std::sqrt(ss / (n - 1.0));
}

// Sums around `x0` over sorted data within cut * h.
inline LocalSums window_sums(const std::vector<double>& xs, const std::vector<double>& ys, double x0, double h,
                             double cut) {
    LocalSums s;
    const auto lo = std::lower_bound(xs.begin(), xs.end(), x0 - cut * h) - xs.begin();
    const auto hi = std::upper_bound(xs.begin(), xs.end(), x0 + cut * h) - xs.begin();
    for (auto j = lo; j < hi; ++j) {
        const double d = xs[j] - x0;
        s.add(kernel(d / h), d, ys[j]);
    }
    return s;
}

struct BandwidthEval {
    double cv = std::numeric_limits<double>::quiet_NaN();  // NaN = singular
    std::vector<double> fitted;                             // sorted order
};

// Exact pairwise sums; LOO by removing the self term.
inline BandwidthEval eval_exact(const std::vector<double>& xs, const std::vector<double>& ys, double h,
                                double cut, bool want_fitted) {
    const std::size_t n = xs.size();
    BandwidthEval out;
    if (want_fitted) out.fitted.resize(n);
    std::size_t lo = 0, hi = 0;
    double sse = 0.0;
    bool singular = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = xs[i];
        while (xs[lo] < xi - cut * h) ++lo;
        while (hi < n && xs[hi] <= xi + cut * h) ++hi;
        LocalSums s;
        for (std::size_t j = lo; j < hi; ++j) {
            const double d = xs[j] - xi;
            s.add(kernel(d / h), d, ys[j]);
        }
        if (want_fitted) {
            const LocalLine l = solve_local(s);
            out.fitted[i] = l.status == LocalStatus::empty ? ys[i] : l.value;
        }
        if (singular) continue;
        LocalSums loo = s;
        loo.s0 -= 1.0;
        loo.t0 -= ys[i];
        const LocalLine l = solve_local(loo);
        if (l.status != LocalStatus::ok) {
            singular = true;
            continue;
        }
        const double r = ys[i] - l.value;
        sse += r * r;
    }
    if (!singular) out.cv = sse / static_cast<double>(n);
    return out;
}

// Linear binning onto a grid of spacing h / cells_per_bandwidth, kernel sums
// by direct convolution, local lines at grid nodes interpolated back to the
// data. Each cell keeps first and second x-moments about its node, so a node's
// fit is an exact weighted least-squares line in the true x (affine data is
// reproduced exactly); only the kernel weights are evaluated at node spacing.
// LOO through the hat diagonal: r_loo = (y - yhat) / (1 - L_ii).
inline BandwidthEval eval_binned(const std::vector<double>& xs, const std::vector<double>& ys, double h,
                                 const SmootherOptions& opt, bool want_fitted) {
    const std::size_t n = xs.size();
    const double a = xs.front(), range = xs.back() - xs.front();
    double delta = h / opt.cells_per_bandwidth;
    if (range / delta + 2.0 > static_cast<double>(opt.max_cells)) {
        delta = range / static_cast<double>(opt.max_cells - 2);
    }
    const auto m = static_cast<std::size_t>(std::ceil(range / delta)) + 2;
    std::vector<double> c(m, 0.0), sx(m, 0.0), sxx(m, 0.0), sy(m, 0.0), sxy(m, 0.0);
    std::vector<std::size_t> cell(n);
    std::vector<double> frac(n);
    auto deposit = [&](std::size_t k, double wgt, double x, double y) {
        const double u = x - (a + static_cast<double>(k) * delta);
        c[k] += wgt;
        sx[k] += wgt * u;
        sxx[k] += wgt * u * u;
        sy[k] += wgt * y;
        sxy[k] += wgt * u * y;
    };
    for (std::size_t i = 0; i < n; ++i) {
        const double pos = (xs[i] - a) / delta;
        auto k = static_cast<std::size_t>(pos);
        if (k >= m - 1) k = m - 2;
        const double f = std::clamp(pos - static_cast<double>(k), 0.0, 1.0);
        cell[i] = k;
        frac[i] = f;
        deposit(k, 1.0 - f, xs[i], ys[i]);
        deposit(k + 1, f, xs[i], ys[i]);
    }
    const auto reach = static_cast<std::ptrdiff_t>(std::min<double>(std::ceil(opt.cut * h / delta), m));
    std::vector<double> w(static_cast<std::size_t>(reach) + 1);
    for (std::ptrdiff_t k = 0; k <= reach; ++k) w[static_cast<std::size_t>(k)] = kernel(k * delta / h);

    std::vector<double> val(m), lii(m);
    std::vector<char> ok(m);
    const auto mm = static_cast<std::ptrdiff_t>(m);
    for (std::ptrdiff_t g = 0; g < mm; ++g) {
        LocalSums s;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, g - reach);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(mm - 1, g + reach);
        for (std::ptrdiff_t k = lo; k <= hi; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            if (c[ku] == 0.0) continue;
            const double wk = w[static_cast<std::size_t>(std::abs(k - g))];
            const double d = static_cast<double>(k - g) * delta;
            s.s0 += wk * c[ku];
            s.s1 += wk * (d * c[ku] + sx[ku]);
            s.s2 += wk * (d * d * c[ku] + 2.0 * d * sx[ku] + sxx[ku]);
            s.t0 += wk * sy[ku];
            s.t1 += wk * (d * sy[ku] + sxy[ku]);
        }
        const LocalLine l = solve_local(s);
        const auto gi = static_cast<std::size_t>(g);
        ok[gi] = l.status != LocalStatus::empty;
        val[gi] = l.value;
        lii[gi] = l.self_weight;
    }

    BandwidthEval out;
    if (want_fitted) out.fitted.resize(n);
    double sse = 0.0;
    bool singular = false;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = cell[i];
        double f = frac[i];
        if (!ok[k]) f = 1.0;
        if (!ok[k + 1]) f = 0.0;
        double yhat, l;
        if (!ok[k] && !ok[k + 1]) {
            yhat = ys[i];
            l = 1.0;
        } else {
            yhat = (1.0 - f) * val[k] + f * val[k + 1];
            l = (1.0 - f) * lii[k] + f * lii[k + 1];
        }
        if (want_fitted) out.fitted[i] = yhat;
        if (!(1.0 - l > 1e-8)) {
            singular = true;
            continue;
        }
        const double r = (ys[i] - yhat) / (1.0 - l);
        sse += r * r;
    }
    if (!singular) out.cv = sse / static_cast<double>(n);
    return out;
}

inline void check_inputs(std::span<const double> x, std::span<const double> y) {
    detail::require(x.size() == y.size(), "fit_mean: x and y must have equal length");
    detail::require(x.size() >= 20, "fit_mean: need at least 20 points");
    for (std::size_t i = 0; i < x.size(); ++i) {
        detail::require(std::isfinite(x[i]) && std::isfinite(y[i]), "fit_mean: inputs must be finite");
    }
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    detail::require(*mn < *mx, "fit_mean: x is constant (degenerate regressor)");
}

inline SmootherFit prepare(std::span<const double> x, std::span<const double> y, std::vector<std::size_t>& order) {
    SmootherFit fit;
    fit.x_train.assign(x.begin(), x.end());
    fit.y_train.assign(y.begin(), y.end());
    order.resize(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    fit.xs.resize(x.size());
    fit.ys.resize(x.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        fit.xs[k] = x[order[k]];
        fit.ys[k] = y[order[k]];
    }
    return fit;
}

inline void finish(SmootherFit& fit, const std::vector<std::size_t>& order, const std::vector<double>& fitted_sorted) {
    const std::size_t n = order.size();
    fit.fitted.resize(n);
    fit.residuals.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = order[k];
        fit.fitted[i] = std::max(fitted_sorted[k], fit.floor);
        fit.residuals[i] = fit.y_train[i] - fit.fitted[i];
    }
}

inline BandwidthEval evaluate(const SmootherFit& fit, double h, const SmootherOptions& opt, bool want_fitted) {
    return fit.binned ? eval_binned(fit.xs, fit.ys, h, opt, want_fitted)
                      : eval_exact(fit.xs, fit.ys, h, opt.cut, want_fitted);
}

}  // namespace detail

inline double SmootherFit::predict(double q) const {
    const double lo = xs.front(), hi = xs.back();
    const double at = std::clamp(q, lo, hi);
    const detail::LocalLine l = detail::solve_local(detail::window_sums(xs, ys, at, bandwidth, cut));
    double v;
    if (l.status == detail::LocalStatus::empty) {
        // Nearest training response.
        auto it = std::lower_bound(xs.begin(), xs.end(), q);
        std::size_t k = static_cast<std::size_t>(it - xs.begin());
        if (k == xs.size()) --k;
        else if (k > 0 && q - xs[k - 1] <= xs[k] - q) --k;
        v = ys[k];
    } else {
        v = l.value + l.slope * (q - at);
    }
    return std::max(v, floor);
}

/// Local-linear fit at a fixed bandwidth.
inline SmootherFit fit_mean_at(std::span<const double> x, std::span<const double> y, double bandwidth,
                               const SmootherOptions& opt = {}) {
    detail::check_inputs(x, y);
    detail::require(std::isfinite(bandwidth) && bandwidth > 0.0, "fit_mean_at: bandwidth must be positive");
    std::vector<std::size_t> order;
    SmootherFit fit = detail::prepare(x, y, order);
    fit.cut = opt.cut;
    fit.binned = x.size() > opt.exact_max_n;
    fit.bandwidth = bandwidth;
    auto ev = detail::evaluate(fit, bandwidth, opt, true);
    fit.loocv_score = ev.cv;
    fit.bandwidth_grid = {bandwidth};
    fit.loocv_grid = {ev.cv};
    detail::finish(fit, order, ev.fitted);
    return fit;
}

/// Local-linear fit with the bandwidth chosen by leave-one-out CV over
/// grid_count log-spaced multiples of sd(x); ties go to the larger bandwidth.
inline SmootherFit fit_mean(std::span<const double> x, std::span<const double> y, const SmootherOptions& opt = {}) {
    detail::check_inputs(x, y);
    detail::require(opt.grid_count >= 1 && opt.grid_lo > 0.0 && opt.grid_hi >= opt.grid_lo,
                    "fit_mean: invalid bandwidth grid");
    std::vector<std::size_t> order;
    SmootherFit fit = detail::prepare(x, y, order);
    fit.cut = opt.cut;
    fit.binned = x.size() > opt.exact_max_n;
    const double sd = detail::sample_sd(fit.xs);  // sorted, so independent of input order

    const std::size_t g = opt.grid_count;
    fit.bandwidth_grid.resize(g);
    fit.loocv_grid.resize(g);
    std::ptrdiff_t best = -1;
    for (std::size_t k = 0; k < g; ++k) {
        const double t = g == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(g - 1);
        const double h = sd * std::exp(std::log(opt.grid_lo) + t * (std::log(opt.grid_hi) - std::log(opt.grid_lo)));
        fit.bandwidth_grid[k] = h;
        fit.loocv_grid[k] = detail::evaluate(fit, h, opt, false).cv;
        if (std::isnan(fit.loocv_grid[k])) continue;
        if (best < 0 || fit.loocv_grid[k] <= fit.loocv_grid[static_cast<std::size_t>(best)]) {
            best = static_cast<std::ptrdiff_t>(k);
        }
    }
    if (best < 0) throw NumericError("fit_mean: every bandwidth on the LOOCV grid gave a singular local fit");
    const auto b = static_cast<std::size_t>(best);
    fit.bandwidth = fit.bandwidth_grid[b];
    fit.loocv_score = fit.loocv_grid[b];
    const auto ev = detail::evaluate(fit, fit.bandwidth, opt, true);
    detail::finish(fit, order, ev.fitted);
    return fit;
}

/// Conditional variance: a second local-linear fit of the squared residuals,
/// floored at max(1e-10 Var(y), 1e-300).
inline SmootherFit fit_variance(const SmootherFit& mean_fit, const SmootherOptions& opt = {}) {
    detail::require(!mean_fit.residuals.empty(), "fit_variance: mean fit has no residuals");
    std::vector<double> r2(mean_fit.residuals.size());
    for (std::size_t i = 0; i < r2.size(); ++i) r2[i] = mean_fit.residuals[i] * mean_fit.residuals[i];
    const double sd_y = detail::sample_sd(mean_fit.y_train);
    const double floor = std::max(1e-10 * sd_y * sd_y, 1e-300);
    SmootherFit v = fit_mean(mean_fit.x_train, r2, opt);
    v.floor = floor;
    for (std::size_t i = 0; i < v.fitted.size(); ++i) {
        v.fitted[i] = std::max(v.fitted[i], floor);
        v.residuals[i] = v.y_train[i] - v.fitted[i];
    }
    return v;
}

/// Mean squared residual, without a degrees-of-freedom correction.
inline double residual_variance(const SmootherFit& fit) {
    double s = 0.0;
    for (double r : fit.residuals) s += r * r;
    return s / static_cast<double>(fit.residuals.size());
}

}  // namespace causal_gap
