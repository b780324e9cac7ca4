#pragma once

#include "causal_gap/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace causal_gap {

struct QuadOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    std::size_t max_subdivisions = 2000;
};

template <std::size_t N>
struct QuadResult {
    std::array<double, N> value{};
    std::array<double, N> error{};
    std::size_t subdivisions = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

namespace detail {

// Kronrod 15-point abscissae and weights with the embedded 7-point Gauss rule
// (QUADPACK qk15 constants).
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N>
struct Segment {
    double a = 0.0, b = 0.0;
    std::array<double, N> value{};
    std::array<double, N> error{};
    double priority = 0.0;

    bool operator<(const Segment& other) const { return priority < other.priority; }
};

template <std::size_t N, class F>
Segment<N> gk15(const F& f, double a, double b) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr double uflow = std::numeric_limits<double>::min();
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double abs_half = std::abs(half);

    std::array<std::array<double, N>, 15> fv;
    fv[7] = f(center);
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        fv[j] = f(center - dx);
        fv[14 - j] = f(center + dx);
    }

    Segment<N> seg;
    seg.a = a;
    seg.b = b;
    for (std::size_t k = 0; k < N; ++k) {
        double resk = kWgk[7] * fv[7][k];
        double resg = kWg[3] * fv[7][k];
        double resabs = std::abs(resk);
        for (std::size_t j = 0; j < 7; ++j) {
            const double pair = fv[j][k] + fv[14 - j][k];
            resk += kWgk[j] * pair;
            resabs += kWgk[j] * (std::abs(fv[j][k]) + std::abs(fv[14 - j][k]));
            if (j % 2 == 1) resg += kWg[j / 2] * pair;
        }
        const double mean = 0.5 * resk;
        double resasc = kWgk[7] * std::abs(fv[7][k] - mean);
        for (std::size_t j = 0; j < 7; ++j) {
            resasc += kWgk[j] * (std::abs(fv[j][k] - mean) + std::abs(fv[14 - j][k] - mean));
        }
        double err = std::abs((resk - resg) * half);
        resasc *= abs_half;
        resabs *= abs_half;
        if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
        if (resabs > uflow / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
        seg.value[k] = resk * half;
        seg.error[k] = err;
    }
    return seg;
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (G7/K15) integration of a vector-valued
/// integrand f: double -> std::array<double, N> over [a, b].
///
/// `breakpoints` inside (a, b) seed the initial partition, which is where
/// known kinks or jumps of the integrand belong. Convergence requires every
/// component to satisfy err_k <= max(abs_tol, rel_tol |I_k|). On running out
/// of subdivisions the best estimate is returned with converged = false.
///
/// `ref_scale[k] > 0` loosens component k to
/// err_k <= max(abs_tol, rel_tol max(|I_k|, ref_scale[k] |I_0|)); this lets a
/// first moment that happens to vanish converge relative to the mass in
/// component 0.
template <std::size_t N, class F>
QuadResult<N> integrate_vec(const F& f, double a, double b, const QuadOptions& opt = {},
                            std::span<const double> breakpoints = {},
                            const std::array<double, N>& ref_scale = {}) {
    if (!std::isfinite(a) || !std::isfinite(b)) {
        throw DomainError("integrate: bounds must be finite");
    }
    QuadResult<N> out;
    if (a == b) {
        out.converged = true;
        return out;
    }
    const double sign = a < b ? 1.0 : -1.0;
    const double lo = std::min(a, b), hi = std::max(a, b);

    std::vector<double> cuts{lo};
    for (double p : breakpoints) {
        if (p > lo && p < hi) cuts.push_back(p);
    }
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    auto priority = [](const detail::Segment<N>& s) {
        return *std::max_element(s.error.begin(), s.error.end());
    };

    std::priority_queue<detail::Segment<N>> heap;
    std::array<double, N> total{}, total_err{};
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        auto seg = detail::gk15<N>(f, cuts[i], cuts[i + 1]);
        seg.priority = priority(seg);
        out.evaluations += 15;
        for (std::size_t k = 0; k < N; ++k) {
            total[k] += seg.value[k];
            total_err[k] += seg.error[k];
        }
        heap.push(seg);
    }

    auto done = [&] {
        for (std::size_t k = 0; k < N; ++k) {
            const double ref = std::max(std::abs(total[k]), ref_scale[k] * std::abs(total[0]));
            if (!(total_err[k] <= std::max(opt.abs_tol, opt.rel_tol * ref))) return false;
        }
        return true;
    };

    std::size_t count = heap.size();
    while (!done()) {
        if (count >= opt.max_subdivisions) break;
        const auto worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) break;  // interval exhausted in floating point
        heap.pop();
        auto left = detail::gk15<N>(f, worst.a, mid);
        auto right = detail::gk15<N>(f, mid, worst.b);
        left.priority = priority(left);
        right.priority = priority(right);
        out.evaluations += 30;
        for (std::size_t k = 0; k < N; ++k) {
            total[k] += left.value[k] + right.value[k] - worst.value[k];
            total_err[k] += left.error[k] + right.error[k] - worst.error[k];
        }
        heap.push(left);
        heap.push(right);
        ++count;
    }

    // Re-sum from the leaves to shed the drift of the running updates.
    std::array<double, N> sum{}, err{};
    while (!heap.empty()) {
        const auto& s = heap.top();
        for (std::size_t k = 0; k < N; ++k) {
            sum[k] += s.value[k];
            err[k] += s.error[k];
        }
        heap.pop();
    }
    for (std::size_t k = 0; k < N; ++k) {
        out.value[k] = sign * sum[k];
        out.error[k] = err[k];
        total[k] = sum[k];
        total_err[k] = err[k];
    }
    out.subdivisions = count;
    out.converged = done();
    return out;
}

struct ScalarQuadResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t subdivisions = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

template <class F>
ScalarQuadResult integrate(const F& f, double a, double b, const QuadOptions& opt = {},
                           std::span<const double> breakpoints = {}) {
    auto r = integrate_vec<1>([&](double x) { return std::array<double, 1>{f(x)}; }, a, b, opt,
                              breakpoints);
    return {r.value[0], r.error[0], r.subdivisions, r.evaluations, r.converged};
}

/// Like integrate(), but throws ToleranceError when the tolerance is not met.
template <class F>
double integrate_or_throw(const F& f, double a, double b, const QuadOptions& opt,
                          std::span<const double> breakpoints, const char* what) {
    const auto r = integrate(f, a, b, opt, breakpoints);
    if (!r.converged) {
        std::ostringstream os;
        os << what << ": quadrature did not converge on [" << a << ", " << b
           << "] (estimate " << r.value << ", error " << r.error << ", subdivisions "
           << r.subdivisions << ")";
        throw ToleranceError(os.str());
    }
    return r.value;
}

}  // namespace causal_gap
