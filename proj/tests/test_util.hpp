#pragma once

// Independent numerical oracles shared by the test suites.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace testutil {

/// Gauss-Hermite rule for the standard normal weight (probabilists'
/// polynomials) from the Jacobi matrix eigenproblem.
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    std::vector<double> x(n), w(n);
    for (int k = 0; k < n; ++k) {
        x[k] = es.eigenvalues()(k);
        const double v = es.eigenvectors()(0, k);
        w[k] = v * v;
    }
    return {x, w};
}

/// int_0^inf f(x) dx by the exp-sinh substitution x = exp(pi/2 sinh t).
inline double exp_sinh(const std::function<double(double)>& f, double h = 1.0 / 128.0, double tmax = 4.5) {
    double s = 0.0;
    for (double t = -tmax; t <= tmax + 1e-12; t += h) {
        const double u = 0.5 * std::numbers::pi * std::sinh(t);
        const double x = std::exp(u);
        if (x == 0.0 || !std::isfinite(x)) continue;
        const double v = f(x);
        if (std::isfinite(v)) s += v * x * 0.5 * std::numbers::pi * std::cosh(t);
    }
    return s * h;
}

/// int_a^b f by tanh-sinh on a finite interval.
inline double tanh_sinh(const std::function<double(double)>& f, double a, double b, double h = 1.0 / 64.0,
                        double tmax = 3.5) {
    const double c = 0.5 * (a + b), r = 0.5 * (b - a);
    double s = 0.0;
    for (double t = -tmax; t <= tmax + 1e-12; t += h) {
        const double u = 0.5 * std::numbers::pi * std::sinh(t);
        const double x = std::tanh(u);
        const double w = 0.5 * std::numbers::pi * std::cosh(t) / (std::cosh(u) * std::cosh(u));
        const double pt = c + r * x;
        if (pt <= a || pt >= b) continue;
        s += w * f(pt);
    }
    return s * h * r;
}

/// sup |F_n - F| of a sample against a cdf.
inline double ks_distance(std::vector<double> v, const std::function<double(double)>& cdf) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double f = cdf(v[i]);
        d = std::max({d, std::abs(static_cast<double>(i + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
    }
    return d;
}

inline double ks_critical_1pct(std::size_t n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

/// Binned estimate of E[Var(X1 | X2)] from a large sample: equal-count bins
/// on X2, within-bin variance, averaged with bin weights. The SE is the
/// sampling error of the within-bin variances.
inline McEstimate binned_conditional_variance(const std::vector<double>& x1, const std::vector<double>& x2,
                                              std::size_t bins) {
    const std::size_t n = x1.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x2[a] < x2[b]; });
    std::vector<double> contrib;
    double total = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
        const double m = static_cast<double>(hi - lo);
        double s = 0.0, s2 = 0.0;
        for (std::size_t k = lo; k < hi; ++k) s += x1[idx[k]];
        const double mu = s / m;
        for (std::size_t k = lo; k < hi; ++k) s2 += (x1[idx[k]] - mu) * (x1[idx[k]] - mu);
        const double var = s2 / (m - 1.0);
        contrib.push_back(var);
        total += var * m;
    }
    McEstimate e;
    e.mean = total / static_cast<double>(n);
    double v4 = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
        const double m = static_cast<double>(hi - lo);
        double s = 0.0;
        for (std::size_t k = lo; k < hi; ++k) s += x1[idx[k]];
        const double mu = s / m;
        double m4 = 0.0;
        for (std::size_t k = lo; k < hi; ++k) m4 += std::pow(x1[idx[k]] - mu, 4);
        m4 /= m;
        const double var = contrib[b];
        v4 += (m4 - var * var) / m * (m / static_cast<double>(n)) * (m / static_cast<double>(n));
    }
    e.se = std::sqrt(v4);
    return e;
}

struct CommandResult {
    int exit_code = -1;
    std::string out;
};

/// Runs a shell command, capturing stdout.
inline CommandResult run(const std::string& cmd) {
    CommandResult r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    std::array<char, 4096> buf;
    std::size_t got;
    while ((got = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), got);
    const int status = pclose(p);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

}  // namespace testutil
