#pragma once

#include "causal_gap/error.hpp"
#include "causal_gap/rng.hpp"
#include "causal_gap/specfun.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace causal_gap {

// ---------------------------------------------------------------------------
// Mechanisms
// ---------------------------------------------------------------------------

/// Cause-to-effect map. Kept as a closed description (not a callable) so the
/// population code can invert it and place breakpoints.
///
///   linear(b):         x -> b x
///   power(b, nu):      x -> b sign(x) |x|^nu / sqrt(V(nu))
///   even_power(b, nu): x -> b |x|^nu / sqrt(V(nu))
class Mechanism {
public:
    enum class Kind { linear, power, even_power };

    static Mechanism linear(double beta) {
        detail::require(std::isfinite(beta), "linear mechanism: beta must be finite");
        return Mechanism(Kind::linear, beta, 1.0);
    }
    static Mechanism power(double beta, double nu) {
        detail::require(std::isfinite(beta), "power mechanism: beta must be finite");
        detail::require(std::isfinite(nu) && nu > 0.0, "power mechanism: nu must be positive");
        return Mechanism(Kind::power, beta, nu);
    }
    static Mechanism even_power(double beta, double nu) {
        detail::require(std::isfinite(beta), "even_power mechanism: beta must be finite");
        detail::require(std::isfinite(nu) && nu > 0.0, "even_power mechanism: nu must be positive");
        return Mechanism(Kind::even_power, beta, nu);
    }

    Kind kind() const { return kind_; }
    double beta() const { return beta_; }
    double nu() const { return nu_; }
    /// sqrt(V(nu)); exactly 1 for the linear map and for nu = 1.
    double norm() const { return norm_; }

    double operator()(double x) const {
        switch (kind_) {
            case Kind::linear: return beta_ * x;
            case Kind::power: {
                const double m = nu_ == 1.0 ? std::abs(x) : std::pow(std::abs(x), nu_);
                return beta_ * (x < 0.0 ? -m : m) / norm_;
            }
            case Kind::even_power: return beta_ * std::pow(std::abs(x), nu_) / norm_;
        }
        return 0.0;
    }

    /// h(x + dx) - h(x) without the cancellation of differencing two calls.
    double increment(double x, double dx) const {
        if (kind_ == Kind::linear) return beta_ * dx;
        const double x1 = x + dx;
        if (x == 0.0 || x1 == 0.0 || (x < 0.0) != (x1 < 0.0)) return (*this)(x1) - (*this)(x);
        // Same sign: |x1|^nu - |x|^nu = |x|^nu expm1(nu log1p(dx / x)).
        const double rel = std::abs(x) == kInf ? 0.0 : std::expm1(nu_ * std::log1p(dx / x));
        const double m = std::pow(std::abs(x), nu_) * rel;
        const double sign = kind_ == Kind::power && x < 0.0 ? -1.0 : 1.0;
        return beta_ * sign * m / norm_;
    }

    bool is_odd() const { return kind_ != Kind::even_power || beta_ == 0.0; }
    bool is_even() const { return kind_ == Kind::even_power || beta_ == 0.0; }
    bool is_monotone() const { return kind_ != Kind::even_power && beta_ != 0.0; }

    /// Closed-form inverse for the strictly monotone maps.
    double inverse(double y) const {
        detail::require(is_monotone(), "Mechanism::inverse: map is not invertible");
        if (kind_ == Kind::linear) return y / beta_;
        const double t = y * norm_ / beta_;
        const double m = nu_ == 1.0 ? std::abs(t) : std::pow(std::abs(t), 1.0 / nu_);
        return t < 0.0 ? -m : m;
    }

    /// {x : h(x) in [y_lo, y_hi]} as a sorted list of disjoint intervals.
    std::vector<Interval> preimage(Interval y) const {
        if (!(y.lo <= y.hi)) return {};
        if (beta_ == 0.0) {
            if (y.contains(0.0)) return {Interval{}};
            return {};
        }
        if (is_monotone()) {
            double a = inverse_extended(y.lo), b = inverse_extended(y.hi);
            if (a > b) std::swap(a, b);
            return {Interval{a, b}};
        }
        // even_power: |x|^nu in [y_lo, y_hi] * norm / beta
        double r_lo = y.lo * norm_ / beta_, r_hi = y.hi * norm_ / beta_;
        if (r_lo > r_hi) std::swap(r_lo, r_hi);
        if (r_hi < 0.0) return {};
        r_lo = std::max(r_lo, 0.0);
        const double x_lo = std::pow(r_lo, 1.0 / nu_);
        const double x_hi = std::isfinite(r_hi) ? std::pow(r_hi, 1.0 / nu_) : kInf;
        if (x_lo == 0.0) return {Interval{-x_hi, x_hi}};
        return {Interval{-x_hi, -x_lo}, Interval{x_lo, x_hi}};
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        switch (kind_) {
            case Kind::linear: os << "linear(" << beta_ << ")"; break;
            case Kind::power: os << "power(" << beta_ << "," << nu_ << ")"; break;
            case Kind::even_power: os << "even_power(" << beta_ << "," << nu_ << ")"; break;
        }
        return os.str();
    }

private:
    Mechanism(Kind k, double beta, double nu)
        : kind_(k), beta_(beta), nu_(nu), norm_(k == Kind::linear ? 1.0 : std::sqrt(power_norm(nu))) {}

    double inverse_extended(double y) const {
        if (std::isinf(y)) return (y > 0) == (beta_ > 0) ? kInf : -kInf;
        return inverse(y);
    }

    Kind kind_;
    double beta_;
    double nu_;
    double norm_;
};

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Lower clamp applied to the scale function of a location-scale model.
inline constexpr double kScaleFloor = 1e-12;

/// X1 ~ cause, X2 = mechanism(X1) + scale(X1) * E with E ~ noise; scale = 1
/// when `scale_fn` is absent.
struct BivariateAnm {
    NoiseSpec cause;
    Mechanism mechanism;
    NoiseSpec noise;
    std::optional<Mechanism> scale_fn;

    double scale(double x1) const {
        if (!scale_fn) return 1.0;
        return std::max((*scale_fn)(x1), kScaleFloor);
    }

    std::string describe() const {
        std::string s = "cause=" + cause.describe() + " mechanism=" + mechanism.describe() +
                        " noise=" + noise.describe();
        if (scale_fn) s += " scale=" + scale_fn->describe();
        return s;
    }
};

/// Column-major table of reals with column names.
struct Dataset {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    std::size_t cols() const { return columns.size(); }
    std::span<const double> column(std::size_t j) const { return columns.at(j); }
};

/// A bijection on {0, ..., p-1}; order[k] is the node placed k-th.
struct Permutation {
    std::vector<std::size_t> order;

    static Permutation identity(std::size_t p) {
        Permutation pi;
        pi.order.resize(p);
        std::iota(pi.order.begin(), pi.order.end(), std::size_t{0});
        return pi;
    }

    std::size_t size() const { return order.size(); }

    bool valid() const {
        std::vector<char> seen(order.size(), 0);
        for (auto v : order) {
            if (v >= order.size() || seen[v]) return false;
            seen[v] = 1;
        }
        return true;
    }

    void validate() const { detail::require(valid(), "permutation is not a bijection"); }

    std::string describe() const {
        std::string s;
        for (std::size_t k = 0; k < order.size(); ++k) {
            if (k) s += '-';
            s += std::to_string(order[k] + 1);
        }
        return s;
    }
};

/// Every permutation of {0..p-1} in lexicographic order.
inline std::vector<Permutation> all_permutations(std::size_t p) {
    std::vector<Permutation> out;
    Permutation pi = Permutation::identity(p);
    do {
        out.push_back(pi);
    } while (std::next_permutation(pi.order.begin(), pi.order.end()));
    return out;
}

/// X_j = sum_k coeffs(j, k) X_k + E_j, with coeffs(j, k) != 0 only when k
/// precedes j in `order`.
struct LinearSem {
    std::size_t p = 0;
    Permutation order;
    Eigen::MatrixXd coeffs;
    std::vector<NoiseSpec> noises;

    void validate() const {
        detail::require(p >= 1, "LinearSem: p must be at least 1");
        detail::require(order.size() == p && order.valid(), "LinearSem: order must be a permutation of p nodes");
        detail::require(static_cast<std::size_t>(coeffs.rows()) == p &&
                            static_cast<std::size_t>(coeffs.cols()) == p,
                        "LinearSem: coefficient matrix must be p x p");
        detail::require(noises.size() == p, "LinearSem: need one noise law per node");
        std::vector<std::size_t> rank(p);
        for (std::size_t k = 0; k < p; ++k) rank[order.order[k]] = k;
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = 0; k < p; ++k) {
                const double b = coeffs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
                detail::require(std::isfinite(b), "LinearSem: coefficients must be finite");
                if (b != 0.0 && rank[k] >= rank[j]) {
                    throw ValidationError("LinearSem: coefficient (" + std::to_string(j + 1) + "," +
                                          std::to_string(k + 1) +
                                          ") violates the declared topological order");
                }
            }
            const double v = noises[j].variance();
            detail::require(std::isfinite(v) && v > 0.0, "LinearSem: noise variances must be positive");
        }
    }

    bool has_edge(std::size_t from, std::size_t to) const {
        return coeffs(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from)) != 0.0;
    }

    /// True when every edge of the graph points forward in `pi`.
    bool conformable(const Permutation& pi) const {
        std::vector<std::size_t> rank(p);
        for (std::size_t k = 0; k < p; ++k) rank[pi.order[k]] = k;
        for (std::size_t j = 0; j < p; ++j) {
            for (std::size_t k = 0; k < p; ++k) {
                if (has_edge(k, j) && rank[k] >= rank[j]) return false;
            }
        }
        return true;
    }

    std::vector<std::size_t> parents(std::size_t j) const {
        std::vector<std::size_t> out;
        for (std::size_t k = 0; k < p; ++k) {
            if (has_edge(k, j)) out.push_back(k);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// n draws of (X1, X2). The cause and the noise use separate substreams of
/// `seed`, so they are independent by construction.
inline Dataset sample_bivariate(const BivariateAnm& model, std::size_t n, std::uint64_t seed) {
    detail::require(n >= 2, "sample_bivariate: n must be at least 2");
    Rng cause_rng(seed, 0), noise_rng(seed, 1);
    Dataset d;
    d.names = {"X1", "X2"};
    d.columns.assign(2, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = model.cause.draw(cause_rng);
        const double e = model.noise.draw(noise_rng);
        d.columns[0][i] = x1;
        d.columns[1][i] = model.mechanism(x1) + model.scale(x1) * e;
    }
    return d;
}

/// n draws from a linear SEM; node j's noise uses substream j of `seed`.
inline Dataset sample_linear_sem(const LinearSem& sem, std::size_t n, std::uint64_t seed) {
    sem.validate();
    detail::require(n >= 2, "sample_linear_sem: n must be at least 2");
    Dataset d;
    d.columns.assign(sem.p, std::vector<double>(n));
    for (std::size_t j = 0; j < sem.p; ++j) d.names.push_back("X" + std::to_string(j + 1));
    for (std::size_t j : sem.order.order) {
        Rng rng(seed, j);
        auto& col = d.columns[j];
        for (std::size_t i = 0; i < n; ++i) col[i] = sem.noises[j].draw(rng);
        for (std::size_t k = 0; k < sem.p; ++k) {
            const double b = sem.coeffs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
            if (b == 0.0) continue;
            const auto& parent = d.columns[k];
            for (std::size_t i = 0; i < n; ++i) col[i] += b * parent[i];
        }
    }
    return d;
}

// ---------------------------------------------------------------------------
// Population moments
// ---------------------------------------------------------------------------

/// (I - B)^{-1}, built row by row in topological order: row j is e_j plus
/// sum_k B(j, k) row k.
inline Eigen::MatrixXd total_effects(const LinearSem& sem) {
    sem.validate();
    const auto p = static_cast<Eigen::Index>(sem.p);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t j : sem.order.order) {
        const auto jj = static_cast<Eigen::Index>(j);
        a(jj, jj) = 1.0;
        for (Eigen::Index k = 0; k < p; ++k) {
            const double b = sem.coeffs(jj, k);
            if (b != 0.0) a.row(jj) += b * a.row(k);
        }
    }
    return a;
}

/// Sigma = (I - B)^{-1} D (I - B)^{-T}, D the diagonal of noise variances.
inline Eigen::MatrixXd population_covariance(const LinearSem& sem) {
    const Eigen::MatrixXd a = total_effects(sem);
    Eigen::VectorXd d(static_cast<Eigen::Index>(sem.p));
    for (std::size_t j = 0; j < sem.p; ++j) d(static_cast<Eigen::Index>(j)) = sem.noises[j].variance();
    Eigen::MatrixXd sigma = a * d.asDiagonal() * a.transpose();
    return 0.5 * (sigma + sigma.transpose());
}

/// Random SEM used by tests and the CLI: a random topological order, each
/// earlier node is a parent with probability `edge_prob`, coefficients
/// uniform in +-[0.5, 1.5].
inline LinearSem random_linear_sem(std::size_t p, const std::vector<NoiseSpec>& noises,
                                   std::uint64_t seed, double edge_prob = 0.7) {
    detail::require(noises.size() == p, "random_linear_sem: need one noise law per node");
    Rng rng(seed, 0);
    LinearSem sem;
    sem.p = p;
    sem.order = Permutation::identity(p);
    for (std::size_t k = p; k > 1; --k) std::swap(sem.order.order[k - 1], sem.order.order[rng.below(k)]);
    sem.coeffs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t a = 1; a < p; ++a) {
        for (std::size_t b = 0; b < a; ++b) {
            if (rng.uniform() >= edge_prob) continue;
            const double mag = 0.5 + rng.uniform();
            const double sgn = rng.uniform() < 0.5 ? -1.0 : 1.0;
            sem.coeffs(static_cast<Eigen::Index>(sem.order.order[a]),
                       static_cast<Eigen::Index>(sem.order.order[b])) = sgn * mag;
        }
    }
    sem.noises = noises;
    sem.validate();
    return sem;
}

/// X1 -> X2 -> ... -> Xp with every coefficient equal to beta.
inline LinearSem chain_sem(std::size_t p, double beta, const NoiseSpec& noise) {
    LinearSem sem;
    sem.p = p;
    sem.order = Permutation::identity(p);
    sem.coeffs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t j = 1; j < p; ++j) {
        sem.coeffs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j - 1)) = beta;
    }
    sem.noises.assign(p, noise);
    sem.validate();
    return sem;
}

}  // namespace causal_gap
