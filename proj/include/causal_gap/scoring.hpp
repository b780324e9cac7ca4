#pragma once

#include "causal_gap/error.hpp"
#include "causal_gap/npreg.hpp"
#include "causal_gap/parallel.hpp"
#include "causal_gap/population.hpp"
#include "causal_gap/rng.hpp"
#include "causal_gap/sem.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace causal_gap {

inline constexpr double kDefaultTieTol = 1e-3;

enum class Decision { forward, backward, tie };

inline const char* to_string(Decision d) {
    switch (d) {
        case Decision::forward: return "forward";
        case Decision::backward: return "backward";
        case Decision::tie: return "tie";
    }
    return "?";
}

inline Decision decide(double score_fwd, double score_bwd, double tie_tol) {
    if (score_fwd < score_bwd - tie_tol) return Decision::forward;
    if (score_bwd < score_fwd - tie_tol) return Decision::backward;
    return Decision::tie;
}

struct DirectionReport {
    double score_fwd = 0.0;
    double score_bwd = 0.0;
    double exp_delta_sq_hat = 1.0;
    Decision decision = Decision::tie;
    Fit fit = Fit::homoskedastic;
    double tie_tol = kDefaultTieTol;
    std::size_t n = 0;
    // Smoother metadata.
    double bandwidth_fwd = 0.0;
    double bandwidth_bwd = 0.0;
    bool binned = false;
    std::string smoother = SmootherFit::kDescription;
    // Per-direction pieces of the scores (log standard deviations).
    double log_sd_x = 0.0, log_sd_y = 0.0;
    double regression_term_fwd = 0.0, regression_term_bwd = 0.0;
};

namespace detail {

inline double unbiased_variance(std::span<const double> v) {
    const double s = sample_sd(v);
    return s * s;
}

inline double mean_log(const std::vector<double>& v) {
    double s = 0.0;
    for (double a : v) s += std::log(a);
    return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Gaussian score in both directions. Each score is a sum of log standard
/// deviations: the cause's marginal one plus the regression residual one
/// (homoskedastic) or half the mean log fitted conditional variance
/// (heteroskedastic). Lower is better.
inline DirectionReport gaussian_direction(std::span<const double> x, std::span<const double> y, Fit fit,
                                          double tie_tol = kDefaultTieTol, const SmootherOptions& opt = {}) {
    detail::require(x.size() == y.size(), "gaussian_direction: x and y must have equal length");
    detail::require(x.size() >= 20, "gaussian_direction: need at least 20 points");
    detail::require(tie_tol >= 0.0, "gaussian_direction: tie_tol must be non-negative");
    DirectionReport r;
    r.fit = fit;
    r.tie_tol = tie_tol;
    r.n = x.size();
    const SmootherFit fy = fit_mean(x, y, opt);
    const SmootherFit fx = fit_mean(y, x, opt);
    r.bandwidth_fwd = fy.bandwidth;
    r.bandwidth_bwd = fx.bandwidth;
    r.binned = fy.binned;
    r.log_sd_x = 0.5 * std::log(detail::unbiased_variance(x));
    r.log_sd_y = 0.5 * std::log(detail::unbiased_variance(y));
    if (fit == Fit::homoskedastic) {
        r.regression_term_fwd = 0.5 * std::log(residual_variance(fy));
        r.regression_term_bwd = 0.5 * std::log(residual_variance(fx));
    } else {
        r.regression_term_fwd = 0.5 * detail::mean_log(fit_variance(fy, opt).fitted);
        r.regression_term_bwd = 0.5 * detail::mean_log(fit_variance(fx, opt).fitted);
    }
    r.score_fwd = r.log_sd_x + r.regression_term_fwd;
    r.score_bwd = r.log_sd_y + r.regression_term_bwd;
    r.exp_delta_sq_hat = std::exp(2.0 * (r.score_bwd - r.score_fwd));
    r.decision = decide(r.score_fwd, r.score_bwd, tie_tol);
    return r;
}

// ---------------------------------------------------------------------------
// Permutation scores
// ---------------------------------------------------------------------------

enum class Estimator { best_linear, nonparametric };

inline const char* to_string(Estimator e) {
    return e == Estimator::best_linear ? "best_linear" : "nonparametric";
}

struct PermutationScore {
    Permutation pi;
    /// log sigma of each node (indexed by node, not by position in pi).
    std::vector<double> per_node_log_sigma;
    double total = 0.0;
    Estimator estimator = Estimator::best_linear;
    /// Best-linear coefficients of node pi[k] on pi[0..k-1], by position.
    std::vector<Eigen::VectorXd> coefficients;
    /// Nodes scored by a linear fit although the nonparametric estimator was
    /// requested (conditioning set of size >= 2).
    std::vector<bool> linear_fallback;
    /// Sample residuals per node (sample scores only).
    std::vector<std::vector<double>> residuals;
};

/// Best-linear residual variances from the population covariance by a
/// Schur-complement sweep in the order pi.
inline PermutationScore permutation_score_population(const LinearSem& sem, const Permutation& pi) {
    sem.validate();
    detail::require(pi.size() == sem.p && pi.valid(),
                    "permutation_score_population: permutation must be a bijection on the SEM's nodes");
    const Eigen::MatrixXd sigma = population_covariance(sem);
    const auto p = static_cast<Eigen::Index>(sem.p);

    PermutationScore out;
    out.pi = pi;
    out.estimator = Estimator::best_linear;
    out.per_node_log_sigma.assign(sem.p, 0.0);
    out.coefficients.resize(sem.p);
    out.linear_fallback.assign(sem.p, false);

    Eigen::MatrixXd w = sigma;  // covariance conditional on the nodes swept so far
    for (Eigen::Index k = 0; k < p; ++k) {
        const auto j = static_cast<Eigen::Index>(pi.order[static_cast<std::size_t>(k)]);
        const double v = w(j, j);
        if (!(v > 0.0)) throw NumericError("permutation_score_population: singular conditioning set");
        out.per_node_log_sigma[static_cast<std::size_t>(j)] = 0.5 * std::log(v);
        const Eigen::VectorXd col = w.col(j);
        w.noalias() -= col * col.transpose() / v;

        Eigen::VectorXd beta(k);
        if (k > 0) {
            Eigen::MatrixXd s_ss(k, k);
            Eigen::VectorXd s_sj(k);
            for (Eigen::Index a = 0; a < k; ++a) {
                const auto ia = static_cast<Eigen::Index>(pi.order[static_cast<std::size_t>(a)]);
                s_sj(a) = sigma(ia, j);
                for (Eigen::Index b = 0; b < k; ++b) {
                    s_ss(a, b) = sigma(ia, static_cast<Eigen::Index>(pi.order[static_cast<std::size_t>(b)]));
                }
            }
            beta = s_ss.ldlt().solve(s_sj);
        }
        out.coefficients[static_cast<std::size_t>(k)] = beta;
    }
    for (double l : out.per_node_log_sigma) out.total += l;
    return out;
}

/// Sum of log noise standard deviations, the score of the true graph.
inline double true_graph_total(const LinearSem& sem) {
    double t = 0.0;
    for (const auto& e : sem.noises) t += 0.5 * std::log(e.variance());
    return t;
}

namespace detail {

// OLS with intercept of y on the columns `xs`; returns residuals.
inline std::vector<double> ols_residuals(std::span<const double> y, const std::vector<std::span<const double>>& xs,
                                         Eigen::VectorXd* coef = nullptr) {
    const std::size_t n = y.size();
    const auto k = static_cast<Eigen::Index>(xs.size());
    double my = 0.0;
    for (double v : y) my += v;
    my /= static_cast<double>(n);
    std::vector<double> r(n);
    if (k == 0) {
        for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - my;
        if (coef) coef->resize(0);
        return r;
    }
    Eigen::VectorXd mx(k);
    for (Eigen::Index a = 0; a < k; ++a) {
        double s = 0.0;
        for (double v : xs[static_cast<std::size_t>(a)]) s += v;
        mx(a) = s / static_cast<double>(n);
    }
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index a = 0; a < k; ++a) {
            const double xa = xs[static_cast<std::size_t>(a)][i] - mx(a);
            c(a) += xa * (y[i] - my);
            for (Eigen::Index b = 0; b <= a; ++b) g(a, b) += xa * (xs[static_cast<std::size_t>(b)][i] - mx(b));
        }
    }
    g = g.selfadjointView<Eigen::Lower>();
    const auto ldlt = g.ldlt();
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) {
        throw NumericError("ols: singular design (collinear regressors)");
    }
    const Eigen::VectorXd beta = ldlt.solve(c);
    for (std::size_t i = 0; i < n; ++i) {
        double f = my;
        for (Eigen::Index a = 0; a < k; ++a) f += beta(a) * (xs[static_cast<std::size_t>(a)][i] - mx(a));
        r[i] = y[i] - f;
    }
    if (coef) *coef = beta;
    return r;
}

inline double mean_square(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s / static_cast<double>(r.size());
}

}  // namespace detail

struct SampleScoreOptions {
    /// With the nonparametric estimator, conditioning sets of size >= 2 are
    /// rejected unless this is set, in which case they are fitted linearly
    /// and flagged in `linear_fallback`.
    bool allow_linear_fallback = false;
    bool keep_residuals = false;
    SmootherOptions smoother;
};

/// Per-node log residual sd with node pi[k] regressed on pi[0..k-1]. The root
/// term uses the unbiased variance; regression terms the mean squared residual.
inline PermutationScore permutation_score_sample(const Dataset& data, const Permutation& pi, Estimator est,
                                                 const SampleScoreOptions& opt = {}) {
    const std::size_t p = data.cols();
    detail::require(p >= 1, "permutation_score_sample: empty dataset");
    detail::require(pi.size() == p && pi.valid(), "permutation_score_sample: permutation must match the dataset");
    detail::require(data.rows() >= 50, "permutation_score_sample: need at least 50 rows");
    if (est == Estimator::nonparametric && p > 2 && !opt.allow_linear_fallback) {
        throw ValidationError(
            "permutation_score_sample: nonparametric estimator supports conditioning sets of size <= 1 only");
    }
    PermutationScore out;
    out.pi = pi;
    out.estimator = est;
    out.per_node_log_sigma.assign(p, 0.0);
    out.coefficients.resize(p);
    out.linear_fallback.assign(p, false);
    if (opt.keep_residuals) out.residuals.resize(p);

    for (std::size_t k = 0; k < p; ++k) {
        const std::size_t j = pi.order[k];
        const auto y = data.column(j);
        std::vector<double> r;
        double v;
        if (k == 0) {
            r = detail::ols_residuals(y, {});
            v = detail::unbiased_variance(y);
        } else if (est == Estimator::nonparametric && k == 1) {
            const SmootherFit f = fit_mean(data.column(pi.order[0]), y, opt.smoother);
            r = f.residuals;
            v = residual_variance(f);
        } else {
            std::vector<std::span<const double>> xs;
            for (std::size_t a = 0; a < k; ++a) xs.push_back(data.column(pi.order[a]));
            r = detail::ols_residuals(y, xs, &out.coefficients[k]);
            v = detail::mean_square(r);
            out.linear_fallback[j] = est == Estimator::nonparametric;
        }
        if (!(v > 0.0)) throw NumericError("permutation_score_sample: zero residual variance");
        out.per_node_log_sigma[j] = 0.5 * std::log(v);
        if (opt.keep_residuals) out.residuals[j] = std::move(r);
    }
    for (double l : out.per_node_log_sigma) out.total += l;
    return out;
}

/// Bootstrap standard error of 0.5 log(mean a^2) - 0.5 log(mean b^2) over
/// paired rows of two residual vectors.
inline double bootstrap_log_ratio_se(const std::vector<double>& a, const std::vector<double>& b, std::size_t reps,
                                     std::uint64_t seed) {
    detail::require(a.size() == b.size() && !a.empty(), "bootstrap: residual vectors must match");
    const std::size_t n = a.size();
    std::vector<double> stats(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        Rng rng(seed, rep);
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = rng.below(n);
            sa += a[k] * a[k];
            sb += b[k] * b[k];
        }
        stats[rep] = 0.5 * std::log(sa / sb);
    }
    double m = 0.0;
    for (double s : stats) m += s;
    m /= static_cast<double>(reps);
    double ss = 0.0;
    for (double s : stats) ss += (s - m) * (s - m);
    return std::sqrt(ss / static_cast<double>(reps - 1));
}

// ---------------------------------------------------------------------------
// Verification over all permutations
// ---------------------------------------------------------------------------

struct Theorem1Options {
    std::size_t n = 100000;
    std::uint64_t seed = 1;
    /// Log-sd gain above which a conditional expectation counts as nonlinear.
    double gain_threshold = 0.005;
    bool detect_witnesses = true;
    std::size_t jobs = 1;
    SmootherOptions smoother;
};

struct PermutationCheck {
    Permutation pi;
    double population_total = 0.0;
    double deviation = 0.0;  // population_total - true total
    bool conformable = false;
    /// Largest nonparametric log-sd gain per position of pi.
    std::vector<double> gain;
    std::vector<bool> witness;
    bool strict() const { return std::find(witness.begin(), witness.end(), true) != witness.end(); }
};

struct Theorem1Report {
    std::size_t p = 0;
    double true_total = 0.0;
    double max_deviation = 0.0;
    std::vector<PermutationCheck> checks;
    std::optional<GapReport> bivariate_gap;  // p = 2 with an edge
    bool witnesses_detected = false;
};

namespace detail {

// Gain from regressing the best-linear residual of node j on S
// nonparametrically, along each single regressor in S, each regressor
// partialled on the rest of S, and the fitted linear index. The largest
// 0.5 log(mean r^2 / mean (r - m(z))^2) over those directions is returned.
inline double nonlinearity_gain(const Dataset& d, std::size_t j, const std::vector<std::size_t>& s,
                                const SmootherOptions& opt) {
    if (s.empty()) return 0.0;
    std::vector<std::span<const double>> xs;
    for (auto k : s) xs.push_back(d.column(k));
    const auto y = d.column(j);
    const std::vector<double> r = ols_residuals(y, xs);
    const double base = mean_square(r);
    std::vector<std::vector<double>> directions;
    for (std::size_t a = 0; a < s.size(); ++a) {
        directions.emplace_back(xs[a].begin(), xs[a].end());
        if (s.size() >= 2) {
            std::vector<std::span<const double>> rest;
            for (std::size_t b = 0; b < s.size(); ++b) {
                if (b != a) rest.push_back(xs[b]);
            }
            directions.push_back(ols_residuals(xs[a], rest));
        }
    }
    if (s.size() >= 2) {
        std::vector<double> index(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) index[i] = y[i] - r[i];
        directions.push_back(std::move(index));
    }
    double best = 0.0;
    for (const auto& z : directions) {
        const SmootherFit f = fit_mean(z, r, opt);
        best = std::max(best, 0.5 * std::log(base / residual_variance(f)));
    }
    return best;
}

}  // namespace detail

/// Population best-linear totals for all p! orders against the true total,
/// plus sample-based flags for nodes whose conditional mean is nonlinear.
inline Theorem1Report verify_theorem1(const LinearSem& sem, const Theorem1Options& opt = {}) {
    sem.validate();
    detail::require(sem.p <= 6, "verify_theorem1: p must be at most 6");
    Theorem1Report rep;
    rep.p = sem.p;
    rep.true_total = true_graph_total(sem);
    const auto perms = all_permutations(sem.p);
    rep.checks.resize(perms.size());
    for (std::size_t i = 0; i < perms.size(); ++i) {
        auto& c = rep.checks[i];
        c.pi = perms[i];
        c.population_total = permutation_score_population(sem, c.pi).total;
        c.deviation = c.population_total - rep.true_total;
        c.conformable = sem.conformable(c.pi);
        rep.max_deviation = std::max(rep.max_deviation, std::abs(c.deviation));
        c.gain.assign(sem.p, 0.0);
        c.witness.assign(sem.p, false);
    }

    if (sem.p == 2) {
        const std::size_t root = sem.order.order[0], child = sem.order.order[1];
        const double beta = sem.coeffs(static_cast<Eigen::Index>(child), static_cast<Eigen::Index>(root));
        if (beta != 0.0) {
            const BivariateAnm m{sem.noises[root], Mechanism::linear(beta), sem.noises[child], {}};
            rep.bivariate_gap = sem.noises[root].kind() == NoiseSpec::Kind::uniform &&
                                        sem.noises[child].kind() == NoiseSpec::Kind::uniform &&
                                        sem.noises[root] == sem.noises[child]
                                    ? ratio_uniform_linear(beta)
                                    : population_gap(m, Fit::homoskedastic);
        }
    }

    if (opt.detect_witnesses) {
        const Dataset d = sample_linear_sem(sem, opt.n, opt.seed);
        // One gain per (node, conditioning set); sets as bitmasks.
        std::vector<std::pair<std::size_t, unsigned>> keys;
        std::map<std::pair<std::size_t, unsigned>, std::size_t> index;
        for (const auto& c : rep.checks) {
            unsigned mask = 0;
            for (std::size_t k = 0; k < sem.p; ++k) {
                const auto key = std::make_pair(c.pi.order[k], mask);
                if (mask != 0 && !index.count(key)) {
                    index[key] = keys.size();
                    keys.push_back(key);
                }
                mask |= 1u << c.pi.order[k];
            }
        }
        std::vector<double> gains(keys.size());
        parallel_for(keys.size(), opt.jobs, [&](std::size_t i) {
            std::vector<std::size_t> s;
            for (std::size_t k = 0; k < sem.p; ++k) {
                if (keys[i].second & (1u << k)) s.push_back(k);
            }
            gains[i] = detail::nonlinearity_gain(d, keys[i].first, s, opt.smoother);
        });
        for (auto& c : rep.checks) {
            unsigned mask = 0;
            for (std::size_t k = 0; k < sem.p; ++k) {
                if (mask != 0) {
                    c.gain[k] = gains[index.at({c.pi.order[k], mask})];
                    c.witness[k] = c.gain[k] > opt.gain_threshold;
                    rep.witnesses_detected = rep.witnesses_detected || c.witness[k];
                }
                mask |= 1u << c.pi.order[k];
            }
        }
    }
    return rep;
}

}  // namespace causal_gap
