#pragma once

#include "causal_gap/error.hpp"
#include "causal_gap/parallel.hpp"
#include "causal_gap/quadrature.hpp"
#include "causal_gap/sem.hpp"
#include "causal_gap/specfun.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace causal_gap {

enum class Fit { homoskedastic, heteroskedastic };
enum class GapMethod { closed_form, truncated_gaussian_quadrature, brute_force_quadrature };

inline const char* to_string(Fit f) {
    return f == Fit::homoskedastic ? "homo" : "het";
}

inline const char* to_string(GapMethod m) {
    switch (m) {
        case GapMethod::closed_form: return "closed_form";
        case GapMethod::truncated_gaussian_quadrature: return "truncated_gaussian_quadrature";
        case GapMethod::brute_force_quadrature: return "brute_force_quadrature";
    }
    return "?";
}

inline Fit parse_fit(std::string_view s) {
    if (s == "homo" || s == "homoskedastic") return Fit::homoskedastic;
    if (s == "het" || s == "heteroskedastic") return Fit::heteroskedastic;
    throw ValidationError("unknown fit flavour '" + std::string(s) + "' (expected homo or het)");
}

/// How an integration range is chosen. An explicit interval wins; otherwise
/// the range starts at mean +- start_sd standard deviations and grows by
/// `growth` until the mass outside is at most `tail_mass`.
struct RangeRule {
    std::optional<Interval> explicit_range;
    double tail_mass = 1e-10;
    double start_sd = 10.0;
    double growth = 1.5;
    int max_expansions = 60;
};

struct QuadratureConfig {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    double inner_abs_tol = 1e-300;
    double inner_rel_tol = 1e-9;
    RangeRule outer_range;
    RangeRule inner_range;
    std::size_t max_subdivisions = 2000;

    void validate() const {
        detail::require(abs_tol > 0.0 && rel_tol > 0.0 && inner_abs_tol > 0.0 && inner_rel_tol > 0.0,
                        "QuadratureConfig: tolerances must be positive");
        detail::require(max_subdivisions >= 1, "QuadratureConfig: max_subdivisions must be >= 1");
        for (const RangeRule* r : {&outer_range, &inner_range}) {
            detail::require(r->tail_mass > 0.0 && r->start_sd > 0.0 && r->growth > 1.0,
                            "QuadratureConfig: invalid range rule");
            if (r->explicit_range) {
                detail::require(r->explicit_range->lo < r->explicit_range->hi,
                                "QuadratureConfig: explicit range must have lo < hi");
            }
        }
    }

    QuadOptions outer() const { return {abs_tol, rel_tol, max_subdivisions}; }
    QuadOptions inner() const { return {inner_abs_tol, inner_rel_tol, max_subdivisions}; }
};

/// Floor applied to Var(X1 | X2) before taking logs in the heteroskedastic fit.
inline constexpr double kConditionalVarianceFloor = 1e-14;

struct GapDiagnostics {
    Interval outer_range;
    double outer_error = 0.0;
    std::size_t outer_subdivisions = 0;
    std::size_t inner_evaluations = 0;
    std::size_t clamped_points = 0;
    double tail_mass = 0.0;
    double mass = 1.0;
};

struct GapReport {
    std::array<double, 2> sigma_fwd{};
    std::array<double, 2> sigma_bwd{};
    double delta = 0.0;
    double exp_delta_sq = 1.0;
    Fit fit = Fit::homoskedastic;
    GapMethod method = GapMethod::closed_form;
    GapDiagnostics diagnostics;
};

/// Conditional law of X1 given X2 = x2, plus the density of X2 there.
struct ConditionalStats {
    double mean = 0.0;
    double variance = 0.0;
    double density = 0.0;
};

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// exp(Delta)^2 for X1, E2 ~ Unif[-1, 1] and X2 = beta X1 + E2, as a function
/// of gamma = max(|beta|, 1/|beta|).
inline double uniform_linear_ratio(double gamma) {
    return (gamma * gamma + 1.0) * (2.0 * gamma - 1.0) / (2.0 * gamma * gamma * gamma);
}

/// E[Var(X1 | X2)] in the uniform-uniform linear model.
inline double uniform_linear_backward_variance(double beta) {
    const double b = std::abs(beta);
    return b >= 1.0 ? (2.0 * b - 1.0) / (6.0 * b * b * b) : (2.0 - b) / 6.0;
}

inline GapReport ratio_uniform_linear(double beta) {
    detail::require<DomainError>(std::isfinite(beta) && beta != 0.0,
                                 "ratio_uniform_linear: beta must be finite and nonzero");
    const double b = std::abs(beta);
    const double gamma = std::max(b, 1.0 / b);
    GapReport r;
    r.method = GapMethod::closed_form;
    r.fit = Fit::homoskedastic;
    r.sigma_fwd = {std::sqrt(1.0 / 3.0), std::sqrt(1.0 / 3.0)};
    r.sigma_bwd = {std::sqrt(uniform_linear_backward_variance(b)), std::sqrt((b * b + 1.0) / 3.0)};
    r.exp_delta_sq = uniform_linear_ratio(gamma);
    r.delta = 0.5 * std::log(r.exp_delta_sq);
    r.diagnostics.outer_range = {-(1.0 + b), 1.0 + b};
    return r;
}

namespace detail {

inline GapReport make_report(Fit fit, GapMethod method, double s1f, double s2f, double s1b, double s2b,
                             bool log_form_1b = false, bool log_form_2f = false) {
    // Inputs are variances, or log-variances where flagged.
    const double l1f = std::log(s1f);
    const double l2f = log_form_2f ? s2f : std::log(s2f);
    const double l1b = log_form_1b ? s1b : std::log(s1b);
    const double l2b = std::log(s2b);
    GapReport r;
    r.fit = fit;
    r.method = method;
    r.sigma_fwd = {std::exp(0.5 * l1f), std::exp(0.5 * l2f)};
    r.sigma_bwd = {std::exp(0.5 * l1b), std::exp(0.5 * l2b)};
    r.delta = 0.5 * ((l1b + l2b) - (l1f + l2f));
    r.exp_delta_sq = std::exp(2.0 * r.delta);
    return r;
}

inline double even_variance(const NoiseSpec& cause, const Mechanism& h) {
    // Var(beta |X|^nu / sqrt(V)) from absolute moments of a symmetric cause.
    const double m1 = cause.abs_moment(h.nu());
    const double m2 = cause.abs_moment(2.0 * h.nu());
    const double scale = h.beta() / h.norm();
    return scale * scale * std::max(m2 - m1 * m1, 0.0);
}

}  // namespace detail

/// Closed-form gap when the mechanism is even and the cause symmetric:
/// E[X1 | X2] = 0, so the backward residual variance of X1 is Var(X1) and
/// exp(Delta)^2 = Var(X2) / Var(E2).
inline GapReport even_function_gap(const BivariateAnm& model) {
    detail::require(model.mechanism.kind() == Mechanism::Kind::even_power || model.mechanism.beta() == 0.0,
                    "even_function_gap: mechanism must be even");
    detail::require(model.cause.symmetric(), "even_function_gap: cause law must be symmetric about 0");
    detail::require(!model.scale_fn, "even_function_gap: location-scale models are not supported");
    const double v1 = model.cause.variance();
    const double ve = model.noise.variance();
    const double vh = model.mechanism.beta() == 0.0 ? 0.0 : detail::even_variance(model.cause, model.mechanism);
    GapReport r;
    r.method = GapMethod::closed_form;
    r.fit = Fit::homoskedastic;
    r.sigma_fwd = {std::sqrt(v1), std::sqrt(ve)};
    r.sigma_bwd = {std::sqrt(v1), std::sqrt(vh + ve)};
    r.delta = 0.5 * std::log1p(vh / ve);
    r.exp_delta_sq = std::exp(2.0 * r.delta);
    return r;
}

// ---------------------------------------------------------------------------
// Quadrature machinery
// ---------------------------------------------------------------------------

namespace detail {

// Integrates f over [lo, hi] after x = lo + w (3t^2 - 2t^3), whose Jacobian
// vanishes at both ends and tames inverse-square-root endpoint singularities.
template <std::size_t N, class F>
QuadResult<N> integrate_smoothstep(const F& f, double lo, double hi, const QuadOptions& opt,
                                   const std::array<double, N>& ref_scale = {}) {
    const double w = hi - lo;
    auto g = [&](double t) {
        // Measure from the nearer end so x keeps full precision next to it.
        const double u = t < 0.5 ? t : 1.0 - t;
        const double s = w * u * u * (3.0 - 2.0 * u);
        const double x = t < 0.5 ? lo + s : hi - s;
        const double jac = 6.0 * w * t * (1.0 - t);
        std::array<double, N> v;
        if constexpr (std::is_invocable_v<const F&, double, int, double>) {
            // Also hand over which end x was measured from and the offset.
            v = f(x, t < 0.5 ? 0 : 1, s);
        } else {
            v = f(x);
        }
        for (auto& c : v) {
            c *= jac;
            if (!std::isfinite(c)) c = 0.0;
        }
        return v;
    };
    return integrate_vec<N>(g, 0.0, 1.0, opt, {}, ref_scale);
}

inline Interval intersect(Interval a, Interval b) { return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)}; }

// Splits each interval at 0 so kinks of h at the origin fall on piece ends.
inline std::vector<Interval> split_at_zero(const std::vector<Interval>& in) {
    std::vector<Interval> out;
    for (const auto& iv : in) {
        if (!(iv.lo < iv.hi)) continue;
        if (iv.lo < 0.0 && iv.hi > 0.0) {
            out.push_back({iv.lo, 0.0});
            out.push_back({0.0, iv.hi});
        } else {
            out.push_back(iv);
        }
    }
    return out;
}

inline Interval cause_range(const BivariateAnm& m, const QuadratureConfig& cfg) {
    Interval r = m.cause.effective_support();
    if (cfg.inner_range.explicit_range) r = intersect(r, *cfg.inner_range.explicit_range);
    return r;
}

/// E[f(X1)] by quadrature over the cause's effective support.
template <class F>
double cause_expectation(const BivariateAnm& m, const QuadratureConfig& cfg, const F& f, const char* what) {
    const Interval r = cause_range(m, cfg);
    double total = 0.0;
    for (const auto& piece : split_at_zero({r})) {
        auto res = integrate_smoothstep<1>(
            [&](double x) { return std::array<double, 1>{m.cause.pdf(x) * f(x)}; }, piece.lo, piece.hi,
            {1e-300, 1e-12, cfg.max_subdivisions});
        if (!res.converged) throw ToleranceError(std::string(what) + ": cause expectation did not converge");
        total += res.value[0];
    }
    return total;
}

struct MechanismMoments {
    double mean = 0.0;       // E[h(X1)]
    double second = 0.0;     // E[h(X1)^2]
    double scale_sq = 1.0;   // E[g(X1)^2]
    double log_scale_sq = 0.0;  // E[log g(X1)^2]
    double variance() const { return std::max(second - mean * mean, 0.0); }
};

inline MechanismMoments mechanism_moments(const BivariateAnm& m, const QuadratureConfig& cfg) {
    MechanismMoments mm;
    const Mechanism& h = m.mechanism;
    const double v1 = m.cause.variance();
    if (h.beta() == 0.0) {
        mm.mean = mm.second = 0.0;
    } else if (h.kind() == Mechanism::Kind::linear) {
        mm.mean = 0.0;
        mm.second = h.beta() * h.beta() * v1;
    } else if (m.cause.symmetric()) {
        const double s = h.beta() / h.norm();
        mm.second = s * s * m.cause.abs_moment(2.0 * h.nu());
        mm.mean = h.kind() == Mechanism::Kind::even_power ? s * m.cause.abs_moment(h.nu()) : 0.0;
    } else {
        mm.mean = cause_expectation(m, cfg, [&](double x) { return h(x); }, "E[h(X1)]");
        mm.second = cause_expectation(m, cfg, [&](double x) { const double v = h(x); return v * v; },
                                      "E[h(X1)^2]");
    }
    if (m.scale_fn) {
        mm.scale_sq = cause_expectation(m, cfg, [&](double x) { const double g = m.scale(x); return g * g; },
                                        "E[g(X1)^2]");
        mm.log_scale_sq = cause_expectation(m, cfg, [&](double x) { return 2.0 * std::log(m.scale(x)); },
                                            "E[log g(X1)^2]");
    }
    return mm;
}

inline bool truncated_path_applies(const BivariateAnm& m) {
    return !m.scale_fn && m.cause.kind() == NoiseSpec::Kind::gaussian &&
           m.noise.kind() == NoiseSpec::Kind::uniform && m.mechanism.is_monotone();
}

/// Conditional moments at X2 = y. Returns density 0 where X2 has no mass
/// (or less than the truncation floor).
inline ConditionalStats conditional_stats(const BivariateAnm& m, const QuadratureConfig& cfg, double y,
                                          std::size_t* evaluations = nullptr) {
    ConditionalStats out;
    if (truncated_path_applies(m)) {
        const double w = m.noise.hi();
        const double sd = m.cause.sd();
        const auto pre = m.mechanism.preimage({y - w, y + w});
        if (pre.empty()) return out;
        const double a = pre.front().lo / sd, b = pre.front().hi / sd;
        if (!(a < b)) return out;
        TruncatedMoments tm;
        try {
            tm = truncated_normal_moments(a, b);
        } catch (const DegenerateIntervalError&) {
            return out;
        }
        out.density = tm.mass / (2.0 * w);
        out.mean = sd * tm.mean;
        out.variance = sd * sd * tm.variance;
        if (evaluations) ++*evaluations;
        return out;
    }

    // Brute force: integrate the joint density along the slice X2 = y.
    const Interval xr = cause_range(m, cfg);
    std::vector<Interval> pieces;
    if (m.scale_fn) {
        pieces = {xr};
    } else {
        const Interval e = m.noise.effective_support();
        for (const auto& iv : m.mechanism.preimage({y - e.hi, y - e.lo})) pieces.push_back(intersect(iv, xr));
    }
    pieces = split_at_zero(pieces);
    if (pieces.empty()) return out;

    const bool singular = m.noise.singular_at_lower_bound();
    const double e_lo = m.noise.support().lo;
    auto joint = [&](double x, const Interval& p, int side, double s) {
        const double g = m.scale(x);
        if (singular && !m.scale_fn) {
            // Distance above the singular bound, taken relative to the piece end
            // so slices much narrower than x itself keep full precision.
            const double a = side ? p.hi : p.lo;
            const double target = y - e_lo;
            const double h_a = m.mechanism(a);
            double d_end = target - h_a;
            if (std::abs(d_end) <= 64.0 * std::numeric_limits<double>::epsilon() *
                                           std::max(std::abs(target), std::abs(h_a))) d_end = 0.0;
            const double d = d_end - m.mechanism.increment(a, side ? -s : s);
            return m.cause.pdf(x) * m.noise.pdf_above_lower(d);
        }
        if (singular) {
            const double d = ((y - g * e_lo) - m.mechanism(x)) / g;
            return m.cause.pdf(x) * m.noise.pdf_above_lower(d) / g;
        }
        return m.cause.pdf(x) * m.noise.pdf((y - m.mechanism(x)) / g) / g;
    };
    // x - ref built from the piece end, smooth even when the piece is ulps wide.
    auto offset = [](const Interval& p, int side, double s, double ref) {
        return side ? (p.hi - ref) - s : (p.lo - ref) + s;
    };
    const double c = 0.5 * (pieces.front().lo + pieces.back().hi);
    const double half = 0.5 * (pieces.back().hi - pieces.front().lo);
    const QuadOptions opt = cfg.inner();

    double m0 = 0.0, m1 = 0.0;
    for (const auto& p : pieces) {
        auto r = integrate_smoothstep<2>(
            [&](double x, int side, double s) {
                const double f = joint(x, p, side, s);
                return std::array<double, 2>{f, offset(p, side, s, c) * f};
            },
            p.lo, p.hi, opt, {0.0, half});
        if (evaluations) *evaluations += r.evaluations;
        if (!r.converged) {
            throw ToleranceError("conditional moments at x2=" + std::to_string(y) +
                                 ": inner quadrature did not converge on [" + std::to_string(p.lo) + ", " +
                                 std::to_string(p.hi) + "]");
        }
        m0 += r.value[0];
        m1 += r.value[1];
    }
    if (!(m0 > 0.0)) return out;
    const double mean = c + m1 / m0;
    double m2 = 0.0;
    for (const auto& p : pieces) {
        auto r = integrate_smoothstep<1>(
            [&](double x, int side, double s) {
                const double d = offset(p, side, s, mean);
                return std::array<double, 1>{d * d * joint(x, p, side, s)};
            },
            p.lo, p.hi, opt);
        if (evaluations) *evaluations += r.evaluations;
        if (!r.converged) {
            throw ToleranceError("conditional variance at x2=" + std::to_string(y) +
                                 ": inner quadrature did not converge");
        }
        m2 += r.value[0];
    }
    out.density = m0;
    out.mean = mean;
    out.variance = m2 / m0;
    return out;
}

// P(X2 < lo) + P(X2 > hi), integrating the noise tail over the cause.
inline double outside_mass(const BivariateAnm& m, const QuadratureConfig& cfg, Interval r) {
    const Interval xr = cause_range(m, cfg);
    double total = 0.0;
    for (const auto& piece : split_at_zero({xr})) {
        auto res = integrate_smoothstep<1>(
            [&](double x) {
                const double g = m.scale(x);
                const double h = m.mechanism(x);
                return std::array<double, 1>{
                    m.cause.pdf(x) * (m.noise.cdf((r.lo - h) / g) + m.noise.sf((r.hi - h) / g))};
            },
            piece.lo, piece.hi, {1e-300, 1e-6, cfg.max_subdivisions});
        total += res.value[0];
    }
    // Cause mass outside its effective support is counted as outside.
    total += std::max(0.0, 1.0 - (m.cause.cdf(xr.hi) - m.cause.cdf(xr.lo)));
    return total;
}

// Exact X2 range when cause and noise are bounded and there is no scale.
inline std::optional<Interval> bounded_x2_range(const BivariateAnm& m) {
    const Interval cs = m.cause.support(), ns = m.noise.support();
    if (m.scale_fn || !cs.bounded() || !ns.bounded()) return std::nullopt;
    double lo = std::min(m.mechanism(cs.lo), m.mechanism(cs.hi));
    double hi = std::max(m.mechanism(cs.lo), m.mechanism(cs.hi));
    if (cs.contains(0.0)) {
        lo = std::min(lo, m.mechanism(0.0));
        hi = std::max(hi, m.mechanism(0.0));
    }
    return Interval{lo + ns.lo, hi + ns.hi};
}

inline std::vector<double> outer_breakpoints(const BivariateAnm& m) {
    std::vector<double> xs{0.0};
    const Interval cs = m.cause.support();
    if (std::isfinite(cs.lo)) xs.push_back(cs.lo);
    if (std::isfinite(cs.hi)) xs.push_back(cs.hi);
    const Interval ns = m.noise.support();
    std::vector<double> es{0.0};
    if (std::isfinite(ns.lo)) es.push_back(ns.lo);
    if (std::isfinite(ns.hi)) es.push_back(ns.hi);
    std::vector<double> out;
    for (double x : xs) {
        for (double e : es) out.push_back(m.mechanism(x) + m.scale(x) * e);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct BackwardIntegrals {
    double mass = 0.0;
    double mean_cond_var = 0.0;   // E[Var(X1 | X2)]
    double mean_log_var = 0.0;    // E[log Var(X1 | X2)]
    GapDiagnostics diag;
};

inline BackwardIntegrals backward_integrals(const BivariateAnm& m, const QuadratureConfig& cfg,
                                            const MechanismMoments& mm) {
    BackwardIntegrals out;
    Interval range;
    if (cfg.outer_range.explicit_range) {
        range = *cfg.outer_range.explicit_range;
        out.diag.tail_mass = outside_mass(m, cfg, range);
    } else if (auto b = bounded_x2_range(m)) {
        range = *b;
        out.diag.tail_mass = 0.0;
    } else {
        const double mu = mm.mean;
        const double sd = std::sqrt(mm.variance() + mm.scale_sq * m.noise.variance());
        double half = cfg.outer_range.start_sd * sd;
        int k = 0;
        for (;; ++k) {
            range = {mu - half, mu + half};
            out.diag.tail_mass = outside_mass(m, cfg, range);
            if (out.diag.tail_mass <= cfg.outer_range.tail_mass) break;
            if (k >= cfg.outer_range.max_expansions) {
                throw ToleranceError("outer range: tail mass " + std::to_string(out.diag.tail_mass) +
                                     " still above target after expansion");
            }
            half *= cfg.outer_range.growth;
        }
    }
    out.diag.outer_range = range;

    std::size_t evals = 0, clamped = 0;
    auto integrand = [&](double y) {
        const ConditionalStats cs = conditional_stats(m, cfg, y, &evals);
        if (!(cs.density > 0.0)) return std::array<double, 3>{0.0, 0.0, 0.0};
        double v = cs.variance;
        if (!(v >= kConditionalVarianceFloor)) {
            v = kConditionalVarianceFloor;
            ++clamped;
        }
        return std::array<double, 3>{cs.density, cs.density * cs.variance, cs.density * std::log(v)};
    };
    const auto bps = outer_breakpoints(m);
    auto res = integrate_vec<3>(integrand, range.lo, range.hi, cfg.outer(), bps);
    out.diag.outer_error = std::max({res.error[0], res.error[1], res.error[2]});
    out.diag.outer_subdivisions = res.subdivisions;
    out.diag.inner_evaluations = evals;
    out.diag.clamped_points = clamped;
    if (!res.converged) {
        throw ToleranceError("backward integrals: outer quadrature did not converge on [" +
                             std::to_string(range.lo) + ", " + std::to_string(range.hi) + "] after " +
                             std::to_string(res.subdivisions) + " subdivisions (error " +
                             std::to_string(out.diag.outer_error) + ")");
    }
    out.mass = res.value[0];
    out.diag.mass = out.mass;
    // Normalise by the captured mass so truncation does not bias the moments.
    out.mean_cond_var = res.value[1] / out.mass;
    out.mean_log_var = res.value[2] / out.mass;
    return out;
}

}  // namespace detail

/// E[X1 | X2 = x2], Var(X1 | X2 = x2) and the density of X2 at x2.
inline ConditionalStats backward_conditional_stats(const BivariateAnm& model, const QuadratureConfig& cfg,
                                                   double x2) {
    cfg.validate();
    detail::require(std::isfinite(x2), "backward_conditional_stats: x2 must be finite");
    const ConditionalStats cs = detail::conditional_stats(model, cfg, x2);
    if (!(cs.density > 0.0)) {
        throw DomainError("backward_conditional_stats: X2 has zero density at x2=" + std::to_string(x2));
    }
    return cs;
}

/// Both fit flavours from a single pass over the X2 range.
struct GapPair {
    GapReport homoskedastic;
    GapReport heteroskedastic;
    const GapReport& get(Fit f) const { return f == Fit::homoskedastic ? homoskedastic : heteroskedastic; }
};

inline GapPair population_gaps(const BivariateAnm& model, const QuadratureConfig& cfg = {}) {
    cfg.validate();
    const double v1 = model.cause.variance();
    const double ve = model.noise.variance();
    detail::require(std::isfinite(v1) && v1 > 0.0 && std::isfinite(ve) && ve > 0.0,
                    "population_gap: cause and noise variances must be finite and positive");

    const auto mm = detail::mechanism_moments(model, cfg);
    const double v2 = mm.variance() + mm.scale_sq * ve;

    GapPair out;
    if (model.mechanism.beta() == 0.0 && !model.scale_fn) {
        // Independence: conditioning on X2 changes nothing.
        out.homoskedastic = detail::make_report(Fit::homoskedastic, GapMethod::closed_form, v1, ve, v1, v2);
        out.heteroskedastic = detail::make_report(Fit::heteroskedastic, GapMethod::closed_form, v1, ve, v1, v2);
        return out;
    }
    const GapMethod method = detail::truncated_path_applies(model) ? GapMethod::truncated_gaussian_quadrature
                                                                   : GapMethod::brute_force_quadrature;
    const auto bi = detail::backward_integrals(model, cfg, mm);
    if (!(bi.mean_cond_var > 0.0)) throw NumericError("population_gap: degenerate conditional variance");

    out.homoskedastic =
        detail::make_report(Fit::homoskedastic, method, v1, mm.scale_sq * ve, bi.mean_cond_var, v2);
    out.heteroskedastic = detail::make_report(Fit::heteroskedastic, method, v1, mm.log_scale_sq + std::log(ve),
                                              bi.mean_log_var, v2, true, true);
    out.homoskedastic.diagnostics = bi.diag;
    out.heteroskedastic.diagnostics = bi.diag;
    return out;
}

inline GapReport population_gap(const BivariateAnm& model, Fit fit, const QuadratureConfig& cfg = {}) {
    return population_gaps(model, cfg).get(fit);
}

// ---------------------------------------------------------------------------
// Named scenarios and curves
// ---------------------------------------------------------------------------

struct Scenario {
    std::string name;
    std::string param;  // "beta" or "nu"
    Fit default_fit = Fit::homoskedastic;
    double fixed_beta = 1.0;  // used by the power families

    BivariateAnm model(double value) const;
};

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names = {"uni-uni-linear", "ga-uni-linear", "ga-chi2-linear",
                                                   "ga-uni-power",   "ga-chi2-power", "ga-ga-power",
                                                   "uni-uni-het",    "ga-ga-power-het"};
    return names;
}

/// `beta` fixes the coefficient of the power families (ignored by the linear
/// ones, whose parameter is beta itself; ga-ga-power-het always uses 2).
inline Scenario make_scenario(std::string_view name, std::optional<double> beta = std::nullopt) {
    Scenario s;
    s.name = std::string(name);
    if (name == "uni-uni-linear" || name == "ga-uni-linear" || name == "ga-chi2-linear") {
        s.param = "beta";
    } else if (name == "uni-uni-het") {
        s.param = "beta";
        s.default_fit = Fit::heteroskedastic;
    } else if (name == "ga-uni-power" || name == "ga-chi2-power" || name == "ga-ga-power") {
        s.param = "nu";
        s.fixed_beta = beta.value_or(1.0);
    } else if (name == "ga-ga-power-het") {
        s.param = "nu";
        s.fixed_beta = 2.0;
        s.default_fit = Fit::heteroskedastic;
    } else {
        throw ValidationError("unknown scenario '" + std::string(name) + "'");
    }
    detail::require(std::isfinite(s.fixed_beta), "scenario: beta must be finite");
    return s;
}

inline BivariateAnm Scenario::model(double value) const {
    const NoiseSpec unif = NoiseSpec::uniform(-1.0, 1.0);
    const NoiseSpec std_normal = NoiseSpec::gaussian(0.0, 1.0);
    if (name == "uni-uni-linear" || name == "uni-uni-het") return {unif, Mechanism::linear(value), unif, {}};
    if (name == "ga-uni-linear") return {std_normal, Mechanism::linear(value), unif, {}};
    if (name == "ga-chi2-linear") return {std_normal, Mechanism::linear(value), NoiseSpec::chi1_centered(1.0), {}};
    const Mechanism h = Mechanism::power(fixed_beta, value);
    if (name == "ga-uni-power") return {std_normal, h, unif, {}};
    if (name == "ga-chi2-power") return {std_normal, h, NoiseSpec::chi1_centered(std::sqrt(6.0)), {}};
    // ga-ga-power and its heteroskedastic twin: sqrt(3) E2 ~ N(0, 1).
    return {std_normal, h, NoiseSpec::gaussian(0.0, 1.0 / 3.0), {}};
}

struct CurveRow {
    double param = 0.0;
    GapReport report;
};

/// Gap along `grid`. Points are independent, so `jobs` threads evaluate them
/// in any order; the output order is always the grid order.
inline std::vector<CurveRow> curve(const Scenario& scenario, const std::vector<double>& grid, Fit fit,
                                   const QuadratureConfig& cfg = {}, std::size_t jobs = 1) {
    std::vector<CurveRow> rows(grid.size());
    parallel_for(grid.size(), jobs, [&](std::size_t i) {
        const double v = grid[i];
        rows[i].param = v;
        const bool closed = fit == Fit::homoskedastic &&
                            (scenario.name == "uni-uni-linear" || scenario.name == "uni-uni-het");
        rows[i].report = closed ? ratio_uniform_linear(v) : population_gap(scenario.model(v), fit, cfg);
    });
    return rows;
}

/// `count` points from lo to hi, linear or geometric.
inline std::vector<double> make_grid(double lo, double hi, std::size_t count, bool log_spaced) {
    detail::require(count >= 1, "grid: count must be >= 1");
    detail::require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi, "grid: need finite lo <= hi");
    if (log_spaced) detail::require(lo > 0.0, "grid: log spacing needs lo > 0");
    std::vector<double> g(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double t = count == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(count - 1);
        g[k] = log_spaced ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + (hi - lo) * t;
    }
    if (count > 1) g.back() = hi;
    g.front() = lo;
    return g;
}

}  // namespace causal_gap
