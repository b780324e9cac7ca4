#pragma once

#include "causal_gap/error.hpp"
#include "causal_gap/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace causal_gap {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
    double lo = -kInf;
    double hi = kInf;

    double width() const { return hi - lo; }
    bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
    bool contains(double x) const { return lo <= x && x <= hi; }
};

// ---------------------------------------------------------------------------
// Gamma function
// ---------------------------------------------------------------------------

/// Natural log of the gamma function for x > 0.
///
/// Lanczos approximation with g = 7 and the usual nine-term coefficient set
/// (relative accuracy ~1e-15 in Gamma); reflection for x < 1/2. Unlike
/// std::lgamma this never touches the global `signgam`, so it is safe to
/// call concurrently.
inline double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("log_gamma: argument must be positive and finite");
    }
    if (x == 1.0 || x == 2.0) return 0.0;
    if (x < 0.5) {
        // Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - log_gamma(1.0 - x);
    }
    static constexpr std::array<double, 9> kCoef = {
        0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
        771.32342877765313,      -176.61502916214059,   12.507343278686905,
        -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
    constexpr double g = 7.0;
    const double z = x - 1.0;
    double a = kCoef[0];
    for (std::size_t i = 1; i < kCoef.size(); ++i) a += kCoef[i] / (z + static_cast<double>(i));
    const double t = z + g + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(a);
}

/// V(nu) = E|Z|^{2 nu} for Z standard normal, i.e. 2^nu Gamma(nu + 1/2) / sqrt(pi).
/// Integer nu is returned exactly as the double factorial (2 nu - 1)!!.
inline double power_norm(double nu) {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("power_norm: nu must be positive");
    if (nu == std::floor(nu) && nu <= 50.0) {
        double v = 1.0;
        for (int k = 2 * static_cast<int>(nu) - 1; k > 1; k -= 2) v *= k;
        return v;
    }
    return std::exp(nu * std::numbers::ln2 + log_gamma(nu + 0.5) - 0.5 * std::log(std::numbers::pi));
}

// ---------------------------------------------------------------------------
// Normal distribution
// ---------------------------------------------------------------------------

inline double normal_pdf(double x) {
    if (!std::isfinite(x)) return 0.0;
    return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * (0.5 * std::numbers::sqrt2)); }

/// Scaled complementary error function exp(x^2) erfc(x).
inline double erfcx(double x) {
    if (x < 0.0) {
        if (x < -26.0) return kInf;
        return 2.0 * std::exp(x * x) - erfcx(-x);
    }
    if (x <= 5.0) return std::exp(x * x) * std::erfc(x);
    // Continued fraction erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    double tail = x;
    for (int k = 120; k >= 1; --k) tail = x + 0.5 * k / tail;
    return std::numbers::inv_sqrtpi / tail;
}

/// Mills-type ratio Phi(x) / phi(x), stable in the lower tail.
inline double lower_mills(double x) {
    if (x == -kInf) return 0.0;
    return std::sqrt(std::numbers::pi / 2.0) * erfcx(-x * (0.5 * std::numbers::sqrt2));
}

inline constexpr double kTruncationFloor = 1e-300;

struct TruncatedMoments {
    double mean = 0.0;
    double variance = 1.0;
    /// Phi(b) - Phi(a), possibly tiny; `log_mass` keeps it when it underflows.
    double mass = 1.0;
    double log_mass = 0.0;
};

namespace detail {

// Moments of N(0,1) restricted to a narrow [a, b] by 16-point Gauss-Legendre
// in the centred coordinate; avoids the cancellation in the closed forms.
inline TruncatedMoments narrow_truncated_moments(double a, double b) {
    static constexpr std::array<double, 8> kNode = {
        0.0950125098376374401853193, 0.2816035507792589132304605, 0.4580167776572273863424194,
        0.6178762444026437484466718, 0.7554044083550030338951012, 0.8656312023878317438804679,
        0.9445750230732325760779884, 0.9894009349916499325961542};
    static constexpr std::array<double, 8> kWeight = {
        0.1894506104550684962853967, 0.1826034150449235888667637, 0.1691565193950025381893121,
        0.1495959888165767320815017, 0.1246289712555338720524763, 0.0951585116824927848099251,
        0.0622535239386478928628438, 0.0271524594117540948517806};
    const double c = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    // Reference exponent at the point of highest density in [a, b].
    const double peak = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(a * a, b * b);
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < kNode.size(); ++i) {
        for (double sgn : {-1.0, 1.0}) {
            const double t = sgn * half * kNode[i];
            const double x = c + t;
            const double w = kWeight[i] * std::exp(-0.5 * (x * x - peak));
            m0 += w;
            m1 += w * t;
            m2 += w * t * t;
        }
    }
    TruncatedMoments out;
    const double mean_t = m1 / m0;
    out.mean = c + mean_t;
    out.variance = std::max(m2 / m0 - mean_t * mean_t, 0.0);
    // mass = half * m0 * exp(-peak/2) / sqrt(2 pi)
    out.log_mass = std::log(half * m0) - 0.5 * peak - 0.5 * std::log(2.0 * std::numbers::pi);
    out.mass = std::exp(out.log_mass);
    return out;
}

}  // namespace detail

/// Mean and variance of a standard normal conditioned on [a, b]; either
/// bound may be infinite. Both-tail intervals are handled by reflection and
/// Mills-ratio scaling, so the result stays accurate far into the tails as
/// long as the interval mass stays above 1e-300.
inline TruncatedMoments truncated_normal_moments(double a, double b) {
    if (std::isnan(a) || std::isnan(b) || !(a < b)) {
        throw DomainError("truncated_normal_moments: require a < b");
    }
    if (a == -kInf && b == kInf) return {};
    // Reflect so the bulk of the interval sits on the non-positive side.
    if (a + b > 0.0) {
        TruncatedMoments r = truncated_normal_moments(-b, -a);
        r.mean = -r.mean;
        return r;
    }
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    if (std::isfinite(a) && (b - a) * scale <= 1.0) {
        TruncatedMoments r = detail::narrow_truncated_moments(a, b);
        if (r.log_mass < std::log(kTruncationFloor)) {
            throw DegenerateIntervalError("truncated_normal_moments: interval mass below floor");
        }
        return r;
    }

    TruncatedMoments out;
    double mean = 0.0, second = 0.0;  // second = (a phi(a) - b phi(b)) / Z
    if (b <= 0.0) {
        // Everything relative to phi(b), the largest density on [a, b].
        const double ratio = std::isfinite(a) ? std::exp(-0.5 * (a - b) * (a + b)) : 0.0;
        const double z_rel = lower_mills(b) - (std::isfinite(a) ? ratio * lower_mills(a) : 0.0);
        const double a_term = std::isfinite(a) ? a * ratio : 0.0;
        mean = (ratio - 1.0) / z_rel;
        second = (a_term - b) / z_rel;
        out.log_mass = std::log(z_rel) - 0.5 * b * b - 0.5 * std::log(2.0 * std::numbers::pi);
        out.mass = std::exp(out.log_mass);
    } else {
        const double z = 0.5 * (std::erfc(-b * (0.5 * std::numbers::sqrt2)) -
                                std::erfc(-a * (0.5 * std::numbers::sqrt2)));
        const double pa = normal_pdf(a), pb = normal_pdf(b);
        const double a_term = std::isfinite(a) ? a * pa : 0.0;
        const double b_term = std::isfinite(b) ? b * pb : 0.0;
        mean = (pa - pb) / z;
        second = (a_term - b_term) / z;
        out.mass = z;
        out.log_mass = std::log(z);
    }
    if (!(out.log_mass >= std::log(kTruncationFloor))) {
        throw DegenerateIntervalError("truncated_normal_moments: interval mass below floor");
    }
    out.mean = mean;
    out.variance = 1.0 + second - mean * mean;
    out.variance = std::clamp(out.variance, std::numeric_limits<double>::min(), 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// Error laws
// ---------------------------------------------------------------------------

/// One of the three centred error laws: Unif[lo, hi] with lo = -hi,
/// N(0, variance), or (Z - 1)/s with Z ~ chi-square(1).
class NoiseSpec {
public:
    enum class Kind { uniform, gaussian, chi1_centered };

    /// Relative tail mass beyond the effective support (12 sd for the normal).
    static constexpr double kTailSd = 12.0;

    static NoiseSpec uniform(double lo, double hi) {
        detail::require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
                        "uniform noise: need finite lo < hi");
        detail::require(lo == -hi, "uniform noise must be centred (lo == -hi)");
        return NoiseSpec(Kind::uniform, lo, hi);
    }
    static NoiseSpec gaussian(double mean, double variance) {
        detail::require(mean == 0.0, "gaussian noise must be centred (mean == 0)");
        detail::require(std::isfinite(variance) && variance > 0.0,
                        "gaussian noise: variance must be positive and finite");
        return NoiseSpec(Kind::gaussian, mean, variance);
    }
    static NoiseSpec chi1_centered(double scale) {
        detail::require(std::isfinite(scale) && scale > 0.0, "chi1_centered: scale must be positive");
        return NoiseSpec(Kind::chi1_centered, scale, 0.0);
    }

    Kind kind() const { return kind_; }
    double lo() const { return p1_; }         ///< uniform only
    double hi() const { return p2_; }         ///< uniform only
    double scale() const { return p1_; }      ///< chi1_centered only

    double mean() const { return 0.0; }

    double variance() const {
        switch (kind_) {
            case Kind::uniform: return (p2_ - p1_) * (p2_ - p1_) / 12.0;
            case Kind::gaussian: return p2_;
            case Kind::chi1_centered: return 2.0 / (p1_ * p1_);
        }
        return 0.0;
    }

    double sd() const { return std::sqrt(variance()); }

    bool symmetric() const { return kind_ != Kind::chi1_centered; }

    Interval support() const {
        switch (kind_) {
            case Kind::uniform: return {p1_, p2_};
            case Kind::gaussian: return {-kInf, kInf};
            case Kind::chi1_centered: return {-1.0 / p1_, kInf};
        }
        return {};
    }

    /// Support with unbounded tails cut where the remaining mass is ~1e-33.
    Interval effective_support() const {
        switch (kind_) {
            case Kind::uniform: return {p1_, p2_};
            case Kind::gaussian: return {-kTailSd * sd(), kTailSd * sd()};
            case Kind::chi1_centered:
                return {-1.0 / p1_, (kTailSd * kTailSd - 1.0) / p1_};
        }
        return {};
    }

    /// True where the density has an integrable singularity at a finite
    /// support end (chi-square(1) at its lower bound).
    bool singular_at_lower_bound() const { return kind_ == Kind::chi1_centered; }

    double pdf(double e) const {
        switch (kind_) {
            case Kind::uniform: return (e >= p1_ && e <= p2_) ? 1.0 / (p2_ - p1_) : 0.0;
            case Kind::gaussian: {
                const double s = std::sqrt(p2_);
                return normal_pdf(e / s) / s;
            }
            case Kind::chi1_centered: {
                const double z = p1_ * e + 1.0;
                if (z <= 0.0) return z == 0.0 ? kInf : 0.0;
                return p1_ * std::exp(-0.5 * z) / std::sqrt(2.0 * std::numbers::pi * z);
            }
        }
        return 0.0;
    }

    /// Density at support().lo + d, d >= 0; accurate next to a singular
    /// lower bound where forming lo + d first would cancel.
    double pdf_above_lower(double d) const {
        if (kind_ != Kind::chi1_centered) return pdf(support().lo + d);
        const double z = p1_ * d;
        if (z <= 0.0) return z == 0.0 ? kInf : 0.0;
        return p1_ * std::exp(-0.5 * z) / std::sqrt(2.0 * std::numbers::pi * z);
    }

    double cdf(double e) const {
        switch (kind_) {
            case Kind::uniform:
                if (e <= p1_) return 0.0;
                if (e >= p2_) return 1.0;
                return (e - p1_) / (p2_ - p1_);
            case Kind::gaussian: return normal_cdf(e / std::sqrt(p2_));
            case Kind::chi1_centered: {
                const double z = p1_ * e + 1.0;
                if (z <= 0.0) return 0.0;
                return std::erf(std::sqrt(0.5 * z));
            }
        }
        return 0.0;
    }

    /// P(E > e), computed without the 1 - cdf cancellation in the upper tail.
    double sf(double e) const {
        switch (kind_) {
            case Kind::uniform:
                if (e <= p1_) return 1.0;
                if (e >= p2_) return 0.0;
                return (p2_ - e) / (p2_ - p1_);
            case Kind::gaussian: return normal_cdf(-e / std::sqrt(p2_));
            case Kind::chi1_centered: {
                const double z = p1_ * e + 1.0;
                if (z <= 0.0) return 1.0;
                return std::erfc(std::sqrt(0.5 * z));
            }
        }
        return 0.0;
    }

    /// E|X|^k in closed form for the symmetric laws.
    double abs_moment(double k) const {
        detail::require(k >= 0.0, "abs_moment: k must be non-negative");
        if (k == 0.0) return 1.0;
        switch (kind_) {
            case Kind::uniform: return std::pow(p2_, k) / (k + 1.0);
            case Kind::gaussian: return std::pow(p2_, 0.5 * k) * power_norm(0.5 * k);
            case Kind::chi1_centered: break;
        }
        throw ValidationError("abs_moment: closed form only for symmetric laws");
    }

    double draw(Rng& rng) const {
        switch (kind_) {
            case Kind::uniform: return p1_ + (p2_ - p1_) * rng.uniform();
            case Kind::gaussian: return std::sqrt(p2_) * rng.normal();
            case Kind::chi1_centered: {
                const double z = rng.normal();
                return (z * z - 1.0) / p1_;
            }
        }
        return 0.0;
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        switch (kind_) {
            case Kind::uniform: os << "uniform(" << p1_ << "," << p2_ << ")"; break;
            case Kind::gaussian: os << "gaussian(0," << p2_ << ")"; break;
            case Kind::chi1_centered: os << "chi1_centered(" << p1_ << ")"; break;
        }
        return os.str();
    }

    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;

private:
    NoiseSpec(Kind k, double p1, double p2) : kind_(k), p1_(p1), p2_(p2) {}

    Kind kind_;
    double p1_;
    double p2_;
};

/// n draws from `noise`, reproducible from (seed, stream).
inline std::vector<double> sample(const NoiseSpec& noise, std::size_t n, std::uint64_t seed,
                                  std::uint64_t stream = 0) {
    detail::require(n >= 1, "sample: n must be at least 1");
    Rng rng(seed, stream);
    std::vector<double> out(n);
    for (auto& v : out) v = noise.draw(rng);
    return out;
}

}  // namespace causal_gap
