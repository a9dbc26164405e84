#pragma once
//
// Divergence kernels and the threshold points that bound the region where
// exp(-n E) exceeds a given accuracy.
//
//   E(p||q)          = p ln(p/q) - (p - q)                 p >= 0, q > 0
//   E*(p||q)         = E(q||p)
//   E(1-p||1-q)      reflected form, used for the second half of KL
//   D(p||q)          = p ln(p/q) + (1-p) ln((1-p)/(1-q))   Bernoulli KL
//
// D = E + E(1-p||1-q) holds identically.
//

#include <distlr/errors.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

namespace distlr {

enum class DivergenceKind { E, EStar, EReflected, KL };

enum class Regime {
    Lower, // square (1,2) x (0,1): p above the corner, q below
    Upper  // square (0,1) x (1,2): p below the corner, q above
};

inline std::string_view to_string(DivergenceKind kind) {
    switch (kind) {
    case DivergenceKind::E: return "E";
    case DivergenceKind::EStar: return "EStar";
    case DivergenceKind::EReflected: return "EReflected";
    case DivergenceKind::KL: return "KL";
    }
    return "?";
}

inline std::string_view to_string(Regime regime) { return regime == Regime::Lower ? "lower" : "upper"; }

// Threshold pair (p_M, q_M) for level M in one of the two unit squares.
//
// In the lower regime q_M = exp(-(M+1)) for large M and underflows once
// M exceeds ~745; log_q_m carries the exact value in that case.
struct ThresholdPair {
    double m       = 0.0;
    double p_m     = 0.0;
    double q_m     = 0.0;
    double log_q_m = 0.0;
    Regime regime  = Regime::Lower;
};

namespace detail {

inline constexpr int bisection_cap = 200;

// x ln(x/y) for x >= 0, y > 0, accurate when x ~ y.
inline double xlog_ratio(double x, double y) {
    if (x == 0.0)
        return 0.0;
    const double r = x / y;
    if (r > 0.5 && r < 2.0)
        return x * std::log1p((x - y) / y);
    return x * std::log(r);
}

inline double eval_e(double p, double q) {
    if (!(p >= 0.0) || !(q >= 0.0) || !std::isfinite(p) || !std::isfinite(q))
        throw domain_error("divergence infinite/undefined at input: E(" + std::to_string(p) + "||" + std::to_string(q) + ")");
    if (p == 0.0)
        return q;
    if (q == 0.0)
        throw domain_error("divergence infinite/undefined at input: E(" + std::to_string(p) + "||0)");
    return std::max(0.0, xlog_ratio(p, q) - (p - q));
}

inline double eval_kl(double p, double q) {
    if (!(p >= 0.0 && p <= 1.0) || !(q > 0.0 && q < 1.0))
        throw domain_error("divergence infinite/undefined at input: KL(" + std::to_string(p) + "||" + std::to_string(q) + ")");
    if (p == 0.0)
        return -std::log1p(-q);
    if (p == 1.0)
        return -std::log(q);
    return std::max(0.0, xlog_ratio(p, q) + xlog_ratio(1.0 - p, 1.0 - q));
}

// Bisection on [lo, hi] for an increasing g with g(lo) <= target <= g(hi).
// Runs to full double resolution; the tolerance is checked on exit.
template <typename F>
double bisect_increasing(F &&g, double lo, double hi, double target, double tol, const char *what) {
    const double lo0 = lo;
    const double hi0 = hi;
    for (int it = 0; it < bisection_cap; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        if (g(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    const double glo = g(lo);
    const double ghi = g(hi);
    const double x   = std::abs(glo - target) <= std::abs(ghi - target) ? lo : hi;
    if (!(std::abs(g(x) - target) <= tol * std::max(1.0, target)))
        throw solver_error(std::string(what) + ": tolerance unreachable", lo0, hi0);
    return x;
}

inline void check_level(double m, double tol) {
    if (!(m > 0.0) || !std::isfinite(m))
        throw domain_error("threshold level M must be positive and finite, got " + std::to_string(m));
    if (!(tol > 0.0))
        throw domain_error("solver tolerance must be positive");
}

// E(p||q) with q given through its logarithm (q may underflow).
inline double eval_e_logq(double p, double q, double log_q) {
    if (p == 0.0)
        return q;
    const double log_p = std::log(p);
    if (q > 0.0 && p / q > 0.5 && p / q < 2.0)
        return std::max(0.0, xlog_ratio(p, q) - (p - q));
    return std::max(0.0, p * (log_p - log_q) - (p - q));
}

} // namespace detail

// Closed-form clamp thresholds.
inline const double lower_pm_clamp_level = 2.0 * std::numbers::ln2 - 1.0; // E(2||1)
inline const double upper_qm_clamp_level = 1.0 - std::numbers::ln2;       // E(1||2)
inline constexpr double upper_pm_clamp_level = 1.0;                       // E(0||1)

inline double eval(DivergenceKind kind, double p, double q) {
    switch (kind) {
    case DivergenceKind::E: return detail::eval_e(p, q);
    case DivergenceKind::EStar: return detail::eval_e(q, p);
    case DivergenceKind::EReflected: return detail::eval_e(1.0 - p, 1.0 - q);
    case DivergenceKind::KL: return detail::eval_kl(p, q);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

// ln(1/q_M) for the lower regime: the root t > 0 of t - 1 + exp(-t) = M.
inline double solve_log_inv_qm_lower(double m, double tol = 1e-12) {
    detail::check_level(m, tol);
    auto g = [](double t) { return t + std::expm1(-t); };
    return detail::bisect_increasing(g, 0.0, m + 1.0, m, tol, "q_M (lower regime)");
}

// q_M < 1 with ln(1/q) - (1 - q) = M. Underflows to 0 for M > ~745.
inline double solve_qm_lower(double m, double tol = 1e-12) { return std::exp(-solve_log_inv_qm_lower(m, tol)); }

// p_M = min(2, p') with p' ln p' - (p' - 1) = M, p' > 1.
inline double solve_pm_lower(double m, double tol = 1e-12) {
    detail::check_level(m, tol);
    if (m >= lower_pm_clamp_level)
        return 2.0;
    auto g = [](double s) { return (1.0 + s) * std::log1p(s) - s; };
    return 1.0 + detail::bisect_increasing(g, 0.0, 1.0, m, tol, "p_M (lower regime)");
}

inline ThresholdPair solve_thresholds_lower(double m, double tol = 1e-12) {
    ThresholdPair t;
    t.m       = m;
    t.regime  = Regime::Lower;
    t.p_m     = solve_pm_lower(m, tol);
    t.log_q_m = -solve_log_inv_qm_lower(m, tol);
    t.q_m     = std::exp(t.log_q_m);
    return t;
}

inline ThresholdPair solve_thresholds_upper(double m, double tol = 1e-12) {
    detail::check_level(m, tol);
    ThresholdPair t;
    t.m      = m;
    t.regime = Regime::Upper;
    if (m >= upper_qm_clamp_level) {
        t.q_m = 2.0;
    } else {
        auto g = [](double s) { return s - std::log1p(s); };
        t.q_m  = 1.0 + detail::bisect_increasing(g, 0.0, 1.0, m, tol, "q_M (upper regime)");
    }
    t.log_q_m = std::log(t.q_m);
    if (m >= upper_pm_clamp_level) {
        t.p_m = 0.0;
    } else {
        // p ln p - (p - 1) decreases on (0,1); bisect on s = 1 - p.
        auto g = [](double s) {
            const double p = 1.0 - s;
            return p == 0.0 ? 1.0 : p * std::log1p(-s) + s;
        };
        t.p_m = 1.0 - detail::bisect_increasing(g, 0.0, 1.0, m, tol, "p_M (upper regime)");
    }
    return t;
}

inline ThresholdPair solve_thresholds(Regime regime, double m, double tol = 1e-12) {
    return regime == Regime::Lower ? solve_thresholds_lower(m, tol) : solve_thresholds_upper(m, tol);
}

// E(p_M || q_M), computed in log space so large M stays finite.
inline double corner_divergence(const ThresholdPair &t) { return detail::eval_e_logq(t.p_m, t.q_m, t.log_q_m); }

// E(p_M||q_M) / M for the regime's threshold pair.
inline double ratio(Regime regime, double m, double tol = 1e-12) {
    return corner_divergence(solve_thresholds(regime, m, tol)) / m;
}

} // namespace distlr
