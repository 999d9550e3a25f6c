#pragma once

// Parametric model functions: price, service rate and admission rate, plus
// the full system parameterisation they live in.

#include "accessprice/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace accessprice {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Points closer than this to a kink of f, mu or alpha are treated as kinks.
inline constexpr double kKinkRadius = 1e-9;

namespace detail {

inline void require_nonnegative(double q, const char* what) {
    if (!(q >= 0.0)) {
        throw DomainError(std::string(what) + ": negative queue length " + std::to_string(q));
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Price
// ---------------------------------------------------------------------------

enum class PriceVariant { Triangular, Saturated, Surge };

/// Price as a function of the active queue length.
///
/// Triangular rises as beta*q up to q_m, falls back to zero at 2*q_m and
/// stays there. Saturated follows the same shape but freezes at
/// beta*(2*q_m - q_n) from q_n on. Surge is the unbounded line beta*q.
struct PriceSpec {
    PriceVariant variant = PriceVariant::Triangular;
    double beta = 0.0;
    double q_m = 0.0;
    double q_n = 0.0; ///< Saturated only

    static PriceSpec triangular(double beta, double q_m) {
        return {PriceVariant::Triangular, beta, q_m, 0.0};
    }
    static PriceSpec saturated(double beta, double q_m, double q_n) {
        return {PriceVariant::Saturated, beta, q_m, q_n};
    }
    static PriceSpec surge(double beta) { return {PriceVariant::Surge, beta, 0.0, 0.0}; }

    /// The triangular price sharing beta and q_m with this one.
    PriceSpec triangular_counterpart() const { return triangular(beta, q_m); }
};

inline const char* to_string(PriceVariant v) {
    switch (v) {
    case PriceVariant::Triangular: return "triangular";
    case PriceVariant::Saturated: return "saturated";
    case PriceVariant::Surge: return "surge";
    }
    return "?";
}

/// Throws ConfigError naming the first violated field.
inline void check(const PriceSpec& p, const std::string& path = "price") {
    if (!(p.beta > 0.0)) throw ConfigError(path + ".beta", "must be > 0");
    if (p.variant == PriceVariant::Surge) return;
    if (!(p.q_m > 0.0)) throw ConfigError(path + ".q_m", "must be > 0");
    if (p.variant == PriceVariant::Saturated && !(p.q_n > p.q_m && p.q_n < 2.0 * p.q_m)) {
        throw ConfigError(path + ".q_n", "must lie in (q_m, 2*q_m)");
    }
}

inline double price(const PriceSpec& p, double q) {
    detail::require_nonnegative(q, "price");
    switch (p.variant) {
    case PriceVariant::Surge:
        return p.beta * q;
    case PriceVariant::Triangular:
        if (q <= p.q_m) return p.beta * q;
        if (q <= 2.0 * p.q_m) return p.beta * (2.0 * p.q_m - q);
        return 0.0;
    case PriceVariant::Saturated:
        if (q <= p.q_m) return p.beta * q;
        if (q <= p.q_n) return p.beta * (2.0 * p.q_m - q);
        return p.beta * (2.0 * p.q_m - p.q_n);
    }
    return 0.0;
}

/// Left derivative at kinks, right derivative at q = 0.
inline double price_slope(const PriceSpec& p, double q) {
    detail::require_nonnegative(q, "price_slope");
    switch (p.variant) {
    case PriceVariant::Surge:
        return p.beta;
    case PriceVariant::Triangular:
        if (q <= p.q_m) return p.beta;
        if (q <= 2.0 * p.q_m) return -p.beta;
        return 0.0;
    case PriceVariant::Saturated:
        if (q <= p.q_m) return p.beta;
        if (q <= p.q_n) return -p.beta;
        return 0.0;
    }
    return 0.0;
}

inline std::vector<double> kinks(const PriceSpec& p) {
    switch (p.variant) {
    case PriceVariant::Surge: return {};
    case PriceVariant::Triangular: return {p.q_m, 2.0 * p.q_m};
    case PriceVariant::Saturated: return {p.q_m, p.q_n};
    }
    return {};
}

inline double lipschitz_bound(const PriceSpec& p) { return p.beta; }

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

/// Linear ramp from 0 to mu_star on [0, q_c], constant afterwards.
struct ServiceSpec {
    double mu_star = 3.0;
    double q_c = 0.0;
};

inline void check(const ServiceSpec& s, const std::string& path = "service") {
    if (!(s.mu_star > 0.0)) throw ConfigError(path + ".mu_star", "must be > 0");
    if (!(s.q_c > 0.0)) throw ConfigError(path + ".q_c", "must be > 0");
}

inline double service(const ServiceSpec& s, double q) {
    detail::require_nonnegative(q, "service");
    return q <= s.q_c ? s.mu_star * q / s.q_c : s.mu_star;
}

/// Left derivative at q_c.
inline double service_slope(const ServiceSpec& s, double q) {
    detail::require_nonnegative(q, "service_slope");
    return q <= s.q_c ? s.mu_star / s.q_c : 0.0;
}

inline double lipschitz_bound(const ServiceSpec& s) { return s.mu_star / s.q_c; }

// ---------------------------------------------------------------------------
// Admission
// ---------------------------------------------------------------------------

enum class AdmissionVariant { Linear, Cubic };

inline const char* to_string(AdmissionVariant v) {
    return v == AdmissionVariant::Linear ? "linear" : "cubic";
}

/// Admission rate: a polynomial (coefficients in ascending powers of q)
/// clamped at zero, and identically zero from q_max on.
///
/// For the linear variant q_max is the zero crossing of the line, so the
/// clamp and the cut-off coincide.
struct AdmissionSpec {
    AdmissionVariant variant = AdmissionVariant::Linear;
    std::vector<double> coefficients; ///< {c2, c1} or {a0, a1, a2, a3}
    double q_max = 0.0;

    /// alpha(q) = max(0, slope*q + intercept).
    static AdmissionSpec linear(double slope, double intercept) {
        AdmissionSpec a{AdmissionVariant::Linear, {intercept, slope}, kInf};
        if (slope < 0.0) a.q_max = -intercept / slope;
        return a;
    }
    static AdmissionSpec cubic(double a0, double a1, double a2, double a3, double q_max) {
        return {AdmissionVariant::Cubic, {a0, a1, a2, a3}, q_max};
    }
};

inline void check(const AdmissionSpec& a, const std::string& path = "admission") {
    const std::size_t want = a.variant == AdmissionVariant::Linear ? 2 : 4;
    if (a.coefficients.size() != want) {
        throw ConfigError(path + ".coefficients",
                          "expected " + std::to_string(want) + " coefficients for " +
                              to_string(a.variant));
    }
    for (double c : a.coefficients) {
        if (!std::isfinite(c)) throw ConfigError(path + ".coefficients", "non-finite coefficient");
    }
    if (!(a.q_max > 0.0)) throw ConfigError(path + ".q_max", "must be > 0");
}

namespace detail {

inline double horner(std::span<const double> c, double q) {
    double v = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * q + *it;
    return v;
}

inline double horner_derivative(std::span<const double> c, double q) {
    double v = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) v = v * q + static_cast<double>(k) * c[k];
    return v;
}

} // namespace detail

/// The unclamped polynomial.
inline double admission_polynomial(const AdmissionSpec& a, double q) {
    return detail::horner(a.coefficients, q);
}

inline double admission(const AdmissionSpec& a, double q) {
    detail::require_nonnegative(q, "admission");
    if (q >= a.q_max) return 0.0;
    return std::max(0.0, admission_polynomial(a, q));
}

/// Derivative of the unclamped polynomial below q_max (the left derivative
/// at q_max itself), zero beyond.
inline double admission_slope(const AdmissionSpec& a, double q) {
    detail::require_nonnegative(q, "admission_slope");
    if (q > a.q_max) return 0.0;
    return detail::horner_derivative(a.coefficients, q);
}

inline std::vector<double> kinks(const AdmissionSpec& a) {
    std::vector<double> k;
    if (std::isfinite(a.q_max)) k.push_back(a.q_max);
    return k;
}

/// max |alpha'| over [0, q_max], evaluated on a fine grid.
inline double lipschitz_bound(const AdmissionSpec& a) {
    const double hi = std::isfinite(a.q_max) ? a.q_max : 1e3;
    double best = 0.0;
    constexpr int n = 4096;
    for (int i = 0; i <= n; ++i) {
        best = std::max(best, std::abs(admission_slope(a, hi * i / n)));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Full configuration
// ---------------------------------------------------------------------------

/// K_U(t) = rate on [t_start, t_end).
struct LoadPiece {
    double t_start = 0.0;
    double t_end = 0.0;
    double rate = 0.0;
};

struct ModelConfig {
    double k_r = 0.0;
    std::vector<LoadPiece> k_u_schedule;
    PriceSpec price;
    AdmissionSpec admission;
    ServiceSpec service;
    std::optional<double> q_ad;

    double q_max() const { return admission.q_max; }

    /// Piecewise-constant unresponsive arrival rate; zero outside all pieces.
    double unresponsive_rate(double t) const {
        for (const auto& p : k_u_schedule) {
            if (t >= p.t_start && t < p.t_end) return p.rate;
        }
        return 0.0;
    }

    /// Largest rate in the schedule (the load used for constant-load analysis).
    double peak_load() const {
        double m = 0.0;
        for (const auto& p : k_u_schedule) m = std::max(m, p.rate);
        return m;
    }

    /// Finite schedule breakpoints in ascending order.
    std::vector<double> breakpoints() const {
        std::vector<double> b;
        for (const auto& p : k_u_schedule) {
            if (std::isfinite(p.t_start)) b.push_back(p.t_start);
            if (std::isfinite(p.t_end)) b.push_back(p.t_end);
        }
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        return b;
    }

    /// Copy whose schedule is the constant load k_u for all time.
    ModelConfig with_constant_load(double k_u) const {
        ModelConfig c = *this;
        c.k_u_schedule.clear();
        if (k_u != 0.0) c.k_u_schedule.push_back({-kInf, kInf, k_u});
        return c;
    }

    ModelConfig with_price(const PriceSpec& p) const {
        ModelConfig c = *this;
        c.price = p;
        return c;
    }

    /// All kinks of f, mu and alpha.
    std::vector<double> kinks() const {
        auto k = accessprice::kinks(price);
        k.push_back(service.q_c);
        for (double v : accessprice::kinks(admission)) k.push_back(v);
        std::sort(k.begin(), k.end());
        return k;
    }

    /// Distance from q to the nearest kink.
    double kink_distance(double q) const {
        double d = kInf;
        for (double k : kinks()) d = std::min(d, std::abs(q - k));
        return d;
    }
};

/// Structural checks (positivity, schedule ordering, coefficient counts).
/// The admissibility conditions themselves are reported by
/// validate_admissible rather than thrown.
inline void check(const ModelConfig& c) {
    if (!(c.k_r > 0.0)) throw ConfigError("k_r", "must be > 0");
    check(c.price);
    check(c.service);
    check(c.admission);
    for (std::size_t i = 0; i < c.k_u_schedule.size(); ++i) {
        const auto& p = c.k_u_schedule[i];
        const std::string path = "k_u_schedule[" + std::to_string(i) + "]";
        if (!(p.t_end > p.t_start)) throw ConfigError(path, "t_end must exceed t_start");
        if (!(p.rate >= 0.0)) throw ConfigError(path + ".rate", "must be >= 0");
        for (std::size_t j = 0; j < i; ++j) {
            const auto& o = c.k_u_schedule[j];
            if (p.t_start < o.t_end && o.t_start < p.t_end) {
                throw ConfigError(path, "overlaps k_u_schedule[" + std::to_string(j) + "]");
            }
        }
    }
    if (c.q_ad && !(*c.q_ad > 0.0)) throw ConfigError("q_ad", "must be > 0");
}

// Convenience evaluators bound to a configuration.
inline double price(const ModelConfig& c, double q) { return price(c.price, q); }
inline double service(const ModelConfig& c, double q) { return service(c.service, q); }
inline double admission(const ModelConfig& c, double q) { return admission(c.admission, q); }

} // namespace accessprice
