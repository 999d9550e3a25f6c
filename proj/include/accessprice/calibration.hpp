#pragma once

// Admission-rate calibration from target equilibrium prices.

#include "accessprice/admissibility.hpp"
#include "accessprice/model.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <string>

namespace accessprice {

/// Desired prices at the low- and high-congestion equilibria.
struct CalibrationTargets {
    double p1 = 0.0;
    double p2 = 0.0;
    std::optional<double> alpha0; ///< alpha(0) for the cubic variant; scanned when absent
};

/// Where the targets put the two equilibria and what alpha must be there.
struct CalibrationPoints {
    double q1 = 0.0, q2 = 0.0;
    double alpha1 = 0.0, alpha2 = 0.0;
};

/// q1* = p1/beta on the rising flank, q2* = 2 q_m - p2/beta on the falling
/// one, and alpha(q_i*) = p_i (mu(q_i*) - K_U) / (K_R + K_U - mu(q_i*)).
/// K_U = 0 gives the normal-mode conditions.
inline CalibrationPoints calibration_points(const CalibrationTargets& t, const PriceSpec& price,
                                            const ServiceSpec& service, double k_r,
                                            double k_u = 0.0) {
    if (price.variant == PriceVariant::Surge) {
        throw PreconditionError("calibration needs a price with a peak (q_m)");
    }
    const double peak = price.beta * price.q_m;
    if (!(t.p1 > 0.0 && t.p1 < peak)) throw PreconditionError("p1 must lie in (0, beta q_m)");
    if (!(t.p2 > 0.0 && t.p2 < peak)) throw PreconditionError("p2 must lie in (0, beta q_m)");

    CalibrationPoints c;
    c.q1 = t.p1 / price.beta;
    c.q2 = 2.0 * price.q_m - t.p2 / price.beta;
    auto target = [&](double p, double q) {
        const double mu = accessprice::service(service, q);
        if (!(mu > k_u)) throw PreconditionError("mu(q*) must exceed K_U at q* = " + std::to_string(q));
        if (!(k_r + k_u > mu)) throw PreconditionError("K_R + K_U must exceed mu(q*) at q* = " + std::to_string(q));
        return p * (mu - k_u) / (k_r + k_u - mu);
    };
    c.alpha1 = target(t.p1, c.q1);
    c.alpha2 = target(t.p2, c.q2);
    if (!(c.alpha1 > c.alpha2)) {
        throw CalibrationError("monotonicity violation: alpha(q1*) = " + std::to_string(c.alpha1) +
                               " <= alpha(q2*) = " + std::to_string(c.alpha2));
    }
    return c;
}

namespace detail {

inline void require_admissible(const AdmissionSpec& spec, const PriceSpec& price,
                               const ServiceSpec& service, double k_r, double k_u) {
    ModelConfig cfg;
    cfg.k_r = k_r;
    cfg.price = price.triangular_counterpart();
    cfg.service = service;
    cfg.admission = spec;
    const auto rep = validate_admissible(cfg, k_u > 0.0 ? std::optional<double>(k_u) : std::nullopt);
    if (rep.ok()) return;
    std::string msg;
    for (const auto& c : rep.clauses) {
        if (c.pass) continue;
        if (!msg.empty()) msg += "; ";
        msg += c.name == clause::kTwoRoots ? "extra roots detected (" + c.detail + ")"
                                           : c.name + (c.detail.empty() ? "" : " (" + c.detail + ")");
    }
    throw CalibrationError("calibrated admission is not admissible: " + msg);
}

/// Gaussian elimination with partial pivoting on a 4x4 system.
inline std::array<double, 4> solve4(std::array<std::array<double, 4>, 4> m, std::array<double, 4> b) {
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        }
        if (m[piv][col] == 0.0) throw CalibrationError("singular interpolation system");
        std::swap(m[piv], m[col]);
        std::swap(b[piv], b[col]);
        for (int r = col + 1; r < 4; ++r) {
            const double f = m[r][col] / m[col][col];
            for (int k = col; k < 4; ++k) m[r][k] -= f * m[col][k];
            b[r] -= f * b[col];
        }
    }
    std::array<double, 4> x{};
    for (int r = 3; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < 4; ++k) s -= m[r][k] * x[k];
        x[r] = s / m[r][r];
    }
    return x;
}

} // namespace detail

/// Linear admission alpha(q) = max(0, c1 q + c2) through both targets.
inline AdmissionSpec calibrate_linear_admission(const CalibrationTargets& t, const PriceSpec& price,
                                                const ServiceSpec& service, double k_r,
                                                double k_u = 0.0) {
    const auto c = calibration_points(t, price, service, k_r, k_u);
    const double slope = (c.alpha2 - c.alpha1) / (c.q2 - c.q1);
    const double intercept = c.alpha1 - slope * c.q1;
    auto spec = AdmissionSpec::linear(slope, intercept);
    detail::require_admissible(spec, price, service, k_r, k_u);
    return spec;
}

/// Cubic through the two targets, alpha(q_max) = 0 and alpha(0) = alpha0.
/// Without an explicit alpha0 the value is scanned over [alpha(q1*),
/// 4 alpha(q1*)] in 64 steps and the first cubic that is non-increasing on
/// all of [0, q_max] is returned.
inline AdmissionSpec calibrate_cubic_admission(const CalibrationTargets& t, const PriceSpec& price,
                                               const ServiceSpec& service, double k_r,
                                               double q_max, double k_u = 0.0) {
    if (price.variant != PriceVariant::Surge && !(q_max > 2.0 * price.q_m)) {
        throw PreconditionError("q_max must exceed 2 q_m");
    }
    const auto c = calibration_points(t, price, service, k_r, k_u);
    if (t.alpha0 && *t.alpha0 < c.alpha1) {
        throw CalibrationError("alpha0 below alpha(q1*): a decreasing alpha needs alpha(0) >= alpha(q1*)");
    }

    auto fit = [&](double a0) {
        std::array<std::array<double, 4>, 4> m{};
        const std::array<double, 4> nodes{0.0, c.q1, c.q2, q_max};
        for (int i = 0; i < 4; ++i) {
            const double q = nodes[static_cast<std::size_t>(i)];
            m[static_cast<std::size_t>(i)] = {1.0, q, q * q, q * q * q};
        }
        const auto x = detail::solve4(m, {a0, c.alpha1, c.alpha2, 0.0});
        return AdmissionSpec::cubic(x[0], x[1], x[2], x[3], q_max);
    };
    auto monotone = [](const AdmissionSpec& s) { return detail::max_admission_slope(s) <= 0.0; };

    std::optional<AdmissionSpec> found;
    if (t.alpha0) {
        auto s = fit(*t.alpha0);
        if (monotone(s)) found = s;
    } else {
        constexpr int steps = 64;
        for (int k = 0; k < steps && !found; ++k) {
            auto s = fit(c.alpha1 + 3.0 * c.alpha1 * k / (steps - 1));
            if (monotone(s)) found = s;
        }
    }
    if (!found) throw CalibrationError("no monotone cubic admission found");
    detail::require_admissible(*found, price, service, k_r, k_u);
    return *found;
}

} // namespace accessprice
