#pragma once

// Admissibility of an admission rate for a given price and service model.

#include "accessprice/fixed_points.hpp"
#include "accessprice/model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace accessprice {

struct ValidationClause {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationClause> clauses;
    int root_count = -1; ///< -1 when the root clause was not evaluated
    std::vector<double> roots;

    bool ok() const {
        return std::all_of(clauses.begin(), clauses.end(), [](auto& c) { return c.pass; });
    }
    const ValidationClause* find(const std::string& name) const {
        for (const auto& c : clauses) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }
};

namespace clause {
inline const std::string kArrivalExceedsService = "K_R > mu*";
inline const std::string kPositive = "alpha positive on [0, q_max)";
inline const std::string kDecreasing = "alpha strictly decreasing on [0, q_max)";
inline const std::string kZeroBeyond = "alpha zero beyond q_max";
inline const std::string kQmaxBound = "q_max bound";
inline const std::string kTwoRoots = "exactly two fixed points";
inline const std::string kAdmittanceBound = "admittance bound q_ad";
} // namespace clause

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

/// max of alpha' over [0, q_max] for the polynomial, exact for degree <= 3.
inline double max_admission_slope(const AdmissionSpec& a) {
    const auto& c = a.coefficients;
    const double hi = a.q_max;
    auto d = [&](double q) { return horner_derivative(c, q); };
    double best = std::max(d(0.0), d(hi));
    if (c.size() == 4 && c[3] != 0.0) {
        // alpha'' = 2 a2 + 6 a3 q vanishes at the vertex of alpha'.
        const double v = -c[2] / (3.0 * c[3]);
        if (v > 0.0 && v < hi) best = std::max(best, d(v));
    }
    return best;
}

inline bool slope_identically_zero(const AdmissionSpec& a) {
    for (std::size_t k = 1; k < a.coefficients.size(); ++k) {
        if (a.coefficients[k] != 0.0) return false;
    }
    return true;
}

} // namespace detail

/// Checks the admissibility clauses for the admission rate of `cfg`.
///
/// The root-count clause uses the triangular price with the configuration's
/// beta and q_m, since that is the price the two-equilibrium condition is
/// stated for. With `competitive_load` set it counts competitive-mode roots
/// (with mu(q) > K_U) instead and requires q_max > 2 q_m strictly.
inline ValidationReport validate_admissible(const ModelConfig& cfg,
                                            std::optional<double> competitive_load = std::nullopt,
                                            int grid = 1000) {
    using detail::fmt;
    ValidationReport rep;
    const auto& a = cfg.admission;

    rep.clauses.push_back({clause::kArrivalExceedsService, cfg.k_r > cfg.service.mu_star,
                           "K_R = " + fmt(cfg.k_r) + ", mu* = " + fmt(cfg.service.mu_star)});

    const bool finite_qmax = std::isfinite(a.q_max) && a.q_max > 0.0;
    if (!finite_qmax) {
        rep.clauses.push_back({clause::kPositive, false, "no finite q_max"});
        rep.clauses.push_back({clause::kDecreasing, false, "alpha does not reach zero"});
    } else {
        bool positive = true, decreasing = true;
        double prev = kInf;
        std::string where_pos, where_dec;
        for (int i = 0; i < grid; ++i) {
            const double q = a.q_max * i / grid;
            const double v = admission(a, q);
            if (!(v > 0.0) && positive) {
                positive = false;
                where_pos = "alpha(" + fmt(q) + ") = " + fmt(v);
            }
            if (!(v < prev) && decreasing) {
                decreasing = false;
                where_dec = "grid violation at q = " + fmt(q);
            }
            prev = v;
        }
        if (decreasing) {
            const double max_slope = detail::max_admission_slope(a);
            if (max_slope > 0.0 || detail::slope_identically_zero(a)) {
                decreasing = false;
                where_dec = "max alpha' on [0, q_max] = " + fmt(max_slope);
            }
        }
        rep.clauses.push_back({clause::kPositive, positive, positive ? "" : where_pos});
        rep.clauses.push_back({clause::kDecreasing, decreasing, decreasing ? "" : where_dec});
    }

    {
        bool zero = true;
        if (finite_qmax) {
            for (int i = 0; i <= 10; ++i) {
                if (admission(a, a.q_max * (1.0 + 0.1 * i)) != 0.0) zero = false;
            }
        }
        rep.clauses.push_back({clause::kZeroBeyond, finite_qmax && zero, ""});
    }

    const bool priced = cfg.price.variant != PriceVariant::Surge;
    if (priced) {
        const double two_qm = 2.0 * cfg.price.q_m;
        const bool strict = competitive_load.has_value();
        const bool ok = strict ? a.q_max > two_qm : a.q_max >= two_qm;
        rep.clauses.push_back({clause::kQmaxBound, ok,
                               std::string("q_max = ") + fmt(a.q_max) + (strict ? " > " : " >= ") +
                                   "2 q_m = " + fmt(two_qm)});
    }

    if (!priced) {
        rep.clauses.push_back({clause::kTwoRoots, true, "not applicable to surge pricing"});
    } else if (!finite_qmax) {
        rep.clauses.push_back({clause::kTwoRoots, false, "alpha has no finite q_max"});
    } else {
        const ModelConfig tri = cfg.with_price(cfg.price.triangular_counterpart());
        const AnalysisMode mode =
            competitive_load ? AnalysisMode::Competitive : AnalysisMode::Normal;
        const auto roots = residual_roots(tri, mode, competitive_load.value_or(0.0));
        rep.root_count = static_cast<int>(roots.size());
        for (const auto& r : roots) rep.roots.push_back(r.q);
        const double qm = cfg.price.q_m;
        bool ok = roots.size() == 2 && !roots[0].tangent && !roots[1].tangent;
        if (ok) ok = roots[0].q > 0.0 && roots[0].q < qm && roots[1].q > qm && roots[1].q < 2.0 * qm;
        std::string detail = "root count = " + std::to_string(roots.size());
        for (const auto& r : roots) detail += ", q = " + fmt(r.q);
        rep.clauses.push_back({clause::kTwoRoots, ok, detail});

        if (cfg.q_ad) {
            const double qad = *cfg.q_ad;
            bool bound = ok && roots[0].q < qad && qad < roots[1].q && cfg.service.q_c < qad;
            rep.clauses.push_back({clause::kAdmittanceBound, bound,
                                   "q_ad = " + fmt(qad) + " must lie in (q1*, q2*) and exceed q_c"});
        }
    }
    return rep;
}

/// Grid minimum of alpha + f_sat over [0, q_max + 2 q_m]; positive for every
/// saturated configuration.
inline double saturation_floor(const ModelConfig& cfg, int grid = 20000) {
    if (cfg.price.variant != PriceVariant::Saturated) {
        throw PreconditionError("saturation_floor: price variant must be saturated");
    }
    if (!std::isfinite(cfg.q_max())) throw PreconditionError("saturation_floor: infinite q_max");
    const double top = cfg.q_max() + 2.0 * cfg.price.q_m;
    double m = kInf;
    for (int i = 0; i <= grid; ++i) {
        const double q = top * i / grid;
        m = std::min(m, admission(cfg, q) + price(cfg, q));
    }
    return m;
}

} // namespace accessprice
