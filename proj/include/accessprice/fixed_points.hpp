#pragma once

// Equilibria via the scalar reduction in q: every fixed point of a mode is a
// root of one residual function of the active queue length, after which R*
// and U* follow by back-substitution.

#include "accessprice/model.hpp"
#include "accessprice/stability.hpp"
#include "accessprice/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace accessprice {

struct FixedPointOptions {
    int grid = 2000;
    double root_tol = 1e-12;
    double merge_tol = 1e-6;
    /// Domain guard: require mu(q) > K_U + edge and alpha(q) > edge.
    double edge = 1e-12;
};

/// Residual of the scalar fixed-point equation.
///   Normal:                 f(q)/alpha(q) - (K_R - mu(q))/mu(q)
///   Saturated, Competitive: f(q)/alpha(q) - (K_R + K_U - mu(q))/(mu(q) - K_U)
/// Empty where undefined (mu(q) <= K_U or alpha(q) == 0).
inline std::optional<double> fixed_point_residual(double q, const ModelConfig& cfg,
                                                  AnalysisMode mode, double k_u) {
    if (q < 0.0) throw DomainError("fixed_point_residual: negative queue length");
    const double load = mode == AnalysisMode::Normal ? 0.0 : k_u;
    const double a = admission(cfg, q);
    const double mu = service(cfg, q);
    if (!(a > 0.0) || !(mu > load)) return std::nullopt;
    return price(cfg, q) / a - (cfg.k_r + load - mu) / (mu - load);
}

namespace detail {

/// Open interval of q on which the residual is evaluated.
struct ScanDomain {
    double lo = 0.0;
    double hi = 0.0;
    bool empty() const { return !(hi > lo); }
};

inline ScanDomain scan_domain(const ModelConfig& cfg, double load, double edge) {
    const auto& s = cfg.service;
    if (!(s.mu_star > load + edge)) return {};
    const double lo = (load + edge) * s.q_c / s.mu_star;

    // alpha is decreasing on admissible configurations; locate alpha = edge.
    const double top = std::isfinite(cfg.q_max()) ? cfg.q_max() : 1e6;
    if (!(admission(cfg, lo) > edge)) return {};
    double a = lo, b = top;
    if (admission(cfg, b) > edge) return {lo, b};
    for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
        const double m = 0.5 * (a + b);
        (admission(cfg, m) > edge ? a : b) = m;
    }
    return {lo, a};
}

template <class G>
double bisect_root(G&& g, double lo, double hi, double glo, double tol) {
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm == 0.0 || hi - lo <= tol * std::max(1.0, std::abs(mid))) return mid;
        if ((gm < 0.0) == (glo < 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Golden-section minimum of |g| on [a, b].
template <class G>
double golden_min_abs(G&& g, double a, double b) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, b); ++it) {
        if (std::abs(g(c)) < std::abs(g(d))) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    return 0.5 * (a + b);
}

struct RootCandidate {
    double q = 0.0;
    bool tangent = false;
};

} // namespace detail

/// Roots of the residual over the mode's domain, ascending. Grid scan plus
/// bisection on every sign change; near-tangent double roots and roots closer
/// than merge_tol are merged and flagged.
inline std::vector<detail::RootCandidate> residual_roots(const ModelConfig& cfg, AnalysisMode mode,
                                                         double k_u,
                                                         const FixedPointOptions& opt = {}) {
    const double load = mode == AnalysisMode::Normal ? 0.0 : k_u;
    const auto dom = detail::scan_domain(cfg, load, opt.edge);
    std::vector<detail::RootCandidate> roots;
    if (dom.empty() || opt.grid < 2) return roots;

    auto g = [&](double q) {
        auto v = fixed_point_residual(q, cfg, mode, k_u);
        return v ? *v : std::numeric_limits<double>::quiet_NaN();
    };

    const int n = opt.grid;
    std::vector<double> qs(static_cast<std::size_t>(n)), gs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double q = dom.lo + (dom.hi - dom.lo) * i / (n - 1);
        qs[static_cast<std::size_t>(i)] = q;
        gs[static_cast<std::size_t>(i)] = g(q);
    }

    for (std::size_t i = 0; i + 1 < qs.size(); ++i) {
        const double ga = gs[i], gb = gs[i + 1];
        if (std::isnan(ga) || std::isnan(gb)) continue;
        if (ga == 0.0) {
            roots.push_back({qs[i], false});
        } else if ((ga < 0.0) != (gb < 0.0) && gb != 0.0) {
            roots.push_back({detail::bisect_root(g, qs[i], qs[i + 1], ga, opt.root_tol), false});
        } else if (i > 0 && !std::isnan(gs[i - 1]) && (gs[i - 1] < 0.0) == (ga < 0.0) &&
                   std::abs(ga) < std::abs(gs[i - 1]) && std::abs(ga) < std::abs(gb) &&
                   std::abs(ga) < 1e-6) {
            // Local minimum of |g| without a sign change: possible tangency.
            const double qt = detail::golden_min_abs(g, qs[i - 1], qs[i + 1]);
            if (std::abs(g(qt)) < 1e-10) roots.push_back({qt, true});
        }
    }
    if (!gs.empty() && gs.back() == 0.0) roots.push_back({qs.back(), false});

    std::sort(roots.begin(), roots.end(), [](auto& a, auto& b) { return a.q < b.q; });
    std::vector<detail::RootCandidate> merged;
    for (const auto& r : roots) {
        if (!merged.empty() && r.q - merged.back().q < opt.merge_tol) {
            merged.back().q = 0.5 * (merged.back().q + r.q);
            merged.back().tangent = true;
        } else {
            merged.push_back(r);
        }
    }
    return merged;
}

/// Back-substitutes R* (and U*) for a root q* and classifies the point.
inline FixedPoint make_fixed_point(const ModelConfig& cfg, AnalysisMode mode, double k_u, double q,
                                   bool tangent = false) {
    const double load = mode == AnalysisMode::Normal ? 0.0 : k_u;
    const double a = admission(cfg, q);
    FixedPoint fp;
    fp.mode = mode;
    fp.k_u = load;
    fp.q_star = q;
    fp.r_star = (service(cfg, q) - load) / a;
    fp.u_star = mode == AnalysisMode::Competitive ? load / a : 0.0;
    fp.price_at = price(cfg, q);
    if (tangent || cfg.kink_distance(q) <= kKinkRadius) {
        fp.classification = Classification::Degenerate;
        return fp;
    }
    const auto rep = classify(jacobian(cfg, fp.state(), mode));
    fp.classification = rep.classification;
    fp.eigenvalues = rep.eigenvalues;
    return fp;
}

/// All fixed points of a mode under constant unresponsive load k_u (ignored
/// in normal mode), in ascending q*.
inline std::vector<FixedPoint> find_fixed_points(const ModelConfig& cfg, AnalysisMode mode,
                                                 double k_u = 0.0,
                                                 const FixedPointOptions& opt = {}) {
    std::vector<FixedPoint> out;
    for (const auto& r : residual_roots(cfg, mode, k_u, opt)) {
        out.push_back(make_fixed_point(cfg, mode, k_u, r.q, r.tangent));
    }
    return out;
}

/// The fixed point with the smallest q* that is locally stable, if any.
inline std::optional<FixedPoint> low_congestion_point(const std::vector<FixedPoint>& fps) {
    for (const auto& fp : fps) {
        if (is_stable(fp.classification)) return fp;
    }
    return std::nullopt;
}

} // namespace accessprice
