#pragma once

// Nullclines, forward-invariant polygons and cuboids around the stable
// low-congestion equilibrium, boundary-sampling invariance checks and
// phase-portrait grids.

#include "accessprice/fixed_points.hpp"
#include "accessprice/model.hpp"
#include "accessprice/types.hpp"
#include "accessprice/vector_field.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace accessprice {

// ---------------------------------------------------------------------------
// Nullclines
// ---------------------------------------------------------------------------

namespace detail {

inline double admission_positive(const ModelConfig& cfg, double q, const char* who) {
    const double a = admission(cfg, q);
    if (!(a > 0.0)) throw DomainError(std::string(who) + ": alpha(q) = 0 at q = " + std::to_string(q));
    return a;
}

} // namespace detail

/// q-nullcline R = mu(q)/alpha(q).
inline double eta1(const ModelConfig& cfg, double q) {
    return service(cfg, q) / detail::admission_positive(cfg, q, "eta1");
}

/// R-nullcline R = K_R/(alpha(q) + f(q)).
inline double eta2(const ModelConfig& cfg, double q) {
    const double a = detail::admission_positive(cfg, q, "eta2");
    return cfg.k_r / (a + price(cfg, q));
}

/// q-nullcline of the 3D system restricted to U = u_hat.
inline double eta3(const ModelConfig& cfg, double q, double u_hat) {
    const double a = detail::admission_positive(cfg, q, "eta3");
    return (service(cfg, q) - a * u_hat) / a;
}

/// Largest q with alpha(q) > 0 (the right end of the nullcline domain).
inline double nullcline_domain_end(const ModelConfig& cfg) {
    double lo = 0.0, hi = std::isfinite(cfg.q_max()) ? cfg.q_max() : 1e6;
    if (admission(cfg, hi) > 0.0) return hi;
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (lo + hi);
        (admission(cfg, m) > 0.0 ? lo : hi) = m;
    }
    return lo;
}

/// eta1^{-1}(r) by bisection; eta1 is strictly increasing on admissible
/// configurations.
inline double eta1_inverse(const ModelConfig& cfg, double r) {
    if (!(r >= 0.0)) throw DomainError("eta1_inverse: negative R");
    double lo = 0.0, hi = nullcline_domain_end(cfg);
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
        const double m = 0.5 * (lo + hi);
        (eta1(cfg, m) < r ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
}

struct DaggerConstants {
    double r_dagger = 0.0; ///< max of eta2 on [0, q_m]
    double q_at_max = 0.0; ///< where that maximum is attained
    double q_dagger = 0.0; ///< eta1^{-1}(r_dagger)
};

/// max of eta2 on [0, q_m] by a 1000-point grid plus golden-section
/// refinement, and its preimage under eta1.
inline DaggerConstants dagger_constants(const ModelConfig& cfg) {
    if (cfg.price.variant == PriceVariant::Surge) {
        throw PreconditionError("R-dagger needs a price with a peak (q_m)");
    }
    const double qm = std::min(cfg.price.q_m, nullcline_domain_end(cfg));
    constexpr int n = 1000;
    int best = 0;
    double best_v = -kInf;
    for (int i = 0; i <= n; ++i) {
        const double v = eta2(cfg, qm * i / n);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    double a = qm * std::max(best - 1, 0) / n, b = qm * std::min(best + 1, n) / n;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200 && b - a > 1e-13 * std::max(1.0, b); ++it) {
        const double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
        if (eta2(cfg, c) > eta2(cfg, d)) {
            b = d;
        } else {
            a = c;
        }
    }
    DaggerConstants dc;
    const double q_ref = 0.5 * (a + b);
    dc.q_at_max = eta2(cfg, q_ref) >= best_v ? q_ref : qm * best / n;
    dc.r_dagger = std::max(best_v, eta2(cfg, q_ref));
    dc.q_dagger = eta1_inverse(cfg, dc.r_dagger);
    return dc;
}

inline double r_dagger(const ModelConfig& cfg) { return dagger_constants(cfg).r_dagger; }
inline double q_dagger(const ModelConfig& cfg) { return dagger_constants(cfg).q_dagger; }

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

enum class RegionKind { Polygon2D, Cuboid3D };

struct Vertex {
    std::string label;
    State point;
};

struct FaceReport {
    std::string label;
    double worst = -kInf; ///< max over samples of <outward normal, F>
    int samples = 0;
    bool strict = true;   ///< whether the face needs worst < 0 (else <= 0)
    bool pass = true;
};

struct InvarianceReport {
    std::vector<FaceReport> faces;
    std::vector<std::string> warnings;
    bool pass = true;

    const FaceReport* face(const std::string& label) const {
        for (const auto& f : faces) {
            if (f.label == label) return &f;
        }
        return nullptr;
    }
};

/// Polygon2D: vertices counterclockwise in the (R, q) plane, labelled
/// A (origin), E, D, C, B. Cuboid3D: two opposite corners, the origin and
/// (R-hat, q-hat, U-hat).
struct RegionSpec {
    RegionKind kind = RegionKind::Polygon2D;
    std::vector<Vertex> vertices;
    std::optional<InvarianceReport> check_report;

    const State& vertex(const std::string& label) const {
        for (const auto& v : vertices) {
            if (v.label == label) return v.point;
        }
        throw PreconditionError("no vertex " + label);
    }
};

namespace detail {

/// The two equilibria the region constructions are anchored to.
struct Anchors {
    FixedPoint low, high;
};

inline Anchors anchors(const ModelConfig& cfg, AnalysisMode mode, double k_u) {
    const auto fps = find_fixed_points(cfg, mode, k_u);
    if (fps.size() < 2) {
        throw PreconditionError("region construction needs two fixed points; found " +
                                std::to_string(fps.size()));
    }
    return {fps.front(), fps[1]};
}

} // namespace detail

/// Polygon with corners A = (0,0), B = (0,q), C = (eta2(q), q),
/// D = (r, eta1^{-1}(r)), E = (r, 0). No preconditions are checked.
inline RegionSpec polygon_from_choice(const ModelConfig& cfg, double q_choice, double r_choice) {
    RegionSpec reg;
    reg.kind = RegionKind::Polygon2D;
    reg.vertices = {{"A", {0.0, 0.0, 0.0}},
                    {"E", {r_choice, 0.0, 0.0}},
                    {"D", {r_choice, eta1_inverse(cfg, r_choice), 0.0}},
                    {"C", {eta2(cfg, q_choice), q_choice, 0.0}},
                    {"B", {0.0, q_choice, 0.0}}};
    return reg;
}

/// Forward-invariant polygon inside the domain of attraction of x1*. Needs
/// R2* > R-dagger, q_choice in (q-dagger, q2*) and r_choice in
/// (max{R-dagger, eta2(q_choice)}, eta1(q_choice)].
inline RegionSpec build_polygon(const ModelConfig& cfg, double q_choice, double r_choice) {
    const auto an = detail::anchors(cfg, AnalysisMode::Normal, 0.0);
    const auto dc = dagger_constants(cfg);
    if (!(an.high.r_star > dc.r_dagger)) {
        throw PreconditionError("hypothesis R2* > R-dagger violated (R2* = " +
                                std::to_string(an.high.r_star) + ", R-dagger = " +
                                std::to_string(dc.r_dagger) + ")");
    }
    if (!(q_choice > dc.q_dagger && q_choice < an.high.q_star)) {
        throw PreconditionError("q_choice must lie in (q-dagger, q2*) = (" + std::to_string(dc.q_dagger) +
                                ", " + std::to_string(an.high.q_star) + ")");
    }
    const double lo = std::max(dc.r_dagger, eta2(cfg, q_choice));
    const double hi = eta1(cfg, q_choice);
    if (!(r_choice > lo && r_choice <= hi)) {
        throw PreconditionError("r_choice must lie in (max{R-dagger, eta2(q)}, eta1(q)] = (" +
                                std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return polygon_from_choice(cfg, q_choice, r_choice);
}

struct PolygonChoice {
    double q_choice = 0.0, r_choice = 0.0;
};

/// Midpoints of the admissible intervals.
inline PolygonChoice default_polygon_choice(const ModelConfig& cfg) {
    const auto an = detail::anchors(cfg, AnalysisMode::Normal, 0.0);
    const auto dc = dagger_constants(cfg);
    PolygonChoice c;
    c.q_choice = 0.5 * (dc.q_dagger + an.high.q_star);
    c.r_choice = 0.5 * (std::max(dc.r_dagger, eta2(cfg, c.q_choice)) + eta1(cfg, c.q_choice));
    return c;
}

inline RegionSpec cuboid_from_corner(double r_hat, double q_hat, double u_hat) {
    RegionSpec reg;
    reg.kind = RegionKind::Cuboid3D;
    reg.vertices = {{"origin", {0.0, 0.0, 0.0}}, {"corner", {r_hat, q_hat, u_hat}}};
    return reg;
}

/// Absorbing cuboid [0, r_hat] x [0, q_hat] x [0, u_hat] for the competitive
/// system under constant load k_u. Needs R2* > R-dagger, q_hat in
/// (q-dagger, q2*), u_hat in (K_U/alpha(q_hat), U2*) and r_hat in
/// (eta2(q_hat), eta3(q_hat, u_hat)). With k_u = 0 the upper bound on u_hat
/// is dropped (U2* = 0 there) and only u_hat > 0 is required.
inline RegionSpec build_cuboid(const ModelConfig& cfg, double k_u, double q_hat, double u_hat,
                               double r_hat) {
    const auto an = detail::anchors(cfg, AnalysisMode::Competitive, k_u);
    const auto dc = dagger_constants(cfg);
    if (!(an.high.r_star > dc.r_dagger)) throw PreconditionError("hypothesis R2* > R-dagger violated");
    if (!(q_hat > dc.q_dagger && q_hat < an.high.q_star)) {
        throw PreconditionError("q_hat must lie in (q-dagger, q2*) = (" + std::to_string(dc.q_dagger) +
                                ", " + std::to_string(an.high.q_star) + ")");
    }
    const double u_lo = k_u / admission(cfg, q_hat);
    const bool u_ok = k_u > 0.0 ? (u_hat > u_lo && u_hat < an.high.u_star) : u_hat > 0.0;
    if (!u_ok) {
        throw PreconditionError("u_hat must lie in (K_U/alpha(q_hat), U2*) = (" + std::to_string(u_lo) +
                                ", " + std::to_string(an.high.u_star) + ")");
    }
    const double r_lo = eta2(cfg, q_hat), r_hi = eta3(cfg, q_hat, u_hat);
    if (!(r_hat > r_lo && r_hat < r_hi)) {
        throw PreconditionError("r_hat must lie in (eta2(q_hat), eta3(q_hat, u_hat)) = (" +
                                std::to_string(r_lo) + ", " + std::to_string(r_hi) + ")");
    }
    return cuboid_from_corner(r_hat, q_hat, u_hat);
}

struct CuboidChoice {
    double q_hat = 0.0, u_hat = 0.0, r_hat = 0.0;
};

/// Nested midpoints: q_hat at the middle of (q-dagger, q2*), then u_hat and
/// r_hat at the middle of their remaining feasible intervals. The lower
/// bound for r_hat is max{R-dagger, eta2(q_hat)} so that the R-face is
/// strictly inflowing over all of [0, q_hat].
inline CuboidChoice default_cuboid_choice(const ModelConfig& cfg, double k_u) {
    const auto an = detail::anchors(cfg, AnalysisMode::Competitive, k_u);
    const auto dc = dagger_constants(cfg);
    CuboidChoice c;
    c.q_hat = 0.5 * (dc.q_dagger + an.high.q_star);
    const double a = admission(cfg, c.q_hat);
    const double r_lo = std::max(dc.r_dagger, eta2(cfg, c.q_hat));
    const double u_lo = k_u / a;
    double u_hi = service(cfg, c.q_hat) / a - r_lo;
    if (k_u > 0.0) u_hi = std::min(u_hi, an.high.u_star);
    if (!(u_hi > u_lo)) throw PreconditionError("no feasible u_hat at the midpoint q_hat");
    c.u_hat = 0.5 * (u_lo + u_hi);
    c.r_hat = 0.5 * (r_lo + eta3(cfg, c.q_hat, c.u_hat));
    return c;
}

// ---------------------------------------------------------------------------
// Invariance checks
// ---------------------------------------------------------------------------

namespace detail {

inline double dot3(const State& a, const State& b) { return a.r * b.r + a.q * b.q + a.u * b.u; }

inline void finish(FaceReport& f) { f.pass = f.samples == 0 || (f.strict ? f.worst < 0.0 : f.worst <= 0.0); }

} // namespace detail

/// Outward normals of the polygon's edges, in vertex order.
inline std::vector<State> polygon_normals(const RegionSpec& reg) {
    std::vector<State> ns;
    const auto& v = reg.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const State& p = v[i].point;
        const State& q = v[(i + 1) % v.size()].point;
        const double dr = q.r - p.r, dq = q.q - p.q;
        const double len = std::hypot(dr, dq);
        ns.push_back({dq / len, -dr / len, 0.0});
    }
    return ns;
}

/// Samples n points on every face (edge in 2D), staying 1e-6 away from the
/// vertices, and records the worst inner product of the outward normal with
/// the vector field. Faces not on a coordinate plane need worst < 0. On the
/// coordinate planes the inward conditions are R' > 0 on R = 0, q' >= 0 on
/// q = 0 and U' > 0 on U = 0 (U' >= 0 when K_U = 0).
inline InvarianceReport check_invariance(const ModelConfig& cfg, const RegionSpec& reg, SystemMode mode,
                                         int n, double margin = 1e-6) {
    InvarianceReport rep;
    if (n <= 0) {
        rep.warnings.push_back("no samples requested; check is vacuous");
        return rep;
    }

    if (reg.kind == RegionKind::Polygon2D) {
        const auto& v = reg.vertices;
        const auto normals = polygon_normals(reg);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const State& p = v[i].point;
            const State& q = v[(i + 1) % v.size()].point;
            FaceReport f;
            f.label = v[i].label + v[(i + 1) % v.size()].label;
            const bool on_q_axis = p.q == 0.0 && q.q == 0.0;
            f.strict = !on_q_axis;
            const double len = std::hypot(q.r - p.r, q.q - p.q);
            const double lam_lo = std::min(margin / len, 0.5), lam_hi = 1.0 - lam_lo;
            for (int k = 0; k < n; ++k) {
                const double lam = n == 1 ? 0.5 : lam_lo + (lam_hi - lam_lo) * k / (n - 1);
                const State x = p + lam * (q - p);
                f.worst = std::max(f.worst, detail::dot3(normals[i], rhs(cfg, mode, 0.0, x)));
                ++f.samples;
            }
            detail::finish(f);
            rep.faces.push_back(f);
        }
    } else {
        const State c = reg.vertex("corner");
        const double ext[3] = {c.r, c.q, c.u};
        const double k_u = cfg.unresponsive_rate(0.0);
        const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
        const char* names[3] = {"R", "q", "U"};
        for (int axis = 0; axis < 3; ++axis) {
            for (int top = 0; top < 2; ++top) {
                FaceReport f;
                f.label = std::string(names[axis]) + (top ? "=max" : "=0");
                State normal{};
                (axis == 0 ? normal.r : axis == 1 ? normal.q : normal.u) = top ? 1.0 : -1.0;
                if (!top) f.strict = axis == 0 || (axis == 2 && k_u > 0.0);
                const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
                for (int i = 0; i < side; ++i) {
                    for (int j = 0; j < side; ++j) {
                        double coord[3];
                        coord[axis] = top ? ext[axis] : 0.0;
                        auto place = [&](int ax, int k) {
                            const double lo = std::min(margin, 0.5 * ext[ax]);
                            const double hi = ext[ax] - lo;
                            coord[ax] = side == 1 ? 0.5 * ext[ax] : lo + (hi - lo) * k / (side - 1);
                        };
                        place(a1, i);
                        place(a2, j);
                        const State x{coord[0], coord[1], coord[2]};
                        f.worst = std::max(f.worst, detail::dot3(normal, rhs(cfg, mode, 0.0, x)));
                        ++f.samples;
                    }
                }
                detail::finish(f);
                rep.faces.push_back(f);
            }
        }
    }
    rep.pass = std::all_of(rep.faces.begin(), rep.faces.end(), [](auto& f) { return f.pass; });
    return rep;
}

/// How far x lies outside the region (0 inside or on the boundary).
/// The polygon is assumed convex.
inline double exterior_distance(const RegionSpec& reg, const State& x) {
    double d = 0.0;
    if (reg.kind == RegionKind::Polygon2D) {
        const auto normals = polygon_normals(reg);
        for (std::size_t i = 0; i < reg.vertices.size(); ++i) {
            d = std::max(d, detail::dot3(normals[i], x - reg.vertices[i].point));
        }
        return d;
    }
    const State c = reg.vertex("corner");
    d = std::max({d, -x.r, -x.q, -x.u, x.r - c.r, x.q - c.q, x.u - c.u});
    return d;
}

/// Uniform sample from the interior (rejection sampling for polygons).
template <class Rng>
State sample_interior(const RegionSpec& reg, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (reg.kind == RegionKind::Cuboid3D) {
        const State c = reg.vertex("corner");
        return {c.r * unit(rng), c.q * unit(rng), c.u * unit(rng)};
    }
    double r_hi = 0.0, q_hi = 0.0;
    for (const auto& v : reg.vertices) {
        r_hi = std::max(r_hi, v.point.r);
        q_hi = std::max(q_hi, v.point.q);
    }
    for (;;) {
        const State x{r_hi * unit(rng), q_hi * unit(rng), 0.0};
        bool inside = true;
        const auto normals = polygon_normals(reg);
        for (std::size_t i = 0; i < reg.vertices.size() && inside; ++i) {
            inside = detail::dot3(normals[i], x - reg.vertices[i].point) < 0.0;
        }
        if (inside) return x;
    }
}

// ---------------------------------------------------------------------------
// Phase portrait
// ---------------------------------------------------------------------------

struct PhaseCell {
    double r = 0.0, q = 0.0;
    double dr = 0.0, dq = 0.0;
    double magnitude = 0.0;
};

struct NullclineSample {
    double q = 0.0;
    double eta1 = 0.0;
    double eta2 = 0.0;
};

struct PhaseGrid {
    double r_lo = 0.0, r_hi = 0.0, q_lo = 0.0, q_hi = 0.0;
    int resolution = 0;
    std::vector<PhaseCell> cells; ///< row-major, q outer, R inner
    std::vector<NullclineSample> nullclines;
    std::vector<FixedPoint> fixed_points;
};

/// Vector field on a resolution x resolution node lattice spanning the box
/// (a single node at the centre when resolution is 1), with U = 0.
inline PhaseGrid phase_grid(const ModelConfig& cfg, SystemMode mode, double r_lo, double r_hi, double q_lo,
                            double q_hi, int resolution) {
    if (!is_planar(mode)) throw PreconditionError("phase_grid: planar modes only");
    if (resolution < 1) throw PreconditionError("phase_grid: resolution must be >= 1");
    if (!(r_hi > r_lo) || !(q_hi > q_lo) || r_lo < 0.0 || q_lo < 0.0) {
        throw PreconditionError("phase_grid: ranges must be non-empty and non-negative");
    }
    PhaseGrid g;
    g.r_lo = r_lo;
    g.r_hi = r_hi;
    g.q_lo = q_lo;
    g.q_hi = q_hi;
    g.resolution = resolution;
    auto node = [&](double lo, double hi, int i) {
        return resolution == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (resolution - 1);
    };
    for (int iq = 0; iq < resolution; ++iq) {
        for (int ir = 0; ir < resolution; ++ir) {
            const State x{node(r_lo, r_hi, ir), node(q_lo, q_hi, iq), 0.0};
            const State d = rhs(cfg, mode, 0.0, x);
            g.cells.push_back({x.r, x.q, d.r, d.q, std::hypot(d.r, d.q)});
        }
    }
    const double top = std::min(q_hi, nullcline_domain_end(cfg));
    constexpr int samples = 200;
    for (int i = 0; i <= samples; ++i) {
        const double q = q_lo + (top - q_lo) * i / samples;
        if (!(admission(cfg, q) > 0.0)) continue;
        g.nullclines.push_back({q, eta1(cfg, q), eta2(cfg, q)});
    }
    const AnalysisMode am = analysis_mode(mode);
    g.fixed_points = find_fixed_points(cfg, am, am == AnalysisMode::Normal ? 0.0 : cfg.unresponsive_rate(0.0));
    return g;
}

} // namespace accessprice
