#pragma once

// Linearisation and local stability of the 2D and 3D systems.

#include "accessprice/model.hpp"
#include "accessprice/types.hpp"
#include "accessprice/vector_field.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace accessprice {

/// Degeneracy threshold on determinants and eigenvalue real parts.
inline constexpr double kDegenerateTol = 1e-12;

/// Dense 2x2 or 3x3 matrix, row-major, state ordering (R, q[, U]).
struct JacobianMatrix {
    int dim = 2;
    std::array<double, 9> entries{};

    double& operator()(int i, int j) { return entries[static_cast<std::size_t>(i * dim + j)]; }
    double operator()(int i, int j) const {
        return entries[static_cast<std::size_t>(i * dim + j)];
    }

    static JacobianMatrix identity(int dim) {
        JacobianMatrix m{dim, {}};
        for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }
};

struct GershgorinDisc {
    double center = 0.0;
    double radius = 0.0;
};

struct StabilityReport {
    Classification classification = Classification::Degenerate;
    int dim = 2;
    double trace = 0.0;
    double determinant = 0.0;
    /// Characteristic polynomial lambda^n + a1 lambda^(n-1) + ... ; a3 unused in 2D.
    std::array<double, 3> char_poly{};
    /// 2D: trace^2 - 4 det. 3D: a1*a2 - a3.
    double hurwitz_margin = 0.0;
    bool hurwitz = false;
    std::vector<std::complex<double>> eigenvalues;
    /// Column discs; informational only, never used for the verdict.
    std::vector<GershgorinDisc> gershgorin;
};

namespace detail {

inline void require_off_kink(const ModelConfig& cfg, double q, double radius) {
    if (cfg.kink_distance(q) <= radius) {
        throw DegenerateConfiguration("q = " + std::to_string(q) +
                                      " lies on a kink of the model functions");
    }
}

} // namespace detail

/// Analytic Jacobian of the mode's vector field at x.
inline JacobianMatrix jacobian(const ModelConfig& cfg, const State& x, AnalysisMode mode) {
    if (x.r < 0.0 || x.q < 0.0 || x.u < 0.0) {
        throw DomainError("jacobian: state outside the positive orthant");
    }
    detail::require_off_kink(cfg, x.q, kKinkRadius);

    const double f = price(cfg, x.q);
    const double df = price_slope(cfg.price, x.q);
    const double a = admission(cfg, x.q);
    const double da = admission_slope(cfg.admission, x.q);
    const double dmu = service_slope(cfg.service, x.q);

    if (mode != AnalysisMode::Competitive) {
        JacobianMatrix j{2, {}};
        j(0, 0) = -(f + a);
        j(0, 1) = -x.r * (df + da);
        j(1, 0) = a;
        j(1, 1) = x.r * da - dmu;
        return j;
    }
    JacobianMatrix j{3, {}};
    j(0, 0) = -(f + a);
    j(0, 1) = -x.r * (df + da);
    j(1, 0) = a;
    j(1, 1) = (x.r + x.u) * da - dmu;
    j(1, 2) = a;
    j(2, 1) = -x.u * da;
    j(2, 2) = -a;
    return j;
}

/// Central-difference Jacobian of rhs(); the independent oracle for jacobian().
inline JacobianMatrix finite_diff_jacobian(const ModelConfig& cfg, const State& x,
                                           AnalysisMode mode, double h) {
    if (!(h > 0.0)) throw PreconditionError("finite_diff_jacobian: step must be > 0");
    detail::require_off_kink(cfg, x.q, 10.0 * h);
    if (x.q <= 10.0 * h) throw DegenerateConfiguration("finite_diff_jacobian: q too close to 0");

    const SystemMode sys = system_mode(mode);
    const int n = dimension(mode);
    auto component = [](const State& s, int i) { return i == 0 ? s.r : i == 1 ? s.q : s.u; };
    auto shifted = [&](int i, double d) {
        State s = x;
        (i == 0 ? s.r : i == 1 ? s.q : s.u) += d;
        return s;
    };

    JacobianMatrix j{n, {}};
    for (int col = 0; col < n; ++col) {
        const State fp = rhs(cfg, sys, 0.0, shifted(col, h));
        const State fm = rhs(cfg, sys, 0.0, shifted(col, -h));
        for (int row = 0; row < n; ++row) {
            j(row, col) = (component(fp, row) - component(fm, row)) / (2.0 * h);
        }
    }
    return j;
}

/// Divergence of the vector field (trace of the Jacobian).
inline double divergence(const ModelConfig& cfg, const State& x, AnalysisMode mode) {
    detail::require_off_kink(cfg, x.q, kKinkRadius);
    const double f = price(cfg, x.q);
    const double a = admission(cfg, x.q);
    const double da = admission_slope(cfg.admission, x.q);
    const double dmu = x.q < cfg.service.q_c ? cfg.service.mu_star / cfg.service.q_c : 0.0;
    if (mode == AnalysisMode::Competitive) return -2.0 * a - f + (x.r + x.u) * da - dmu;
    return -f - a + da * x.r - dmu;
}

namespace detail {

/// Newton polish of a real root of lambda^3 + a1 lambda^2 + a2 lambda + a3.
inline double polish_cubic_root(double x, double a1, double a2, double a3) {
    for (int it = 0; it < 3; ++it) {
        const double p = ((x + a1) * x + a2) * x + a3;
        const double dp = (3.0 * x + 2.0 * a1) * x + a2;
        if (dp == 0.0) break;
        const double step = p / dp;
        if (!std::isfinite(step)) break;
        x -= step;
    }
    return x;
}

inline std::array<std::complex<double>, 2> quadratic_roots(double b, double c) {
    // lambda^2 + b lambda + c
    const double disc = b * b - 4.0 * c;
    if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        // Citardauq form for the smaller root avoids cancellation.
        const double big = -0.5 * (b + std::copysign(s, b));
        const double small = big != 0.0 ? c / big : 0.0;
        return {std::complex<double>(std::min(big, small)), std::complex<double>(std::max(big, small))};
    }
    const double re = -0.5 * b;
    const double im = 0.5 * std::sqrt(-disc);
    return {std::complex<double>(re, -im), std::complex<double>(re, im)};
}

} // namespace detail

/// Closed-form roots of lambda^3 + a1 lambda^2 + a2 lambda + a3.
inline std::array<std::complex<double>, 3> cubic_roots(double a1, double a2, double a3) {
    const double p = a2 - a1 * a1 / 3.0;
    const double q = 2.0 * a1 * a1 * a1 / 27.0 - a1 * a2 / 3.0 + a3;
    const double shift = -a1 / 3.0;
    const double delta = 0.25 * q * q + p * p * p / 27.0;

    if (delta <= 0.0 && p < 0.0) {
        // Three real roots, trigonometric form.
        const double m = 2.0 * std::sqrt(-p / 3.0);
        const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
        const double theta = std::acos(arg) / 3.0;
        std::array<double, 3> r{};
        for (int k = 0; k < 3; ++k) {
            r[static_cast<std::size_t>(k)] = detail::polish_cubic_root(
                m * std::cos(theta - 2.0 * std::numbers::pi * k / 3.0) + shift, a1, a2, a3);
        }
        std::sort(r.begin(), r.end());
        return {std::complex<double>(r[0]), std::complex<double>(r[1]), std::complex<double>(r[2])};
    }

    // One real root (or a triple root when p == q == 0); deflate to a quadratic.
    const double s = std::sqrt(std::max(delta, 0.0));
    const double real = detail::polish_cubic_root(std::cbrt(-0.5 * q + s) + std::cbrt(-0.5 * q - s) + shift,
                                                  a1, a2, a3);
    const double b = a1 + real;
    const double c = a2 + real * b;
    auto quad = detail::quadratic_roots(b, c);
    return {std::complex<double>(real), quad[0], quad[1]};
}

inline std::vector<GershgorinDisc> gershgorin_columns(const JacobianMatrix& j) {
    std::vector<GershgorinDisc> discs;
    for (int c = 0; c < j.dim; ++c) {
        GershgorinDisc d{j(c, c), 0.0};
        for (int r = 0; r < j.dim; ++r) {
            if (r != c) d.radius += std::abs(j(r, c));
        }
        discs.push_back(d);
    }
    return discs;
}

/// Eigenvalues, Hurwitz test and a stability verdict for a 2x2 or 3x3 matrix.
///
/// 2D uses the trace/determinant criterion; 3D uses Routh-Hurwitz on the
/// characteristic polynomial (a1 > 0, a3 > 0, a1 a2 > a3).
inline StabilityReport classify(const JacobianMatrix& j) {
    StabilityReport rep;
    rep.dim = j.dim;
    rep.gershgorin = gershgorin_columns(j);

    if (j.dim == 2) {
        rep.trace = j(0, 0) + j(1, 1);
        rep.determinant = j(0, 0) * j(1, 1) - j(0, 1) * j(1, 0);
        rep.char_poly = {-rep.trace, rep.determinant, 0.0};
        rep.hurwitz_margin = rep.trace * rep.trace - 4.0 * rep.determinant;
        rep.hurwitz = rep.trace < 0.0 && rep.determinant > 0.0;
        auto ev = detail::quadratic_roots(-rep.trace, rep.determinant);
        rep.eigenvalues.assign(ev.begin(), ev.end());

        if (std::abs(rep.determinant) < kDegenerateTol) {
            rep.classification = Classification::Degenerate;
        } else if (rep.determinant < 0.0) {
            rep.classification = Classification::Saddle;
        } else if (std::abs(rep.trace) < kDegenerateTol) {
            rep.classification = Classification::Degenerate;
        } else if (rep.trace < 0.0) {
            rep.classification =
                rep.hurwitz_margin >= 0.0 ? Classification::StableNode : Classification::StableFocus;
        } else {
            rep.classification = Classification::Unstable;
        }
        return rep;
    }

    const double tr = j(0, 0) + j(1, 1) + j(2, 2);
    auto minor = [&](int a, int b) { return j(a, a) * j(b, b) - j(a, b) * j(b, a); };
    const double det = j(0, 0) * (j(1, 1) * j(2, 2) - j(1, 2) * j(2, 1)) -
                       j(0, 1) * (j(1, 0) * j(2, 2) - j(1, 2) * j(2, 0)) +
                       j(0, 2) * (j(1, 0) * j(2, 1) - j(1, 1) * j(2, 0));
    const double a1 = -tr;
    const double a2 = minor(0, 1) + minor(0, 2) + minor(1, 2);
    const double a3 = -det;
    rep.trace = tr;
    rep.determinant = det;
    rep.char_poly = {a1, a2, a3};
    rep.hurwitz_margin = a1 * a2 - a3;
    rep.hurwitz = a1 > 0.0 && a3 > 0.0 && rep.hurwitz_margin > 0.0;
    auto ev = cubic_roots(a1, a2, a3);
    rep.eigenvalues.assign(ev.begin(), ev.end());

    int negative = 0, positive = 0;
    bool complex_pair = false;
    bool near_axis = std::abs(a3) < kDegenerateTol;
    for (const auto& e : rep.eigenvalues) {
        if (std::abs(e.real()) < kDegenerateTol) near_axis = true;
        if (e.real() < 0.0) ++negative;
        if (e.real() > 0.0) ++positive;
        if (e.imag() != 0.0) complex_pair = true;
    }
    if (near_axis) {
        rep.classification = Classification::Degenerate;
    } else if (rep.hurwitz) {
        rep.classification = complex_pair ? Classification::StableFocus : Classification::StableNode;
    } else if (positive == 3) {
        rep.classification = Classification::Unstable;
    } else if (negative > 0 && positive > 0) {
        rep.classification = Classification::Saddle;
    } else {
        rep.classification = Classification::Degenerate;
    }
    return rep;
}

/// Both sides of the determinant-sign inequality at a congested planar
/// equilibrium: det < 0 iff lhs > rhs, with
///   lhs = -f'(q*) (mu(q*) - K_U),
///   rhs = (K_R + K_U - mu(q*)) |alpha'(q*)| + (f + alpha)(q*) mu'(q*).
/// K_U = 0 in normal mode.
struct SaddleCriterion {
    double lhs = 0.0;
    double rhs = 0.0;
    bool is_saddle = false;
};

inline SaddleCriterion saddle_criterion(const ModelConfig& cfg, const FixedPoint& fp) {
    if (fp.mode == AnalysisMode::Competitive) {
        throw PreconditionError("saddle_criterion: planar fixed points only");
    }
    if (cfg.price.variant == PriceVariant::Surge || !(fp.q_star > cfg.price.q_m)) {
        throw PreconditionError("saddle_criterion: needs the high-congestion point (q* > q_m)");
    }
    const double q = fp.q_star;
    detail::require_off_kink(cfg, q, kKinkRadius);
    const double k_u = fp.mode == AnalysisMode::Saturated ? fp.k_u : 0.0;
    const double mu = service(cfg, q);
    SaddleCriterion s;
    s.lhs = -price_slope(cfg.price, q) * (mu - k_u);
    s.rhs = (cfg.k_r + k_u - mu) * std::abs(admission_slope(cfg.admission, q)) +
            (price(cfg, q) + admission(cfg, q)) * service_slope(cfg.service, q);
    s.is_saddle = s.lhs > s.rhs;
    return s;
}

} // namespace accessprice
