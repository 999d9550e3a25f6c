#pragma once

// Fixed-step RK4 integration of every system mode, with post-step projection
// onto the invariant box and schedule breakpoints snapped onto the step grid.

#include "accessprice/fixed_points.hpp"
#include "accessprice/model.hpp"
#include "accessprice/types.hpp"
#include "accessprice/vector_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace accessprice {

inline constexpr double kDefaultStep = 0.01;
inline constexpr double kMaxStep = 0.1;
inline constexpr double kClampEps = 1e-9;

/// Time-indexed states plus the series derived from them.
struct Trajectory {
    SystemMode mode = SystemMode::Normal;
    double step = kDefaultStep;
    std::vector<double> times;
    std::vector<State> states;
    std::vector<double> price;
    std::vector<double> flow_r;
    std::vector<double> flow_u;
    std::vector<double> service;
    /// Largest amount any raw RK4 step left the orthant or exceeded q_max.
    double max_clamp_violation = 0.0;
    /// Chattering mode: largest raw overshoot of q above q_ad.
    double max_surface_overshoot = 0.0;

    std::size_t size() const { return times.size(); }
    const State& back() const { return states.back(); }

    /// Sample index of the last time <= t.
    std::size_t index_at(double t) const {
        auto it = std::upper_bound(times.begin(), times.end(), t + 1e-9);
        return it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin() - 1);
    }
};

struct StepStats {
    double max_clamp_violation = 0.0;
    double max_surface_overshoot = 0.0;
    std::size_t steps = 0;
};

namespace detail {

inline bool uses_schedule(SystemMode m) {
    return m == SystemMode::Saturated || m == SystemMode::Competitive || m == SystemMode::SwitchedFull;
}

inline void check_start(const ModelConfig& cfg, SystemMode mode, const State& x0) {
    if (x0.r < 0.0 || x0.q < 0.0 || x0.u < 0.0) {
        throw PreconditionError("initial state outside the positive orthant");
    }
    if (x0.q > cfg.q_max() + kClampEps) throw PreconditionError("initial q exceeds q_max");
    if (is_planar(mode) && x0.u != 0.0) {
        throw PreconditionError(std::string("mode ") + to_string(mode) + " has no U coordinate; U(0) must be 0");
    }
    if (mode == SystemMode::Chattering) require_q_ad(cfg);
}

inline void check_nan(const State& x, double t) {
    if (!std::isfinite(x.r) || !std::isfinite(x.q) || !std::isfinite(x.u)) {
        throw IntegrationError("non-finite state at t = " + std::to_string(t) + ": (" +
                               std::to_string(x.r) + ", " + std::to_string(x.q) + ", " +
                               std::to_string(x.u) + ")");
    }
}

/// One classical RK4 step. The unresponsive load is frozen at its value at the
/// step midpoint, so a step never straddles a schedule breakpoint.
inline State rk4_step(const ModelConfig& cfg, SystemMode mode, double t, double h, const State& x) {
    const double tm = t + 0.5 * h;
    auto eval = [&](const State& y) {
        check_nan(y, t);
        const State k = rhs(cfg, mode, tm, y);
        check_nan(k, t);
        return k;
    };
    const State k1 = eval(x);
    const State k2 = eval(x + (0.5 * h) * k1);
    const State k3 = eval(x + (0.5 * h) * k2);
    const State k4 = eval(x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace detail

/// Integrates from t0 to t1, calling obs(t, x) at t0 and after every step;
/// integration stops early when obs returns false.
///
/// After each step the state is projected back onto the invariant box:
/// coordinates below zero are set to zero, q is capped at q_max and, in
/// chattering mode, at q_ad whenever the step started at or below q_ad.
template <class Observer>
StepStats integrate_observed(const ModelConfig& cfg, SystemMode mode, State x, double t0, double t1,
                             double h, Observer&& obs) {
    if (!(h > 0.0)) throw PreconditionError("step must be > 0");
    if (h > kMaxStep) throw PreconditionError("step too large (> 0.1)");
    if (!(t1 >= t0)) throw PreconditionError("t1 must not precede t0");
    detail::check_start(cfg, mode, x);

    std::vector<double> cuts{t0};
    if (detail::uses_schedule(mode)) {
        for (double b : cfg.breakpoints()) {
            if (b > t0 && b < t1) cuts.push_back(b);
        }
    }
    cuts.push_back(t1);

    StepStats stats;
    if (!obs(t0, static_cast<const State&>(x))) return stats;
    const double q_cap = cfg.q_max();

    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s], b = cuts[s + 1];
        if (!(b > a)) continue;
        const auto n = static_cast<long long>(std::ceil((b - a) / h - 1e-9));
        for (long long k = 0; k < n; ++k) {
            const double ta = a + static_cast<double>(k) * h;
            const double tb = k + 1 == n ? b : a + static_cast<double>(k + 1) * h;
            const bool below_surface = mode == SystemMode::Chattering && x.q <= *cfg.q_ad;

            State next = detail::rk4_step(cfg, mode, ta, tb - ta, x);
            detail::check_nan(next, tb);

            const double viol = std::max({-next.r, -next.q, -next.u, next.q - q_cap, 0.0});
            stats.max_clamp_violation = std::max(stats.max_clamp_violation, viol);
            next.r = std::max(next.r, 0.0);
            next.q = std::clamp(next.q, 0.0, q_cap);
            next.u = std::max(next.u, 0.0);
            if (below_surface && next.q > *cfg.q_ad) {
                stats.max_surface_overshoot = std::max(stats.max_surface_overshoot, next.q - *cfg.q_ad);
                next.q = *cfg.q_ad;
            }
            x = next;
            ++stats.steps;
            if (!obs(tb, static_cast<const State&>(x))) return stats;
        }
    }
    return stats;
}

/// Records every `record_every`-th step (and always the last one).
inline Trajectory integrate(const ModelConfig& cfg, SystemMode mode, const State& x0, double t0,
                            double t1, double h = kDefaultStep, int record_every = 1) {
    if (record_every < 1) throw PreconditionError("record_every must be >= 1");
    Trajectory tr;
    tr.mode = mode;
    tr.step = h;
    std::size_t count = 0;
    State last = x0;
    double last_t = t0;
    bool last_recorded = false;
    auto record = [&](double t, const State& x) {
        tr.times.push_back(t);
        tr.states.push_back(x);
    };
    auto stats = integrate_observed(cfg, mode, x0, t0, t1, h, [&](double t, const State& x) {
        last = x;
        last_t = t;
        last_recorded = count % static_cast<std::size_t>(record_every) == 0;
        if (last_recorded) record(t, x);
        ++count;
        return true;
    });
    if (!last_recorded) record(last_t, last);
    tr.max_clamp_violation = stats.max_clamp_violation;
    tr.max_surface_overshoot = stats.max_surface_overshoot;

    const std::size_t n = tr.size();
    tr.price.resize(n);
    tr.flow_r.resize(n);
    tr.flow_u.resize(n);
    tr.service.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const State& x = tr.states[i];
        const auto flows = admitted_flows(cfg, mode, x);
        tr.price[i] = price(cfg, x.q);
        tr.flow_r[i] = flows.responsive;
        tr.flow_u[i] = flows.unresponsive;
        tr.service[i] = service(cfg, x.q);
    }
    return tr;
}

struct ConvergenceResult {
    State final_state;
    double final_time = 0.0;
    bool converged = false;
    /// Start of the streak of in-tolerance steps that ended the run.
    double settling_time = std::numeric_limits<double>::quiet_NaN();
    std::optional<FixedPoint> target;
};

/// Number of consecutive in-tolerance samples that count as convergence.
inline constexpr int kSettleSamples = 100;

/// Integrates until the state stays within `tol` (max norm) of one of the
/// mode's fixed points for kSettleSamples consecutive samples, or until
/// t_cap. The fixed points are those for the load the schedule has at t_cap.
inline ConvergenceResult converge(const ModelConfig& cfg, SystemMode mode, const State& x0, double tol,
                                  double t_cap, double h = kDefaultStep, double t0 = 0.0) {
    const AnalysisMode am = analysis_mode(mode);
    const double k_u = am == AnalysisMode::Normal ? 0.0 : cfg.unresponsive_rate(t_cap);
    const auto fps = find_fixed_points(cfg, am, k_u);

    ConvergenceResult res;
    res.final_state = x0;
    res.final_time = t0;
    int streak = 0;
    double streak_start = t0;
    integrate_observed(cfg, mode, x0, t0, t_cap, h, [&](double t, const State& x) {
        res.final_state = x;
        res.final_time = t;
        const FixedPoint* near = nullptr;
        for (const auto& fp : fps) {
            State d = x - fp.state();
            if (is_planar(mode)) d.u = 0.0;
            if (max_norm(d) < tol) {
                near = &fp;
                break;
            }
        }
        if (!near) {
            streak = 0;
            return true;
        }
        if (streak == 0 || !res.target || res.target->q_star != near->q_star) {
            streak = 0;
            streak_start = t;
            res.target = *near;
        }
        if (++streak >= kSettleSamples) {
            res.converged = true;
            res.settling_time = streak_start;
            return false;
        }
        return true;
    });
    if (!res.converged) res.target.reset();
    return res;
}

} // namespace accessprice
