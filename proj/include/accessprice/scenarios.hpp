#pragma once

// Surge versus saturated pricing under a burst of unresponsive traffic:
// paired simulations, the responsive admittance ratio and the post-burst
// recovery probe.

#include "accessprice/dynamics.hpp"
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

enum class ZeroFlowPolicy {
    One,  ///< nobody admitted counts as perfectly fair
    Skip, ///< NaN, ignored by the gap statistics
};

struct ScenarioConfig {
    /// Carries the load schedule, admission, service and the saturated price.
    ModelConfig base;
    double t0 = 0.0;
    double t1 = 400.0;
    State x0{50.0, 15.0, 0.0};
    PriceSpec surge = PriceSpec::surge(1e-3);
    PriceSpec saturated = PriceSpec::saturated(1e-3, 45.0, 75.0);
    double step = kDefaultStep;
    int record_every = 1;
    ZeroFlowPolicy zero_flow = ZeroFlowPolicy::One;
    double bounceback_tol = 1e-2;

    /// Pricing pair taken from the configuration: surge with the same beta,
    /// and the configuration's own price as the saturated leg.
    static ScenarioConfig from_model(const ModelConfig& cfg) {
        ScenarioConfig sc;
        sc.base = cfg;
        sc.surge = PriceSpec::surge(cfg.price.beta);
        sc.saturated = cfg.price;
        return sc;
    }

    /// The default burst: K_U = 4 on [100, 300).
    static std::vector<LoadPiece> default_burst() { return {{100.0, 300.0, 4.0}}; }
};

inline void check(const ScenarioConfig& sc) {
    check(sc.base);
    if (!(sc.t1 > sc.t0)) throw PreconditionError("scenario horizon is empty");
    for (const auto& p : sc.base.k_u_schedule) {
        if (p.rate == 0.0) continue;
        if (p.t_start < sc.t0 || p.t_end > sc.t1) {
            throw PreconditionError("burst interval must lie inside the scenario horizon");
        }
    }
    const State& x = sc.x0;
    if (x.r < 0.0 || x.q < 0.0 || x.u < 0.0 || x.q > sc.base.q_max()) {
        throw PreconditionError("x0 must lie in the invariant box");
    }
}

struct FairnessSeries {
    std::vector<double> times;
    std::vector<double> ratio;
};

/// Responsive share of the admitted flow at every recorded sample.
inline FairnessSeries fairness_series(const Trajectory& tr, ZeroFlowPolicy policy = ZeroFlowPolicy::One) {
    FairnessSeries fs;
    fs.times = tr.times;
    fs.ratio.resize(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const double total = tr.flow_r[i] + tr.flow_u[i];
        if (total < 1e-12) {
            fs.ratio[i] = policy == ZeroFlowPolicy::One ? 1.0 : std::numeric_limits<double>::quiet_NaN();
        } else {
            fs.ratio[i] = tr.flow_r[i] / total;
        }
    }
    return fs;
}

struct ComparisonResult {
    Trajectory surge;
    Trajectory saturated;
    FairnessSeries fairness_surge;
    FairnessSeries fairness_saturated;
};

/// Two full-system runs that differ only in the price function.
inline ComparisonResult run_comparison(const ScenarioConfig& sc) {
    check(sc);
    ComparisonResult out;
    out.surge = integrate(sc.base.with_price(sc.surge), SystemMode::SwitchedFull, sc.x0, sc.t0, sc.t1,
                          sc.step, sc.record_every);
    out.saturated = integrate(sc.base.with_price(sc.saturated), SystemMode::SwitchedFull, sc.x0, sc.t0,
                              sc.t1, sc.step, sc.record_every);
    out.fairness_surge = fairness_series(out.surge, sc.zero_flow);
    out.fairness_saturated = fairness_series(out.saturated, sc.zero_flow);
    return out;
}

struct GapStats {
    double min = 0.0;
    double mean = 0.0;
    std::size_t samples = 0;
};

/// Statistics of ratio_a(t) - ratio_b(t) over t in [t_lo, t_hi].
inline GapStats fairness_gap(const FairnessSeries& a, const FairnessSeries& b, double t_lo, double t_hi) {
    if (a.times.size() != b.times.size()) throw PreconditionError("fairness series have different lengths");
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        if (std::abs(a.times[i] - b.times[i]) > 1e-9) {
            throw PreconditionError("fairness series are sampled on different time grids");
        }
    }
    if (a.times.empty()) throw PreconditionError("empty fairness series");
    if (!(t_hi >= t_lo) || t_lo < a.times.front() - 1e-9 || t_hi > a.times.back() + 1e-9) {
        throw PreconditionError("gap window lies outside the simulated horizon");
    }
    GapStats g;
    g.min = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        const double t = a.times[i];
        if (t < t_lo - 1e-9 || t > t_hi + 1e-9) continue;
        const double d = a.ratio[i] - b.ratio[i];
        if (std::isnan(d)) continue;
        g.min = std::min(g.min, d);
        sum += d;
        ++g.samples;
    }
    if (g.samples == 0) throw PreconditionError("no comparable samples in the gap window");
    g.mean = sum / static_cast<double>(g.samples);
    return g;
}

struct BouncebackReport {
    bool skipped = false;
    std::string notice;
    double probe_start = 0.0;  ///< end of the last burst (t0 when there is none)
    State start_state;
    bool converged = false;
    double settling_time = std::numeric_limits<double>::quiet_NaN();
    bool settled_within_horizon = false;
    std::optional<FixedPoint> target;
};

/// Follows the saturated leg past the end of the burst and checks that it
/// returns to a stable equilibrium of the post-burst system. The run is
/// extended up to ten horizons beyond the burst.
inline BouncebackReport bounceback_probe(const ScenarioConfig& sc) {
    check(sc);
    BouncebackReport rep;
    const ModelConfig cfg = sc.base.with_price(sc.saturated);

    double burst_end = -kInf;
    for (const auto& p : cfg.k_u_schedule) {
        if (p.rate > 0.0) burst_end = std::max(burst_end, p.t_end);
    }
    if (burst_end >= sc.t1) {
        rep.skipped = true;
        rep.notice = "burst does not end before the horizon; bounceback probe skipped";
        return rep;
    }

    State x = sc.x0;
    double start = sc.t0;
    if (burst_end > sc.t0) {
        integrate_observed(cfg, SystemMode::SwitchedFull, sc.x0, sc.t0, burst_end, sc.step,
                           [&](double, const State& s) {
                               x = s;
                               return true;
                           });
        start = burst_end;
    }
    rep.probe_start = start;
    rep.start_state = x;

    const double t_cap = start + 10.0 * (sc.t1 - sc.t0);
    const auto res = converge(cfg, SystemMode::SwitchedFull, x, sc.bounceback_tol, t_cap, sc.step, start);
    rep.converged = res.converged && res.target && is_stable(res.target->classification);
    if (rep.converged) {
        rep.settling_time = res.settling_time;
        rep.settled_within_horizon = res.settling_time <= sc.t1;
        rep.target = res.target;
    } else {
        rep.notice = "no convergence by t = " + std::to_string(t_cap);
    }
    return rep;
}

/// max over the common grid of |q_a(t) - q_b(t)|.
inline double max_queue_difference(const Trajectory& a, const Trajectory& b) {
    if (a.size() != b.size()) throw PreconditionError("trajectories have different lengths");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.states[i].q - b.states[i].q));
    return m;
}

} // namespace accessprice
