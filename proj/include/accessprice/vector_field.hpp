#pragma once

// Right-hand sides of every system mode.

#include "accessprice/model.hpp"
#include "accessprice/types.hpp"

#include <algorithm>
#include <utility>

namespace accessprice {

/// Admitted flows into the active queue: (responsive, unresponsive).
struct AdmittedFlows {
    double responsive = 0.0;
    double unresponsive = 0.0;

    double total() const { return responsive + unresponsive; }
};

namespace detail {

inline void require_q_ad(const ModelConfig& cfg) {
    if (!cfg.q_ad) throw PreconditionError("chattering mode requires q_ad in the configuration");
}

inline double load(const ModelConfig& cfg, SystemMode mode, double t) {
    return is_planar(mode) && mode != SystemMode::Saturated ? 0.0 : cfg.unresponsive_rate(t);
}

} // namespace detail

/// Flows admitted at state x. Smooth modes admit alpha(q)*R and
/// alpha(q)*U; the chattering mode caps the total at mu* once q >= q_ad and
/// splits it pro rata between the classes.
inline AdmittedFlows admitted_flows(const ModelConfig& cfg, SystemMode mode, const State& x) {
    const double q = std::max(x.q, 0.0);
    const double a = admission(cfg, q);
    switch (mode) {
    case SystemMode::Normal:
    case SystemMode::Saturated:
        return {a * x.r, 0.0};
    case SystemMode::Chattering: {
        detail::require_q_ad(cfg);
        double total = a * x.r;
        if (q >= *cfg.q_ad) total = std::min(total, cfg.service.mu_star);
        return {total, 0.0};
    }
    case SystemMode::Competitive:
    case SystemMode::SwitchedFull:
        return {a * x.r, a * x.u};
    }
    return {};
}

/// Time derivative of the state. Model functions are evaluated at max(q, 0)
/// so that intermediate Runge-Kutta stages a rounding error below the axis
/// stay well defined. Planar modes return a zero U-derivative.
inline State rhs(const ModelConfig& cfg, SystemMode mode, double t, const State& x) {
    const double q = std::max(x.q, 0.0);
    const double f = price(cfg, q);
    const double mu = service(cfg, q);
    const double k_u = detail::load(cfg, mode, t);
    const AdmittedFlows in = admitted_flows(cfg, mode, x);

    State dx;
    dx.r = cfg.k_r - f * x.r - in.responsive;
    switch (mode) {
    case SystemMode::Normal:
    case SystemMode::Chattering:
        dx.q = in.responsive - mu;
        break;
    case SystemMode::Saturated:
        dx.q = in.responsive - mu + k_u;
        break;
    case SystemMode::Competitive:
    case SystemMode::SwitchedFull:
        dx.q = in.total() - mu;
        dx.u = k_u - in.unresponsive;
        break;
    }
    return dx;
}

} // namespace accessprice
