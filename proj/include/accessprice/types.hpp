#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace accessprice {

/// Queue lengths: responsive R, active q, unresponsive U.
struct State {
    double r = 0.0;
    double q = 0.0;
    double u = 0.0;

    friend State operator+(State a, const State& b) { return {a.r + b.r, a.q + b.q, a.u + b.u}; }
    friend State operator-(State a, const State& b) { return {a.r - b.r, a.q - b.q, a.u - b.u}; }
    friend State operator*(double s, const State& a) { return {s * a.r, s * a.q, s * a.u}; }
    friend bool operator==(const State&, const State&) = default;
};

inline double max_norm(const State& a) {
    return std::max({std::abs(a.r), std::abs(a.q), std::abs(a.u)});
}

/// Regimes for which fixed points and linearisations are defined.
enum class AnalysisMode {
    Normal,     ///< 2D, responsive traffic only
    Saturated,  ///< 2D, constant unresponsive load fed straight into q
    Competitive ///< 3D, unresponsive queue with its own dynamics
};

/// Regimes the integrator can run.
enum class SystemMode {
    Normal,
    Chattering,  ///< Normal with the admittance bound q_ad
    Saturated,
    Competitive, ///< 3D system; K_U taken from the schedule
    SwitchedFull ///< 3D system driven by the piecewise-constant schedule
};

inline constexpr int dimension(AnalysisMode m) { return m == AnalysisMode::Competitive ? 3 : 2; }

inline constexpr bool is_planar(SystemMode m) {
    return m == SystemMode::Normal || m == SystemMode::Chattering || m == SystemMode::Saturated;
}

inline const char* to_string(AnalysisMode m) {
    switch (m) {
    case AnalysisMode::Normal: return "normal";
    case AnalysisMode::Saturated: return "saturated";
    case AnalysisMode::Competitive: return "competitive";
    }
    return "?";
}

inline const char* to_string(SystemMode m) {
    switch (m) {
    case SystemMode::Normal: return "normal";
    case SystemMode::Chattering: return "chattering";
    case SystemMode::Saturated: return "saturated";
    case SystemMode::Competitive: return "competitive";
    case SystemMode::SwitchedFull: return "switched";
    }
    return "?";
}

inline std::optional<AnalysisMode> parse_analysis_mode(std::string_view s) {
    if (s == "normal") return AnalysisMode::Normal;
    if (s == "saturated") return AnalysisMode::Saturated;
    if (s == "competitive") return AnalysisMode::Competitive;
    return std::nullopt;
}

inline std::optional<SystemMode> parse_system_mode(std::string_view s) {
    if (s == "normal") return SystemMode::Normal;
    if (s == "chattering") return SystemMode::Chattering;
    if (s == "saturated") return SystemMode::Saturated;
    if (s == "competitive") return SystemMode::Competitive;
    if (s == "switched") return SystemMode::SwitchedFull;
    return std::nullopt;
}

/// The integrator mode that realises an analysis mode.
inline constexpr SystemMode system_mode(AnalysisMode m) {
    switch (m) {
    case AnalysisMode::Normal: return SystemMode::Normal;
    case AnalysisMode::Saturated: return SystemMode::Saturated;
    case AnalysisMode::Competitive: return SystemMode::Competitive;
    }
    return SystemMode::Normal;
}

/// The analysis mode whose fixed points a trajectory of `m` can approach.
inline constexpr AnalysisMode analysis_mode(SystemMode m) {
    switch (m) {
    case SystemMode::Normal:
    case SystemMode::Chattering: return AnalysisMode::Normal;
    case SystemMode::Saturated: return AnalysisMode::Saturated;
    case SystemMode::Competitive:
    case SystemMode::SwitchedFull: return AnalysisMode::Competitive;
    }
    return AnalysisMode::Normal;
}

enum class Classification { StableNode, StableFocus, Saddle, Unstable, Degenerate };

inline const char* to_string(Classification c) {
    switch (c) {
    case Classification::StableNode: return "stable_node";
    case Classification::StableFocus: return "stable_focus";
    case Classification::Saddle: return "saddle";
    case Classification::Unstable: return "unstable";
    case Classification::Degenerate: return "degenerate";
    }
    return "?";
}

inline bool is_stable(Classification c) {
    return c == Classification::StableNode || c == Classification::StableFocus;
}

/// Equilibrium of one analysis mode together with its linear stability data.
struct FixedPoint {
    AnalysisMode mode = AnalysisMode::Normal;
    double k_u = 0.0; ///< constant unresponsive load the point belongs to
    double r_star = 0.0;
    double q_star = 0.0;
    double u_star = 0.0;
    double price_at = 0.0;
    Classification classification = Classification::Degenerate;
    std::vector<std::complex<double>> eigenvalues;

    State state() const { return {r_star, q_star, u_star}; }
};

} // namespace accessprice
