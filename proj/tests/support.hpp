#pragma once

// Shared fixtures: the reference configurations and small independent
// oracles the tests compare the library against.

#include <accessprice.hpp>

#include <string>

namespace testsupport {

using namespace accessprice;

inline std::string config_path(const std::string& name) {
    return std::string(ACCESSPRICE_CONFIG_DIR) + "/" + name;
}

// Reference linear admission, solved by hand from the target prices:
// alpha(40) = 0.04 * 3 / (4 - 3) = 0.12, alpha(82) = 0.008 * 3 / 1 = 0.024.
inline constexpr double kRefC1 = (0.024 - 0.12) / (82.0 - 40.0);
inline constexpr double kRefC2 = 0.12 - kRefC1 * 40.0;

inline ModelConfig reference_config() {
    ModelConfig c;
    c.k_r = 4.0;
    c.service = {3.0, 35.0};
    c.price = PriceSpec::triangular(1e-3, 45.0);
    c.admission = AdmissionSpec::linear(kRefC1, kRefC2);
    return c;
}

inline ModelConfig shipped(const std::string& name) { return load_config(config_path(name)).model; }

// Plain 2D/3D RK4 written out independently of the library integrator
// (no clamping, no schedule handling), for cross-checks on smooth runs.
inline State oracle_rk4(const ModelConfig& cfg, SystemMode mode, State x, double t1, double h) {
    double t = 0.0;
    while (t < t1 - 1e-12) {
        const double s = std::min(h, t1 - t);
        const State k1 = rhs(cfg, mode, t, x);
        const State k2 = rhs(cfg, mode, t, x + (0.5 * s) * k1);
        const State k3 = rhs(cfg, mode, t, x + (0.5 * s) * k2);
        const State k4 = rhs(cfg, mode, t, x + s * k3);
        x = x + (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += s;
    }
    return x;
}

} // namespace testsupport
