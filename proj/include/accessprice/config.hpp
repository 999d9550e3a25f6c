#pragma once

// JSON configuration files: schema validation with key paths, defaults with
// notices, dotted-path overrides and round-trip serialisation.

#include "accessprice/dynamics.hpp"
#include "accessprice/model.hpp"
#include "accessprice/scenarios.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace accessprice {

inline constexpr int kSchemaVersion = 1;

/// Optional "scenario" block: horizon, initial state and ratio policy.
struct ScenarioBlock {
    std::optional<double> t0, t1;
    std::optional<State> x0;
    std::optional<ZeroFlowPolicy> zero_flow;
    std::optional<double> bounceback_tol;
};

struct LoadedConfig {
    ModelConfig model;
    double step = kDefaultStep;
    ScenarioBlock scenario;
    /// One line per default that was filled in.
    std::vector<std::string> notices;
};

namespace detail {

using json = nlohmann::json;

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) throw ConfigError(join_path(path, it.key()), "unknown key");
    }
}

inline double number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    return j.get<double>();
}

inline const json& required(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ConfigError(join_path(path, key), "missing required key");
    return j.at(key);
}

inline std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

inline PriceSpec parse_price(const json& j) {
    allow_keys(j, "price", {"variant", "beta", "q_m", "q_n"});
    const std::string v = text(required(j, "price", "variant"), "price.variant");
    PriceSpec p;
    p.beta = number(required(j, "price", "beta"), "price.beta");
    if (v == "surge") {
        p.variant = PriceVariant::Surge;
        if (j.contains("q_n")) throw ConfigError("price.q_n", "only used by the saturated variant");
        if (j.contains("q_m")) p.q_m = number(j.at("q_m"), "price.q_m");
    } else if (v == "triangular" || v == "saturated") {
        p.variant = v == "triangular" ? PriceVariant::Triangular : PriceVariant::Saturated;
        p.q_m = number(required(j, "price", "q_m"), "price.q_m");
        if (p.variant == PriceVariant::Saturated) {
            p.q_n = number(required(j, "price", "q_n"), "price.q_n");
        } else if (j.contains("q_n")) {
            throw ConfigError("price.q_n", "only used by the saturated variant");
        }
    } else {
        throw ConfigError("price.variant", "expected triangular, saturated or surge");
    }
    check(p);
    return p;
}

inline AdmissionSpec parse_admission(const json& j) {
    allow_keys(j, "admission", {"variant", "coefficients", "q_max"});
    const std::string v = text(required(j, "admission", "variant"), "admission.variant");
    const json& cj = required(j, "admission", "coefficients");
    if (!cj.is_array()) throw ConfigError("admission.coefficients", "expected an array");
    std::vector<double> c;
    for (std::size_t i = 0; i < cj.size(); ++i) {
        c.push_back(number(cj[i], "admission.coefficients." + std::to_string(i)));
    }

    AdmissionSpec a;
    if (v == "linear") {
        if (c.size() != 2) throw ConfigError("admission.coefficients", "expected [c2, c1] for linear");
        if (!(c[1] < 0.0)) throw ConfigError("admission.coefficients", "linear admission needs c1 < 0");
        a = AdmissionSpec::linear(c[1], c[0]);
        if (j.contains("q_max")) {
            const double given = number(j.at("q_max"), "admission.q_max");
            if (std::abs(given - a.q_max) > 1e-9 * std::max(1.0, std::abs(a.q_max))) {
                throw ConfigError("admission.q_max", "must equal -c2/c1 = " + std::to_string(a.q_max));
            }
        }
    } else if (v == "cubic") {
        if (c.size() != 4) throw ConfigError("admission.coefficients", "expected [a0, a1, a2, a3] for cubic");
        a = AdmissionSpec::cubic(c[0], c[1], c[2], c[3],
                                 number(required(j, "admission", "q_max"), "admission.q_max"));
    } else {
        throw ConfigError("admission.variant", "expected linear or cubic");
    }
    check(a);
    return a;
}

inline double optional_time(const json& j, const char* key, const std::string& path, double fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return number(j.at(key), join_path(path, key));
}

} // namespace detail

/// Builds a configuration from parsed JSON. Every error names the key path.
inline LoadedConfig config_from_json(const nlohmann::json& j) {
    using namespace detail;
    LoadedConfig out;
    allow_keys(j, "", {"schema_version", "k_r", "k_u_schedule", "price", "admission", "service", "q_ad",
                       "step", "scenario"});

    const json& ver = required(j, "", "schema_version");
    if (!ver.is_number_integer() || ver.get<int>() != kSchemaVersion) {
        throw ConfigError("schema_version", "unsupported schema version (expected " +
                                                std::to_string(kSchemaVersion) + ")");
    }

    ModelConfig& m = out.model;
    m.k_r = number(required(j, "", "k_r"), "k_r");
    m.price = parse_price(required(j, "", "price"));
    m.admission = parse_admission(required(j, "", "admission"));

    const json& sj = required(j, "", "service");
    allow_keys(sj, "service", {"mu_star", "q_c"});
    m.service.q_c = number(required(sj, "service", "q_c"), "service.q_c");
    if (sj.contains("mu_star")) {
        m.service.mu_star = number(sj.at("mu_star"), "service.mu_star");
    } else {
        m.service.mu_star = 3.0;
        out.notices.push_back("service.mu_star not set; using default 3");
    }

    if (j.contains("k_u_schedule")) {
        const json& ks = j.at("k_u_schedule");
        if (!ks.is_array()) throw ConfigError("k_u_schedule", "expected an array");
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const std::string path = "k_u_schedule." + std::to_string(i);
            allow_keys(ks[i], path, {"t_start", "t_end", "rate"});
            LoadPiece p;
            p.t_start = optional_time(ks[i], "t_start", path, -kInf);
            p.t_end = optional_time(ks[i], "t_end", path, kInf);
            p.rate = number(required(ks[i], path, "rate"), path + ".rate");
            m.k_u_schedule.push_back(p);
        }
    }
    if (j.contains("q_ad")) m.q_ad = number(j.at("q_ad"), "q_ad");

    if (j.contains("step")) {
        out.step = number(j.at("step"), "step");
        if (!(out.step > 0.0 && out.step <= kMaxStep)) throw ConfigError("step", "must lie in (0, 0.1]");
    } else {
        out.notices.push_back("step not set; using default 0.01");
    }

    if (j.contains("scenario")) {
        const json& sc = j.at("scenario");
        allow_keys(sc, "scenario", {"t0", "t1", "x0", "zero_flow", "bounceback_tol"});
        if (sc.contains("t0")) out.scenario.t0 = number(sc.at("t0"), "scenario.t0");
        if (sc.contains("t1")) out.scenario.t1 = number(sc.at("t1"), "scenario.t1");
        if (sc.contains("x0")) {
            const json& x = sc.at("x0");
            if (!x.is_array() || x.size() != 3) throw ConfigError("scenario.x0", "expected [R, q, U]");
            out.scenario.x0 = State{number(x[0], "scenario.x0.0"), number(x[1], "scenario.x0.1"),
                                    number(x[2], "scenario.x0.2")};
        }
        if (sc.contains("zero_flow")) {
            const std::string z = text(sc.at("zero_flow"), "scenario.zero_flow");
            if (z == "one") {
                out.scenario.zero_flow = ZeroFlowPolicy::One;
            } else if (z == "skip") {
                out.scenario.zero_flow = ZeroFlowPolicy::Skip;
            } else {
                throw ConfigError("scenario.zero_flow", "expected one or skip");
            }
        }
        if (sc.contains("bounceback_tol")) {
            out.scenario.bounceback_tol = number(sc.at("bounceback_tol"), "scenario.bounceback_tol");
        }
    }

    check(m);
    return out;
}

/// Serialises a configuration; config_from_json(config_to_json(c)) == c.
inline nlohmann::json config_to_json(const LoadedConfig& c) {
    using json = nlohmann::json;
    const ModelConfig& m = c.model;
    json j;
    j["schema_version"] = kSchemaVersion;
    j["k_r"] = m.k_r;
    json ks = json::array();
    for (const auto& p : m.k_u_schedule) {
        json pj;
        if (std::isfinite(p.t_start)) pj["t_start"] = p.t_start;
        if (std::isfinite(p.t_end)) pj["t_end"] = p.t_end;
        pj["rate"] = p.rate;
        ks.push_back(pj);
    }
    j["k_u_schedule"] = ks;
    json pj;
    pj["variant"] = to_string(m.price.variant);
    pj["beta"] = m.price.beta;
    if (m.price.variant != PriceVariant::Surge) pj["q_m"] = m.price.q_m;
    if (m.price.variant == PriceVariant::Saturated) pj["q_n"] = m.price.q_n;
    j["price"] = pj;
    j["admission"] = {{"variant", to_string(m.admission.variant)},
                      {"coefficients", m.admission.coefficients},
                      {"q_max", m.admission.q_max}};
    j["service"] = {{"mu_star", m.service.mu_star}, {"q_c", m.service.q_c}};
    if (m.q_ad) j["q_ad"] = *m.q_ad;
    j["step"] = c.step;
    const ScenarioBlock& s = c.scenario;
    if (s.t0 || s.t1 || s.x0 || s.zero_flow || s.bounceback_tol) {
        json sj = json::object();
        if (s.t0) sj["t0"] = *s.t0;
        if (s.t1) sj["t1"] = *s.t1;
        if (s.x0) sj["x0"] = {s.x0->r, s.x0->q, s.x0->u};
        if (s.zero_flow) sj["zero_flow"] = *s.zero_flow == ZeroFlowPolicy::One ? "one" : "skip";
        if (s.bounceback_tol) sj["bounceback_tol"] = *s.bounceback_tol;
        j["scenario"] = sj;
    }
    return j;
}

/// Applies one "dotted.key.path=value" override to raw configuration JSON.
/// The value is read as JSON when it parses, as a plain string otherwise;
/// numeric path segments index arrays. Type and key checks happen when the
/// result is validated.
inline void apply_override(nlohmann::json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("", "override must have the form key.path=value: " + assignment);
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    nlohmann::json* node = &root;
    std::stringstream ss(path);
    std::string seg, walked;
    std::vector<std::string> segs;
    while (std::getline(ss, seg, '.')) segs.push_back(seg);
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const std::string& s = segs[i];
        walked = detail::join_path(walked, s);
        if (s.empty()) throw ConfigError(path, "empty path segment");
        if (node->is_array()) {
            const bool digits = s.find_first_not_of("0123456789") == std::string::npos;
            if (!digits || std::stoul(s) >= node->size()) throw ConfigError(walked, "array index out of range");
            node = &(*node)[std::stoul(s)];
        } else {
            if (node->is_null()) *node = nlohmann::json::object();
            if (!node->is_object()) throw ConfigError(walked, "cannot descend into a scalar");
            node = &(*node)[s];
        }
    }
    *node = value;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("", "parse error in " + path);
    return j;
}

inline LoadedConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    nlohmann::json j = read_json_file(path);
    for (const auto& o : overrides) apply_override(j, o);
    return config_from_json(j);
}

inline void save_config(const LoadedConfig& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("", "cannot write " + path);
    out << config_to_json(c).dump(2) << '\n';
}

/// Scenario settings from a loaded file; unset fields keep the defaults.
inline ScenarioConfig scenario_config(const LoadedConfig& c) {
    ScenarioConfig sc = ScenarioConfig::from_model(c.model);
    sc.step = c.step;
    if (c.scenario.t0) sc.t0 = *c.scenario.t0;
    if (c.scenario.t1) sc.t1 = *c.scenario.t1;
    if (c.scenario.x0) sc.x0 = *c.scenario.x0;
    if (c.scenario.zero_flow) sc.zero_flow = *c.scenario.zero_flow;
    if (c.scenario.bounceback_tol) sc.bounceback_tol = *c.scenario.bounceback_tol;
    return sc;
}

} // namespace accessprice
