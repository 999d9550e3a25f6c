#pragma once

// Command-line front end. run() is kept separate from main() so the tests
// can drive every subcommand in-process.

#include <accessprice.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace accessprice::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// 12 significant digits, '.' decimal separator.
inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace detail {

using json = nlohmann::json;

/// Either the --out file or the standard output stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw ConfigError("", "cannot write " + path);
            out_ = file_.get();
        }
    }
    std::ostream& operator*() { return *out_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* out_;
};

inline std::vector<double> parse_list(const std::string& s, const std::string& flag) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "expected comma-separated numbers, got '" + s + "'");
        }
    }
    return v;
}

inline std::pair<double, double> parse_range(const std::string& s, const std::string& flag) {
    const auto v = parse_list(s, flag);
    if (v.size() != 2) throw CLI::ValidationError(flag, "expected lo,hi");
    return {v[0], v[1]};
}

inline json state_json(const State& x) { return {{"r", x.r}, {"q", x.q}, {"u", x.u}}; }

inline json fixed_point_json(const FixedPoint& fp) {
    return {{"r", fp.r_star}, {"q", fp.q_star}, {"u", fp.u_star}, {"classification", to_string(fp.classification)}};
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    os << "t,R,q,U,price,flow_R,flow_U,mu\n";
    for (std::size_t i = 0; i < tr.size(); ++i) {
        const State& x = tr.states[i];
        os << num(tr.times[i]) << ',' << num(x.r) << ',' << num(x.q) << ',' << num(x.u) << ','
           << num(tr.price[i]) << ',' << num(tr.flow_r[i]) << ',' << num(tr.flow_u[i]) << ','
           << num(tr.service[i]) << '\n';
    }
}

inline void write_fairness_csv(std::ostream& os, const FairnessSeries& fs) {
    os << "t,ratio\n";
    for (std::size_t i = 0; i < fs.times.size(); ++i) os << num(fs.times[i]) << ',' << num(fs.ratio[i]) << '\n';
}

inline void write_eigen_columns(std::ostream& os, const std::vector<std::complex<double>>& ev) {
    for (std::size_t k = 0; k < 3; ++k) {
        if (k < ev.size()) {
            os << ',' << num(ev[k].real()) << ',' << num(ev[k].imag());
        } else {
            os << ",,";
        }
    }
}

inline json gap_json(const GapStats& g, double lo, double hi) {
    return {{"t_lo", lo}, {"t_hi", hi}, {"min", g.min}, {"mean", g.mean}, {"samples", g.samples}};
}

inline void dump_json(std::ostream& os, const json& j) { os << j.dump(2) << '\n'; }

} // namespace detail

/// Options shared by every subcommand.
struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
};

inline void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config, "configuration file (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", o.overrides, "override a configuration value, e.g. price.beta=0.002");
    sub->add_option("--out", o.out, "output file (default: standard output)");
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using detail::json;
    CLI::App app{"Dynamic access pricing: equilibria, stability, regions and simulation"};
    app.name("accessprice");
    app.require_subcommand(1);

    CommonOptions common;
    std::string mode_name;
    std::optional<double> k_u;

    auto* fixed = app.add_subcommand("fixed-points", "list the fixed points of a mode");
    auto* classify_cmd = app.add_subcommand("classify", "stability reports of every fixed point");
    for (auto* sub : {fixed, classify_cmd}) {
        add_common(sub, common);
        sub->add_option("--mode", mode_name, "normal, saturated or competitive")->default_val("normal");
        sub->add_option("--k-u", k_u, "constant unresponsive load (default: the schedule's peak)");
    }

    auto* simulate = app.add_subcommand("simulate", "integrate one trajectory");
    add_common(simulate, common);
    std::optional<double> t0, t1, step;
    std::string x0_text;
    int every = 1;
    simulate->add_option("--mode", mode_name, "normal, chattering, saturated, competitive or switched")
        ->default_val("normal");
    simulate->add_option("--t0", t0, "start time (default 0)");
    simulate->add_option("--t1", t1, "end time (default: scenario horizon or 100)");
    simulate->add_option("--step", step, "RK4 step (default: configuration step)");
    simulate->add_option("--x0", x0_text, "initial state r,q[,u]");
    simulate->add_option("--every", every, "record every n-th step")->check(CLI::PositiveNumber);

    auto* phase = app.add_subcommand("phase", "vector field on a grid");
    add_common(phase, common);
    std::string r_range = "0,150", q_range;
    int resolution = 50;
    std::string overlay_out;
    phase->add_option("--mode", mode_name, "planar mode")->default_val("normal");
    phase->add_option("--r-range", r_range, "lo,hi for R")->default_val("0,150");
    phase->add_option("--q-range", q_range, "lo,hi for q (default 0,q_max)");
    phase->add_option("--resolution", resolution, "nodes per axis")->default_val(50);
    phase->add_option("--overlay-out", overlay_out, "also write nullcline and fixed-point overlays (CSV)");

    auto* doa = app.add_subcommand("doa", "invariant region inside the domain of attraction");
    add_common(doa, common);
    std::string region_kind = "polygon";
    std::optional<double> q_choice, r_choice, u_choice;
    int samples = 1000;
    doa->add_option("--region", region_kind, "polygon or cuboid")->default_val("polygon");
    doa->add_option("--q-choice", q_choice, "q (polygon) or q-hat (cuboid)");
    doa->add_option("--r-choice", r_choice, "R (polygon) or R-hat (cuboid)");
    doa->add_option("--u-choice", u_choice, "U-hat (cuboid)");
    doa->add_option("--k-u", k_u, "constant unresponsive load for the cuboid (default: schedule peak)");
    doa->add_option("--samples", samples, "boundary samples per face")->default_val(1000);

    auto* scenario = app.add_subcommand("scenario", "surge versus saturated pricing under a burst");
    add_common(scenario, common);
    std::string prefix;
    std::string window_text;
    scenario->add_option("--out-prefix", prefix, "prefix of the five output files")->default_val("scenario");
    scenario->add_option("--gap-window", window_text, "lo,hi (default: second half of the first burst)");
    scenario->add_option("--every", every, "record every n-th step")->check(CLI::PositiveNumber);

    auto* validate = app.add_subcommand("validate", "check admissibility of the configuration");
    add_common(validate, common);
    validate->add_option("--k-u", k_u, "also check the competitive conditions for this load");

    auto* calibrate = app.add_subcommand("calibrate", "fit the admission rate to target prices");
    add_common(calibrate, common);
    double p1 = 0.0, p2 = 0.0;
    std::string variant = "linear";
    std::optional<double> q_max, alpha0;
    calibrate->add_option("--p1", p1, "price at the low-congestion equilibrium")->required();
    calibrate->add_option("--p2", p2, "price at the high-congestion equilibrium")->required();
    calibrate->add_option("--variant", variant, "linear or cubic")->default_val("linear");
    calibrate->add_option("--q-max", q_max, "zero of the cubic admission rate");
    calibrate->add_option("--alpha0", alpha0, "alpha(0) for the cubic (scanned when omitted)");
    calibrate->add_option("--k-u", k_u, "unresponsive load the targets refer to (default 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kExitUsage;
    }

    try {
        LoadedConfig lc = load_config(common.config, common.overrides);
        for (const auto& n : lc.notices) err << "notice: " << n << '\n';
        const ModelConfig& cfg = lc.model;
        detail::Sink sink(common.out, out);

        auto analysis = [&]() {
            auto m = parse_analysis_mode(mode_name);
            if (!m) throw CLI::ValidationError("--mode", "unknown analysis mode '" + mode_name + "'");
            return *m;
        };
        auto load_for = [&](AnalysisMode m) {
            return m == AnalysisMode::Normal ? 0.0 : k_u.value_or(cfg.peak_load());
        };

        if (*fixed) {
            const AnalysisMode m = analysis();
            auto& os = *sink;
            os << "mode,q_star,r_star,u_star,price,classification,eig_re_1,eig_im_1,eig_re_2,eig_im_2,eig_re_3,"
                  "eig_im_3\n";
            for (const auto& fp : find_fixed_points(cfg, m, load_for(m))) {
                os << to_string(m) << ',' << num(fp.q_star) << ',' << num(fp.r_star) << ',' << num(fp.u_star)
                   << ',' << num(fp.price_at) << ',' << to_string(fp.classification);
                detail::write_eigen_columns(os, fp.eigenvalues);
                os << '\n';
            }
        } else if (*classify_cmd) {
            const AnalysisMode m = analysis();
            auto& os = *sink;
            os << "mode,q_star,r_star,u_star,classification,trace,determinant,a1,a2,a3,hurwitz_margin,hurwitz,"
                  "eig_re_1,eig_im_1,eig_re_2,eig_im_2,eig_re_3,eig_im_3,saddle_lhs,saddle_rhs\n";
            for (const auto& fp : find_fixed_points(cfg, m, load_for(m))) {
                os << to_string(m) << ',' << num(fp.q_star) << ',' << num(fp.r_star) << ',' << num(fp.u_star)
                   << ',';
                std::optional<StabilityReport> rep;
                try {
                    rep = classify(jacobian(cfg, fp.state(), m));
                } catch (const DegenerateConfiguration&) {
                }
                if (!rep) {
                    os << to_string(Classification::Degenerate) << ",,,,,,,";
                    detail::write_eigen_columns(os, {});
                    os << ",,\n";
                    continue;
                }
                os << to_string(fp.classification) << ',' << num(rep->trace) << ',' << num(rep->determinant)
                   << ',' << num(rep->char_poly[0]) << ',' << num(rep->char_poly[1]) << ','
                   << num(rep->dim == 3 ? rep->char_poly[2] : 0.0) << ',' << num(rep->hurwitz_margin) << ','
                   << (rep->hurwitz ? "true" : "false");
                detail::write_eigen_columns(os, rep->eigenvalues);
                std::optional<SaddleCriterion> sc;
                try {
                    sc = saddle_criterion(cfg, fp);
                } catch (const ModelError&) {
                }
                os << ',' << (sc ? num(sc->lhs) : "") << ',' << (sc ? num(sc->rhs) : "") << '\n';
            }
        } else if (*simulate) {
            auto m = parse_system_mode(mode_name);
            if (!m) throw CLI::ValidationError("--mode", "unknown system mode '" + mode_name + "'");
            State x0 = lc.scenario.x0.value_or(State{50.0, 15.0, 0.0});
            if (is_planar(*m) && !lc.scenario.x0) x0.u = 0.0;
            if (!x0_text.empty()) {
                const auto v = detail::parse_list(x0_text, "--x0");
                if (v.size() != 2 && v.size() != 3) throw CLI::ValidationError("--x0", "expected r,q[,u]");
                x0 = {v[0], v[1], v.size() == 3 ? v[2] : 0.0};
            }
            const double a = t0.value_or(lc.scenario.t0.value_or(0.0));
            const double b = t1.value_or(lc.scenario.t1.value_or(100.0));
            const auto tr = integrate(cfg, *m, x0, a, b, step.value_or(lc.step), every);
            detail::write_trajectory_csv(*sink, tr);
        } else if (*phase) {
            auto m = parse_system_mode(mode_name);
            if (!m) throw CLI::ValidationError("--mode", "unknown system mode '" + mode_name + "'");
            const auto [rlo, rhi] = detail::parse_range(r_range, "--r-range");
            const auto [qlo, qhi] = q_range.empty() ? std::pair<double, double>{0.0, cfg.q_max()}
                                                    : detail::parse_range(q_range, "--q-range");
            const auto g = phase_grid(cfg, *m, rlo, rhi, qlo, qhi, resolution);
            auto& os = *sink;
            os << "r,q,dr,dq,magnitude\n";
            for (const auto& c : g.cells) {
                os << num(c.r) << ',' << num(c.q) << ',' << num(c.dr) << ',' << num(c.dq) << ','
                   << num(c.magnitude) << '\n';
            }
            if (!overlay_out.empty()) {
                std::ofstream ov(overlay_out);
                if (!ov) throw ConfigError("", "cannot write " + overlay_out);
                ov << "kind,q,r,classification\n";
                for (const auto& s : g.nullclines) ov << "eta1," << num(s.q) << ',' << num(s.eta1) << ",\n";
                for (const auto& s : g.nullclines) ov << "eta2," << num(s.q) << ',' << num(s.eta2) << ",\n";
                for (const auto& fp : g.fixed_points) {
                    ov << "fixed_point," << num(fp.q_star) << ',' << num(fp.r_star) << ','
                       << to_string(fp.classification) << '\n';
                }
            }
        } else if (*doa) {
            const auto dc = dagger_constants(cfg);
            json j;
            j["r_dagger"] = dc.r_dagger;
            j["q_dagger"] = dc.q_dagger;
            RegionSpec reg;
            InvarianceReport rep;
            if (region_kind == "polygon") {
                const auto def = (q_choice && r_choice) ? PolygonChoice{} : default_polygon_choice(cfg);
                const double q = q_choice.value_or(def.q_choice);
                const double r = r_choice.value_or(def.r_choice);
                reg = build_polygon(cfg, q, r);
                rep = check_invariance(cfg, reg, SystemMode::Normal, samples);
                j["region"] = "polygon";
                j["choice"] = {{"q", q}, {"r", r}};
            } else if (region_kind == "cuboid") {
                const double load = k_u.value_or(cfg.peak_load());
                const ModelConfig c3 = cfg.with_constant_load(load);
                const auto def = (q_choice && r_choice && u_choice) ? CuboidChoice{} : default_cuboid_choice(c3, load);
                const double q = q_choice.value_or(def.q_hat);
                const double u = u_choice.value_or(def.u_hat);
                const double r = r_choice.value_or(def.r_hat);
                reg = build_cuboid(c3, load, q, u, r);
                rep = check_invariance(c3, reg, SystemMode::Competitive, samples);
                j["region"] = "cuboid";
                j["k_u"] = load;
                j["choice"] = {{"q_hat", q}, {"u_hat", u}, {"r_hat", r}};
            } else {
                throw CLI::ValidationError("--region", "expected polygon or cuboid");
            }
            json verts = json::array();
            for (const auto& v : reg.vertices) {
                verts.push_back({{"label", v.label}, {"r", v.point.r}, {"q", v.point.q}, {"u", v.point.u}});
            }
            j["vertices"] = verts;
            json faces = json::array();
            for (const auto& f : rep.faces) {
                faces.push_back({{"face", f.label},
                                 {"worst", f.worst},
                                 {"samples", f.samples},
                                 {"strict", f.strict},
                                 {"pass", f.pass}});
            }
            j["check"] = {{"pass", rep.pass}, {"faces", faces}, {"warnings", rep.warnings}};
            for (const auto& w : rep.warnings) err << "warning: " << w << '\n';
            detail::dump_json(*sink, j);
            if (!rep.pass) {
                err << "invariance check failed\n";
                return kExitFailure;
            }
        } else if (*scenario) {
            ScenarioConfig sc = scenario_config(lc);
            sc.record_every = every;
            const std::string pre = common.out.empty() ? prefix : common.out;
            const auto res = run_comparison(sc);

            auto write = [&](const std::string& suffix, auto&& writer) {
                std::ofstream f(pre + suffix);
                if (!f) throw ConfigError("", "cannot write " + pre + suffix);
                writer(f);
            };
            write("_surge.csv", [&](std::ostream& os) { detail::write_trajectory_csv(os, res.surge); });
            write("_saturated.csv", [&](std::ostream& os) { detail::write_trajectory_csv(os, res.saturated); });
            write("_fairness_surge.csv",
                  [&](std::ostream& os) { detail::write_fairness_csv(os, res.fairness_surge); });
            write("_fairness_saturated.csv",
                  [&](std::ostream& os) { detail::write_fairness_csv(os, res.fairness_saturated); });

            double lo = sc.t0, hi = sc.t1;
            std::optional<LoadPiece> burst;
            for (const auto& p : cfg.k_u_schedule) {
                if (p.rate > 0.0 && (!burst || p.t_start < burst->t_start)) burst = p;
            }
            if (!window_text.empty()) {
                std::tie(lo, hi) = detail::parse_range(window_text, "--gap-window");
            } else if (burst) {
                lo = std::max(sc.t0, 0.5 * (burst->t_start + burst->t_end));
                hi = std::min(sc.t1, burst->t_end);
            }
            json s;
            s["horizon"] = {sc.t0, sc.t1};
            s["gap_window"] = detail::gap_json(
                fairness_gap(res.fairness_saturated, res.fairness_surge, lo, hi), lo, hi);
            s["gap_horizon"] = detail::gap_json(
                fairness_gap(res.fairness_saturated, res.fairness_surge, sc.t0, sc.t1), sc.t0, sc.t1);
            s["max_queue_difference"] = max_queue_difference(res.surge, res.saturated);
            if (burst) {
                const double bs = std::max(burst->t_start, sc.t0), be = std::min(burst->t_end, sc.t1);
                auto leg = [&](const Trajectory& tr) {
                    return json{{"r_burst_start", tr.states[tr.index_at(bs)].r},
                                {"r_burst_end", tr.states[tr.index_at(be)].r}};
                };
                s["burst"] = {{"t_start", bs}, {"t_end", be}, {"rate", burst->rate}};
                s["surge"] = leg(res.surge);
                s["saturated"] = leg(res.saturated);
            }
            const auto bb = bounceback_probe(sc);
            json bj;
            bj["skipped"] = bb.skipped;
            bj["converged"] = bb.converged;
            bj["probe_start"] = bb.probe_start;
            if (bb.converged) {
                bj["settling_time"] = bb.settling_time;
                bj["settled_within_horizon"] = bb.settled_within_horizon;
                bj["target"] = detail::fixed_point_json(*bb.target);
            }
            if (!bb.notice.empty()) {
                bj["notice"] = bb.notice;
                err << "notice: " << bb.notice << '\n';
            }
            s["bounceback"] = bj;
            write("_summary.json", [&](std::ostream& os) { detail::dump_json(os, s); });
        } else if (*validate) {
            const auto rep = validate_admissible(cfg);
            auto& os = *sink;
            auto print = [&](const std::string& title, const ValidationReport& r) {
                os << title << ": " << (r.ok() ? "pass" : "fail") << '\n';
                for (const auto& c : r.clauses) {
                    os << "  [" << (c.pass ? "pass" : "FAIL") << "] " << c.name;
                    if (!c.detail.empty()) os << " (" << c.detail << ')';
                    os << '\n';
                }
            };
            print("normal-mode admissibility", rep);
            bool ok = rep.ok();
            if (k_u) {
                const auto rc = validate_admissible(cfg, *k_u);
                print("competitive-mode admissibility (K_U = " + num(*k_u) + ")", rc);
                ok = ok && rc.ok();
            }
            if (cfg.price.variant == PriceVariant::Saturated) {
                os << "saturation floor min(alpha + f): " << num(saturation_floor(cfg)) << '\n';
            }
            if (!ok) return kExitFailure;
        } else if (*calibrate) {
            const CalibrationTargets t{p1, p2, alpha0};
            const double load = k_u.value_or(0.0);
            if (variant == "linear") {
                lc.model.admission = calibrate_linear_admission(t, cfg.price, cfg.service, cfg.k_r, load);
            } else if (variant == "cubic") {
                if (!q_max) throw CLI::ValidationError("--q-max", "required for the cubic variant");
                lc.model.admission = calibrate_cubic_admission(t, cfg.price, cfg.service, cfg.k_r, *q_max, load);
            } else {
                throw CLI::ValidationError("--variant", "expected linear or cubic");
            }
            detail::dump_json(*sink, config_to_json(lc));
        }
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitFailure;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

} // namespace accessprice::cli
