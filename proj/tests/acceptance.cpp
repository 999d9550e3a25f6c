// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "support.hpp"

#include <cli.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

using namespace accessprice;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

bool near_kink(const ModelConfig& cfg, double q, double radius) {
    std::vector<double> kinks{cfg.service.q_c, cfg.q_max()};
    if (cfg.price.variant != PriceVariant::Surge) kinks.push_back(cfg.price.q_m);
    if (cfg.price.variant == PriceVariant::Saturated) kinks.push_back(cfg.price.q_n);
    if (cfg.q_ad) kinks.push_back(*cfg.q_ad);
    for (double k : kinks) {
        if (std::abs(q - k) < radius) return true;
    }
    return false;
}

template <class Rng>
State interior_state(Rng& rng, const ModelConfig& cfg, bool three_d) {
    std::uniform_real_distribution<double> rd(0.1, 300.0), qd(0.01, cfg.q_max() - 0.01), ud(0.1, 300.0);
    for (;;) {
        const State x{rd(rng), qd(rng), three_d ? ud(rng) : 0.0};
        if (!near_kink(cfg, x.q, 1e-3)) return x;
    }
}

const FixedPoint& low_point(const std::vector<FixedPoint>& fps) {
    if (fps.empty()) throw std::runtime_error("no fixed points");
    return fps.front();
}

// Criterion 1
Outcome equilibrium_round_trip() {
    const auto cfg = reference_config();
    const auto fps = find_fixed_points(cfg, AnalysisMode::Normal);
    if (fps.size() != 2) return {false, std::to_string(fps.size()) + " fixed points"};
    const double err = std::max({std::abs(fps[0].r_star - 25.0), std::abs(fps[0].q_star - 40.0),
                                 std::abs(fps[1].r_star - 125.0), std::abs(fps[1].q_star - 82.0)});
    const auto sc = saddle_criterion(cfg, fps[1]);
    const bool ok = err < 1e-8 && fps[0].classification == Classification::StableNode &&
                    fps[1].classification == Classification::Saddle && std::abs(sc.lhs - 0.003) < 1e-12 &&
                    std::abs(sc.rhs - 0.0022857142857) < 1e-9 && sc.lhs > sc.rhs;
    return {ok, "max error " + fmt("%.2e", err) + ", " + to_string(fps[0].classification) + "/" +
                    to_string(fps[1].classification) + ", lhs " + fmt("%.7f", sc.lhs) + " rhs " +
                    fmt("%.7f", sc.rhs)};
}

// Criterion 2
Outcome jacobian_oracle() {
    std::mt19937_64 rng(101);
    const auto ref = reference_config();
    const auto sat = shipped("section5.json").with_constant_load(1.5);
    const auto comp = shipped("competitive.json");
    double worst = 0.0;
    int states = 0;
    for (auto [cfg, mode] : {std::pair{&ref, AnalysisMode::Normal}, std::pair{&sat, AnalysisMode::Saturated},
                             std::pair{&comp, AnalysisMode::Competitive}}) {
        for (int i = 0; i < 100; ++i, ++states) {
            const State x = interior_state(rng, *cfg, mode == AnalysisMode::Competitive);
            const auto a = jacobian(*cfg, x, mode);
            const auto fd = finite_diff_jacobian(*cfg, x, mode, 1e-6);
            for (int r = 0; r < a.dim; ++r) {
                for (int c = 0; c < a.dim; ++c) worst = std::max(worst, std::abs(a(r, c) - fd(r, c)));
            }
        }
    }
    return {worst < 1e-6, std::to_string(states) + " states, max entry error " + fmt("%.2e", worst)};
}

// Criterion 3
Outcome orthant_invariance() {
    std::mt19937_64 rng(103);
    const auto cfg = reference_config();
    std::uniform_real_distribution<double> rd(0.0, 300.0), qd(0.0, cfg.q_max());
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        const auto st = integrate_observed(cfg, SystemMode::Normal, {rd(rng), qd(rng), 0.0}, 0.0, 1000.0, 0.01,
                                           [](double, const State&) { return true; });
        worst = std::max(worst, st.max_clamp_violation);
    }
    return {worst <= 1e-6, "500 runs, largest raw excursion " + fmt("%.2e", worst)};
}

// Criterion 4
Outcome polygon_region() {
    const auto cfg = reference_config();
    const auto reg = build_polygon(cfg, 70.0, 58.0);
    const auto rep = check_invariance(cfg, reg, SystemMode::Normal, 1000);
    std::mt19937_64 rng(107);
    int converged = 0;
    double escape = 0.0;
    for (int i = 0; i < 50; ++i) {
        State last;
        integrate_observed(cfg, SystemMode::Normal, sample_interior(reg, rng), 0.0, 1e4, 0.01,
                           [&](double, const State& x) {
                               escape = std::max(escape, exterior_distance(reg, x));
                               last = x;
                               return true;
                           });
        if (max_norm(last - State{25.0, 40.0, 0.0}) < 1e-3) ++converged;
    }
    return {rep.pass && converged == 50 && escape <= 1e-6,
            std::string("boundary check ") + (rep.pass ? "pass" : "fail") + ", " + std::to_string(converged) +
                "/50 converged, max exit " + fmt("%.1e", escape)};
}

// Criterion 5
Outcome chattering() {
    auto cfg = reference_config();
    cfg.q_ad = 60.0;
    const double qd = q_dagger(cfg);
    const bool bounds = qd < 60.0 && 60.0 < 82.0 && cfg.service.q_c < 60.0;
    std::mt19937_64 rng(109);
    std::uniform_real_distribution<double> r(0.0, 300.0), q(0.0, 60.0);
    int converged = 0;
    double top = 0.0;
    for (int i = 0; i < 50; ++i) {
        State last;
        integrate_observed(cfg, SystemMode::Chattering, {r(rng), q(rng), 0.0}, 0.0, 1e4, 0.01,
                           [&](double, const State& x) {
                               top = std::max(top, x.q);
                               last = x;
                               return true;
                           });
        if (max_norm(last - State{25.0, 40.0, 0.0}) < 1e-3) ++converged;
    }
    return {bounds && converged == 50 && top <= 60.0 + 1e-9,
            "q-dagger " + fmt("%.3f", qd) + ", " + std::to_string(converged) + "/50 converged, max q " +
                fmt("%.9f", top)};
}

// Criterion 6
Outcome divergence_negative() {
    std::mt19937_64 rng(113);
    const auto ref = reference_config();
    const auto comp = shipped("competitive.json");
    double worst2 = -kInf, worst3 = -kInf;
    for (int i = 0; i < 5000; ++i) {
        worst2 = std::max(worst2, divergence(ref, interior_state(rng, ref, false), AnalysisMode::Normal));
        worst3 = std::max(worst3, divergence(comp, interior_state(rng, comp, true), AnalysisMode::Competitive));
    }
    return {worst2 < 0.0 && worst3 < 0.0,
            "10000 states, max 2D " + fmt("%.3e", worst2) + ", max 3D " + fmt("%.3e", worst3)};
}

// Criterion 7
Outcome burst_scenario() {
    const auto sc = scenario_config(load_config(config_path("section5.json")));
    const auto res = run_comparison(sc);
    auto r_at = [](const Trajectory& tr, double t) { return tr.states[tr.index_at(t)].r; };
    const double s100 = r_at(res.surge, 100.0), s300 = r_at(res.surge, 300.0);
    const double f100 = r_at(res.saturated, 100.0), f300 = r_at(res.saturated, 300.0);
    const bool a = s300 < 0.5 * s100;
    const bool b = f300 > f100;
    const auto gap = fairness_gap(res.fairness_saturated, res.fairness_surge, 200.0, 300.0);
    const bool c = gap.min > 0.0;
    const auto bb = bounceback_probe(sc);
    const auto post = find_fixed_points(sc.base.with_price(sc.saturated), AnalysisMode::Normal);
    const bool right_target = bb.target && std::abs(bb.target->q_star - low_point(post).q_star) < 1e-9;
    const double horizon = sc.t1 - sc.t0;
    const bool d = bb.converged && right_target && (bb.settled_within_horizon || bb.settling_time <= 10.0 * horizon);
    std::ostringstream os;
    os << "(a) " << (a ? "ok" : "no") << " R " << fmt("%.2f", s100) << "->" << fmt("%.2f", s300) << "; (b) "
       << (b ? "ok" : "no") << " R " << fmt("%.2f", f100) << "->" << fmt("%.2f", f300) << "; (c) "
       << (c ? "ok" : "no") << " min gap " << fmt("%.4f", gap.min) << "; (d) " << (d ? "ok" : "no")
       << " settles at t=" << fmt("%.2f", bb.settling_time);
    return {a && b && c && d, os.str()};
}

// Criterion 8
Outcome competitive_stability() {
    const auto cfg = shipped("competitive.json").with_constant_load(1.0);
    const auto fps = find_fixed_points(cfg, AnalysisMode::Competitive, 1.0);
    std::mt19937_64 rng(127);
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);
    int checked = 0, hurwitz = 0, returned = 0, starts = 0;
    for (const auto& fp : fps) {
        if (!(fp.q_star < cfg.price.q_m)) continue;
        ++checked;
        const auto rep = classify(jacobian(cfg, fp.state(), AnalysisMode::Competitive));
        if (rep.hurwitz) ++hurwitz;
        for (int i = 0; i < 10; ++i, ++starts) {
            const State x0{fp.r_star * (1 + jitter(rng)), fp.q_star * (1 + jitter(rng)), fp.u_star * (1 + jitter(rng))};
            const auto c = converge(cfg, SystemMode::Competitive, x0, 1e-3, 1e4);
            if (c.converged && c.target && std::abs(c.target->q_star - fp.q_star) < 1e-9) ++returned;
        }
    }
    return {checked > 0 && hurwitz == checked && returned == starts,
            std::to_string(checked) + " low-congestion point(s), " + std::to_string(hurwitz) + " Hurwitz, " +
                std::to_string(returned) + "/" + std::to_string(starts) + " perturbed starts returned"};
}

// Criterion 9
Outcome cuboid() {
    const auto base = shipped("competitive.json");
    const auto ch = default_cuboid_choice(base, 1.0);
    const auto reg = build_cuboid(base, 1.0, ch.q_hat, ch.u_hat, ch.r_hat);
    const auto cfg = base.with_constant_load(1.0);
    const auto rep = check_invariance(cfg, reg, SystemMode::Competitive, 500);
    int faces_ok = 0;
    for (const auto& f : rep.faces) faces_ok += f.pass ? 1 : 0;
    std::mt19937_64 rng(131);
    double escape = 0.0;
    for (int i = 0; i < 20; ++i) {
        integrate_observed(cfg, SystemMode::Competitive, sample_interior(reg, rng), 0.0, 5000.0, 0.01,
                           [&](double, const State& x) {
                               escape = std::max(escape, exterior_distance(reg, x));
                               return true;
                           });
    }
    return {rep.pass && faces_ok == 6 && escape <= 1e-6,
            std::to_string(faces_ok) + "/6 faces, corner (" + fmt("%.3f", ch.r_hat) + ", " + fmt("%.3f", ch.q_hat) +
                ", " + fmt("%.3f", ch.u_hat) + "), max exit " + fmt("%.1e", escape)};
}

// Criterion 10
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "accessprice");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "accessprice_acceptance";
    fs::remove_all(root);
    const std::string ref = config_path("ref.json"), s5 = config_path("section5.json"),
                      comp = config_path("competitive.json");
    using Args = std::vector<std::string>;
    const std::vector<std::pair<std::string, Args>> jobs{
        {"fixed-points", {"fixed-points", "--config", ref}},
        {"fixed-points-comp", {"fixed-points", "--config", comp, "--mode", "competitive"}},
        {"classify", {"classify", "--config", ref}},
        {"classify-comp", {"classify", "--config", comp, "--mode", "competitive"}},
        {"simulate", {"simulate", "--config", ref, "--x0", "30,45"}},
        {"simulate-switched", {"simulate", "--config", s5, "--mode", "switched"}},
        {"phase", {"phase", "--config", ref}},
        {"doa", {"doa", "--config", ref}},
        {"doa-cuboid", {"doa", "--config", comp, "--region", "cuboid"}},
        {"validate", {"validate", "--config", ref}},
        {"calibrate", {"calibrate", "--config", ref, "--p1", "0.04", "--p2", "0.008"}},
        {"scenario", {"scenario", "--config", s5}},
    };
    int files = 0;
    std::vector<std::string> bad;
    for (const auto& [name, args] : jobs) {
        std::vector<int> codes;
        for (const char* run : {"a", "b"}) {
            const fs::path dir = root / run;
            fs::create_directories(dir);
            Args a = args;
            a.push_back(a.front() == "scenario" ? "--out-prefix" : "--out");
            a.push_back((dir / name).string());
            codes.push_back(run_cli(a));
        }
        if (codes[0] != 0 || codes[1] != 0) bad.push_back(name + " (exit " + std::to_string(codes[0]) + ")");
    }
    for (const auto& e : fs::directory_iterator(root / "a")) {
        ++files;
        const fs::path other = root / "b" / e.path().filename();
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) bad.push_back(e.path().filename().string());
    }
    std::string detail = std::to_string(jobs.size()) + " commands, " + std::to_string(files) + " files compared";
    for (const auto& b : bad) detail += "; differs: " + b;
    fs::remove_all(root);
    return {bad.empty() && files >= static_cast<int>(jobs.size()), detail};
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria{
        {1, "equilibrium round-trip", 1.0, equilibrium_round_trip},
        {2, "jacobian oracle", 1.0, jacobian_oracle},
        {3, "orthant invariance", 30.0, orthant_invariance},
        {4, "polygon region", 60.0, polygon_region},
        {5, "chattering policy", 60.0, chattering},
        {6, "divergence negativity", 1.0, divergence_negative},
        {7, "burst scenario ordering", 30.0, burst_scenario},
        {8, "competitive stability", 60.0, competitive_stability},
        {9, "absorbing cuboid", 60.0, cuboid},
        {10, "determinism", 0.0, determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = c.budget_s <= 0.0 || secs < c.budget_s;
        const bool pass = o.pass && in_time;
        failed += pass ? 0 : 1;
        std::string limit;
        if (c.budget_s > 0.0) limit = fmt(in_time ? " < %.0f s" : " exceeds %.0f s", c.budget_s);
        std::printf("%s criterion %d %s: %s [%.2f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    secs, limit.c_str());
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
