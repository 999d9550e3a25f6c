#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <random>

using namespace accessprice;
using namespace testsupport;
using Catch::Approx;

namespace {

Eigen::MatrixXd to_eigen(const JacobianMatrix& j) {
    Eigen::MatrixXd m(j.dim, j.dim);
    for (int r = 0; r < j.dim; ++r) {
        for (int c = 0; c < j.dim; ++c) m(r, c) = j(r, c);
    }
    return m;
}

std::vector<std::complex<double>> eigen_eigenvalues(const JacobianMatrix& j) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(j), false);
    std::vector<std::complex<double>> v;
    for (int i = 0; i < j.dim; ++i) v.push_back(es.eigenvalues()[i]);
    return v;
}

auto by_parts = [](const std::complex<double>& a, const std::complex<double>& b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
};

void check_same_spectrum(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b,
                         double tol) {
    REQUIRE(a.size() == b.size());
    // Match greedily, since conjugate pairs can be ordered differently.
    for (const auto& x : a) {
        auto best = std::min_element(b.begin(), b.end(),
                                     [&](auto& p, auto& q) { return std::abs(p - x) < std::abs(q - x); });
        CHECK(std::abs(*best - x) < tol);
        b.erase(best);
    }
}

State random_state(std::mt19937_64& rng, const ModelConfig& cfg, bool with_u) {
    std::uniform_real_distribution<double> r(0.1, 300.0), q(0.1, cfg.q_max() - 0.1), u(0.1, 200.0);
    for (;;) {
        State x{r(rng), q(rng), with_u ? u(rng) : 0.0};
        if (cfg.kink_distance(x.q) > 1e-3) return x;
    }
}

} // namespace

TEST_CASE("jacobian at the stable reference point", "[stability][jacobian]") {
    const auto cfg = reference_config();
    const auto j = jacobian(cfg, {25.0, 40.0, 0.0}, AnalysisMode::Normal);
    REQUIRE(j.dim == 2);
    CHECK(j(0, 0) == Approx(-0.16).margin(1e-8));
    CHECK(j(0, 1) == Approx(-25.0 * (0.001 + kRefC1)).margin(1e-10));
    CHECK(j(0, 1) == Approx(0.03214275).margin(1e-7));
    CHECK(j(1, 0) == Approx(0.12).margin(1e-10));
    CHECK(j(1, 1) == Approx(-0.05714275).margin(1e-7));
}

TEST_CASE("3D jacobian with an empty unresponsive queue", "[stability][jacobian]") {
    const auto cfg = reference_config();
    const auto j = jacobian(cfg, {30.0, 50.0, 0.0}, AnalysisMode::Competitive);
    REQUIRE(j.dim == 3);
    CHECK(j(2, 0) == 0.0);
    CHECK(j(2, 1) == 0.0);
    CHECK(j(2, 2) == Approx(-admission(cfg, 50.0)));
}

TEST_CASE("jacobian refuses kinks and negative states", "[stability][jacobian]") {
    const auto cfg = reference_config();
    CHECK_THROWS_AS(jacobian(cfg, {25.0, 45.0, 0.0}, AnalysisMode::Normal), DegenerateConfiguration);
    CHECK_THROWS_AS(jacobian(cfg, {25.0, 35.0, 0.0}, AnalysisMode::Normal), DegenerateConfiguration);
    CHECK_THROWS_AS(jacobian(cfg, {-1.0, 40.0, 0.0}, AnalysisMode::Normal), DomainError);
    CHECK_THROWS_AS(finite_diff_jacobian(cfg, {25.0, 45.0, 0.0}, AnalysisMode::Normal, 1e-6),
                    DegenerateConfiguration);
    CHECK_THROWS_AS(finite_diff_jacobian(cfg, {25.0, 40.0, 0.0}, AnalysisMode::Normal, 0.0),
                    PreconditionError);
}

TEST_CASE("analytic and finite-difference jacobians agree", "[stability][jacobian][property]") {
    std::mt19937_64 rng(3);
    const auto ref = reference_config();
    const auto sat = shipped("section5.json").with_constant_load(1.5);
    const auto comp = shipped("competitive.json");
    struct Case {
        const ModelConfig* cfg;
        AnalysisMode mode;
    };
    for (const Case& c : {Case{&ref, AnalysisMode::Normal}, Case{&sat, AnalysisMode::Saturated},
                          Case{&comp, AnalysisMode::Competitive}}) {
        for (int i = 0; i < 100; ++i) {
            const State x = random_state(rng, *c.cfg, c.mode == AnalysisMode::Competitive);
            const auto a = jacobian(*c.cfg, x, c.mode);
            const auto fd = finite_diff_jacobian(*c.cfg, x, c.mode, 1e-6);
            for (int r = 0; r < a.dim; ++r) {
                for (int k = 0; k < a.dim; ++k) CHECK(a(r, k) == Approx(fd(r, k)).margin(1e-6));
            }
        }
    }
}

TEST_CASE("divergence formulas", "[stability][divergence]") {
    const auto cfg = reference_config();
    CHECK(divergence(cfg, {25.0, 40.0, 0.0}, AnalysisMode::Normal) ==
          Approx(-0.04 - 0.12 + 25.0 * kRefC1).margin(1e-12));
    CHECK(divergence(cfg, {25.0, 40.0, 0.0}, AnalysisMode::Normal) == Approx(-0.21714275).margin(1e-7));
    CHECK(divergence(cfg, {0.0, 50.0, 0.0}, AnalysisMode::Competitive) ==
          Approx(-2.0 * admission(cfg, 50.0) - price(cfg, 50.0)).margin(1e-14));
    // Divergence is the trace of the Jacobian.
    const State x{40.0, 20.0, 10.0};
    const auto j = jacobian(cfg, x, AnalysisMode::Competitive);
    CHECK(divergence(cfg, x, AnalysisMode::Competitive) == Approx(j(0, 0) + j(1, 1) + j(2, 2)));
}

TEST_CASE("divergence is negative in the interior", "[stability][divergence][property]") {
    std::mt19937_64 rng(5);
    for (const auto& cfg : {reference_config(), shipped("competitive.json"), shipped("section5.json")}) {
        for (int i = 0; i < 2000; ++i) {
            const State x = random_state(rng, cfg, true);
            CHECK(divergence(cfg, {x.r, x.q, 0.0}, AnalysisMode::Normal) < 0.0);
            CHECK(divergence(cfg, x, AnalysisMode::Competitive) < 0.0);
        }
    }
}

TEST_CASE("classification of the reference equilibria", "[stability][classify]") {
    const auto cfg = reference_config();
    const auto s = classify(jacobian(cfg, {25.0, 40.0, 0.0}, AnalysisMode::Normal));
    CHECK(s.classification == Classification::StableNode);
    CHECK(s.trace == Approx(-0.21714286).margin(1e-7));
    CHECK(s.determinant == Approx(0.00528571).margin(1e-8));
    std::vector<double> ev{s.eigenvalues[0].real(), s.eigenvalues[1].real()};
    std::sort(ev.begin(), ev.end());
    CHECK(ev[0] == Approx(-0.1892).margin(1e-4));
    CHECK(ev[1] == Approx(-0.0279).margin(1e-4));

    const auto u = classify(jacobian(cfg, {125.0, 82.0, 0.0}, AnalysisMode::Normal));
    CHECK(u.classification == Classification::Saddle);
    // det = -(K_R - mu) alpha' ... reduces to 0.00228571 - 0.003 per unit alpha mu.
    CHECK(u.determinant == Approx(-0.00071429).margin(1e-8));

    CHECK(classify(JacobianMatrix::identity(2)).classification == Classification::Unstable);
    CHECK(classify(JacobianMatrix::identity(3)).classification == Classification::Unstable);
    CHECK(classify(JacobianMatrix{2, {-1.0, 0.0, 0.0, 0.0}}).classification == Classification::Degenerate);

    const auto focus = classify(JacobianMatrix{2, {-0.1, 1.0, -1.0, -0.1}});
    CHECK(focus.classification == Classification::StableFocus);
}

TEST_CASE("eigenvalues agree with a general eigen-solver", "[stability][classify][property]") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> e(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const int dim = i % 2 ? 3 : 2;
        JacobianMatrix j{dim, {}};
        for (int r = 0; r < dim; ++r) {
            for (int c = 0; c < dim; ++c) j(r, c) = e(rng);
        }
        check_same_spectrum(classify(j).eigenvalues, eigen_eigenvalues(j), 1e-9);
    }
}

TEST_CASE("Routh-Hurwitz verdict matches the spectrum", "[stability][classify][property]") {
    std::mt19937_64 rng(13);
    const auto cfg = shipped("competitive.json");
    const auto fps = find_fixed_points(cfg, AnalysisMode::Competitive, 1.0);
    std::uniform_real_distribution<double> jitter(-0.2, 0.2);
    int stable = 0, unstable = 0;
    for (int i = 0; i < 100; ++i) {
        const auto& fp = fps[static_cast<std::size_t>(i) % fps.size()];
        State x = fp.state();
        x.r *= 1.0 + jitter(rng);
        x.q *= 1.0 + jitter(rng);
        x.u *= 1.0 + jitter(rng);
        if (cfg.kink_distance(x.q) < 1e-6) continue;
        auto j = jacobian(cfg, x, AnalysisMode::Competitive);
        for (double& v : j.entries) v *= 1.0 + 0.5 * jitter(rng);
        const auto rep = classify(j);
        const auto ev = eigen_eigenvalues(j);
        const bool all_negative =
            std::all_of(ev.begin(), ev.end(), [](auto& z) { return z.real() < -kDegenerateTol; });
        CHECK(rep.hurwitz == all_negative);
        (rep.hurwitz ? stable : unstable)++;
    }
    CHECK(stable > 0);
    CHECK(unstable > 0);
}

TEST_CASE("gershgorin discs are informational", "[stability][classify]") {
    const auto cfg = shipped("competitive.json");
    const auto j = jacobian(cfg, {50.0, 40.0, 25.0}, AnalysisMode::Competitive);
    const auto rep = classify(j);
    REQUIRE(rep.gershgorin.size() == 3);
    for (int c = 0; c < 3; ++c) {
        double radius = 0.0;
        for (int r = 0; r < 3; ++r) {
            if (r != c) radius += std::abs(j(r, c));
        }
        CHECK(rep.gershgorin[static_cast<std::size_t>(c)].center == j(c, c));
        CHECK(rep.gershgorin[static_cast<std::size_t>(c)].radius == Approx(radius));
    }
}

TEST_CASE("3D jacobian trace is negative at fixed points", "[stability][property]") {
    for (double k_u : {0.25, 0.5, 1.0, 1.5, 2.0}) {
        const auto cfg = reference_config();
        for (const auto& fp : find_fixed_points(cfg, AnalysisMode::Competitive, k_u)) {
            CHECK(classify(jacobian(cfg, fp.state(), AnalysisMode::Competitive)).trace < 0.0);
        }
    }
}

TEST_CASE("saddle criterion at the congested reference point", "[stability][saddle]") {
    const auto cfg = reference_config();
    const auto fps = find_fixed_points(cfg, AnalysisMode::Normal);
    const auto s = saddle_criterion(cfg, fps[1]);
    CHECK(s.lhs == Approx(0.003).margin(1e-12));
    CHECK(s.rhs == Approx(0.00228571).margin(1e-8));
    CHECK(s.is_saddle);
    CHECK_THROWS_AS(saddle_criterion(cfg, fps[0]), PreconditionError);
}

TEST_CASE("saddle criterion agrees with the determinant sign", "[stability][saddle][property]") {
    // alpha = max(0, 0.2 - 0.002 q) with saturated pricing: roots 40, 70, 77.5.
    ModelConfig cfg = reference_config();
    cfg.admission = AdmissionSpec::linear(-0.002, 0.2);
    cfg = cfg.with_price(PriceSpec::saturated(1e-3, 45.0, 75.0));
    const auto fps = find_fixed_points(cfg, AnalysisMode::Saturated, 0.0);
    REQUIRE(fps.size() == 3);
    const auto high = saddle_criterion(cfg, fps[2]);
    CHECK_FALSE(high.is_saddle);
    CHECK(high.rhs > high.lhs);
    CHECK(classify(jacobian(cfg, fps[2].state(), AnalysisMode::Saturated)).determinant > 0.0);

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> p1d(0.036, 0.0449), p2d(0.001, 0.02);
    for (int trial = 0; trial < 100; ++trial) {
        ModelConfig c = reference_config();
        try {
            c.admission = calibrate_linear_admission({p1d(rng), p2d(rng), {}}, c.price, c.service, c.k_r);
        } catch (const ModelError&) {
            continue;
        }
        const auto pts = find_fixed_points(c, AnalysisMode::Normal);
        REQUIRE(pts.size() == 2);
        CHECK(is_stable(pts[0].classification));
        const auto sc = saddle_criterion(c, pts[1]);
        const double det = classify(jacobian(c, pts[1].state(), AnalysisMode::Normal)).determinant;
        CHECK(sc.is_saddle == (det < 0.0));
    }
}

TEST_CASE("cubic roots of known polynomials", "[stability][cubic]") {
    // (l + 1)(l + 2)(l + 3)
    auto r = cubic_roots(6.0, 11.0, 6.0);
    std::vector<double> re;
    for (auto& z : r) {
        CHECK(std::abs(z.imag()) < 1e-12);
        re.push_back(z.real());
    }
    std::sort(re.begin(), re.end());
    CHECK(re[0] == Approx(-3.0));
    CHECK(re[1] == Approx(-2.0));
    CHECK(re[2] == Approx(-1.0));

    // (l + 1)(l^2 + 1)
    r = cubic_roots(1.0, 1.0, 1.0);
    std::sort(r.begin(), r.end(), by_parts);
    CHECK(r[0].real() == Approx(-1.0));
    CHECK(std::abs(r[1].real()) < 1e-12);
    CHECK(std::abs(r[1].imag()) == Approx(1.0));

    // triple root
    r = cubic_roots(3.0, 3.0, 1.0);
    for (auto& z : r) CHECK(std::abs(z + 1.0) < 1e-5);
}
