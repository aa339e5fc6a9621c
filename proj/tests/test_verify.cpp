#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "flexbeam/verify.hpp"
#include "oracles.hpp"

using namespace flexbeam;

namespace {

const ModelParams kParams = [] {
    ModelParams p;
    p.alpha = 0.5;
    p.beta = 0.3;
    return p;
}();

const C2Function kDatum = C2Function::polynomial({0.15, 0.1, -0.05, 0.02});
const LoadField kLoad = LoadField::from_expression("2 + 0.6*x");

std::set<std::string> keys_of(const std::map<std::string, double>& m) {
    std::set<std::string> out;
    for (const auto& [k, v] : m) out.insert(k);
    return out;
}

} // namespace

TEST_CASE("manufactured solution: interior residual vanishes under refinement") {
    // u* = (1 - x^2)^2 solves the stationarity equation for
    // f = 2 (eta u*'''' + mu u*) with w = 0
    ModelParams p;
    const C2Function w = C2Function::zero();
    const LoadField f([](double x) {
        const double u = (1 - x * x) * (1 - x * x);
        return 2.0 * (24.0 + u);
    });
    std::vector<double> lifted;
    for (int n : {32, 64, 128}) {
        const Mesh m = build_mesh(n, BreakConfig{});
        const auto sol = solve_E1_fixed(p, w, f, BreakConfig{}, m);
        const auto e = check_euler(ProblemKind::E1, p, w, f, LoadField::zero(), BreakConfig{}, sol, m);
        lifted.push_back(e.lifted_total);
        // the L2 error against u* itself shrinks at fourth order
        const double err = std::sqrt(integrate(m, [&](double x) {
            const double u = (1 - x * x) * (1 - x * x);
            const double d = sol.u_r.deriv(x, 0) - u;
            return d * d;
        }, 6));
        CHECK(err <= 1e-5);
    }
    CHECK(lifted.back() <= 1e-8);
    CHECK(oracle::order_at_least(lifted, 2.0));
}

TEST_CASE("a stationary cubic datum has zero residual") {
    ModelParams p;
    const C2Function w = C2Function::polynomial({0.2, -0.1, 0.3, 0.15});
    const Mesh m = build_mesh(24, BreakConfig{});
    const auto sol = solve_E1_fixed(p, w, LoadField::zero(), BreakConfig{}, m);
    const auto e = check_euler(ProblemKind::E1, p, w, LoadField::zero(), LoadField::zero(), BreakConfig{},
                               sol, m);
    CHECK(e.lifted_total <= 1e-11);
    CHECK(e.distributional <= 1e-11);
}

TEST_CASE("crease traces: the third-derivative jump closes, the sides need not") {
    std::vector<double> jumps, second;
    double last_side = 0.0;
    const BreakConfig K(std::vector<Break>{{0.25, BreakKind::Crease}});
    for (int n : {16, 32, 64, 128}) {
        const Mesh m = build_mesh(n, K);
        const auto sol = solve_E1_fixed(kParams, C2Function::zero(), kLoad, K, m);
        const auto t = check_breaks(sol.u_r);
        REQUIRE(t.size() == 1);
        jumps.push_back(std::fabs(t[0].n3_jump));
        second.push_back(std::max(std::fabs(t[0].n2_minus), std::fabs(t[0].n2_plus)));
        last_side = std::min(std::fabs(t[0].n3_minus), std::fabs(t[0].n3_plus));
    }
    CHECK(oracle::order_at_least(jumps, 1.0));
    CHECK(oracle::order_at_least(second, 1.0));
    CHECK(last_side >= 10.0 * jumps.back()); // one-sided values stay finite
}

TEST_CASE("equal release prices also close the one-sided third derivatives") {
    // symmetric data: the crease solution coincides with the crack solution,
    // whose traces all vanish
    ModelParams p = kParams;
    p.alpha = p.beta = 0.3;
    const BreakConfig K(std::vector<Break>{{0.0, BreakKind::Crease}});
    std::vector<double> sides;
    for (int n : {16, 32, 64, 128}) {
        const Mesh m = build_mesh(n, K);
        const auto sol = solve_E1_fixed(p, C2Function::zero(), LoadField::constant(1.0), K, m);
        const auto t = check_breaks(sol.u_r);
        sides.push_back(std::max(std::fabs(t[0].n3_minus), std::fabs(t[0].n3_plus)));
    }
    CHECK(sides.front() > sides.back());
    CHECK(oracle::order_at_least(sides, 1.0));
}

TEST_CASE("compliance identity: zero data gives zero on both sides") {
    ModelParams p;
    const BreakConfig K;
    const Mesh m = build_mesh(8, K);
    const auto sol = solve_E1_fixed(p, C2Function::zero(), LoadField::zero(), K, m);
    const auto c = check_compliance(ProblemKind::E1, p, C2Function::zero(), LoadField::zero(),
                                    LoadField::zero(), K, sol);
    CHECK(c.lhs == 0.0);
    CHECK(c.rhs == 0.0);
    CHECK(c.rel_gap == 0.0);
}

TEST_CASE("compliance identity closes at first order on the shipped instances") {
    for (int kind : {0, 1, 2}) {
        BreakConfig K;
        if (kind == 1) K = BreakConfig(std::vector<Break>{{0.0, BreakKind::Crack}});
        if (kind == 2) K = BreakConfig(std::vector<Break>{{0.25, BreakKind::Crease}});
        std::vector<double> gaps;
        for (int n : {64, 128, 256}) {
            const Mesh m = build_mesh(n, K);
            const auto sol = solve_E1_fixed(kParams, kDatum, kLoad, K, m);
            const auto c =
                check_compliance(ProblemKind::E1, kParams, kDatum, kLoad, LoadField::zero(), K, sol);
            CHECK_FALSE(c.homogeneous);
            gaps.push_back(c.rel_gap);
        }
        CHECK(gaps.back() <= 5e-3);
        CHECK(gaps[0] > gaps[1]);
        CHECK(gaps[1] > gaps[2]);
        CHECK(oracle::order_at_least(gaps, 1.0));
    }
}

TEST_CASE("homogeneous data satisfies the identity to round-off; corrections carry the rest") {
    const LoadField fr = LoadField::constant(1.0), fp = LoadField::constant(-0.5);
    const BreakConfig K(std::vector<Break>{{0.25, BreakKind::Crease}});
    const Mesh m = build_mesh(128, K);
    // homogeneous: the discrete identity is exact
    const auto hom = solve_F1_fixed(kParams, C2Function::zero(), fr, fp, K, m);
    const auto chom =
        check_compliance(ProblemKind::F1, kParams, C2Function::zero(), fr, fp, K, hom);
    CHECK(chom.homogeneous);
    CHECK(chom.rel_gap <= 1e-11);
    CHECK(chom.correction_total == Catch::Approx(0.0).margin(1e-13));
    // nonhomogeneous: the boundary corrections carry at least 10x the
    // residual gap
    const C2Function w = C2Function::polynomial({0.1, 0.05});
    const auto non = solve_F1_fixed(kParams, w, fr, fp, K, m);
    const auto cnon = check_compliance(ProblemKind::F1, kParams, w, fr, fp, K, non);
    CHECK_FALSE(cnon.homogeneous);
    CHECK(std::fabs(cnon.correction_total) >= 10.0 * cnon.gap);
    // and the corrected gap still closes under refinement
    std::vector<double> gaps;
    for (int n : {64, 128, 256}) {
        const Mesh mm = build_mesh(n, K);
        const auto s = solve_F1_fixed(kParams, w, fr, fp, K, mm);
        gaps.push_back(check_compliance(ProblemKind::F1, kParams, w, fr, fp, K, s).rel_gap);
    }
    CHECK(oracle::order_at_least(gaps, 1.0));
}

TEST_CASE("threshold: zero data holds for every positive release price") {
    const Mesh m = build_mesh(16, BreakConfig{});
    const auto th = check_threshold(ProblemKind::E1, kParams, C2Function::zero(), LoadField::zero(),
                                    LoadField::zero(), m, 64);
    CHECK(th.lhs == Catch::Approx(0.0).margin(1e-15));
    CHECK(th.holds);
    CHECK(th.rhs == Catch::Approx(kParams.beta).margin(1e-12));
    SearchProblem sp{ProblemKind::E1, false, kParams, C2Function::zero(), LoadField::zero(),
                     LoadField::zero()};
    SearchPolicy policy;
    policy.k_max = 2;
    CHECK(search(sp, m, policy).best.empty());
}

TEST_CASE("threshold terms match the closed form for constant loads") {
    ModelParams p;
    p.mu = 2.0;
    p.gamma = 0.8;
    p.beta = 0.4;
    p.alpha = 0.6;
    const Mesh m = build_mesh(32, BreakConfig{});
    const double c = 0.17;
    const auto th = check_threshold(ProblemKind::F1, p, C2Function::zero(), LoadField::constant(c),
                                    LoadField::zero(), m, 128);
    // squared L2 norm of a constant over (-1,1) is 2 c^2
    CHECK(th.term_load_r == Catch::Approx(2.0 * c * c / (4.0 * p.mu)).epsilon(1e-12));
    CHECK(th.term_load_sum ==
          Catch::Approx(th.poincare / (2.0 * p.gamma) * 2.0 * c * c).epsilon(1e-12));
    CHECK(th.term_wbend == 0.0);
    CHECK(th.term_fw == Catch::Approx(0.0).margin(1e-15));
    CHECK(th.lhs == Catch::Approx(2.0 * c * c * (1.0 / (4.0 * p.mu) +
                                                 th.poincare / (2.0 * p.gamma))).epsilon(1e-12));

    // sweep the load upward: whenever the inequality holds the exhaustive
    // search keeps the beam unbroken
    SearchPolicy policy;
    policy.k_max = 1;
    for (double cc : {0.1, 0.3, 0.9, 2.7}) {
        const auto t = check_threshold(ProblemKind::F1, p, C2Function::zero(), LoadField::constant(cc),
                                       LoadField::zero(), m, 128);
        if (!t.holds) continue;
        SearchProblem sp{ProblemKind::F1, false, p, C2Function::zero(), LoadField::constant(cc),
                         LoadField::zero()};
        CHECK(search(sp, m, policy).best.empty());
    }
}

TEST_CASE("threshold is sufficient, not necessary") {
    ModelParams p;
    p.beta = 0.2;
    p.alpha = 0.3;
    const Mesh m = build_mesh(16, BreakConfig{});
    const LoadField f = LoadField::constant(1.0);
    const auto th = check_threshold(ProblemKind::E1, p, C2Function::zero(), f, LoadField::zero(), m, 64);
    CHECK_FALSE(th.holds); // the load is too large for the bound
    SearchProblem sp{ProblemKind::E1, false, p, C2Function::zero(), f, LoadField::zero()};
    SearchPolicy policy;
    policy.k_max = 2;
    CHECK(search(sp, m, policy).best.empty()); // yet the beam stays unbroken
}

TEST_CASE("Poincare constant matches the transcendental eigenvalue") {
    const double k = oracle::clamped_beam_k();
    const double exact = 1.0 / (k * k * k * k);
    const double cp = poincare_constant(512);
    CHECK(cp == Catch::Approx(exact).epsilon(1e-4));
    CHECK(cp == Catch::Approx(0.03196).epsilon(2e-4));
}

TEST_CASE("Poincare constant scales as the fourth power of the interval") {
    const double full = poincare_constant(64);
    const double half = poincare_constant(64, -0.5, 0.5);
    CHECK(half == Catch::Approx(full / 16.0).epsilon(1e-12));
}

TEST_CASE("discrete Poincare constants increase towards the limit") {
    double prev = 0.0;
    for (int n : {16, 32, 64, 128}) {
        const double cp = poincare_constant(n);
        CHECK(cp > prev);
        prev = cp;
    }
    CHECK_THROWS_AS(poincare_constant(8), Error);
}

TEST_CASE("report schema covers each condition exactly once") {
    auto ids = [](std::initializer_list<const char*> xs) {
        return std::set<std::string>(xs.begin(), xs.end());
    };
    const std::set<std::string> e1 = ids({"euler.interior", "euler.distributional", "breaks.crack.second",
                                          "breaks.crack.third", "breaks.crease.second",
                                          "breaks.crease.third_jump", "breaks.endpoint.crack",
                                          "breaks.endpoint.crease", "compliance.gap"});
    std::set<std::string> e1_eq = e1;
    e1_eq.insert("breaks.equal_penalty.third");
    const std::set<std::string> f1 =
        ids({"euler.interior_r", "euler.plate", "euler.sum", "euler.distributional_r",
             "euler.distributional_sum", "euler.combined", "breaks.crack.second", "breaks.crack.third",
             "breaks.crease.second", "breaks.crease.third_jump", "breaks.endpoint.crack",
             "breaks.endpoint.crease", "compliance.gap"});
    const std::set<std::string> e1c =
        ids({"vi.inequality", "vi.complementarity", "offcontact.crack.second", "offcontact.crack.third",
             "offcontact.crease.second", "offcontact.crease.third_jump", "offcontact.distributional",
             "offcontact.endpoint.crack", "offcontact.endpoint.crease", "contact.second_sign.plus",
             "contact.second_sign.minus", "contact.third_recorded"});
    const std::set<std::string> f1c =
        ids({"qvi.reinforcement", "qvi.plate", "vi.complementarity", "offcontact.crack.second",
             "offcontact.crack.third", "offcontact.crease.second", "offcontact.crease.third_jump",
             "offcontact.distributional", "offcontact.endpoint.crack", "offcontact.endpoint.crease",
             "contact.second_sign.plus", "contact.second_sign.minus", "contact.third_recorded"});

    auto as_set = [](const std::vector<std::string>& v) { return std::set<std::string>(v.begin(), v.end()); };
    CHECK(as_set(condition_schema(ProblemKind::E1, false, false)) == e1);
    CHECK(as_set(condition_schema(ProblemKind::E1, false, true)) == e1_eq);
    CHECK(as_set(condition_schema(ProblemKind::F1, false, false)) == f1);
    CHECK(as_set(condition_schema(ProblemKind::E1, true, false)) == e1c);
    CHECK(as_set(condition_schema(ProblemKind::F1, true, false)) == f1c);
    CHECK(condition_schema(ProblemKind::G1, false, false).empty());

    // and the filled reports carry exactly those keys
    {
        const BreakConfig K(std::vector<Break>{{0.0, BreakKind::Crack}});
        const Mesh m = build_mesh(16, K);
        const auto sol = solve_E1_fixed(kParams, kDatum, kLoad, K, m);
        VerifyInputs in{ProblemKind::E1, false, kParams, kDatum, kLoad, LoadField::zero(), K, 64, true};
        CHECK(keys_of(verify_solution(in, sol, m).conditions) == e1);
    }
    {
        const BreakConfig K(std::vector<Break>{{0.25, BreakKind::Crease}});
        const Mesh m = build_mesh(16, K);
        const auto sol = solve_F1_fixed(kParams, kDatum, kLoad, LoadField::constant(-0.5), K, m);
        VerifyInputs in{ProblemKind::F1, false, kParams, kDatum, kLoad, LoadField::constant(-0.5), K, 64,
                        true};
        CHECK(keys_of(verify_solution(in, sol, m).conditions) == f1);
    }
    {
        const BreakConfig K;
        const Mesh m = build_mesh(16, K);
        const LoadField f = LoadField::constant(-20.0);
        const auto sol = solve_E1_obstacle(kParams, C2Function::zero(), f, K, m);
        VerifyInputs in{ProblemKind::E1, true, kParams, C2Function::zero(), f, LoadField::zero(), K, 64,
                        true};
        CHECK(keys_of(verify_solution(in, sol, m).conditions) == e1c);
    }
    {
        const BreakConfig K;
        const Mesh m = build_mesh(16, K);
        const auto sol = solve_F1_obstacle(kParams, C2Function::zero(), LoadField::constant(-10.0),
                                           LoadField::constant(8.0), K, m);
        VerifyInputs in{ProblemKind::F1, true, kParams, C2Function::zero(), LoadField::constant(-10.0),
                        LoadField::constant(8.0), K, 64, true};
        CHECK(keys_of(verify_solution(in, sol, m).conditions) == f1c);
    }
    {
        const BreakConfig K(std::vector<Break>{{0.0, BreakKind::Hinge}});
        const Mesh m = build_mesh(16, K);
        ModelParams pg = kParams;
        pg.sigma = 0.05;
        const auto sol = solve_G1_fixed(pg, C2Function::zero(), kLoad, LoadField::zero(), K, m);
        VerifyInputs in{ProblemKind::G1, false, pg, C2Function::zero(), kLoad, LoadField::zero(), K, 64,
                        true};
        const auto rep = verify_solution(in, sol, m);
        CHECK(rep.conditions.empty());
        REQUIRE(rep.hinge_gradients.size() == 1);
        CHECK(rep.stationarity <= 1e-9);
    }
}

TEST_CASE("inactive constraints reduce the VI report to the unconstrained residuals") {
    ModelParams p;
    const LoadField f = LoadField::constant(0.4);
    const BreakConfig K;
    const Mesh m = build_mesh(16, K);
    const auto sol = solve_E1_obstacle(p, C2Function::zero(), f, K, m);
    const auto vi = check_vi(ProblemKind::E1, p, C2Function::zero(), f, LoadField::zero(), K, sol, m);
    CHECK(vi.stationarity <= 1e-12);
    CHECK(vi.complementarity <= 1e-12);
    CHECK(vi.contact_breaks.empty());
    const auto unconstrained = solve_E1_fixed(p, C2Function::zero(), f, K, m);
    CHECK(vi.stationarity <= unconstrained.kkt_residual + 1e-12);
}

TEST_CASE("tampered DOF vectors show up as stationarity residuals") {
    const BreakConfig K;
    const Mesh m = build_mesh(16, K);
    const auto sol = solve_E1_fixed(kParams, kDatum, kLoad, K, m);
    Vec dofs = sol.u_r.dofs();
    dofs[dofs.size() / 2] += 0.01;
    SolveReport tampered{PiecewiseDisplacement(m, sol.u_r.dof_map(), dofs), std::nullopt, {}, 0.0, 0, {}, {}};
    VerifyInputs in{ProblemKind::E1, false, kParams, kDatum, kLoad, LoadField::zero(), K, 64, true};
    const auto rep = verify_solution(in, tampered, m);
    CHECK(rep.stationarity >= 1e-4);
}
