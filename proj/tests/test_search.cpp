#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "flexbeam/search.hpp"
#include "flexbeam/verify.hpp"
#include "oracles.hpp"

using namespace flexbeam;

namespace {

/// C2 ramp: slope transitions from 0 to `slope` around x = c over width eps.
C2Function ramp(double slope, double c, double eps) {
    return C2Function([=](double x) {
        const double t = (x - c) / eps;
        // softplus, evaluated stably on both tails
        const double sp = t > 30.0 ? t : std::log1p(std::exp(std::min(t, 30.0)));
        const double sig = 1.0 / (1.0 + std::exp(-t));
        Jet2 j;
        j.v = slope * eps * sp;
        j.d1 = slope * sig;
        j.d2 = slope / eps * sig * (1.0 - sig);
        return j;
    });
}

SearchProblem ramp_instance(double beta) {
    SearchProblem sp;
    sp.problem = ProblemKind::E1;
    sp.params.eta = 1.0;
    sp.params.mu = 500.0;
    sp.params.beta = beta;
    sp.params.alpha = 1.5 * beta;
    sp.w = ramp(1.0, 0.1, 0.05);
    sp.f_r = LoadField::zero();
    sp.f_p = LoadField::zero();
    return sp;
}

} // namespace

TEST_CASE("a release price above the elastic budget keeps the beam unbroken") {
    SearchProblem sp;
    sp.problem = ProblemKind::E1;
    sp.w = C2Function::zero();
    sp.f_r = LoadField::constant(3.0);
    const Mesh m = build_mesh(16, BreakConfig{});
    const double e0 = solve_E1_fixed(sp.params, sp.w, sp.f_r, BreakConfig{}, m).energy.total;
    sp.params.beta = 10.0 * std::fabs(e0) + 1.0;
    sp.params.alpha = 2.0 * sp.params.beta;
    SearchPolicy policy;
    policy.k_max = 2;
    const SearchResult res = search(sp, m, policy);
    CHECK(res.best.empty());
    CHECK(res.certificate == SearchCertificate::Exhaustive);
    CHECK(res.report.energy.total == Catch::Approx(e0).margin(1e-12));
}

TEST_CASE("steep slope ramp nucleates one crease near its centre") {
    const SearchProblem sp = ramp_instance(0.03);
    const Mesh m = build_mesh(32, BreakConfig{});
    SearchPolicy policy;
    policy.k_max = 2;
    const SearchResult res = search(sp, m, policy);
    CHECK(res.certificate == SearchCertificate::Exhaustive);
    REQUIRE(res.best.size() == 1);
    CHECK(res.best.items()[0].kind == BreakKind::Crease);
    CHECK(std::fabs(res.best.items()[0].x - 0.1) <= 2.0 / 32 + 1e-12); // within one cell

    // greedy never beats the exhaustive optimum; here it attains it
    SearchPolicy greedy_policy = policy;
    greedy_policy.exhaustive_cap = 1;
    const SearchResult greedy = search(sp, m, greedy_policy);
    CHECK(greedy.certificate == SearchCertificate::Greedy);
    CHECK(greedy.report.energy.total >= res.report.energy.total - 1e-12);
    CHECK(greedy.report.energy.total == Catch::Approx(res.report.energy.total).margin(1e-10));
}

TEST_CASE("search result never exceeds the unbroken energy") {
    SearchProblem sp;
    sp.problem = ProblemKind::F1;
    sp.params.beta = 0.05;
    sp.params.alpha = 0.08;
    sp.w = C2Function::polynomial({0.0, 0.1});
    sp.f_r = LoadField::constant(2.0);
    sp.f_p = LoadField::constant(-1.0);
    const Mesh m = build_mesh(12, BreakConfig{});
    const double e0 = solve_F1_fixed(sp.params, sp.w, sp.f_r, sp.f_p, BreakConfig{}, m).energy.total;
    SearchPolicy policy;
    policy.k_max = 1;
    const SearchResult res = search(sp, m, policy);
    CHECK(res.report.energy.total <= e0 + 1e-12);
    CHECK(std::find(res.near_optimal.begin(), res.near_optimal.end(), res.best) != res.near_optimal.end());
}

TEST_CASE("elastic-plastic search proposes hinges only") {
    SearchProblem sp;
    sp.problem = ProblemKind::G1;
    sp.params.beta = 1e-4;
    sp.params.sigma = 1e-3;
    sp.w = ramp(1.0, 0.0, 0.05);
    sp.f_r = LoadField::zero();
    sp.f_p = LoadField::zero();
    sp.params.mu = 500.0;
    const Mesh m = build_mesh(16, BreakConfig{});
    SearchPolicy policy;
    policy.k_max = 1;
    const SearchResult res = search(sp, m, policy);
    for (const Break& b : res.best.items()) CHECK(b.kind == BreakKind::Hinge);
}

TEST_CASE("random configurations never beat the exhaustive optimum") {
    const SearchProblem sp = ramp_instance(5e-4);
    const Mesh m = build_mesh(16, BreakConfig{});
    SearchPolicy policy;
    policy.k_max = 2;
    const SearchResult res = search(sp, m, policy);
    std::mt19937 rng(123);
    std::uniform_int_distribution<int> node_pick(0, m.num_nodes() - 1);
    std::uniform_int_distribution<int> kind_pick(0, 1);
    std::uniform_int_distribution<int> count_pick(0, 2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Break> items;
        const int k = count_pick(rng);
        std::set<int> used;
        while (static_cast<int>(items.size()) < k) {
            const int node = node_pick(rng);
            if (!used.insert(node).second) continue;
            items.push_back({m.node(node), kind_pick(rng) == 0 ? BreakKind::Crack : BreakKind::Crease});
        }
        const BreakConfig K(items);
        const double e = solve_fixed(sp, K, with_breaks(m, K)).energy.total;
        CHECK(e >= res.report.energy.total - 1e-12);
    }
}

TEST_CASE("optimal break count is non-increasing in the release price") {
    const Mesh m = build_mesh(16, BreakConfig{});
    SearchPolicy policy;
    policy.k_max = 2;
    size_t prev = 100;
    for (double beta : {0.01, 0.1, 1.0, 10.0}) {
        const SearchProblem sp = ramp_instance(beta);
        const SearchResult res = search(sp, m, policy);
        CHECK(res.best.size() <= prev);
        prev = res.best.size();
    }
}

TEST_CASE("position refinement is monotone and finds the off-node optimum") {
    const SearchProblem sp = ramp_instance(1e-3);
    const Mesh m = build_mesh(16, BreakConfig{});
    SearchPolicy policy;
    policy.k_max = 1;
    const SearchResult coarse = search(sp, m, policy);
    REQUIRE(coarse.best.size() == 1);
    const SearchResult fine = refine_positions(sp, m, policy, coarse);
    CHECK(fine.report.energy.total <= coarse.report.energy.total + 1e-15);

    // dense scan over 512 candidate positions
    double best_e = std::numeric_limits<double>::infinity(), best_t = 0.0;
    for (int k = 1; k < 512; ++k) {
        const double t = -1.0 + 2.0 * k / 512;
        std::vector<Break> items = coarse.best.items();
        items[0].x = t;
        const BreakConfig K(items);
        const double e = solve_fixed(sp, K, build_mesh(16, K)).energy.total;
        if (e < best_e) {
            best_e = e;
            best_t = t;
        }
    }
    CHECK(std::fabs(fine.best.items()[0].x - best_t) <= 2.0 / 512 + 1e-9);
}

TEST_CASE("symmetric instances refine to the symmetric position") {
    SearchProblem sp;
    sp.problem = ProblemKind::E1;
    sp.params.beta = 0.01;
    sp.params.alpha = 0.015;
    sp.w = C2Function::zero();
    sp.f_r = LoadField::constant(2.0); // even load
    sp.f_p = LoadField::zero();
    const Mesh m = build_mesh(16, BreakConfig{});
    SearchPolicy policy;
    const BreakConfig K0(std::vector<Break>{{0.0, BreakKind::Crease}});
    SearchResult seeded{K0, solve_fixed(sp, K0, with_breaks(m, K0)), 1, SearchCertificate::Exhaustive, {}};
    const SearchResult fine = refine_positions(sp, m, policy, seeded);
    CHECK(std::fabs(fine.best.items()[0].x - 0.0) <= 1e-6);
    CHECK(fine.report.energy.total <= seeded.report.energy.total + 1e-15);
}

TEST_CASE("a true uniqueness threshold forces the unbroken optimum") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> coeff(-0.1, 0.1);
    SearchPolicy policy;
    policy.k_max = 2;
    int verified = 0;
    for (int trial = 0; trial < 40 && verified < 10; ++trial) {
        SearchProblem sp;
        sp.problem = ProblemKind::E1;
        sp.params.beta = 0.3;
        sp.params.alpha = 0.5;
        sp.w = C2Function::polynomial({coeff(rng), coeff(rng), coeff(rng)});
        sp.f_r = LoadField([a = coeff(rng), b = coeff(rng)](double x) { return a + b * x; });
        const Mesh m = build_mesh(16, BreakConfig{});
        const auto th =
            check_threshold(ProblemKind::E1, sp.params, sp.w, sp.f_r, LoadField::zero(), m, 64);
        if (!th.holds || th.margin < 1e-6) continue;
        ++verified;
        const SearchResult res = search(sp, m, policy);
        CHECK(res.best.empty());
    }
    CHECK(verified == 10);
}
