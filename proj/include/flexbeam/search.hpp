#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flexbeam/solve.hpp"

namespace flexbeam {

/// Outer-search policy. Exhaustive enumeration is used whenever the number
/// of configurations with at most k_max breaks drawn from the candidate
/// nodes stays under exhaustive_cap; otherwise a greedy local search runs.
struct SearchPolicy {
    std::vector<int> candidate_nodes; ///< empty = all mesh nodes
    int k_max = 4;
    std::int64_t exhaustive_cap = 100000;
    bool refine_positions = false;
    double improve_tol = 1e-12; ///< greedy termination threshold
    double near_tol = 1e-9;     ///< near-optimal reporting window
    SolveOptions solve;
};

enum class SearchCertificate { Exhaustive, Greedy };

inline const char* to_string(SearchCertificate c) {
    return c == SearchCertificate::Exhaustive ? "exhaustive" : "greedy";
}

/// A full problem instance, inner solver selected by kind and constraint.
struct SearchProblem {
    ProblemKind problem = ProblemKind::E1;
    bool constrained = false;
    ModelParams params;
    C2Function w;
    LoadField f_r;
    LoadField f_p;
};

inline SolveReport solve_fixed(const SearchProblem& sp, const BreakConfig& K, const Mesh& m,
                               const SolveOptions& opt = {}) {
    switch (sp.problem) {
    case ProblemKind::E1:
        return sp.constrained ? solve_E1_obstacle(sp.params, sp.w, sp.f_r, K, m, opt)
                              : solve_E1_fixed(sp.params, sp.w, sp.f_r, K, m);
    case ProblemKind::F1:
        return sp.constrained ? solve_F1_obstacle(sp.params, sp.w, sp.f_r, sp.f_p, K, m, opt)
                              : solve_F1_fixed(sp.params, sp.w, sp.f_r, sp.f_p, K, m);
    case ProblemKind::G1:
        return solve_G1_fixed(sp.params, sp.w, sp.f_r, sp.f_p, K, m, opt);
    }
    throw Error("unknown problem kind");
}

struct SearchResult {
    BreakConfig best;
    SolveReport report;
    std::int64_t explored = 0;
    SearchCertificate certificate = SearchCertificate::Exhaustive;
    std::vector<BreakConfig> near_optimal; ///< all explored configs within near_tol of best
};

namespace detail {

inline std::vector<BreakKind> kinds_for(ProblemKind problem) {
    if (problem == ProblemKind::G1) return {BreakKind::Hinge};
    return {BreakKind::Crack, BreakKind::Crease};
}

inline std::int64_t count_configs(int n_nodes, int k_max, int n_kinds, std::int64_t cap) {
    std::int64_t total = 0;
    for (int k = 0; k <= k_max; ++k) {
        double c = 1.0;
        for (int i = 0; i < k; ++i) c = c * (n_nodes - i) / (i + 1);
        for (int i = 0; i < k; ++i) c *= n_kinds;
        if (c > static_cast<double>(cap) * 4.0) return cap * 4;
        total += static_cast<std::int64_t>(c + 0.5);
        if (total > cap * 4) return cap * 4;
    }
    return total;
}

struct ConfigEval {
    BreakConfig config;
    double energy = 0.0;
};

class EnergyCache {
public:
    double eval(const SearchProblem& sp, const Mesh& base, const BreakConfig& K, const SolveOptions& opt,
                std::int64_t& explored) {
        const std::string key = K.describe();
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        ++explored;
        const double e = solve_fixed(sp, K, with_breaks(base, K), opt).energy.total;
        cache_.emplace(key, e);
        return e;
    }

private:
    std::map<std::string, double> cache_;
};

} // namespace detail

/// Minimises over break configurations with breaks at candidate mesh nodes,
/// trading inner-solve energy against the release penalties. Exhaustive
/// when the candidate count allows, greedy single-move descent otherwise;
/// lexicographically smallest configuration wins exact ties.
inline SearchResult search(const SearchProblem& sp, const Mesh& m, const SearchPolicy& policy) {
    validate_params(sp.params, sp.problem);
    std::vector<int> cands = policy.candidate_nodes;
    if (cands.empty()) {
        cands.resize(static_cast<size_t>(m.num_nodes()));
        for (int i = 0; i < m.num_nodes(); ++i) cands[static_cast<size_t>(i)] = i;
    }
    const std::vector<BreakKind> kinds = detail::kinds_for(sp.problem);
    const std::int64_t n_configs = detail::count_configs(static_cast<int>(cands.size()), policy.k_max,
                                                         static_cast<int>(kinds.size()), policy.exhaustive_cap);

    detail::EnergyCache cache;
    std::int64_t explored = 0;
    std::vector<detail::ConfigEval> near;
    BreakConfig best_cfg;
    double best_e = cache.eval(sp, m, best_cfg, policy.solve, explored);
    near.push_back({best_cfg, best_e});

    auto consider = [&](const BreakConfig& K) {
        const double e = cache.eval(sp, m, K, policy.solve, explored);
        if (e < best_e || (e == best_e && K < best_cfg)) {
            best_e = std::min(best_e, e);
            best_cfg = K;
        }
        if (e <= best_e + policy.near_tol) near.push_back({K, e});
        return e;
    };

    SearchCertificate certificate;
    if (n_configs <= policy.exhaustive_cap) {
        certificate = SearchCertificate::Exhaustive;
        // enumerate combinations of candidate nodes with kind assignments
        std::vector<Break> cur;
        auto rec = [&](auto&& self, size_t start, int remaining) -> void {
            if (remaining == 0) return;
            for (size_t ci = start; ci < cands.size(); ++ci) {
                const double x = m.node(cands[ci]);
                for (BreakKind kind : kinds) {
                    cur.push_back({x, kind});
                    std::vector<Break> items = cur;
                    consider(BreakConfig(std::move(items)));
                    self(self, ci + 1, remaining - 1);
                    cur.pop_back();
                }
            }
        };
        rec(rec, 0, policy.k_max);
    } else {
        certificate = SearchCertificate::Greedy;
        // single-move descent: add, remove, relabel, shift one break
        while (true) {
            const BreakConfig current = best_cfg;
            const double current_e = best_e;
            std::vector<BreakConfig> moves;
            std::vector<char> occupied(static_cast<size_t>(m.num_nodes()), 0);
            for (const Break& b : current.items()) {
                const int node = m.node_at(b.x);
                if (node >= 0) occupied[static_cast<size_t>(node)] = 1;
            }
            if (static_cast<int>(current.size()) < policy.k_max) {
                for (int node : cands) {
                    if (occupied[static_cast<size_t>(node)]) continue;
                    for (BreakKind kind : kinds) {
                        std::vector<Break> items = current.items();
                        items.push_back({m.node(node), kind});
                        moves.emplace_back(std::move(items));
                    }
                }
            }
            for (size_t i = 0; i < current.size(); ++i) {
                { // remove
                    std::vector<Break> items = current.items();
                    items.erase(items.begin() + static_cast<std::ptrdiff_t>(i));
                    moves.emplace_back(std::move(items));
                }
                for (BreakKind kind : kinds) { // relabel
                    if (kind == current.items()[i].kind) continue;
                    std::vector<Break> items = current.items();
                    items[i].kind = kind;
                    moves.emplace_back(std::move(items));
                }
                // shift to the adjacent candidate nodes
                const int node = m.node_at(current.items()[i].x);
                auto pos = std::find(cands.begin(), cands.end(), node);
                if (pos != cands.end()) {
                    for (int delta : {-1, +1}) {
                        auto q = pos + delta;
                        if (q < cands.begin() || q >= cands.end()) continue;
                        if (occupied[static_cast<size_t>(*q)]) continue;
                        std::vector<Break> items = current.items();
                        items[i].x = m.node(*q);
                        moves.emplace_back(std::move(items));
                    }
                }
            }
            for (const BreakConfig& K : moves) consider(K);
            if (best_e >= current_e - policy.improve_tol) {
                best_cfg = current;  // no strict improvement: stay
                best_e = current_e;
                break;
            }
        }
    }

    // final near-optimal list against the final best
    std::vector<BreakConfig> near_final;
    for (const auto& ce : near)
        if (ce.energy <= best_e + policy.near_tol &&
            std::find(near_final.begin(), near_final.end(), ce.config) == near_final.end())
            near_final.push_back(ce.config);
    std::sort(near_final.begin(), near_final.end());

    SearchResult out{best_cfg, solve_fixed(sp, best_cfg, with_breaks(m, best_cfg), policy.solve), explored,
                     certificate, std::move(near_final)};
    return out;
}

/// Continuous refinement of the break positions found by `search`:
/// golden-section search of each interior break location within its two
/// neighbouring cells, re-meshing and re-solving; energy never increases.
inline SearchResult refine_positions(const SearchProblem& sp, const Mesh& base, const SearchPolicy& policy,
                                     const SearchResult& coarse) {
    const double gold = (std::sqrt(5.0) - 1.0) / 2.0;
    const int n0 = base.num_elements();
    std::vector<Break> items = coarse.best.items();
    double best_e = coarse.report.energy.total;
    std::int64_t explored = coarse.explored;
    const double h0 = (base.b() - base.a()) / n0;

    auto energy_at = [&](const std::vector<Break>& cfg) {
        ++explored;
        BreakConfig K(cfg);
        return solve_fixed(sp, K, build_mesh(n0, K, base.a(), base.b()), policy.solve).energy.total;
    };

    for (int pass = 0; pass < 20; ++pass) {
        bool improved = false;
        for (size_t i = 0; i < items.size(); ++i) {
            const double x0 = items[i].x;
            if (x0 <= base.a() + 1e-12 || x0 >= base.b() - 1e-12) continue; // endpoint breaks stay
            double lo = std::max(x0 - h0, base.a() + 1e-9);
            double hi = std::min(x0 + h0, base.b() - 1e-9);
            if (i > 0) lo = std::max(lo, items[i - 1].x + 1e-6);
            if (i + 1 < items.size()) hi = std::min(hi, items[i + 1].x - 1e-6);
            if (hi - lo < 1e-9) continue;

            double t_best = x0, e_best = best_e;
            auto probe = [&](double t) {
                std::vector<Break> cfg = items;
                cfg[i].x = t;
                const double e = energy_at(cfg);
                if (e < e_best) {
                    e_best = e;
                    t_best = t;
                }
                return e;
            };
            double c = hi - gold * (hi - lo);
            double d = lo + gold * (hi - lo);
            double fc = probe(c), fd = probe(d);
            while (hi - lo > 1e-6) {
                if (fc < fd) {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - gold * (hi - lo);
                    fc = probe(c);
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + gold * (hi - lo);
                    fd = probe(d);
                }
            }
            if (e_best < best_e - 0.0) {
                items[i].x = t_best;
                best_e = e_best;
                improved = true;
            }
        }
        if (!improved) break;
    }

    BreakConfig K(items);
    SearchResult out{K, solve_fixed(sp, K, build_mesh(n0, K, base.a(), base.b()), policy.solve), explored,
                     coarse.certificate, coarse.near_optimal};
    return out;
}

} // namespace flexbeam
