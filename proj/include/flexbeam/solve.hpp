#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "flexbeam/energy.hpp"
#include "flexbeam/fem.hpp"
#include "flexbeam/model.hpp"

namespace flexbeam {

struct SolveOptions {
    double tol = 1e-9;
    int max_iterations = 500;
};

/// Result of an inner (fixed break set) minimisation.
struct SolveReport {
    PiecewiseDisplacement u_r;
    std::optional<PiecewiseDisplacement> u_p;
    EnergyBreakdown energy;
    double kkt_residual = 0.0;
    int iterations = 0;
    std::vector<int> active_set;     ///< nodes in contact (obstacle solves)
    std::vector<double> hinge_jumps; ///< slope jumps per hinge (G1)
};

namespace detail {

inline void require_mesh_matches(const Mesh& m, const BreakConfig& K) {
    const BreakConfig& mk = m.breaks();
    if (mk.size() != K.size()) throw MeshMismatch("mesh break set disagrees with the requested one");
    for (size_t i = 0; i < K.size(); ++i)
        if (std::fabs(mk.items()[i].x - K.items()[i].x) > 1e-14 || mk.items()[i].kind != K.items()[i].kind)
            throw MeshMismatch("mesh break set disagrees with the requested one at x=" +
                               std::to_string(K.items()[i].x));
}

inline SpMat block2x2(const SpMat& a, const SpMat& b, const SpMat& c, const SpMat& d) {
    const int n1 = static_cast<int>(a.rows()), n2 = static_cast<int>(d.rows());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(a.nonZeros() + b.nonZeros() + c.nonZeros() + d.nonZeros()));
    auto add = [&trip](const SpMat& m, int ro, int co) {
        for (int k = 0; k < m.outerSize(); ++k)
            for (SpMat::InnerIterator it(m, k); it; ++it)
                trip.emplace_back(static_cast<int>(it.row()) + ro, static_cast<int>(it.col()) + co, it.value());
    };
    add(a, 0, 0);
    add(b, 0, n1);
    add(c, n1, 0);
    add(d, n1, n1);
    SpMat H(n1 + n2, n1 + n2);
    H.setFromTriplets(trip.begin(), trip.end());
    return H;
}

/// Assembled stationarity system H u = g for the smooth part of an energy,
/// plus the clamp constraints. For pair problems the plate DOFs follow the
/// reinforcement DOFs.
struct AssembledProblem {
    DofMap dm_r;
    std::optional<DofMap> dm_p;
    SpMat H;
    Vec g;
    std::vector<Constraint> clamps;
    int n_r = 0;

    std::pair<PiecewiseDisplacement, std::optional<PiecewiseDisplacement>> split(const Mesh& m,
                                                                                 const Vec& u) const {
        PiecewiseDisplacement ur(m, dm_r, u.head(n_r));
        if (!dm_p) return {std::move(ur), std::nullopt};
        return {std::move(ur), PiecewiseDisplacement(m, *dm_p, u.tail(u.size() - n_r))};
    }
};

inline AssembledProblem assemble_E1(const ModelParams& p, const C2Function& w, const LoadField& f,
                                    const Mesh& m) {
    AssembledProblem a{DofMap(m, true), std::nullopt, {}, {}, {}, 0};
    a.n_r = a.dm_r.size();
    const SpMat A = assemble_bending(m, a.dm_r);
    const SpMat M = assemble_mass(m, a.dm_r);
    a.H = 2.0 * p.eta * A + 2.0 * p.mu * M;
    a.g = assemble_load(m, a.dm_r, f) + 2.0 * p.mu * assemble_load(m, a.dm_r, w);
    a.clamps = apply_clamp(m, a.dm_r, w);
    return a;
}

inline AssembledProblem assemble_pair(const ModelParams& p, const C2Function& w, const LoadField& f_r,
                                      const LoadField& f_p, const Mesh& m) {
    AssembledProblem a{DofMap(m, true), DofMap(m, false), {}, {}, {}, 0};
    a.n_r = a.dm_r.size();
    const DofMap& dp = *a.dm_p;
    const SpMat A_r = assemble_bending(m, a.dm_r);
    const SpMat M_rr = assemble_mass(m, a.dm_r);
    const SpMat M_rp = assemble_mixed_mass(m, a.dm_r, dp);
    const SpMat M_pp = assemble_mass(m, dp);
    const SpMat A_p = assemble_bending(m, dp);
    a.H = block2x2(SpMat(2.0 * p.eta * A_r + 2.0 * p.mu * M_rr), SpMat(-2.0 * p.mu * M_rp),
                   SpMat(-2.0 * p.mu * M_rp.transpose()), SpMat(2.0 * p.gamma * A_p + 2.0 * p.mu * M_pp));
    a.g = Vec(a.n_r + dp.size());
    a.g.head(a.n_r) = assemble_load(m, a.dm_r, f_r);
    a.g.tail(dp.size()) = assemble_load(m, dp, f_p);
    a.clamps = apply_clamp(m, a.dm_r, w);
    for (const Constraint& c : apply_clamp(m, dp, w)) a.clamps.push_back({c.dof + a.n_r, c.value});
    return a;
}

/// Stationarity residual of the smooth part: plain max-norm on free DOFs,
/// except that a jump-carrying slope DOF and its partner appear only
/// through the sum of their residuals (the individual entries carry the
/// plastic subgradient of size sigma).
inline double smooth_residual(const AssembledProblem& a, const Vec& u, const std::vector<int>& jump_dofs,
                              const std::vector<int>& jump_partners) {
    std::vector<char> skip(static_cast<size_t>(u.size()), 0);
    for (const Constraint& c : a.clamps) skip[static_cast<size_t>(c.dof)] = 1;
    for (int d : jump_dofs) skip[static_cast<size_t>(d)] = 1;
    for (int d : jump_partners)
        if (d >= 0) skip[static_cast<size_t>(d)] = 1;
    const Vec r = residual_extended(a.H, u, a.g);
    double worst = 0.0;
    for (int i = 0; i < r.size(); ++i)
        if (!skip[static_cast<size_t>(i)]) worst = std::max(worst, std::fabs(r[i]));
    for (size_t b = 0; b < jump_dofs.size(); ++b)
        if (jump_partners[b] >= 0)
            worst = std::max(worst, std::fabs(r[jump_dofs[b]] + r[jump_partners[b]]));
    return worst / (1.0 + a.g.cwiseAbs().maxCoeff());
}

} // namespace detail

// ============================================================================
// Fixed-break solves (SPD linear systems)
// ============================================================================

/// Minimises E1 for a fixed break configuration. The system stays SPD for
/// any break set since mu > 0.
inline SolveReport solve_E1_fixed(const ModelParams& p, const C2Function& w, const LoadField& f,
                                  const BreakConfig& K, const Mesh& m) {
    validate_params(p, ProblemKind::E1);
    validate_breaks(K, ProblemKind::E1);
    detail::require_mesh_matches(m, K);
    auto a = detail::assemble_E1(p, w, f, m);
    ReducedQuadratic rq(a.H, a.g, fix_dofs(a.dm_r.size(), a.clamps));
    Vec u = rq.solve();
    SolveReport rep{PiecewiseDisplacement(m, a.dm_r, u), std::nullopt, {}, 0.0, 1, {}, {}};
    rep.kkt_residual = kkt_residual(a.H, a.g, u, a.clamps);
    rep.energy = eval_energy(ProblemKind::E1, p, w, f, K, rep.u_r);
    return rep;
}

/// Minimises F1 for a fixed break configuration of the reinforcement; the
/// plate field is unbroken and fully clamped.
inline SolveReport solve_F1_fixed(const ModelParams& p, const C2Function& w, const LoadField& f_r,
                                  const LoadField& f_p, const BreakConfig& K, const Mesh& m) {
    validate_params(p, ProblemKind::F1);
    validate_breaks(K, ProblemKind::F1);
    detail::require_mesh_matches(m, K);
    auto a = detail::assemble_pair(p, w, f_r, f_p, m);
    ReducedQuadratic rq(a.H, a.g, fix_dofs(static_cast<int>(a.H.rows()), a.clamps));
    Vec u = rq.solve();
    auto [ur, up] = a.split(m, u);
    SolveReport rep{std::move(ur), std::move(up), {}, 0.0, 1, {}, {}};
    rep.kkt_residual = kkt_residual(a.H, a.g, u, a.clamps);
    rep.energy = eval_energy(ProblemKind::F1, p, w, f_r, f_p, K, rep.u_r, &*rep.u_p);
    return rep;
}

// ============================================================================
// G1: quadratic plus l1-priced slope jumps at hinges
// ============================================================================

/// Minimises G1 for a fixed hinge set: exact quadratic solves alternate
/// with one-dimensional soft-threshold updates of the hinge jumps and an
/// active-pattern polish solve; optimality is certified by the subgradient
/// condition on every jump.
inline SolveReport solve_G1_fixed(const ModelParams& p, const C2Function& w, const LoadField& f_r,
                                  const LoadField& f_p, const BreakConfig& K, const Mesh& m,
                                  const SolveOptions& opt = {}) {
    validate_params(p, ProblemKind::G1);
    validate_breaks(K, ProblemKind::G1);
    detail::require_mesh_matches(m, K);
    auto a = detail::assemble_pair(p, w, f_r, f_p, m);
    const int n = static_cast<int>(a.H.rows());
    const int nj = static_cast<int>(K.size());

    // u = S y + D j + t: at each hinge one slope DOF is carried by the jump
    // variable (against the datum slope at a clamped endpoint).
    std::vector<int> jump_dof(static_cast<size_t>(nj));
    std::vector<double> jump_sign(static_cast<size_t>(nj), 1.0);
    std::vector<int> partner(static_cast<size_t>(nj), -1);
    Vec t = Vec::Zero(n);
    for (int b = 0; b < nj; ++b) {
        const int node = m.node_of_break(b);
        const NodeDofs& nd = a.dm_r.at_node(node);
        if (node == 0) {
            jump_dof[static_cast<size_t>(b)] = nd.s_left;
            t[nd.s_left] = w.deriv(m.a());
        } else if (node == m.num_nodes() - 1) {
            jump_dof[static_cast<size_t>(b)] = nd.s_left;
            jump_sign[static_cast<size_t>(b)] = -1.0;
            t[nd.s_left] = w.deriv(m.b());
        } else {
            jump_dof[static_cast<size_t>(b)] = nd.s_right;
            partner[static_cast<size_t>(b)] = nd.s_left;
        }
    }

    std::vector<char> is_jump_dof(static_cast<size_t>(n), 0);
    for (int d : jump_dof) is_jump_dof[static_cast<size_t>(d)] = 1;
    std::vector<char> fixed(static_cast<size_t>(n), 0);
    for (const Constraint& c : a.clamps) {
        fixed[static_cast<size_t>(c.dof)] = 1;
        t[c.dof] = c.value;
    }
    std::vector<int> ycol(static_cast<size_t>(n), -1);
    int ny = 0;
    for (int i = 0; i < n; ++i)
        if (!fixed[static_cast<size_t>(i)] && !is_jump_dof[static_cast<size_t>(i)])
            ycol[static_cast<size_t>(i)] = ny++;

    std::vector<Eigen::Triplet<double>> st;
    for (int i = 0; i < n; ++i)
        if (ycol[static_cast<size_t>(i)] >= 0) st.emplace_back(i, ycol[static_cast<size_t>(i)], 1.0);
    for (int b = 0; b < nj; ++b)
        if (partner[static_cast<size_t>(b)] >= 0)
            st.emplace_back(jump_dof[static_cast<size_t>(b)],
                            ycol[static_cast<size_t>(partner[static_cast<size_t>(b)])], 1.0);
    SpMat S(n, ny);
    S.setFromTriplets(st.begin(), st.end());

    SpMat D(n, nj);
    {
        std::vector<Eigen::Triplet<double>> dt;
        for (int b = 0; b < nj; ++b)
            dt.emplace_back(jump_dof[static_cast<size_t>(b)], b, jump_sign[static_cast<size_t>(b)]);
        D.setFromTriplets(dt.begin(), dt.end());
    }

    ReducedQuadratic rq_y(a.H, a.g, VarMap{S, t});
    const Eigen::MatrixXd W = nj > 0 ? Eigen::MatrixXd(SpMat(SpMat(S.transpose()) * (a.H * D)))
                                     : Eigen::MatrixXd(ny, 0);
    Vec kappa(nj);
    for (int b = 0; b < nj; ++b) {
        const Vec db = Vec(D.col(b));
        kappa[b] = db.dot(a.H * db);
    }

    const double scale = 1.0 + a.g.cwiseAbs().maxCoeff();
    Vec j = Vec::Zero(nj);
    Vec u;
    int iterations = 0;

    auto solve_y = [&](const Vec& jumps) {
        if (nj > 0)
            u = rq_y.solve(Vec(-W * jumps)) + Vec(D * jumps);
        else
            u = rq_y.solve();
    };
    auto subgrad_violation = [&]() {
        const Vec r = residual_extended(a.H, u, a.g);
        double worst = 0.0;
        for (int b = 0; b < nj; ++b) {
            const double q = D.col(b).dot(r);
            if (j[b] == 0.0)
                worst = std::max(worst, std::max(0.0, std::fabs(q) - p.sigma));
            else
                worst = std::max(worst, std::fabs(q + p.sigma * (j[b] > 0 ? 1.0 : -1.0)));
        }
        return worst / scale;
    };

    solve_y(j);
    while (true) {
        if (++iterations > opt.max_iterations)
            throw MaxIterations("G1 jump iteration exceeded " + std::to_string(opt.max_iterations));
        for (int b = 0; b < nj; ++b) {
            const double q = D.col(b).dot(a.H * u - a.g);
            const double jhat = j[b] - q / kappa[b];
            const double jnew = std::copysign(std::max(0.0, std::fabs(jhat) - p.sigma / kappa[b]), jhat);
            if (jnew != j[b]) {
                u += Vec(D.col(b)) * (jnew - j[b]);
                j[b] = jnew;
            }
        }
        solve_y(j);
        // polish: fix the active pattern and solve its exact stationarity
        std::vector<int> active;
        for (int b = 0; b < nj; ++b)
            if (j[b] != 0.0) active.push_back(b);
        {
            const int na = static_cast<int>(active.size());
            std::vector<Eigen::Triplet<double>> zt;
            for (int k = 0; k < S.outerSize(); ++k)
                for (SpMat::InnerIterator it(S, k); it; ++it)
                    zt.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
            for (int kidx = 0; kidx < na; ++kidx) {
                const int b = active[static_cast<size_t>(kidx)];
                zt.emplace_back(jump_dof[static_cast<size_t>(b)], ny + kidx, jump_sign[static_cast<size_t>(b)]);
            }
            SpMat Z(n, ny + na);
            Z.setFromTriplets(zt.begin(), zt.end());
            ReducedQuadratic rq_z(a.H, a.g, VarMap{Z, t});
            Vec extra = Vec::Zero(ny + na);
            for (int kidx = 0; kidx < na; ++kidx)
                extra[ny + kidx] = -p.sigma * (j[active[static_cast<size_t>(kidx)]] > 0 ? 1.0 : -1.0);
            const Vec u_try = rq_z.solve(extra);
            bool ok = true;
            Vec j_try = Vec::Zero(nj);
            for (int kidx = 0; kidx < na; ++kidx) {
                const int b = active[static_cast<size_t>(kidx)];
                const int jd = jump_dof[static_cast<size_t>(b)];
                const double base = partner[static_cast<size_t>(b)] >= 0 ? u_try[partner[static_cast<size_t>(b)]]
                                                                         : t[jd];
                j_try[b] = jump_sign[static_cast<size_t>(b)] * (u_try[jd] - base);
                if (p.sigma > 0.0 && j_try[b] * (j[b] > 0 ? 1.0 : -1.0) < 0.0) ok = false;
            }
            if (ok) {
                u = u_try;
                j = j_try;
            }
        }
        if (subgrad_violation() <= opt.tol) break;
    }

    auto [ur, up] = a.split(m, u);
    SolveReport rep{std::move(ur), std::move(up), {}, 0.0, iterations, {}, {}};
    rep.hinge_jumps.assign(j.data(), j.data() + nj);
    rep.kkt_residual = std::max(subgrad_violation(), detail::smooth_residual(a, u, jump_dof, partner));
    rep.energy = eval_energy(ProblemKind::G1, p, w, f_r, f_p, K, rep.u_r, &*rep.u_p);
    return rep;
}

// ============================================================================
// Obstacle variants: primal-dual active set
// ============================================================================

namespace detail {

struct IneqRow {
    int pos = -1; // constrained DOF
    int neg = -1; // subtracted DOF, or -1 for a plain bound
    double rhs = 0.0;
    int node = -1;
};

struct PdasResult {
    Vec u;
    Vec lambda;
    std::vector<int> active;
    int iterations = 0;
};

/// Non-interpenetration rows for E1: every free value DOF is bounded below
/// by the datum at its node (both traces at cracks, the inner trace at
/// released endpoints).
inline std::vector<IneqRow> obstacle_rows_E1(const AssembledProblem& a, const Mesh& m, const C2Function& w) {
    std::vector<char> clamped(static_cast<size_t>(a.dm_r.size()), 0);
    for (const Constraint& c : a.clamps) clamped[static_cast<size_t>(c.dof)] = 1;
    std::vector<IneqRow> rows;
    for (int i = 0; i < m.num_nodes(); ++i) {
        const NodeDofs& nd = a.dm_r.at_node(i);
        const double wx = w.value(m.node(i));
        if (!clamped[static_cast<size_t>(nd.v_left)]) rows.push_back({nd.v_left, -1, wx, i});
        if (nd.v_right != nd.v_left && !clamped[static_cast<size_t>(nd.v_right)])
            rows.push_back({nd.v_right, -1, wx, i});
    }
    return rows;
}

/// Non-interpenetration rows for F1: reinforcement value DOFs bounded below
/// by the plate value at the same node.
inline std::vector<IneqRow> obstacle_rows_F1(const AssembledProblem& a, const Mesh& m) {
    std::vector<char> clamped(static_cast<size_t>(a.H.rows()), 0);
    for (const Constraint& c : a.clamps) clamped[static_cast<size_t>(c.dof)] = 1;
    std::vector<IneqRow> rows;
    for (int i = 0; i < m.num_nodes(); ++i) {
        const NodeDofs& ndr = a.dm_r.at_node(i);
        const int pdof = a.n_r + a.dm_p->at_node(i).v_left;
        if (!clamped[static_cast<size_t>(ndr.v_left)]) rows.push_back({ndr.v_left, pdof, 0.0, i});
        if (ndr.v_right != ndr.v_left && !clamped[static_cast<size_t>(ndr.v_right)])
            rows.push_back({ndr.v_right, pdof, 0.0, i});
    }
    return rows;
}

/// Change of variables which fixes clamped DOFs, fixes bound-type active
/// rows, and merges pair-type active rows.
inline VarMap merge_and_fix(int n, const std::vector<Constraint>& clamps, const std::vector<IneqRow>& rows,
                            const std::vector<int>& active) {
    std::vector<int> parent(static_cast<size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int i) {
        while (parent[static_cast<size_t>(i)] != i) {
            parent[static_cast<size_t>(i)] = parent[static_cast<size_t>(parent[static_cast<size_t>(i)])];
            i = parent[static_cast<size_t>(i)];
        }
        return i;
    };
    std::vector<std::pair<int, double>> fixes;
    for (const Constraint& c : clamps) fixes.emplace_back(c.dof, c.value);
    for (int idx : active) {
        const IneqRow& r = rows[static_cast<size_t>(idx)];
        if (r.neg < 0)
            fixes.emplace_back(r.pos, r.rhs);
        else
            parent[static_cast<size_t>(find(r.pos))] = find(r.neg);
    }
    std::vector<char> fixed(static_cast<size_t>(n), 0);
    Vec troot = Vec::Zero(n);
    for (auto& [dof, val] : fixes) {
        const int root = find(dof);
        if (fixed[static_cast<size_t>(root)] && troot[root] != val)
            throw InfeasibleClamp("clamp values contradict the unilateral constraint");
        fixed[static_cast<size_t>(root)] = 1;
        troot[root] = val;
    }
    std::vector<int> col(static_cast<size_t>(n), -1);
    int ny = 0;
    for (int i = 0; i < n; ++i) {
        const int root = find(i);
        if (!fixed[static_cast<size_t>(root)] && col[static_cast<size_t>(root)] < 0)
            col[static_cast<size_t>(root)] = ny++;
    }
    std::vector<Eigen::Triplet<double>> st;
    Vec t = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        const int root = find(i);
        if (fixed[static_cast<size_t>(root)])
            t[i] = troot[root];
        else
            st.emplace_back(i, col[static_cast<size_t>(root)], 1.0);
    }
    SpMat S(n, ny);
    S.setFromTriplets(st.begin(), st.end());
    return VarMap{std::move(S), std::move(t)};
}

inline PdasResult pdas(const SpMat& H, const Vec& g, const std::vector<Constraint>& clamps,
                       const std::vector<IneqRow>& rows, const SolveOptions& opt) {
    const int n = static_cast<int>(H.rows());
    const int nr = static_cast<int>(rows.size());
    std::vector<int> active;
    std::set<std::vector<int>> seen;
    PdasResult res;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        res.iterations = it;
        ReducedQuadratic rq(H, g, merge_and_fix(n, clamps, rows, active));
        res.u = rq.solve();
        const Vec r = residual_extended(H, res.u, g);
        res.lambda = Vec::Zero(nr);
        std::vector<char> is_active(static_cast<size_t>(nr), 0);
        for (int idx : active) is_active[static_cast<size_t>(idx)] = 1;
        for (int i = 0; i < nr; ++i)
            if (is_active[static_cast<size_t>(i)]) res.lambda[i] = r[rows[static_cast<size_t>(i)].pos];
        std::vector<int> next;
        for (int i = 0; i < nr; ++i) {
            const IneqRow& row = rows[static_cast<size_t>(i)];
            const double gap = res.u[row.pos] - (row.neg >= 0 ? res.u[row.neg] : 0.0) - row.rhs;
            if (res.lambda[i] - gap > 0.0) next.push_back(i);
        }
        if (next == active) {
            res.active = active;
            return res;
        }
        if (!seen.insert(next).second) throw MaxIterations("active-set iteration cycled");
        active = std::move(next);
    }
    throw MaxIterations("active-set iteration exceeded " + std::to_string(opt.max_iterations));
}

/// Max of the Lagrangian stationarity residual and the complementarity
/// violation, relative to the load scale.
inline double obstacle_kkt(const SpMat& H, const Vec& g, const Vec& u, const std::vector<Constraint>& clamps,
                           const std::vector<IneqRow>& rows, const Vec& lambda) {
    Vec r = residual_extended(H, u, g);
    for (size_t i = 0; i < rows.size(); ++i) {
        r[rows[i].pos] -= lambda[static_cast<Eigen::Index>(i)];
        if (rows[i].neg >= 0) r[rows[i].neg] += lambda[static_cast<Eigen::Index>(i)];
    }
    std::vector<char> fixed(static_cast<size_t>(u.size()), 0);
    for (const Constraint& c : clamps) fixed[static_cast<size_t>(c.dof)] = 1;
    double worst = 0.0;
    for (int i = 0; i < r.size(); ++i)
        if (!fixed[static_cast<size_t>(i)]) worst = std::max(worst, std::fabs(r[i]));
    double comp = 0.0;
    for (size_t i = 0; i < rows.size(); ++i) {
        const double gap = u[rows[i].pos] - (rows[i].neg >= 0 ? u[rows[i].neg] : 0.0) - rows[i].rhs;
        comp = std::max(comp, std::fabs(std::min(lambda[static_cast<Eigen::Index>(i)], gap)));
        comp = std::max(comp, std::max(0.0, -lambda[static_cast<Eigen::Index>(i)]));
        comp = std::max(comp, std::max(0.0, -gap));
    }
    return std::max(worst / (1.0 + g.cwiseAbs().maxCoeff()), comp);
}

} // namespace detail

/// Hard-device obstacle problem: E1 under u >= w, enforced node-wise and
/// one-sidedly at break traces.
inline SolveReport solve_E1_obstacle(const ModelParams& p, const C2Function& w, const LoadField& f,
                                     const BreakConfig& K, const Mesh& m, const SolveOptions& opt = {}) {
    validate_params(p, ProblemKind::E1);
    validate_breaks(K, ProblemKind::E1);
    detail::require_mesh_matches(m, K);
    auto a = detail::assemble_E1(p, w, f, m);
    const std::vector<detail::IneqRow> rows = detail::obstacle_rows_E1(a, m, w);
    auto res = detail::pdas(a.H, a.g, a.clamps, rows, opt);
    SolveReport rep{PiecewiseDisplacement(m, a.dm_r, res.u), std::nullopt, {}, 0.0, res.iterations, {}, {}};
    for (int idx : res.active) rep.active_set.push_back(rows[static_cast<size_t>(idx)].node);
    std::sort(rep.active_set.begin(), rep.active_set.end());
    rep.active_set.erase(std::unique(rep.active_set.begin(), rep.active_set.end()), rep.active_set.end());
    rep.kkt_residual = detail::obstacle_kkt(a.H, a.g, res.u, a.clamps, rows, res.lambda);
    rep.energy = eval_energy(ProblemKind::E1, p, w, f, K, rep.u_r);
    return rep;
}

/// Strengthening obstacle problem: F1 under u_r >= u_p node-wise (both
/// traces at cracks).
inline SolveReport solve_F1_obstacle(const ModelParams& p, const C2Function& w, const LoadField& f_r,
                                     const LoadField& f_p, const BreakConfig& K, const Mesh& m,
                                     const SolveOptions& opt = {}) {
    validate_params(p, ProblemKind::F1);
    validate_breaks(K, ProblemKind::F1);
    detail::require_mesh_matches(m, K);
    auto a = detail::assemble_pair(p, w, f_r, f_p, m);
    const std::vector<detail::IneqRow> rows = detail::obstacle_rows_F1(a, m);
    auto res = detail::pdas(a.H, a.g, a.clamps, rows, opt);
    auto [ur, up] = a.split(m, res.u);
    SolveReport rep{std::move(ur), std::move(up), {}, 0.0, res.iterations, {}, {}};
    for (int idx : res.active) rep.active_set.push_back(rows[static_cast<size_t>(idx)].node);
    std::sort(rep.active_set.begin(), rep.active_set.end());
    rep.active_set.erase(std::unique(rep.active_set.begin(), rep.active_set.end()), rep.active_set.end());
    rep.kkt_residual = detail::obstacle_kkt(a.H, a.g, res.u, a.clamps, rows, res.lambda);
    rep.energy = eval_energy(ProblemKind::F1, p, w, f_r, f_p, K, rep.u_r, &*rep.u_p);
    return rep;
}

} // namespace flexbeam
