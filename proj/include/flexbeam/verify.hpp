#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flexbeam/search.hpp"
#include "flexbeam/solve.hpp"

namespace flexbeam {

// ============================================================================
// Poincare constant
// ============================================================================

/// Best constant C in  ||v||^2 <= C ||v''||^2  over fields clamped at both
/// endpoints of (a, b): the reciprocal of the smallest eigenvalue of the
/// clamped bending/mass pencil, computed by inverse iteration with Rayleigh
/// quotients. The discrete value converges to the continuum constant from
/// below and is non-decreasing under nested refinement.
inline double poincare_constant(int n, double a = -1.0, double b = 1.0) {
    if (n < 16) throw Error("poincare_constant requires n >= 16");
    const Mesh m = build_mesh(n, BreakConfig{}, a, b);
    const DofMap dm(m, false);
    const SpMat A = assemble_bending(m, dm);
    const SpMat M = assemble_mass(m, dm);
    const auto clamps = apply_clamp(m, dm, C2Function::zero());
    const VarMap vm = fix_dofs(dm.size(), clamps);
    const SpMat Ar = SpMat(vm.S.transpose()) * A * vm.S;
    const SpMat Mr = SpMat(vm.S.transpose()) * M * vm.S;

    Eigen::SimplicialLDLT<SpMat> ldlt(Ar);
    if (ldlt.info() != Eigen::Success) throw EigenFailure("clamped bending operator is not SPD");

    // The quadratic-form Rayleigh quotient carries cancellation noise of
    // order ||A|| * eps, so the quotient is evaluated through the
    // element-wise integrals instead: sums of squares, full precision. The
    // quotient decreases monotonically along the iteration; stop at
    // stagnation.
    auto rayleigh = [&](const Vec& xr) {
        const PiecewiseDisplacement mode(m, dm, Vec(vm.S * xr));
        const double num = integrate(m, [&](double t) {
            const double d2 = mode.deriv(t, 2);
            return d2 * d2;
        });
        const double den = integrate(m, [&](double t) {
            const double v = mode.deriv(t, 0);
            return v * v;
        });
        return num / den;
    };

    Vec x = Vec::Ones(Ar.rows());
    x /= std::sqrt(x.dot(Mr * x));
    double lambda = rayleigh(x);
    for (int it = 0; it < 500; ++it) {
        Vec y = ldlt.solve(Mr * x);
        if (ldlt.info() != Eigen::Success) throw EigenFailure("inverse iteration solve failed");
        y /= std::sqrt(y.dot(Mr * y));
        x = y;
        const double next = rayleigh(x);
        if (it > 0 && lambda - next <= 1e-12 * next) return 1.0 / std::min(lambda, next);
        lambda = next;
    }
    throw EigenFailure("inverse iteration did not converge");
}

// ============================================================================
// Report types
// ============================================================================

/// One-sided traces at a break node; NaN where a side does not exist
/// (endpoint breaks). Normalised entries are scale-relative: second
/// derivatives against the field's sup curvature, third derivatives against
/// its sup third derivative.
struct BreakTraceEntry {
    double x = 0.0;
    BreakKind kind = BreakKind::Crease;
    bool endpoint = false;
    double d2_minus = 0.0, d2_plus = 0.0;
    double d3_minus = 0.0, d3_plus = 0.0;
    double d3_jump = 0.0;
    double n2_minus = 0.0, n2_plus = 0.0;
    double n3_minus = 0.0, n3_plus = 0.0;
    double n3_jump = 0.0;
};

/// Weak-form residuals of the stationarity conditions. The interior
/// residual is the L2 norm of the Riesz lift of the residual onto a
/// one-level-finer test space (equivalently, the distance to the fine
/// Galerkin solution); the other entries are max-norm residuals against the
/// smooth (unbroken, clamped) test basis on the solve mesh, load-scale
/// relative.
struct EulerReport {
    double lifted_total = 0.0;
    double lifted_r = 0.0;
    double lifted_p = 0.0;
    std::vector<double> per_piece; ///< reinforcement lift per smooth piece
    double distributional = 0.0;
    double plate = 0.0;            ///< plate equation residual (F1)
    double sum_equation = 0.0;     ///< tested off the break nodes (F1)
    double distributional_sum = 0.0;
    double combined = 0.0;
};

struct ComplianceReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double gap = 0.0;
    double rel_gap = 0.0;
    bool homogeneous = true;
    /// Boundary corrections, itemised:
    /// [reinforcement at -1, reinforcement at +1, plate at -1, plate at +1].
    std::array<double, 4> corrections{0.0, 0.0, 0.0, 0.0};
    double correction_total = 0.0;
};

struct ThresholdReport {
    ProblemKind problem = ProblemKind::E1;
    double term_load_r = 0.0;   ///< ||f_r||^2 / (4 mu)
    double term_load_sum = 0.0; ///< C_P ||f_r + f_p||^2 / (2 gamma)  (F1)
    double term_wbend = 0.0;    ///< gamma ||w''||^2                  (F1)
    double term_fw = 0.0;       ///< integral of the load against w
    double smooth_min = 0.0;    ///< unbroken minimum
    double beta = 0.0;
    double lhs = 0.0;
    double rhs = 0.0; ///< beta minus the unbroken minimum
    double margin = 0.0;
    bool holds = false;
    double poincare = 0.0;
    int poincare_n = 0;
};

struct ViNodeEntry {
    int node = -1;
    Side side = Side::Left;
    double gap = 0.0;
    double lambda = 0.0;
    double comp = 0.0;
};

struct ViReport {
    double stationarity = 0.0;    ///< Lagrangian residual, load-scale relative
    double stationarity_r = 0.0;  ///< reinforcement block
    double stationarity_p = 0.0;  ///< plate block (F1)
    double complementarity = 0.0; ///< max |min(lambda, gap)|
    double min_lambda = 0.0;
    double min_gap = 0.0;
    std::vector<ViNodeEntry> nodes;
    std::vector<BreakTraceEntry> contact_breaks;
    double min_contact_d2_plus = 0.0;  ///< signed minimum; expected >= -tol
    double min_contact_d2_minus = 0.0; ///< signed minimum; expected >= -tol
    double recorded_contact_d3 = 0.0;  ///< recorded only, never asserted
    std::vector<BreakTraceEntry> offcontact_breaks;
    double offcontact_distributional = 0.0;
};

struct VerificationReport {
    /// Named residual of every first-order condition, one entry per
    /// condition (see condition_schema).
    std::map<std::string, double> conditions;
    double stationarity = 0.0; ///< algebraic residual of the stored DOFs
    double energy_recomputed = 0.0;
    std::optional<EulerReport> euler;
    std::vector<BreakTraceEntry> breaks;
    std::optional<ComplianceReport> compliance;
    std::optional<ThresholdReport> threshold;
    std::optional<ViReport> vi;
    std::vector<double> hinge_jumps;
    std::vector<double> hinge_gradients; ///< smooth-part gradient per hinge jump (G1, recorded)
};

/// Names of the analytic first-order conditions for the given problem kind
/// and constraint mode, each appearing exactly once. G1 carries recorded
/// hinge data but no stated trace conditions.
inline std::vector<std::string> condition_schema(ProblemKind problem, bool constrained, bool alpha_eq_beta) {
    std::vector<std::string> ids;
    if (problem == ProblemKind::G1) return ids;
    if (!constrained) {
        if (problem == ProblemKind::E1)
            ids = {"euler.interior", "euler.distributional"};
        else
            ids = {"euler.interior_r", "euler.plate", "euler.sum", "euler.distributional_r",
                   "euler.distributional_sum", "euler.combined"};
        ids.insert(ids.end(), {"breaks.crack.second", "breaks.crack.third", "breaks.crease.second",
                               "breaks.crease.third_jump", "breaks.endpoint.crack", "breaks.endpoint.crease"});
        if (alpha_eq_beta) ids.push_back("breaks.equal_penalty.third");
        ids.push_back("compliance.gap");
    } else {
        if (problem == ProblemKind::E1)
            ids = {"vi.inequality"};
        else
            ids = {"qvi.reinforcement", "qvi.plate"};
        ids.insert(ids.end(), {"vi.complementarity", "offcontact.crack.second", "offcontact.crack.third",
                               "offcontact.crease.second", "offcontact.crease.third_jump",
                               "offcontact.distributional", "offcontact.endpoint.crack",
                               "offcontact.endpoint.crease"});
        if (alpha_eq_beta) ids.push_back("offcontact.equal_penalty.third");
        ids.insert(ids.end(),
                   {"contact.second_sign.plus", "contact.second_sign.minus", "contact.third_recorded"});
    }
    return ids;
}

// ============================================================================
// Break traces
// ============================================================================

/// One-sided traces of the reinforcement field at every break node, raw and
/// scale-normalised.
inline std::vector<BreakTraceEntry> check_breaks(const PiecewiseDisplacement& u_r) {
    const Mesh& m = u_r.mesh();
    const double s2 = std::max(u_r.sup_deriv(2), 1e-300);
    const double s3 = std::max(u_r.sup_deriv(3), 1e-300);
    std::vector<BreakTraceEntry> out;
    for (size_t b = 0; b < m.breaks().size(); ++b) {
        const int node = m.node_of_break(static_cast<int>(b));
        BreakTraceEntry e;
        e.x = m.node(node);
        e.kind = m.breaks().items()[b].kind;
        e.endpoint = node == 0 || node == m.num_nodes() - 1;
        const bool has_left = node > 0;
        const bool has_right = node < m.num_nodes() - 1;
        e.d2_minus = has_left ? u_r.trace(node, 2, Side::Left) : std::nan("");
        e.d3_minus = has_left ? u_r.trace(node, 3, Side::Left) : std::nan("");
        e.d2_plus = has_right ? u_r.trace(node, 2, Side::Right) : std::nan("");
        e.d3_plus = has_right ? u_r.trace(node, 3, Side::Right) : std::nan("");
        e.d3_jump = (has_left && has_right) ? e.d3_plus - e.d3_minus : std::nan("");
        e.n2_minus = has_left ? e.d2_minus / s2 : std::nan("");
        e.n2_plus = has_right ? e.d2_plus / s2 : std::nan("");
        e.n3_minus = has_left ? e.d3_minus / s3 : std::nan("");
        e.n3_plus = has_right ? e.d3_plus / s3 : std::nan("");
        e.n3_jump = (has_left && has_right) ? e.d3_jump / s3 : std::nan("");
        out.push_back(e);
    }
    return out;
}

namespace detail {

/// Pairs a residual vector on a broken DOF map against the smooth
/// (unbroken) test basis of the same mesh.
inline Vec restrict_to_unbroken(const Mesh& m, const DofMap& broken, const DofMap& unbroken, const Vec& rb) {
    Vec ru = Vec::Zero(unbroken.size());
    for (int i = 0; i < m.num_nodes(); ++i) {
        const NodeDofs& nb = broken.at_node(i);
        const NodeDofs& nu = unbroken.at_node(i);
        ru[nu.v_left] += rb[nb.v_left];
        if (nb.v_right != nb.v_left) ru[nu.v_left] += rb[nb.v_right];
        ru[nu.s_left] += rb[nb.s_left];
        if (nb.s_right != nb.s_left) ru[nu.s_left] += rb[nb.s_right];
    }
    return ru;
}

/// Max over entries whose node passes the filter; endpoint test functions
/// are always excluded (they are not admissible variations).
template <typename Filter>
double max_over_nodes(const Mesh& m, const DofMap& dm, const Vec& r, Filter&& keep) {
    double worst = 0.0;
    for (int i = 1; i + 1 < m.num_nodes(); ++i) {
        if (!keep(i)) continue;
        const NodeDofs& nd = dm.at_node(i);
        worst = std::max(worst, std::fabs(r[nd.v_left]));
        worst = std::max(worst, std::fabs(r[nd.s_left]));
    }
    return worst;
}

inline std::vector<double> piece_l2_norms(const PiecewiseDisplacement& z, const BreakConfig& K) {
    const Mesh& m = z.mesh();
    std::vector<double> cuts;
    for (const Break& b : K.items())
        if (b.x > m.a() + 1e-13 && b.x < m.b() - 1e-13) cuts.push_back(b.x);
    std::vector<double> acc(cuts.size() + 1, 0.0);
    for (int e = 0; e < m.num_elements(); ++e) {
        const double mid = 0.5 * (m.node(e) + m.node(e + 1));
        size_t piece = 0;
        while (piece < cuts.size() && mid > cuts[piece]) ++piece;
        const double xl = m.node(e), h = m.h(e);
        double s = 0.0;
        for (int q = 0; q < 4; ++q) {
            const double x = xl + 0.5 * h * (1.0 + quad::kX4[q]);
            const double v = z.eval_element(e, x, 0);
            s += quad::kW4[q] * v * v;
        }
        acc[piece] += 0.5 * h * s;
    }
    for (double& v : acc) v = std::sqrt(v);
    return acc;
}

} // namespace detail

// ============================================================================
// Euler / natural condition residuals
// ============================================================================

/// Weak residuals of the stationarity system for an unconstrained E1/F1
/// solution: the hierarchical Riesz lift against a one-level-finer test
/// basis plus the algebraic residuals against the smooth test basis.
inline EulerReport check_euler(ProblemKind problem, const ModelParams& p, const C2Function& w,
                               const LoadField& f_r, const LoadField& f_p, const BreakConfig& K,
                               const SolveReport& sol, const Mesh& m) {
    EulerReport rep;
    const Mesh fine = m.refined();

    if (problem == ProblemKind::E1) {
        const SolveReport fine_sol = solve_E1_fixed(p, w, f_r, K, fine);
        const DofMap& fdm = fine_sol.u_r.dof_map();
        const PiecewiseDisplacement coarse_on_fine = sol.u_r.prolong(fine, fdm);
        PiecewiseDisplacement z(fine, fdm, Vec(fine_sol.u_r.dofs() - coarse_on_fine.dofs()));
        rep.per_piece = detail::piece_l2_norms(z, K);
        double sq = 0.0;
        for (double v : rep.per_piece) sq += v * v;
        rep.lifted_r = rep.lifted_total = std::sqrt(sq);

        auto a = detail::assemble_E1(p, w, f_r, m);
        const Vec r = residual_extended(a.H, sol.u_r.dofs(), a.g);
        const DofMap unbroken(m, false);
        const Vec ru = detail::restrict_to_unbroken(m, a.dm_r, unbroken, r);
        const double scale = 1.0 + a.g.cwiseAbs().maxCoeff();
        rep.distributional = detail::max_over_nodes(m, unbroken, ru, [](int) { return true; }) / scale;
        return rep;
    }

    const SolveReport fine_sol = solve_F1_fixed(p, w, f_r, f_p, K, fine);
    const DofMap& fdm_r = fine_sol.u_r.dof_map();
    const DofMap& fdm_p = fine_sol.u_p->dof_map();
    const PiecewiseDisplacement cr = sol.u_r.prolong(fine, fdm_r);
    const PiecewiseDisplacement cp = sol.u_p->prolong(fine, fdm_p);
    PiecewiseDisplacement z_r(fine, fdm_r, Vec(fine_sol.u_r.dofs() - cr.dofs()));
    PiecewiseDisplacement z_p(fine, fdm_p, Vec(fine_sol.u_p->dofs() - cp.dofs()));
    rep.per_piece = detail::piece_l2_norms(z_r, K);
    double sq = 0.0;
    for (double v : rep.per_piece) sq += v * v;
    rep.lifted_r = std::sqrt(sq);
    rep.lifted_p = detail::piece_l2_norms(z_p, BreakConfig{})[0];
    rep.lifted_total = std::hypot(rep.lifted_r, rep.lifted_p);

    auto a = detail::assemble_pair(p, w, f_r, f_p, m);
    Vec u(a.H.rows());
    u.head(a.n_r) = sol.u_r.dofs();
    u.tail(u.size() - a.n_r) = sol.u_p->dofs();
    const Vec r = residual_extended(a.H, u, a.g);
    const Vec r_r = r.head(a.n_r);
    const Vec r_p = r.tail(r.size() - a.n_r);
    const DofMap& dp = *a.dm_p;
    const Vec rr_u = detail::restrict_to_unbroken(m, a.dm_r, dp, r_r);
    const double scale = 1.0 + a.g.cwiseAbs().maxCoeff();

    auto off_breaks = [&](int node) { return !m.break_at(node).has_value(); };
    rep.distributional = detail::max_over_nodes(m, dp, rr_u, [](int) { return true; }) / scale;
    rep.plate = detail::max_over_nodes(m, dp, r_p, [](int) { return true; }) / scale;
    rep.sum_equation = detail::max_over_nodes(m, dp, Vec(rr_u + r_p), off_breaks) / scale;
    rep.distributional_sum = detail::max_over_nodes(m, dp, Vec(rr_u + r_p), [](int) { return true; }) / scale;
    rep.combined = detail::max_over_nodes(m, dp, Vec(rr_u + 0.5 * r_p), [](int) { return true; }) / scale;
    return rep;
}

// ============================================================================
// Compliance identities
// ============================================================================

/// Both sides of the minimiser's compliance identity by quadrature and
/// trace evaluation. Boundary corrections are itemised and always included
/// in the right-hand side; they vanish identically for homogeneous data
/// without endpoint breaks.
inline ComplianceReport check_compliance(ProblemKind problem, const ModelParams& p, const C2Function& w,
                                         const LoadField& f_r, const LoadField& f_p, const BreakConfig& K,
                                         const SolveReport& sol) {
    if (problem == ProblemKind::G1) throw Error("no compliance identity is available for G1");
    const Mesh& m = sol.u_r.mesh();
    const PiecewiseDisplacement& u = sol.u_r;
    ComplianceReport rep;
    rep.homogeneous = std::fabs(w.value(m.a())) <= 1e-14 && std::fabs(w.value(m.b())) <= 1e-14 &&
                      std::fabs(w.deriv(m.a())) <= 1e-14 && std::fabs(w.deriv(m.b())) <= 1e-14;
    rep.lhs = sol.energy.total;

    const double damage = damage_count(K, p, problem);
    // reinforcement boundary terms eta*(u'' u' - u''' u) at the inner traces
    const double eta_lo =
        p.eta * (u.trace(0, 2, Side::Right) * u.trace(0, 1, Side::Right) -
                 u.trace(0, 3, Side::Right) * u.trace(0, 0, Side::Right));
    const int last = m.num_nodes() - 1;
    const double eta_hi = p.eta * (u.trace(last, 2, Side::Left) * u.trace(last, 1, Side::Left) -
                                   u.trace(last, 3, Side::Left) * u.trace(last, 0, Side::Left));
    rep.corrections[0] = -eta_lo;
    rep.corrections[1] = eta_hi;

    if (problem == ProblemKind::E1) {
        const double base = damage +
                            p.mu * integrate(m, [&](double x) {
                                const double wx = w.value(x);
                                return wx * wx - wx * u.deriv(x, 0);
                            }) -
                            0.5 * integrate(m, [&](double x) { return f_r(x) * u.deriv(x, 0); });
        rep.correction_total = rep.corrections[0] + rep.corrections[1];
        rep.rhs = base + rep.correction_total;
    } else {
        // Substituting both stationarity equations cancels the adhesive
        // quadratic term entirely, leaving the pure half-load form.
        const PiecewiseDisplacement& up = *sol.u_p;
        const double base = damage -
                            0.5 * integrate(m, [&](double x) { return f_r(x) * u.deriv(x, 0); }) -
                            0.5 * integrate(m, [&](double x) { return f_p(x) * up.deriv(x, 0); });
        // plate boundary terms gamma*(u_p'' w' - u_p''' w)
        const double gam_lo = p.gamma * (up.trace(0, 2, Side::Right) * w.deriv(m.a()) -
                                         up.trace(0, 3, Side::Right) * w.value(m.a()));
        const double gam_hi = p.gamma * (up.trace(last, 2, Side::Left) * w.deriv(m.b()) -
                                         up.trace(last, 3, Side::Left) * w.value(m.b()));
        rep.corrections[2] = -gam_lo;
        rep.corrections[3] = gam_hi;
        rep.correction_total =
            rep.corrections[0] + rep.corrections[1] + rep.corrections[2] + rep.corrections[3];
        rep.rhs = base + rep.correction_total;
    }
    rep.gap = std::fabs(rep.lhs - rep.rhs);
    const double denom = std::max(std::fabs(rep.lhs), std::fabs(rep.rhs));
    rep.rel_gap = denom > 0.0 ? rep.gap / denom : 0.0;
    return rep;
}

// ============================================================================
// Uniqueness threshold
// ============================================================================

/// Evaluates the small-data uniqueness inequality: all norm terms by the
/// shared quadrature, the smooth minimum by an unbroken solve on the given
/// mesh, the Poincare constant at the given resolution. The test is a
/// sufficient condition only.
inline ThresholdReport check_threshold(ProblemKind problem, const ModelParams& p, const C2Function& w,
                                       const LoadField& f_r, const LoadField& f_p, const Mesh& m,
                                       int poincare_n = 512) {
    if (problem == ProblemKind::G1) throw Error("the uniqueness threshold applies to E1 and F1");
    validate_params(p, problem);
    ThresholdReport rep;
    rep.problem = problem;
    rep.beta = p.beta;
    const Mesh um = with_breaks(m, BreakConfig{});
    rep.term_load_r = integrate(um, [&](double x) {
        const double v = f_r(x);
        return v * v;
    }) / (4.0 * p.mu);
    if (problem == ProblemKind::E1) {
        rep.term_fw = integrate(um, [&](double x) { return f_r(x) * w.value(x); });
        rep.smooth_min = solve_E1_fixed(p, w, f_r, BreakConfig{}, um).energy.total;
        rep.lhs = rep.term_load_r + rep.term_fw;
    } else {
        rep.poincare_n = poincare_n;
        rep.poincare = poincare_constant(poincare_n, um.a(), um.b());
        rep.term_load_sum = rep.poincare / (2.0 * p.gamma) * integrate(um, [&](double x) {
            const double v = f_r(x) + f_p(x);
            return v * v;
        });
        rep.term_wbend = p.gamma * integrate(um, [&](double x) {
            const double v = w.second(x);
            return v * v;
        });
        rep.term_fw = integrate(um, [&](double x) { return (f_r(x) + f_p(x)) * w.value(x); });
        rep.smooth_min = solve_F1_fixed(p, w, f_r, f_p, BreakConfig{}, um).energy.total;
        rep.lhs = rep.term_load_r + rep.term_load_sum + rep.term_wbend + rep.term_fw;
    }
    rep.rhs = p.beta - rep.smooth_min;
    rep.margin = rep.rhs - rep.lhs;
    rep.holds = rep.lhs < rep.rhs;
    return rep;
}

// ============================================================================
// Variational-inequality conditions (obstacle solves)
// ============================================================================

/// Conditions of a constrained minimiser: nodal complementarity, Lagrangian
/// stationarity, sign conditions of the curvature traces at contact breaks,
/// and recorded third-derivative traces (on which no condition holds).
inline ViReport check_vi(ProblemKind problem, const ModelParams& p, const C2Function& w,
                         const LoadField& f_r, const LoadField& f_p, const BreakConfig& K,
                         const SolveReport& sol, const Mesh& m) {
    if (problem == ProblemKind::G1) throw Error("constrained G1 is not part of the model");
    ViReport rep;
    auto a = problem == ProblemKind::E1 ? detail::assemble_E1(p, w, f_r, m)
                                        : detail::assemble_pair(p, w, f_r, f_p, m);
    const auto rows = problem == ProblemKind::E1 ? detail::obstacle_rows_E1(a, m, w)
                                                 : detail::obstacle_rows_F1(a, m);
    Vec u(a.H.rows());
    if (problem == ProblemKind::E1) {
        u = sol.u_r.dofs();
    } else {
        u.head(a.n_r) = sol.u_r.dofs();
        u.tail(u.size() - a.n_r) = sol.u_p->dofs();
    }
    Vec r = residual_extended(a.H, u, a.g);
    const double scale = 1.0 + a.g.cwiseAbs().maxCoeff();
    const double ctol = 1e-9 * (1.0 + u.cwiseAbs().maxCoeff());

    // contact detection and multiplier reconstruction
    Vec lambda = Vec::Zero(static_cast<Eigen::Index>(rows.size()));
    std::vector<char> row_contact(rows.size(), 0);
    rep.min_gap = 0.0;
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const double gap = u[row.pos] - (row.neg >= 0 ? u[row.neg] : 0.0) - row.rhs;
        rep.min_gap = std::min(rep.min_gap, gap);
        if (gap <= ctol) {
            row_contact[i] = 1;
            lambda[static_cast<Eigen::Index>(i)] = r[row.pos];
        }
    }
    Vec r_lag = r;
    for (size_t i = 0; i < rows.size(); ++i) {
        r_lag[rows[i].pos] -= lambda[static_cast<Eigen::Index>(i)];
        if (rows[i].neg >= 0) r_lag[rows[i].neg] += lambda[static_cast<Eigen::Index>(i)];
    }
    std::vector<char> fixed(static_cast<size_t>(u.size()), 0);
    for (const Constraint& c : a.clamps) fixed[static_cast<size_t>(c.dof)] = 1;
    double worst = 0.0, worst_r = 0.0, worst_p = 0.0;
    for (int i = 0; i < r_lag.size(); ++i) {
        if (fixed[static_cast<size_t>(i)]) continue;
        const double v = std::fabs(r_lag[i]);
        worst = std::max(worst, v);
        if (i < a.n_r)
            worst_r = std::max(worst_r, v);
        else
            worst_p = std::max(worst_p, v);
    }
    rep.stationarity = worst / scale;
    rep.stationarity_r = worst_r / scale;
    rep.stationarity_p = worst_p / scale;

    rep.min_lambda = 0.0;
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const double gap = u[row.pos] - (row.neg >= 0 ? u[row.neg] : 0.0) - row.rhs;
        const double lam = lambda[static_cast<Eigen::Index>(i)];
        ViNodeEntry ne;
        ne.node = row.node;
        ne.side = a.dm_r.side_of(row.pos);
        ne.gap = gap;
        ne.lambda = lam;
        ne.comp = std::fabs(std::min(lam, gap));
        rep.nodes.push_back(ne);
        rep.complementarity = std::max(rep.complementarity, ne.comp);
        rep.min_lambda = std::min(rep.min_lambda, lam);
    }

    // per-break contact classification and traces
    const auto traces = check_breaks(sol.u_r);
    rep.min_contact_d2_plus = 0.0;
    rep.min_contact_d2_minus = 0.0;
    for (size_t b = 0; b < K.size(); ++b) {
        const int node = m.node_of_break(static_cast<int>(b));
        bool left_contact = false, right_contact = false, any_row = false;
        for (size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].node != node) continue;
            any_row = true;
            const bool is_left = a.dm_r.side_of(rows[i].pos) == Side::Left &&
                                 !a.dm_r.is_shared(rows[i].pos);
            if (row_contact[i]) {
                if (a.dm_r.is_shared(rows[i].pos)) {
                    left_contact = right_contact = true;
                } else if (is_left) {
                    left_contact = true;
                } else {
                    right_contact = true;
                }
            }
        }
        (void)any_row;
        const BreakTraceEntry& t = traces[b];
        if (left_contact || right_contact) {
            rep.contact_breaks.push_back(t);
            if (right_contact && node < m.num_nodes() - 1)
                rep.min_contact_d2_plus = std::min(rep.min_contact_d2_plus, t.d2_plus);
            if (left_contact && node > 0)
                rep.min_contact_d2_minus = std::min(rep.min_contact_d2_minus, t.d2_minus);
            if (node > 0) rep.recorded_contact_d3 = std::max(rep.recorded_contact_d3, std::fabs(t.d3_minus));
            if (node < m.num_nodes() - 1)
                rep.recorded_contact_d3 = std::max(rep.recorded_contact_d3, std::fabs(t.d3_plus));
        } else {
            rep.offcontact_breaks.push_back(t);
        }
    }

    // smooth-test residual away from contact nodes
    {
        std::vector<char> node_contact(static_cast<size_t>(m.num_nodes()), 0);
        for (size_t i = 0; i < rows.size(); ++i)
            if (row_contact[i]) node_contact[static_cast<size_t>(rows[i].node)] = 1;
        const DofMap unbroken(m, false);
        const Vec rr_u = detail::restrict_to_unbroken(m, a.dm_r, unbroken, Vec(r.head(a.n_r)));
        rep.offcontact_distributional =
            detail::max_over_nodes(m, unbroken, rr_u,
                                   [&](int nidx) { return !node_contact[static_cast<size_t>(nidx)]; }) /
            scale;
    }
    return rep;
}

// ============================================================================
// Full verification
// ============================================================================

struct VerifyInputs {
    ProblemKind problem = ProblemKind::E1;
    bool constrained = false;
    ModelParams params;
    C2Function w;
    LoadField f_r;
    LoadField f_p;
    BreakConfig K;
    int poincare_n = 512;
    bool with_threshold = true;
};

namespace detail {

struct TraceAggregate {
    double crack_second = 0.0, crack_third = 0.0;
    double crease_second = 0.0, crease_third_jump = 0.0;
    double endpoint_crack = 0.0, endpoint_crease = 0.0;
    double equal_penalty_third = 0.0;
};

inline TraceAggregate aggregate_traces(const std::vector<BreakTraceEntry>& entries) {
    TraceAggregate agg;
    auto nz = [](double v) { return std::isnan(v) ? 0.0 : std::fabs(v); };
    for (const auto& e : entries) {
        if (e.endpoint) {
            const double n2 = std::isnan(e.n2_minus) ? nz(e.n2_plus) : nz(e.n2_minus);
            const double n3 = std::isnan(e.n3_minus) ? nz(e.n3_plus) : nz(e.n3_minus);
            if (e.kind == BreakKind::Crack)
                agg.endpoint_crack = std::max(agg.endpoint_crack, std::max(n2, n3));
            else {
                agg.endpoint_crease = std::max(agg.endpoint_crease, n2);
                agg.equal_penalty_third = std::max(agg.equal_penalty_third, n3);
            }
            continue;
        }
        const double n2 = std::max(nz(e.n2_minus), nz(e.n2_plus));
        const double n3 = std::max(nz(e.n3_minus), nz(e.n3_plus));
        if (e.kind == BreakKind::Crack) {
            agg.crack_second = std::max(agg.crack_second, n2);
            agg.crack_third = std::max(agg.crack_third, n3);
        } else {
            agg.crease_second = std::max(agg.crease_second, n2);
            agg.crease_third_jump = std::max(agg.crease_third_jump, nz(e.n3_jump));
            agg.equal_penalty_third = std::max(agg.equal_penalty_third, n3);
        }
    }
    return agg;
}

} // namespace detail

/// Runs every applicable analytic check on a computed solution and fills
/// the named condition table. The report is pure data; thresholds are
/// applied by the caller.
inline VerificationReport verify_solution(const VerifyInputs& in, const SolveReport& sol, const Mesh& m) {
    VerificationReport rep;
    const bool aeqb = in.problem != ProblemKind::G1 && in.params.alpha == in.params.beta;

    // recomputed energy of the stored DOFs
    if (in.problem == ProblemKind::E1)
        rep.energy_recomputed = eval_energy(in.problem, in.params, in.w, in.f_r, in.K, sol.u_r).total;
    else
        rep.energy_recomputed =
            eval_energy(in.problem, in.params, in.w, in.f_r, in.f_p, in.K, sol.u_r, &*sol.u_p).total;

    rep.breaks = check_breaks(sol.u_r);
    rep.hinge_jumps = sol.hinge_jumps;

    if (in.constrained) {
        rep.vi = check_vi(in.problem, in.params, in.w, in.f_r, in.f_p, in.K, sol, m);
        rep.stationarity = rep.vi->stationarity;
        const auto agg = detail::aggregate_traces(rep.vi->offcontact_breaks);
        auto& c = rep.conditions;
        if (in.problem == ProblemKind::E1) {
            c["vi.inequality"] = std::max({rep.vi->stationarity, -rep.vi->min_lambda, -rep.vi->min_gap});
        } else {
            c["qvi.reinforcement"] = std::max({rep.vi->stationarity_r, -rep.vi->min_lambda, -rep.vi->min_gap});
            c["qvi.plate"] = rep.vi->stationarity_p;
        }
        c["vi.complementarity"] = rep.vi->complementarity;
        c["offcontact.crack.second"] = agg.crack_second;
        c["offcontact.crack.third"] = agg.crack_third;
        c["offcontact.crease.second"] = agg.crease_second;
        c["offcontact.crease.third_jump"] = agg.crease_third_jump;
        c["offcontact.distributional"] = rep.vi->offcontact_distributional;
        c["offcontact.endpoint.crack"] = agg.endpoint_crack;
        c["offcontact.endpoint.crease"] = agg.endpoint_crease;
        if (aeqb) c["offcontact.equal_penalty.third"] = agg.equal_penalty_third;
        c["contact.second_sign.plus"] = std::max(0.0, -rep.vi->min_contact_d2_plus);
        c["contact.second_sign.minus"] = std::max(0.0, -rep.vi->min_contact_d2_minus);
        c["contact.third_recorded"] = rep.vi->recorded_contact_d3;
        return rep;
    }

    if (in.problem == ProblemKind::G1) {
        // algebraic stationarity and recorded subgradient data at hinges
        auto a = detail::assemble_pair(in.params, in.w, in.f_r, in.f_p, m);
        Vec u(a.H.rows());
        u.head(a.n_r) = sol.u_r.dofs();
        u.tail(u.size() - a.n_r) = sol.u_p->dofs();
        const Vec r = residual_extended(a.H, u, a.g);
        const double scale = 1.0 + a.g.cwiseAbs().maxCoeff();
        std::vector<int> jump_dofs, jump_partners;
        double sub = 0.0;
        for (size_t b = 0; b < in.K.size(); ++b) {
            const int node = m.node_of_break(static_cast<int>(b));
            const NodeDofs& nd = a.dm_r.at_node(node);
            const bool left_end = node == 0;
            const bool right_end = node == m.num_nodes() - 1;
            const int jd = (left_end || right_end) ? nd.s_left : nd.s_right;
            const double sign = right_end ? -1.0 : 1.0;
            jump_dofs.push_back(jd);
            jump_partners.push_back((left_end || right_end) ? -1 : nd.s_left);
            const double q = sign * r[jd];
            rep.hinge_gradients.push_back(q);
            const double j = b < sol.hinge_jumps.size() ? sol.hinge_jumps[b] : 0.0;
            if (j == 0.0)
                sub = std::max(sub, std::max(0.0, std::fabs(q) - in.params.sigma));
            else
                sub = std::max(sub, std::fabs(q + in.params.sigma * (j > 0 ? 1.0 : -1.0)));
        }
        rep.stationarity = std::max(detail::smooth_residual(a, u, jump_dofs, jump_partners), sub / scale);
        return rep;
    }

    // unconstrained E1/F1
    {
        if (in.problem == ProblemKind::E1) {
            auto a = detail::assemble_E1(in.params, in.w, in.f_r, m);
            rep.stationarity = kkt_residual(a.H, a.g, sol.u_r.dofs(), a.clamps);
        } else {
            auto a = detail::assemble_pair(in.params, in.w, in.f_r, in.f_p, m);
            Vec u(a.H.rows());
            u.head(a.n_r) = sol.u_r.dofs();
            u.tail(u.size() - a.n_r) = sol.u_p->dofs();
            rep.stationarity = kkt_residual(a.H, a.g, u, a.clamps);
        }
        rep.euler = check_euler(in.problem, in.params, in.w, in.f_r, in.f_p, in.K, sol, m);
        rep.compliance = check_compliance(in.problem, in.params, in.w, in.f_r, in.f_p, in.K, sol);
        if (in.with_threshold)
            rep.threshold = check_threshold(in.problem, in.params, in.w, in.f_r, in.f_p, m, in.poincare_n);

        const auto agg = detail::aggregate_traces(rep.breaks);
        auto& c = rep.conditions;
        if (in.problem == ProblemKind::E1) {
            c["euler.interior"] = rep.euler->lifted_total;
            c["euler.distributional"] = rep.euler->distributional;
        } else {
            c["euler.interior_r"] = rep.euler->lifted_r;
            c["euler.plate"] = rep.euler->plate;
            c["euler.sum"] = rep.euler->sum_equation;
            c["euler.distributional_r"] = rep.euler->distributional;
            c["euler.distributional_sum"] = rep.euler->distributional_sum;
            c["euler.combined"] = rep.euler->combined;
        }
        c["breaks.crack.second"] = agg.crack_second;
        c["breaks.crack.third"] = agg.crack_third;
        c["breaks.crease.second"] = agg.crease_second;
        c["breaks.crease.third_jump"] = agg.crease_third_jump;
        c["breaks.endpoint.crack"] = agg.endpoint_crack;
        c["breaks.endpoint.crease"] = agg.endpoint_crease;
        if (aeqb) c["breaks.equal_penalty.third"] = agg.equal_penalty_third;
        c["compliance.gap"] = rep.compliance->rel_gap;
    }
    return rep;
}

} // namespace flexbeam
