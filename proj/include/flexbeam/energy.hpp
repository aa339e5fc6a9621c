#pragma once

#include <cmath>
#include <optional>

#include "flexbeam/fem.hpp"
#include "flexbeam/model.hpp"

namespace flexbeam {

namespace detail {

inline void require_conforming(const PiecewiseDisplacement& u, const BreakConfig& K) {
    const BreakConfig& mk = u.mesh().breaks();
    if (mk.size() != K.size()) throw MeshMismatch("displacement break set disagrees with the requested one");
    for (size_t i = 0; i < K.size(); ++i) {
        const Break& a = mk.items()[i];
        const Break& b = K.items()[i];
        if (std::fabs(a.x - b.x) > 1e-14 || a.kind != b.kind)
            throw MeshMismatch("displacement break DOFs disagree with the requested break set at x=" +
                               std::to_string(b.x));
    }
    if (!u.dof_map().broken() && !K.empty())
        throw MeshMismatch("displacement carries no duplicated DOFs for the requested break set");
}

/// Slope jump of the reinforcement at a break node; against the datum's
/// slope at a clamped endpoint.
inline double slope_jump(const PiecewiseDisplacement& u, const C2Function& w, int node) {
    const Mesh& m = u.mesh();
    if (node == 0) return u.trace(node, 1, Side::Right) - w.deriv(m.a());
    if (node == m.num_nodes() - 1) return w.deriv(m.b()) - u.trace(node, 1, Side::Left);
    return u.trace(node, 1, Side::Right) - u.trace(node, 1, Side::Left);
}

} // namespace detail

/// Exact evaluation of E1/F1/G1 on conforming piecewise-cubic fields: the
/// shared 4-point Gauss rule per smooth piece, the damage term counted from
/// the break configuration.
inline EnergyBreakdown eval_energy(ProblemKind problem, const ModelParams& p, const C2Function& w,
                                   const LoadField& f_r, const LoadField& f_p, const BreakConfig& K,
                                   const PiecewiseDisplacement& u_r,
                                   const PiecewiseDisplacement* u_p = nullptr) {
    validate_breaks(K, problem);
    detail::require_conforming(u_r, K);
    if (problem != ProblemKind::E1) {
        if (u_p == nullptr) throw MeshMismatch(std::string(to_string(problem)) + " needs a plate field");
        if (u_p->dof_map().broken()) throw MeshMismatch("the plate field must be unbroken");
    }

    const Mesh& m = u_r.mesh();
    EnergyBreakdown out;
    out.damage = damage_count(K, p, problem);
    out.bending_r = p.eta * integrate(m, [&](double x) {
        const double d2 = u_r.deriv(x, 2);
        return d2 * d2;
    });
    out.load_r = -integrate(m, [&](double x) { return f_r(x) * u_r.deriv(x, 0); });

    if (problem == ProblemKind::E1) {
        out.glue = p.mu * integrate(m, [&](double x) {
            const double d = u_r.deriv(x, 0) - w.value(x);
            return d * d;
        });
    } else {
        out.glue = p.mu * integrate(m, [&](double x) {
            const double d = u_r.deriv(x, 0) - u_p->deriv(x, 0);
            return d * d;
        });
        out.bending_p = p.gamma * integrate(m, [&](double x) {
            const double d2 = u_p->deriv(x, 2);
            return d2 * d2;
        });
        out.load_p = -integrate(m, [&](double x) { return f_p(x) * u_p->deriv(x, 0); });
    }

    if (problem == ProblemKind::G1) {
        double jumps = 0.0;
        for (size_t b = 0; b < K.size(); ++b)
            jumps += std::fabs(detail::slope_jump(u_r, w, m.node_of_break(static_cast<int>(b))));
        out.plastic = p.sigma * jumps;
    }

    out.finalize();
    return out;
}

/// Hard-device convenience overload (single field).
inline EnergyBreakdown eval_energy(ProblemKind problem, const ModelParams& p, const C2Function& w,
                                   const LoadField& f, const BreakConfig& K,
                                   const PiecewiseDisplacement& u) {
    return eval_energy(problem, p, w, f, LoadField::zero(), K, u, nullptr);
}

} // namespace flexbeam
