#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "flexbeam/fields.hpp"
#include "flexbeam/mesh.hpp"

namespace flexbeam {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

enum class Side { Left, Right };

// ============================================================================
// Quadrature
// ============================================================================

namespace quad {

// Gauss-Legendre on [-1, 1]; the 4-point rule is exact through degree 7,
// which covers every polynomial integrand produced by cubic fields.
inline constexpr std::array<double, 4> kX4 = {-0.8611363115940526, -0.3399810435848563,
                                              0.3399810435848563, 0.8611363115940526};
inline constexpr std::array<double, 4> kW4 = {0.3478548451374538, 0.6521451548625461,
                                              0.6521451548625461, 0.3478548451374538};

inline constexpr std::array<double, 6> kX6 = {-0.9324695142031521, -0.6612093864662645,
                                              -0.2386191860831969, 0.2386191860831969,
                                              0.6612093864662645,  0.9324695142031521};
inline constexpr std::array<double, 6> kW6 = {0.1713244923791704, 0.3607615730481386,
                                              0.4679139345726910, 0.4679139345726910,
                                              0.3607615730481386, 0.1713244923791704};

} // namespace quad

/// Integrates g over the mesh with an npts-point Gauss rule per element.
template <typename F>
double integrate(const Mesh& m, F&& g, int npts = 4) {
    double total = 0.0;
    for (int e = 0; e < m.num_elements(); ++e) {
        const double xl = m.node(e), h = m.h(e);
        double acc = 0.0;
        if (npts <= 4) {
            for (int q = 0; q < 4; ++q) acc += quad::kW4[q] * g(xl + 0.5 * h * (1.0 + quad::kX4[q]));
        } else {
            for (int q = 0; q < 6; ++q) acc += quad::kW6[q] * g(xl + 0.5 * h * (1.0 + quad::kX6[q]));
        }
        total += 0.5 * h * acc;
    }
    return total;
}

// ============================================================================
// Cubic Hermite shape functions
// ============================================================================

/// Derivative of order `order` (0..3) of shape k (0..3) on an element of
/// length h, at local coordinate t in [0, 1].
inline double hermite_shape(int k, double t, double h, int order) {
    switch (order) {
    case 0:
        switch (k) {
        case 0: return 1.0 - 3.0 * t * t + 2.0 * t * t * t;
        case 1: return h * (t - 2.0 * t * t + t * t * t);
        case 2: return 3.0 * t * t - 2.0 * t * t * t;
        case 3: return h * (-t * t + t * t * t);
        }
        break;
    case 1:
        switch (k) {
        case 0: return (-6.0 * t + 6.0 * t * t) / h;
        case 1: return 1.0 - 4.0 * t + 3.0 * t * t;
        case 2: return (6.0 * t - 6.0 * t * t) / h;
        case 3: return -2.0 * t + 3.0 * t * t;
        }
        break;
    case 2:
        switch (k) {
        case 0: return (-6.0 + 12.0 * t) / (h * h);
        case 1: return (-4.0 + 6.0 * t) / h;
        case 2: return (6.0 - 12.0 * t) / (h * h);
        case 3: return (-2.0 + 6.0 * t) / h;
        }
        break;
    case 3:
        switch (k) {
        case 0: return 12.0 / (h * h * h);
        case 1: return 6.0 / (h * h);
        case 2: return -12.0 / (h * h * h);
        case 3: return 6.0 / (h * h);
        }
        break;
    }
    throw std::invalid_argument("hermite_shape: bad index");
}

// ============================================================================
// Degrees of freedom
// ============================================================================

/// Per-node DOF indices. At regular nodes value and slope are single
/// entries (left == right). Interior cracks duplicate both, interior
/// creases/hinges share the value and duplicate the slope. Endpoint break
/// nodes keep a single pair: the outer side is the Dirichlet datum, so only
/// the inner trace carries DOFs (the break kind is honoured by the clamp
/// constraints instead).
struct NodeDofs {
    int v_left = -1, s_left = -1, v_right = -1, s_right = -1;
};

class DofMap {
public:
    DofMap(const Mesh& m, bool broken) : broken_(broken) {
        const int nn = m.num_nodes();
        nodes_.resize(static_cast<size_t>(nn));
        int next = 0;
        auto add = [&](int node, bool is_value, Side side, bool shared) {
            info_.push_back({node, is_value, side, shared});
            return next++;
        };
        for (int i = 0; i < nn; ++i) {
            NodeDofs nd;
            const auto kind = m.break_at(i);
            const bool interior = i > 0 && i < nn - 1;
            if (broken_ && kind && interior && *kind == BreakKind::Crack) {
                nd.v_left = add(i, true, Side::Left, false);
                nd.s_left = add(i, false, Side::Left, false);
                nd.v_right = add(i, true, Side::Right, false);
                nd.s_right = add(i, false, Side::Right, false);
            } else if (broken_ && kind && interior) { // crease or hinge
                nd.v_left = nd.v_right = add(i, true, Side::Left, true);
                nd.s_left = add(i, false, Side::Left, false);
                nd.s_right = add(i, false, Side::Right, false);
            } else {
                nd.v_left = nd.v_right = add(i, true, Side::Left, true);
                nd.s_left = nd.s_right = add(i, false, Side::Left, true);
            }
            nodes_[static_cast<size_t>(i)] = nd;
        }
        size_ = next;
    }

    int size() const { return size_; }
    bool broken() const { return broken_; }
    const NodeDofs& at_node(int i) const { return nodes_[static_cast<size_t>(i)]; }

    std::array<int, 4> element_dofs(int e) const {
        const NodeDofs& l = nodes_[static_cast<size_t>(e)];
        const NodeDofs& r = nodes_[static_cast<size_t>(e) + 1];
        return {l.v_right, l.s_right, r.v_left, r.s_left};
    }

    bool is_value_dof(int dof) const { return info_[static_cast<size_t>(dof)].is_value; }
    int node_of(int dof) const { return info_[static_cast<size_t>(dof)].node; }
    Side side_of(int dof) const { return info_[static_cast<size_t>(dof)].side; }
    bool is_shared(int dof) const { return info_[static_cast<size_t>(dof)].shared; }

private:
    struct DofInfo {
        int node;
        bool is_value;
        Side side;
        bool shared;
    };
    bool broken_;
    int size_ = 0;
    std::vector<NodeDofs> nodes_;
    std::vector<DofInfo> info_;
};

// ============================================================================
// Operator assembly
// ============================================================================

/// Bending operator: integral of second derivatives of basis pairs over the
/// smooth pieces. No coupling across crack DOFs; slope DOFs decouple across
/// creases/hinges.
inline SpMat assemble_bending(const Mesh& m, const DofMap& dm) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(m.num_elements()) * 16);
    for (int e = 0; e < m.num_elements(); ++e) {
        const double h = m.h(e);
        const double h2 = h * h, h3 = h2 * h;
        const double k[4][4] = {{12.0 / h3, 6.0 / h2, -12.0 / h3, 6.0 / h2},
                                {6.0 / h2, 4.0 / h, -6.0 / h2, 2.0 / h},
                                {-12.0 / h3, -6.0 / h2, 12.0 / h3, -6.0 / h2},
                                {6.0 / h2, 2.0 / h, -6.0 / h2, 4.0 / h}};
        const auto d = dm.element_dofs(e);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) trip.emplace_back(d[i], d[j], k[i][j]);
    }
    SpMat A(dm.size(), dm.size());
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

/// Mass operator for a single DOF map (symmetric positive definite).
inline SpMat assemble_mass(const Mesh& m, const DofMap& dm) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(m.num_elements()) * 16);
    for (int e = 0; e < m.num_elements(); ++e) {
        const double h = m.h(e);
        const double c = h / 420.0;
        const double mm[4][4] = {{156.0 * c, 22.0 * h * c, 54.0 * c, -13.0 * h * c},
                                 {22.0 * h * c, 4.0 * h * h * c, 13.0 * h * c, -3.0 * h * h * c},
                                 {54.0 * c, 13.0 * h * c, 156.0 * c, -22.0 * h * c},
                                 {-13.0 * h * c, -3.0 * h * h * c, -22.0 * h * c, 4.0 * h * h * c}};
        const auto d = dm.element_dofs(e);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) trip.emplace_back(d[i], d[j], mm[i][j]);
    }
    SpMat M(dm.size(), dm.size());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

/// Mixed mass operator pairing two DOF maps on the same mesh (rows from
/// `rows`, columns from `cols`).
inline SpMat assemble_mixed_mass(const Mesh& m, const DofMap& rows, const DofMap& cols) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(m.num_elements()) * 16);
    for (int e = 0; e < m.num_elements(); ++e) {
        const double h = m.h(e);
        const double c = h / 420.0;
        const double mm[4][4] = {{156.0 * c, 22.0 * h * c, 54.0 * c, -13.0 * h * c},
                                 {22.0 * h * c, 4.0 * h * h * c, 13.0 * h * c, -3.0 * h * h * c},
                                 {54.0 * c, 13.0 * h * c, 156.0 * c, -22.0 * h * c},
                                 {-13.0 * h * c, -3.0 * h * h * c, -22.0 * h * c, 4.0 * h * h * c}};
        const auto dr = rows.element_dofs(e);
        const auto dc = cols.element_dofs(e);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) trip.emplace_back(dr[i], dc[j], mm[i][j]);
    }
    SpMat M(rows.size(), cols.size());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

/// Load vector of integrals f * phi_i, by the shared 4-point Gauss rule.
template <typename F>
Vec assemble_load_fn(const Mesh& m, const DofMap& dm, F&& f) {
    Vec rhs = Vec::Zero(dm.size());
    for (int e = 0; e < m.num_elements(); ++e) {
        const double xl = m.node(e), h = m.h(e);
        const auto d = dm.element_dofs(e);
        for (int q = 0; q < 4; ++q) {
            const double t = 0.5 * (1.0 + quad::kX4[q]);
            const double x = xl + h * t;
            const double wq = 0.5 * h * quad::kW4[q] * f(x);
            for (int k = 0; k < 4; ++k) rhs[d[k]] += wq * hermite_shape(k, t, h, 0);
        }
    }
    return rhs;
}

inline Vec assemble_load(const Mesh& m, const DofMap& dm, const LoadField& f) {
    return assemble_load_fn(m, dm, [&](double x) { return f(x); });
}

inline Vec assemble_load(const Mesh& m, const DofMap& dm, const C2Function& w) {
    return assemble_load_fn(m, dm, [&](double x) { return w.value(x); });
}

// ============================================================================
// Clamp constraints
// ============================================================================

struct Constraint {
    int dof = -1;
    double value = 0.0;
};

/// Equality constraints tying the field to the Dirichlet datum at the
/// endpoints. An endpoint crack releases both value and slope of the inner
/// trace; an endpoint crease or hinge releases only the slope. Break kinds
/// are honoured only for broken DOF maps (the plate field stays clamped).
inline std::vector<Constraint> apply_clamp(const Mesh& m, const DofMap& dm, const C2Function& w) {
    std::vector<Constraint> cs;
    auto clamp_end = [&](int node, double x) {
        const std::optional<BreakKind> kind = dm.broken() ? m.break_at(node) : std::optional<BreakKind>{};
        const NodeDofs& nd = dm.at_node(node);
        if (kind && *kind == BreakKind::Crack) return;
        cs.push_back({nd.v_left, w.value(x)});
        if (kind) return; // crease/hinge: slope released
        cs.push_back({nd.s_left, w.deriv(x)});
    };
    clamp_end(0, m.a());
    clamp_end(m.num_nodes() - 1, m.b());
    return cs;
}

// ============================================================================
// Piecewise-cubic displacement field
// ============================================================================

/// H2-conforming piecewise cubic with duplicated value/slope DOFs at break
/// nodes. Exposes one-sided traces of derivatives up to order three.
class PiecewiseDisplacement {
public:
    PiecewiseDisplacement(Mesh mesh, DofMap map, Vec dofs)
        : mesh_(std::move(mesh)), map_(std::move(map)), dofs_(std::move(dofs)) {
        if (dofs_.size() != map_.size()) throw MeshMismatch("DOF vector size disagrees with DOF map");
    }

    static PiecewiseDisplacement interpolate(const Mesh& m, const DofMap& dm, const C2Function& w) {
        Vec d = Vec::Zero(dm.size());
        for (int i = 0; i < m.num_nodes(); ++i) {
            const NodeDofs& nd = dm.at_node(i);
            const double x = m.node(i);
            d[nd.v_left] = w.value(x);
            d[nd.v_right] = w.value(x);
            d[nd.s_left] = w.deriv(x);
            d[nd.s_right] = w.deriv(x);
        }
        return PiecewiseDisplacement(m, dm, std::move(d));
    }

    const Mesh& mesh() const { return mesh_; }
    const DofMap& dof_map() const { return map_; }
    const Vec& dofs() const { return dofs_; }

    /// Derivative of given order (0..3) at x; `side` disambiguates at nodes.
    double deriv(double x, int order, Side side = Side::Right) const {
        const int node = mesh_.node_at(x);
        int e;
        if (node >= 0) {
            if (side == Side::Left) {
                if (node == 0) throw std::out_of_range("left trace at the left endpoint");
                e = node - 1;
            } else {
                if (node == mesh_.num_nodes() - 1) throw std::out_of_range("right trace at the right endpoint");
                e = node;
            }
        } else {
            e = mesh_.element_of(x);
        }
        return eval_element(e, x, order);
    }

    double value(double x, Side side = Side::Right) const { return deriv(x, 0, side); }

    /// One-sided trace at a node index.
    double trace(int node, int order, Side side) const {
        if (side == Side::Left) {
            if (node == 0) throw std::out_of_range("left trace at the left endpoint");
            return eval_element(node - 1, mesh_.node(node), order);
        }
        if (node == mesh_.num_nodes() - 1) throw std::out_of_range("right trace at the right endpoint");
        return eval_element(node, mesh_.node(node), order);
    }

    /// Sup norm of the derivative of given order; curvature is element-wise
    /// linear and the third derivative element-wise constant, so element
    /// endpoints suffice.
    double sup_deriv(int order) const {
        double worst = 0.0;
        for (int e = 0; e < mesh_.num_elements(); ++e) {
            worst = std::max(worst, std::fabs(eval_element(e, mesh_.node(e), order)));
            worst = std::max(worst, std::fabs(eval_element(e, mesh_.node(e + 1), order)));
        }
        return worst;
    }

    /// Exact re-expression on a refinement (or any mesh whose nodes resolve
    /// this field's breaks).
    PiecewiseDisplacement prolong(const Mesh& fine, const DofMap& fine_map) const {
        Vec d = Vec::Zero(fine_map.size());
        for (int i = 0; i < fine.num_nodes(); ++i) {
            const NodeDofs& nd = fine_map.at_node(i);
            const double x = fine.node(i);
            const int cn = mesh_.node_at(x);
            if (cn >= 0) {
                const bool has_left = cn > 0;
                const bool has_right = cn < mesh_.num_nodes() - 1;
                const double vl = has_left ? trace(cn, 0, Side::Left) : trace(cn, 0, Side::Right);
                const double vr = has_right ? trace(cn, 0, Side::Right) : trace(cn, 0, Side::Left);
                const double sl = has_left ? trace(cn, 1, Side::Left) : trace(cn, 1, Side::Right);
                const double sr = has_right ? trace(cn, 1, Side::Right) : trace(cn, 1, Side::Left);
                d[nd.v_left] = vl;
                d[nd.s_left] = sl;
                d[nd.v_right] = vr;
                d[nd.s_right] = sr;
            } else {
                const int e = mesh_.element_of(x);
                const double v = eval_element(e, x, 0);
                const double s = eval_element(e, x, 1);
                d[nd.v_left] = d[nd.v_right] = v;
                d[nd.s_left] = d[nd.s_right] = s;
            }
        }
        return PiecewiseDisplacement(fine, fine_map, std::move(d));
    }

    double eval_element(int e, double x, int order) const {
        const double h = mesh_.h(e);
        const double t = (x - mesh_.node(e)) / h;
        const auto d = map_.element_dofs(e);
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += dofs_[d[k]] * hermite_shape(k, t, h, order);
        return acc;
    }

private:
    Mesh mesh_;
    DofMap map_;
    Vec dofs_;
};

// ============================================================================
// Constrained quadratic solves
// ============================================================================

/// H u - g accumulated in extended precision. The plain double product
/// carries cancellation noise of order ||H|| eps ||u||, which at fine
/// resolutions exceeds the stationarity tolerances being certified.
inline Vec residual_extended(const SpMat& H, const Vec& u, const Vec& g) {
    std::vector<long double> acc(static_cast<size_t>(H.rows()), 0.0L);
    for (int k = 0; k < H.outerSize(); ++k)
        for (SpMat::InnerIterator it(H, k); it; ++it)
            acc[static_cast<size_t>(it.row())] +=
                static_cast<long double>(it.value()) * static_cast<long double>(u[it.col()]);
    Vec r(H.rows());
    for (int i = 0; i < H.rows(); ++i)
        r[i] = static_cast<double>(acc[static_cast<size_t>(i)] - static_cast<long double>(g[i]));
    return r;
}

/// Affine change of variables u = S y + t used to eliminate equality
/// constraints (fixed DOFs, merged DOFs, parametrised jumps).
struct VarMap {
    SpMat S;
    Vec t;
};

/// Identity map with a set of fixed DOFs eliminated.
inline VarMap fix_dofs(int n, const std::vector<Constraint>& fixed) {
    std::vector<int> col(static_cast<size_t>(n), 0);
    Vec t = Vec::Zero(n);
    for (const Constraint& c : fixed) {
        col[static_cast<size_t>(c.dof)] = -1;
        t[c.dof] = c.value;
    }
    int ny = 0;
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i)
        if (col[static_cast<size_t>(i)] == 0) trip.emplace_back(i, ny++, 1.0);
    VarMap vm;
    vm.S = SpMat(n, ny);
    vm.S.setFromTriplets(trip.begin(), trip.end());
    vm.t = std::move(t);
    return vm;
}

/// Reduced SPD quadratic 1/2 u'Hu - g'u under u = S y + t, factored once.
class ReducedQuadratic {
public:
    ReducedQuadratic(const SpMat& H, const Vec& g, VarMap vm) : H_(&H), g_(&g), vm_(std::move(vm)) {
        Hr_ = SpMat(vm_.S.transpose()) * (*H_) * vm_.S;
        gr_ = vm_.S.transpose() * ((*g_) - (*H_) * vm_.t);
        ldlt_.compute(Hr_);
        if (ldlt_.info() != Eigen::Success)
            throw SingularSystem("reduced system is not positive definite");
    }

    int reduced_size() const { return static_cast<int>(Hr_.rows()); }

    /// Full-space minimiser; `extra` adds a linear term to the reduced RHS.
    /// Iterative refinement with extended-precision residuals keeps the
    /// stationarity residual at the round-off level of the right-hand side
    /// rather than of ||H|| ||u||.
    Vec solve(const Vec& extra = Vec()) const {
        Vec rhs = gr_;
        if (extra.size() > 0) rhs += extra;
        Vec y = ldlt_.solve(rhs);
        if (ldlt_.info() != Eigen::Success) throw SingularSystem("reduced solve failed");
        for (int pass = 0; pass < 2; ++pass) y -= ldlt_.solve(residual_extended(Hr_, y, rhs));
        return vm_.S * y + vm_.t;
    }

    const VarMap& var_map() const { return vm_; }

private:
    const SpMat* H_;
    const Vec* g_;
    VarMap vm_;
    SpMat Hr_;
    Vec gr_;
    Eigen::SimplicialLDLT<SpMat> ldlt_;
};

/// Relative max-norm stationarity residual on the non-fixed DOFs.
inline double kkt_residual(const SpMat& H, const Vec& g, const Vec& u, const std::vector<Constraint>& fixed) {
    std::vector<char> is_fixed(static_cast<size_t>(u.size()), 0);
    for (const Constraint& c : fixed) is_fixed[static_cast<size_t>(c.dof)] = 1;
    const Vec r = residual_extended(H, u, g);
    double worst = 0.0;
    for (int i = 0; i < r.size(); ++i)
        if (!is_fixed[static_cast<size_t>(i)]) worst = std::max(worst, std::fabs(r[i]));
    return worst / (1.0 + g.cwiseAbs().maxCoeff());
}

} // namespace flexbeam
