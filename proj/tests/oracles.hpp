// Test-only oracles, kept independent of the library's solve paths:
//  - a dense direct solver for the unbroken hard-device problem built from
//    numerically derived basis polynomials,
//  - an accelerated projected-gradient solver for the obstacle problems,
//  - a grid-search minimiser over a single hinge jump,
//  - the transcendental clamped-beam eigenvalue.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "flexbeam/flexbeam.hpp"

namespace oracle {

using Fn = std::function<double(double)>;

// 6-point Gauss-Legendre nodes/weights on [0, 1].
inline const double kGx[6] = {0.033765242898423975, 0.16939530676686776, 0.38069040695840156,
                              0.61930959304159844, 0.83060469323313224, 0.96623475710157603};
inline const double kGw[6] = {0.085662246189585178, 0.18038078652406930, 0.23395696728634552,
                              0.23395696728634552, 0.18038078652406930, 0.085662246189585178};

/// Cubic basis on [0, h] with unit value/slope end conditions, derived by
/// solving the 4x4 interpolation system instead of using closed forms.
struct ElementBasis {
    // coeffs[k] = polynomial coefficients (c0..c3) of basis function k
    Eigen::Matrix4d coeffs;

    explicit ElementBasis(double h) {
        Eigen::Matrix4d V;
        // rows: p(0), p'(0), p(h), p'(h); columns: 1, t, t^2, t^3
        V << 1, 0, 0, 0,
             0, 1, 0, 0,
             1, h, h * h, h * h * h,
             0, 1, 2 * h, 3 * h * h;
        coeffs = V.inverse();
    }

    double eval(int k, double t, int order) const {
        double acc = 0.0;
        for (int p = order; p < 4; ++p) {
            double c = coeffs(p, k);
            for (int q = 0; q < order; ++q) c *= (p - q);
            acc = acc + c * std::pow(t, p - order);
        }
        return acc;
    }
};

struct DenseSolveResult {
    double energy = 0.0;
    std::function<double(double)> u;
    Eigen::VectorXd nodal_values;
};

/// Unbroken hard-device minimiser by dense assembly and direct solve.
inline DenseSolveResult solve_E1_dense(double eta, double mu, const Fn& w, const Fn& dw, const Fn& f,
                                       int n) {
    const double a = -1.0, b = 1.0;
    const double h = (b - a) / n;
    const int ndof = 2 * (n + 1);
    const ElementBasis basis(h);

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(ndof, ndof);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(ndof);
    for (int e = 0; e < n; ++e) {
        const double xl = a + e * h;
        const int dofs[4] = {2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3};
        for (int q = 0; q < 6; ++q) {
            const double t = kGx[q] * h;
            const double x = xl + t;
            const double wq = kGw[q] * h;
            double val[4], d2[4];
            for (int k = 0; k < 4; ++k) {
                val[k] = basis.eval(k, t, 0);
                d2[k] = basis.eval(k, t, 2);
            }
            for (int i = 0; i < 4; ++i) {
                g[dofs[i]] += wq * (f(x) * val[i] + 2.0 * mu * w(x) * val[i]);
                for (int j = 0; j < 4; ++j)
                    H(dofs[i], dofs[j]) += wq * (2.0 * eta * d2[i] * d2[j] + 2.0 * mu * val[i] * val[j]);
            }
        }
    }

    // clamp both endpoints to the datum
    std::vector<int> fixed = {0, 1, ndof - 2, ndof - 1};
    Eigen::VectorXd fixed_vals(4);
    fixed_vals << w(a), dw(a), w(b), dw(b);
    std::vector<int> keep;
    for (int i = 0; i < ndof; ++i)
        if (std::find(fixed.begin(), fixed.end(), i) == fixed.end()) keep.push_back(i);
    Eigen::MatrixXd Hff(keep.size(), keep.size());
    Eigen::VectorXd gf(keep.size());
    for (size_t i = 0; i < keep.size(); ++i) {
        double corr = 0.0;
        for (size_t c = 0; c < fixed.size(); ++c) corr += H(keep[i], fixed[c]) * fixed_vals[c];
        gf[i] = g[keep[i]] - corr;
        for (size_t j = 0; j < keep.size(); ++j) Hff(i, j) = H(keep[i], keep[j]);
    }
    Eigen::VectorXd uf = Hff.ldlt().solve(gf);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(ndof);
    for (size_t c = 0; c < fixed.size(); ++c) u[fixed[c]] = fixed_vals[c];
    for (size_t i = 0; i < keep.size(); ++i) u[keep[i]] = uf[i];

    auto eval_u = [u, a, h, n, basis](double x) {
        int e = std::min(n - 1, std::max(0, static_cast<int>((x - a) / h)));
        const double t = x - (a + e * h);
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += u[2 * e + k] * basis.eval(k, t, 0);
        return acc;
    };

    double energy = 0.0;
    for (int e = 0; e < n; ++e) {
        const double xl = a + e * h;
        for (int q = 0; q < 6; ++q) {
            const double t = kGx[q] * h;
            const double x = xl + t;
            const double wq = kGw[q] * h;
            double uu = 0.0, u2 = 0.0;
            for (int k = 0; k < 4; ++k) {
                uu += u[2 * e + k] * basis.eval(k, t, 0);
                u2 += u[2 * e + k] * basis.eval(k, t, 2);
            }
            const double d = uu - w(x);
            energy += wq * (eta * u2 * u2 + mu * d * d - f(x) * uu);
        }
    }
    return {energy, eval_u, u};
}

// ----------------------------------------------------------------------------
// Accelerated projected gradient for the obstacle quadratic programs
// ----------------------------------------------------------------------------

struct PgRow {
    int pos = -1;
    int neg = -1; // -1: plain bound
    double rhs = 0.0;
};

/// Minimises 1/2 u'Hu - g'u subject to the rows and fixed DOFs, by
/// Jacobi-scaled FISTA with adaptive restart. Rows must touch disjoint DOF
/// pairs (no cracks), so the projection is exact blockwise.
inline Eigen::VectorXd projected_gradient(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                                          const std::vector<flexbeam::Constraint>& clamps,
                                          const std::vector<PgRow>& rows, long max_iters = 1000000,
                                          double step_tol = 1e-13) {
    const int n = static_cast<int>(H.rows());
    std::vector<int> red(n, -1);
    std::vector<char> fixed(n, 0);
    Eigen::VectorXd base = Eigen::VectorXd::Zero(n);
    for (const auto& c : clamps) {
        fixed[c.dof] = 1;
        base[c.dof] = c.value;
    }
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
        if (!fixed[i]) {
            red[i] = static_cast<int>(keep.size());
            keep.push_back(i);
        }
    const int m = static_cast<int>(keep.size());
    Eigen::MatrixXd Hr(m, m);
    Eigen::VectorXd gr(m);
    for (int i = 0; i < m; ++i) {
        gr[i] = g[keep[i]] - H.row(keep[i]).dot(base);
        for (int j = 0; j < m; ++j) Hr(i, j) = H(keep[i], keep[j]);
    }
    // Jacobi scaling
    Eigen::VectorXd d = Hr.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd Hs = d.asDiagonal() * Hr * d.asDiagonal();
    Eigen::VectorXd gs = d.asDiagonal() * gr;

    struct SRow {
        int pos, neg;
        double rhs, dp, dn;
    };
    std::vector<SRow> srows;
    for (const auto& r : rows) {
        if (fixed[r.pos]) continue;
        SRow s{red[r.pos], r.neg >= 0 ? red[r.neg] : -1, r.rhs, d[red[r.pos]], 0.0};
        if (r.neg >= 0) {
            s.rhs -= 0.0;
            s.dn = d[red[r.neg]];
            // subtract the fixed part if neg is clamped (not expected here)
        }
        srows.push_back(s);
    }
    auto project = [&](Eigen::VectorXd& z) {
        for (const auto& s : srows) {
            if (s.neg < 0) {
                const double lb = s.rhs / s.dp;
                if (z[s.pos] < lb) z[s.pos] = lb;
            } else {
                // halfspace dp*zp - dn*zn >= rhs over the pair
                const double val = s.dp * z[s.pos] - s.dn * z[s.neg] - s.rhs;
                if (val < 0.0) {
                    const double nn = s.dp * s.dp + s.dn * s.dn;
                    z[s.pos] -= val * s.dp / nn;
                    z[s.neg] += val * s.dn / nn;
                }
            }
        }
    };

    // Lipschitz constant by power iteration
    Eigen::VectorXd pv = Eigen::VectorXd::Ones(m).normalized();
    double L = 1.0;
    for (int it = 0; it < 100; ++it) {
        pv = (Hs * pv).normalized();
        L = pv.dot(Hs * pv);
    }
    L *= 1.01;

    Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
    project(z);
    Eigen::VectorXd y = z, z_prev = z;
    double t = 1.0;
    const double scale = 1.0 + gs.cwiseAbs().maxCoeff() / L;
    for (long k = 0; k < max_iters; ++k) {
        Eigen::VectorXd grad = Hs * y - gs;
        Eigen::VectorXd z_new = y - grad / L;
        project(z_new);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        Eigen::VectorXd diff = z_new - z;
        if (diff.dot(z_new - z_prev) < 0.0) { // restart
            t = 1.0;
            y = z_new;
        } else {
            y = z_new + ((t - 1.0) / tn) * diff;
        }
        z_prev = z;
        z = z_new;
        t = tn;
        if (k > 10 && diff.cwiseAbs().maxCoeff() <= step_tol * scale) break;
    }
    Eigen::VectorXd u = base;
    for (int i = 0; i < m; ++i) u[keep[i]] = d[i] * z[i];
    return u;
}

// ----------------------------------------------------------------------------
// Grid search over a single hinge jump
// ----------------------------------------------------------------------------

/// Exact minimum of the elastic-plastic energy over a 1D grid of jump
/// values at a single interior hinge: the remaining quadratic is solved
/// exactly for each grid point. Certifies the soft-threshold solver.
inline double g1_single_hinge_grid(const flexbeam::ModelParams& p, const flexbeam::C2Function& w,
                                   const flexbeam::LoadField& f_r, const flexbeam::LoadField& f_p,
                                   const flexbeam::BreakConfig& K, const flexbeam::Mesh& m, double jmax,
                                   int npts) {
    using namespace flexbeam;
    if (K.size() != 1) throw std::logic_error("grid oracle expects one hinge");
    auto a = flexbeam::detail::assemble_pair(p, w, f_r, f_p, m);
    const int n = static_cast<int>(a.H.rows());
    const int node = m.node_of_break(0);
    if (node <= 0 || node >= m.num_nodes() - 1) throw std::logic_error("grid oracle expects an interior hinge");
    const int sL = a.dm_r.at_node(node).s_left;
    const int sR = a.dm_r.at_node(node).s_right;

    Vec t0 = Vec::Zero(n);
    std::vector<char> fixed(static_cast<size_t>(n), 0);
    for (const auto& c : a.clamps) {
        fixed[static_cast<size_t>(c.dof)] = 1;
        t0[c.dof] = c.value;
    }
    std::vector<int> col(static_cast<size_t>(n), -1);
    int ny = 0;
    for (int i = 0; i < n; ++i)
        if (!fixed[static_cast<size_t>(i)] && i != sR) col[static_cast<size_t>(i)] = ny++;
    std::vector<Eigen::Triplet<double>> st;
    for (int i = 0; i < n; ++i)
        if (col[static_cast<size_t>(i)] >= 0) st.emplace_back(i, col[static_cast<size_t>(i)], 1.0);
    st.emplace_back(sR, col[static_cast<size_t>(sL)], 1.0); // u_sR = y_sL + j
    SpMat S(n, ny);
    S.setFromTriplets(st.begin(), st.end());

    ReducedQuadratic rq(a.H, a.g, VarMap{S, t0});
    Vec ej = Vec::Zero(n);
    ej[sR] = 1.0;
    const Vec Wj = S.transpose() * (a.H * ej);

    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < npts; ++k) {
        const double j = -jmax + 2.0 * jmax * k / (npts - 1);
        Vec u = rq.solve(Vec(-j * Wj)) + j * ej;
        auto [ur, up] = a.split(m, u);
        const double e = eval_energy(ProblemKind::G1, p, w, f_r, f_p, K, ur, &*up).total;
        best = std::min(best, e);
    }
    return best;
}

// ----------------------------------------------------------------------------
// Transcendental clamped-beam eigenvalue
// ----------------------------------------------------------------------------

/// Smallest k > 0 with cos(2k) cosh(2k) = 1; the first clamped eigenvalue
/// of the fourth-derivative operator on (-1, 1) is k^4.
inline double clamped_beam_k() {
    long double lo = 2.0L, hi = 2.5L;
    auto fn = [](long double k) { return std::cos(2.0L * k) * std::cosh(2.0L * k) - 1.0L; };
    for (int it = 0; it < 200; ++it) {
        const long double mid = 0.5L * (lo + hi);
        if (fn(lo) * fn(mid) <= 0.0L)
            hi = mid;
        else
            lo = mid;
    }
    return static_cast<double>(0.5L * (lo + hi));
}

// ----------------------------------------------------------------------------
// Convergence order estimation
// ----------------------------------------------------------------------------

/// Least-squares slope of log2(err) against refinement level (h halved per
/// level); positive = decreasing error at that order.
inline double observed_order(const std::vector<double>& errs) {
    const int n = static_cast<int>(errs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double x = i, y = std::log2(std::max(errs[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return -(n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Finite-sample order estimates sit slightly below the asymptotic rate;
/// order assertions use a 5% band on the nominal order.
inline bool order_at_least(const std::vector<double>& errs, double nominal) {
    return observed_order(errs) >= 0.95 * nominal;
}

} // namespace oracle
