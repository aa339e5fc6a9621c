#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "flexbeam/expression.hpp"

namespace flexbeam {

/// Natural C2 cubic spline through strictly increasing knots.
class CubicSpline {
public:
    CubicSpline(std::vector<double> xs, std::vector<double> ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
        const size_t n = xs_.size();
        if (n < 2 || ys_.size() != n) throw Error("spline needs at least two (x, y) knots");
        for (size_t i = 0; i + 1 < n; ++i)
            if (!(xs_[i] < xs_[i + 1])) throw Error("spline knots must be strictly increasing");
        // Solve the tridiagonal system for second derivatives, natural ends.
        m_.assign(n, 0.0);
        if (n > 2) {
            std::vector<double> diag(n - 2), rhs(n - 2), sub(n - 2), sup(n - 2);
            for (size_t i = 1; i + 1 < n; ++i) {
                const double hl = xs_[i] - xs_[i - 1];
                const double hr = xs_[i + 1] - xs_[i];
                sub[i - 1] = hl / 6.0;
                diag[i - 1] = (hl + hr) / 3.0;
                sup[i - 1] = hr / 6.0;
                rhs[i - 1] = (ys_[i + 1] - ys_[i]) / hr - (ys_[i] - ys_[i - 1]) / hl;
            }
            // Thomas algorithm
            for (size_t i = 1; i < diag.size(); ++i) {
                const double f = sub[i] / diag[i - 1];
                diag[i] -= f * sup[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            for (size_t i = diag.size(); i-- > 0;) {
                double v = rhs[i];
                if (i + 1 < diag.size()) v -= sup[i] * m_[i + 2];
                m_[i + 1] = v / diag[i];
            }
        }
    }

    Jet2 jet(double x) const {
        const size_t i = segment(x);
        const double h = xs_[i + 1] - xs_[i];
        const double a = (xs_[i + 1] - x) / h;
        const double b = (x - xs_[i]) / h;
        Jet2 r;
        r.v = a * ys_[i] + b * ys_[i + 1] +
              ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
        r.d1 = (ys_[i + 1] - ys_[i]) / h + ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) * h / 6.0;
        r.d2 = a * m_[i] + b * m_[i + 1];
        return r;
    }

    /// Largest one-sided mismatch of the second derivative across interior
    /// knots; zero up to round-off by construction.
    double max_curvature_jump() const {
        double worst = 0.0;
        for (size_t i = 1; i + 1 < xs_.size(); ++i) {
            const double left = eval_piece_d2(i - 1, xs_[i]);
            const double right = eval_piece_d2(i, xs_[i]);
            worst = std::max(worst, std::fabs(left - right));
        }
        return worst;
    }

    const std::vector<double>& knots() const { return xs_; }

private:
    size_t segment(double x) const {
        auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        size_t i = it == xs_.begin() ? 0 : static_cast<size_t>(it - xs_.begin()) - 1;
        return std::min(i, xs_.size() - 2);
    }

    double eval_piece_d2(size_t i, double x) const {
        const double h = xs_[i + 1] - xs_[i];
        const double a = (xs_[i + 1] - x) / h;
        const double b = (x - xs_[i]) / h;
        return a * m_[i] + b * m_[i + 1];
    }

    std::vector<double> xs_, ys_, m_;
};

/// Dirichlet datum: twice continuously differentiable scalar function on
/// [-2, 2] with exact value/slope/curvature evaluators.
class C2Function {
public:
    C2Function() : jet_([](double) { return Jet2{}; }) {}

    explicit C2Function(std::function<Jet2(double)> jet) : jet_(std::move(jet)) {}

    Jet2 jet(double x) const { return jet_(x); }
    double value(double x) const { return jet_(x).v; }
    double deriv(double x) const { return jet_(x).d1; }
    double second(double x) const { return jet_(x).d2; }

    static C2Function zero() { return C2Function(); }

    static C2Function constant(double c) {
        return C2Function([c](double) { return Jet2{c, 0.0, 0.0}; });
    }

    /// c[0] + c[1] x + c[2] x^2 + ...
    static C2Function polynomial(std::vector<double> c) {
        return C2Function([c = std::move(c)](double x) {
            Jet2 r;
            for (size_t k = c.size(); k-- > 0;) {
                r.d2 = r.d2 * x + 2.0 * r.d1;
                r.d1 = r.d1 * x + r.v;
                r.v = r.v * x + c[k];
            }
            return r;
        });
    }

    static C2Function from_expression(const std::string& text) {
        auto e = std::make_shared<Expression>(Expression::parse(text));
        return C2Function([e](double x) { return e->jet(x); });
    }

    static C2Function from_spline(CubicSpline s) {
        auto sp = std::make_shared<CubicSpline>(std::move(s));
        return C2Function([sp](double x) { return sp->jet(x); });
    }

private:
    std::function<Jet2(double)> jet_;
};

/// Square-integrable load on (-1, 1), sampled at quadrature points.
class LoadField {
public:
    LoadField() : f_([](double) { return 0.0; }) {}

    explicit LoadField(std::function<double(double)> f) : f_(std::move(f)) {}

    double operator()(double x) const { return f_(x); }

    static LoadField zero() { return LoadField(); }

    static LoadField constant(double c) {
        return LoadField([c](double) { return c; });
    }

    static LoadField from_expression(const std::string& text) {
        auto e = std::make_shared<Expression>(Expression::parse(text));
        return LoadField([e](double x) { return (*e)(x); });
    }

private:
    std::function<double(double)> f_;
};

} // namespace flexbeam
