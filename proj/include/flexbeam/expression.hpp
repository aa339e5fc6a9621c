#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "flexbeam/errors.hpp"

namespace flexbeam {

/// Value together with first and second derivative with respect to x.
struct Jet2 {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

namespace detail {

inline Jet2 jet_const(double c) { return {c, 0.0, 0.0}; }
inline Jet2 jet_var(double x) { return {x, 1.0, 0.0}; }

inline Jet2 operator+(const Jet2& a, const Jet2& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
inline Jet2 operator-(const Jet2& a, const Jet2& b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
inline Jet2 operator-(const Jet2& a) { return {-a.v, -a.d1, -a.d2}; }

inline Jet2 operator*(const Jet2& a, const Jet2& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) {
    const double q = a.v / b.v;
    const double q1 = (a.d1 - q * b.d1) / b.v;
    const double q2 = (a.d2 - 2.0 * q1 * b.d1 - q * b.d2) / b.v;
    return {q, q1, q2};
}

/// Chain rule for a scalar function with known value/first/second at a.v.
inline Jet2 compose(double f, double df, double ddf, const Jet2& a) {
    return {f, df * a.d1, ddf * a.d1 * a.d1 + df * a.d2};
}

inline Jet2 jet_sin(const Jet2& a) { return compose(std::sin(a.v), std::cos(a.v), -std::sin(a.v), a); }
inline Jet2 jet_cos(const Jet2& a) { return compose(std::cos(a.v), -std::sin(a.v), -std::cos(a.v), a); }
inline Jet2 jet_exp(const Jet2& a) {
    const double e = std::exp(a.v);
    return compose(e, e, e, a);
}
inline Jet2 jet_tanh(const Jet2& a) {
    const double t = std::tanh(a.v);
    const double s = 1.0 - t * t;
    return compose(t, s, -2.0 * t * s, a);
}
inline Jet2 jet_sqrt(const Jet2& a) {
    const double r = std::sqrt(a.v);
    return compose(r, 0.5 / r, -0.25 / (r * a.v), a);
}
inline Jet2 jet_abs(const Jet2& a) {
    const double s = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
    return {std::fabs(a.v), s * a.d1, s * a.d2};
}
/// Heaviside step, 1 for t >= 0. Derivatives taken as 0 away from the kink.
inline Jet2 jet_step(const Jet2& a) { return {a.v >= 0.0 ? 1.0 : 0.0, 0.0, 0.0}; }

inline Jet2 jet_pow(const Jet2& a, const Jet2& b) {
    if (b.d1 == 0.0 && b.d2 == 0.0) {
        const double p = b.v;
        const double f = std::pow(a.v, p);
        const double df = p * std::pow(a.v, p - 1.0);
        const double ddf = p * (p - 1.0) * std::pow(a.v, p - 2.0);
        return compose(f, df, ddf, a);
    }
    // general case via exp(b log a); requires a > 0
    const Jet2 la = compose(std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v), a);
    return jet_exp(b * la);
}

} // namespace detail

/// A closed-form scalar expression of x with exact first and second
/// derivatives. Grammar: numbers, `x`, `pi`, `+ - * / ^`, parentheses, and
/// the functions sin, cos, exp, tanh, sqrt, abs, step, min, max, pow.
class Expression {
public:
    static Expression parse(const std::string& text) {
        Parser p(text);
        Expression e;
        e.root_ = p.parse_expr(e.nodes_);
        p.skip_ws();
        if (!p.done()) p.fail("unexpected trailing input");
        e.text_ = text;
        return e;
    }

    double operator()(double x) const { return eval(root_, detail::jet_var(x)).v; }

    Jet2 jet(double x) const { return eval(root_, detail::jet_var(x)); }

    const std::string& text() const { return text_; }

private:
    enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Tanh, Sqrt, Abs, Step, Min, Max };

    struct Node {
        Op op;
        double value = 0.0;
        int lhs = -1;
        int rhs = -1;
    };

    Jet2 eval(int idx, const Jet2& x) const {
        using namespace detail;
        const Node& n = nodes_[static_cast<size_t>(idx)];
        switch (n.op) {
        case Op::Const: return jet_const(n.value);
        case Op::Var: return x;
        case Op::Add: return eval(n.lhs, x) + eval(n.rhs, x);
        case Op::Sub: return eval(n.lhs, x) - eval(n.rhs, x);
        case Op::Mul: return eval(n.lhs, x) * eval(n.rhs, x);
        case Op::Div: return eval(n.lhs, x) / eval(n.rhs, x);
        case Op::Pow: return jet_pow(eval(n.lhs, x), eval(n.rhs, x));
        case Op::Neg: return -eval(n.lhs, x);
        case Op::Sin: return jet_sin(eval(n.lhs, x));
        case Op::Cos: return jet_cos(eval(n.lhs, x));
        case Op::Exp: return jet_exp(eval(n.lhs, x));
        case Op::Tanh: return jet_tanh(eval(n.lhs, x));
        case Op::Sqrt: return jet_sqrt(eval(n.lhs, x));
        case Op::Abs: return jet_abs(eval(n.lhs, x));
        case Op::Step: return jet_step(eval(n.lhs, x));
        case Op::Min: {
            const Jet2 a = eval(n.lhs, x), b = eval(n.rhs, x);
            return a.v <= b.v ? a : b;
        }
        case Op::Max: {
            const Jet2 a = eval(n.lhs, x), b = eval(n.rhs, x);
            return a.v >= b.v ? a : b;
        }
        }
        return {};
    }

    class Parser {
    public:
        explicit Parser(const std::string& s) : s_(s) {}

        int parse_expr(std::vector<Node>& out) {
            int lhs = parse_term(out);
            while (true) {
                skip_ws();
                if (consume('+')) {
                    lhs = push(out, {Op::Add, 0.0, lhs, parse_term(out)});
                } else if (consume('-')) {
                    lhs = push(out, {Op::Sub, 0.0, lhs, parse_term(out)});
                } else {
                    return lhs;
                }
            }
        }

        void skip_ws() {
            while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        }

        bool done() const { return pos_ >= s_.size(); }

        [[noreturn]] void fail(const std::string& what) {
            throw SpecParseError("expression error at offset " + std::to_string(pos_) + ": " + what +
                                 " in '" + s_ + "'");
        }

    private:
        int parse_term(std::vector<Node>& out) {
            int lhs = parse_factor(out);
            while (true) {
                skip_ws();
                if (consume('*')) {
                    lhs = push(out, {Op::Mul, 0.0, lhs, parse_factor(out)});
                } else if (consume('/')) {
                    lhs = push(out, {Op::Div, 0.0, lhs, parse_factor(out)});
                } else {
                    return lhs;
                }
            }
        }

        int parse_factor(std::vector<Node>& out) {
            int base = parse_unary(out);
            skip_ws();
            if (consume('^')) {
                // right associative
                int exp = parse_factor(out);
                return push(out, {Op::Pow, 0.0, base, exp});
            }
            return base;
        }

        int parse_unary(std::vector<Node>& out) {
            skip_ws();
            if (consume('-')) return push(out, {Op::Neg, 0.0, parse_unary(out), -1});
            if (consume('+')) return parse_unary(out);
            return parse_primary(out);
        }

        int parse_primary(std::vector<Node>& out) {
            skip_ws();
            if (done()) fail("unexpected end of input");
            const char c = s_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number(out);
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident(out);
            if (consume('(')) {
                int e = parse_expr(out);
                skip_ws();
                if (!consume(')')) fail("expected ')'");
                return e;
            }
            fail(std::string("unexpected character '") + c + "'");
        }

        int parse_number(std::vector<Node>& out) {
            size_t end = 0;
            double v = 0.0;
            try {
                v = std::stod(s_.substr(pos_), &end);
            } catch (const std::exception&) {
                fail("malformed number");
            }
            pos_ += end;
            return push(out, {Op::Const, v, -1, -1});
        }

        int parse_ident(std::vector<Node>& out) {
            size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            const std::string name = s_.substr(start, pos_ - start);
            skip_ws();
            if (pos_ < s_.size() && s_[pos_] == '(') {
                ++pos_;
                std::vector<int> args;
                skip_ws();
                if (!consume(')')) {
                    args.push_back(parse_expr(out));
                    skip_ws();
                    while (consume(',')) args.push_back(parse_expr(out));
                    skip_ws();
                    if (!consume(')')) fail("expected ')' after arguments");
                }
                return make_call(out, name, args);
            }
            if (name == "x") return push(out, {Op::Var, 0.0, -1, -1});
            if (name == "pi") return push(out, {Op::Const, 3.14159265358979323846, -1, -1});
            fail("unknown identifier '" + name + "'");
        }

        int make_call(std::vector<Node>& out, const std::string& name, const std::vector<int>& args) {
            auto unary = [&](Op op) {
                if (args.size() != 1) fail(name + " takes one argument");
                return push(out, {op, 0.0, args[0], -1});
            };
            auto binary = [&](Op op) {
                if (args.size() != 2) fail(name + " takes two arguments");
                return push(out, {op, 0.0, args[0], args[1]});
            };
            if (name == "sin") return unary(Op::Sin);
            if (name == "cos") return unary(Op::Cos);
            if (name == "exp") return unary(Op::Exp);
            if (name == "tanh") return unary(Op::Tanh);
            if (name == "sqrt") return unary(Op::Sqrt);
            if (name == "abs") return unary(Op::Abs);
            if (name == "step") return unary(Op::Step);
            if (name == "min") return binary(Op::Min);
            if (name == "max") return binary(Op::Max);
            if (name == "pow") return binary(Op::Pow);
            fail("unknown function '" + name + "'");
        }

        bool consume(char c) {
            if (pos_ < s_.size() && s_[pos_] == c) {
                ++pos_;
                return true;
            }
            return false;
        }

        static int push(std::vector<Node>& out, Node n) {
            out.push_back(n);
            return static_cast<int>(out.size()) - 1;
        }

        const std::string& s_;
        size_t pos_ = 0;
    };

    std::vector<Node> nodes_;
    int root_ = -1;
    std::string text_;
};

} // namespace flexbeam
