#pragma once

// Expression trees for the coefficient fields J and V (and for implicit
// domain functions). Variables are x1..xN; operators + - * / ^ with unary
// minus; functions exp, sin, cos, sqrt. Differentiation is an exact tree
// transformation followed by constant folding -- no finite differences.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spikelab/errors.hpp"

namespace spikelab {

/// Runtime evaluation error (sqrt of a negative, division by zero, ...),
/// reported with the source offset of the offending node.
class EvalError : public Error {
public:
    EvalError(const std::string& what, std::size_t offset)
        : Error(what + " (expression offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

namespace expr {

enum class Op { LIT, VAR, NEG, ADD, SUB, MUL, DIV, POW, EXP, SIN, COS, SQRT, LOG };
// LOG is internal only (derivatives of general powers); the grammar cannot
// produce it directly.

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op;
    double value = 0.0; // LIT
    int var = 0;        // VAR (0-based)
    NodePtr a, b;
    std::size_t offset = 0; // byte offset in the source, for diagnostics
};

inline NodePtr lit(double v) {
    return std::make_shared<Node>(Node{Op::LIT, v, 0, nullptr, nullptr, 0});
}
inline NodePtr var(int i, std::size_t off = 0) {
    return std::make_shared<Node>(Node{Op::VAR, 0.0, i, nullptr, nullptr, off});
}
inline NodePtr make(Op op, NodePtr a, NodePtr b = nullptr,
                    std::size_t off = 0) {
    return std::make_shared<Node>(
        Node{op, 0.0, 0, std::move(a), std::move(b), off});
}

inline bool is_lit(const NodePtr& n, double v) {
    return n->op == Op::LIT && n->value == v;
}

inline double eval_node(const Node& n, std::span<const double> x) {
    switch (n.op) {
    case Op::LIT: return n.value;
    case Op::VAR: return x[static_cast<std::size_t>(n.var)];
    case Op::NEG: return -eval_node(*n.a, x);
    case Op::ADD: return eval_node(*n.a, x) + eval_node(*n.b, x);
    case Op::SUB: return eval_node(*n.a, x) - eval_node(*n.b, x);
    case Op::MUL: return eval_node(*n.a, x) * eval_node(*n.b, x);
    case Op::DIV: {
        double den = eval_node(*n.b, x);
        if (den == 0.0) throw EvalError("division by zero", n.offset);
        return eval_node(*n.a, x) / den;
    }
    case Op::POW: {
        double base = eval_node(*n.a, x), e = eval_node(*n.b, x);
        double r = std::pow(base, e);
        if (!std::isfinite(r))
            throw EvalError("pow out of domain", n.offset);
        return r;
    }
    case Op::EXP: return std::exp(eval_node(*n.a, x));
    case Op::SIN: return std::sin(eval_node(*n.a, x));
    case Op::COS: return std::cos(eval_node(*n.a, x));
    case Op::SQRT: {
        double v = eval_node(*n.a, x);
        if (v < 0.0) throw EvalError("sqrt of a negative value", n.offset);
        return std::sqrt(v);
    }
    case Op::LOG: {
        double v = eval_node(*n.a, x);
        if (v <= 0.0) throw EvalError("log of a nonpositive value", n.offset);
        return std::log(v);
    }
    }
    throw Error("eval_node: corrupt tree");
}

// Constant folding with the usual algebraic identities.
inline NodePtr fold(const NodePtr& n) {
    if (n->op == Op::LIT || n->op == Op::VAR) return n;
    NodePtr a = n->a ? fold(n->a) : nullptr;
    NodePtr b = n->b ? fold(n->b) : nullptr;
    bool alit = a && a->op == Op::LIT;
    bool blit = b && b->op == Op::LIT;
    if (alit && (!n->b || blit)) {
        Node tmp = *n;
        tmp.a = a;
        tmp.b = b;
        return lit(eval_node(tmp, {}));
    }
    switch (n->op) {
    case Op::ADD:
        if (is_lit(a, 0.0)) return b;
        if (is_lit(b, 0.0)) return a;
        break;
    case Op::SUB:
        if (is_lit(b, 0.0)) return a;
        if (is_lit(a, 0.0)) return fold(make(Op::NEG, b, nullptr, n->offset));
        break;
    case Op::MUL:
        if (is_lit(a, 0.0) || is_lit(b, 0.0)) return lit(0.0);
        if (is_lit(a, 1.0)) return b;
        if (is_lit(b, 1.0)) return a;
        break;
    case Op::DIV:
        if (is_lit(a, 0.0) && !is_lit(b, 0.0)) return lit(0.0);
        if (is_lit(b, 1.0)) return a;
        break;
    case Op::POW:
        if (is_lit(b, 1.0)) return a;
        if (is_lit(b, 0.0)) return lit(1.0);
        break;
    case Op::NEG:
        if (a->op == Op::NEG) return a->a;
        break;
    default: break;
    }
    return make(n->op, a, b, n->offset);
}

inline NodePtr diff(const NodePtr& n, int i);

inline NodePtr mul(NodePtr a, NodePtr b) { return make(Op::MUL, a, b); }
inline NodePtr add(NodePtr a, NodePtr b) { return make(Op::ADD, a, b); }
inline NodePtr sub(NodePtr a, NodePtr b) { return make(Op::SUB, a, b); }

inline NodePtr diff(const NodePtr& n, int i) {
    switch (n->op) {
    case Op::LIT: return lit(0.0);
    case Op::VAR: return lit(n->var == i ? 1.0 : 0.0);
    case Op::NEG: return make(Op::NEG, diff(n->a, i), nullptr, n->offset);
    case Op::ADD: return add(diff(n->a, i), diff(n->b, i));
    case Op::SUB: return sub(diff(n->a, i), diff(n->b, i));
    case Op::MUL:
        return add(mul(diff(n->a, i), n->b), mul(n->a, diff(n->b, i)));
    case Op::DIV:
        // (a/b)' = a'/b - a b' / b^2
        return sub(make(Op::DIV, diff(n->a, i), n->b, n->offset),
                   make(Op::DIV, mul(n->a, diff(n->b, i)),
                        mul(n->b, n->b), n->offset));
    case Op::POW: {
        if (n->b->op == Op::LIT) {
            double e = n->b->value;
            // e * a^(e-1) * a'
            return mul(lit(e),
                       mul(make(Op::POW, n->a, lit(e - 1.0), n->offset),
                           diff(n->a, i)));
        }
        // general power: (a^b)' = a^b (b' log a + b a'/a)
        NodePtr loga = make(Op::LOG, n->a, nullptr, n->offset);
        NodePtr term1 = mul(diff(n->b, i), loga);
        NodePtr term2 = make(Op::DIV, mul(n->b, diff(n->a, i)), n->a,
                             n->offset);
        return mul(n, add(term1, term2));
    }
    case Op::EXP: return mul(n, diff(n->a, i));
    case Op::SIN:
        return mul(make(Op::COS, n->a, nullptr, n->offset), diff(n->a, i));
    case Op::COS:
        return make(Op::NEG,
                    mul(make(Op::SIN, n->a, nullptr, n->offset),
                        diff(n->a, i)),
                    nullptr, n->offset);
    case Op::SQRT:
        // (sqrt a)' = a' / (2 sqrt a)
        return make(Op::DIV, diff(n->a, i), mul(lit(2.0), n), n->offset);
    }
    throw Error("diff: corrupt tree");
}

inline bool depends_on_vars(const NodePtr& n) {
    if (n->op == Op::VAR) return true;
    if (n->a && depends_on_vars(n->a)) return true;
    if (n->b && depends_on_vars(n->b)) return true;
    return false;
}

inline void print_node(const Node& n, std::string& out) {
    auto bin = [&](const char* sym) {
        out += '(';
        print_node(*n.a, out);
        out += sym;
        print_node(*n.b, out);
        out += ')';
    };
    auto fn = [&](const char* name) {
        out += name;
        out += '(';
        print_node(*n.a, out);
        out += ')';
    };
    switch (n.op) {
    case Op::LIT: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", n.value);
        out += buf;
        return;
    }
    case Op::VAR: out += 'x' + std::to_string(n.var + 1); return;
    case Op::NEG:
        out += "(-";
        print_node(*n.a, out);
        out += ')';
        return;
    case Op::ADD: bin("+"); return;
    case Op::SUB: bin("-"); return;
    case Op::MUL: bin("*"); return;
    case Op::DIV: bin("/"); return;
    case Op::POW: bin("^"); return;
    case Op::EXP: fn("exp"); return;
    case Op::SIN: fn("sin"); return;
    case Op::COS: fn("cos"); return;
    case Op::SQRT: fn("sqrt"); return;
    case Op::LOG: fn("log"); return;
    }
}

class Parser {
public:
    Parser(std::string_view src, int n_vars) : src_(src), n_(n_vars) {}

    NodePtr parse() {
        NodePtr e = expression();
        skip_ws();
        if (pos_ != src_.size())
            throw ParseError("unexpected trailing input", pos_);
        return e;
    }

private:
    NodePtr expression() {
        NodePtr left = term();
        for (;;) {
            skip_ws();
            if (peek() == '+' || peek() == '-') {
                char op = src_[pos_];
                std::size_t at = pos_++;
                NodePtr right = term();
                left = make(op == '+' ? Op::ADD : Op::SUB, left, right, at);
            } else {
                return left;
            }
        }
    }

    NodePtr term() {
        NodePtr left = unary();
        for (;;) {
            skip_ws();
            if (peek() == '*' || peek() == '/') {
                char op = src_[pos_];
                std::size_t at = pos_++;
                NodePtr right = unary();
                left = make(op == '*' ? Op::MUL : Op::DIV, left, right, at);
            } else {
                return left;
            }
        }
    }

    NodePtr unary() {
        skip_ws();
        if (peek() == '-') {
            std::size_t at = pos_++;
            return make(Op::NEG, unary(), nullptr, at);
        }
        return power();
    }

    NodePtr power() {
        NodePtr base = atom();
        skip_ws();
        if (peek() == '^') {
            std::size_t at = pos_++;
            // right-associative, binds tighter than unary minus on the left
            NodePtr e = unary();
            return make(Op::POW, base, e, at);
        }
        return base;
    }

    NodePtr atom() {
        skip_ws();
        std::size_t at = pos_;
        char c = peek();
        if (c == '(') {
            ++pos_;
            NodePtr e = expression();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = src_.data() + pos_;
            char* end = nullptr;
            double v = std::strtod(begin, &end);
            if (end == begin) throw ParseError("malformed number", at);
            pos_ += static_cast<std::size_t>(end - begin);
            return lit(v);
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string name;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                    src_[pos_] == '_'))
                name += src_[pos_++];
            if (name.size() >= 2 && name[0] == 'x' &&
                std::isdigit(static_cast<unsigned char>(name[1]))) {
                int idx = std::atoi(name.c_str() + 1);
                if (idx < 1 || idx > n_)
                    throw ParseError("variable index out of range for N=" +
                                         std::to_string(n_),
                                     at);
                return var(idx - 1, at);
            }
            Op op;
            if (name == "exp") op = Op::EXP;
            else if (name == "sin") op = Op::SIN;
            else if (name == "cos") op = Op::COS;
            else if (name == "sqrt") op = Op::SQRT;
            else throw ParseError("unknown identifier '" + name + "'", at);
            skip_ws();
            expect('(');
            NodePtr arg = expression();
            expect(')');
            return make(op, arg, nullptr, at);
        }
        throw ParseError("expected a value", at);
    }

    void expect(char c) {
        skip_ws();
        if (peek() != c)
            throw ParseError(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }

    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
    void skip_ws() {
        while (pos_ < src_.size() &&
               std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
    }

    std::string_view src_;
    int n_;
    std::size_t pos_ = 0;
};

} // namespace expr

/// A scalar field over R^N with exact gradient and Hessian trees. Immutable
/// after construction; concurrent evaluation is safe.
class PotentialField {
public:
    PotentialField() = default;

    static PotentialField parse(std::string_view src, int n_vars) {
        if (n_vars < 1)
            throw PreconditionError("PotentialField: N must be >= 1");
        PotentialField f;
        f.n_ = n_vars;
        f.source_ = std::string(src);
        f.root_ = expr::fold(expr::Parser(src, n_vars).parse());
        f.grad_.resize(n_vars);
        for (int i = 0; i < n_vars; ++i)
            f.grad_[i] = expr::fold(expr::diff(f.root_, i));
        f.hess_.resize(static_cast<std::size_t>(n_vars) * n_vars);
        for (int i = 0; i < n_vars; ++i)
            for (int j = i; j < n_vars; ++j) {
                expr::NodePtr h = expr::fold(expr::diff(f.grad_[i], j));
                f.hess_[static_cast<std::size_t>(i) * n_vars + j] = h;
                f.hess_[static_cast<std::size_t>(j) * n_vars + i] = h;
            }
        return f;
    }

    /// A constant field (no parse needed).
    static PotentialField constant(double value, int n_vars) {
        return parse(format_double(value), n_vars);
    }

    int dimension() const { return n_; }
    const std::string& source() const { return source_; }
    bool is_constant() const { return !expr::depends_on_vars(root_); }

    double operator()(std::span<const double> x) const {
        return expr::eval_node(*root_, x);
    }
    double value(std::span<const double> x) const {
        return expr::eval_node(*root_, x);
    }
    double partial(int i, std::span<const double> x) const {
        return expr::eval_node(*grad_[static_cast<std::size_t>(i)], x);
    }
    std::vector<double> gradient(std::span<const double> x) const {
        std::vector<double> g(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) g[static_cast<std::size_t>(i)] = partial(i, x);
        return g;
    }
    double second(int i, int j, std::span<const double> x) const {
        return expr::eval_node(
            *hess_[static_cast<std::size_t>(i) * n_ + j], x);
    }
    std::vector<double> hessian(std::span<const double> x) const {
        std::vector<double> h(static_cast<std::size_t>(n_) * n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                h[static_cast<std::size_t>(i) * n_ + j] = second(i, j, x);
        return h;
    }

    /// Canonical fully parenthesized rendering; reparses to the same field.
    std::string to_string() const {
        std::string out;
        expr::print_node(*root_, out);
        return out;
    }

private:
    static std::string format_double(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    int n_ = 0;
    std::string source_;
    expr::NodePtr root_;
    std::vector<expr::NodePtr> grad_;
    std::vector<expr::NodePtr> hess_;
};

/// parse_expression is the spec-facing name.
inline PotentialField parse_expression(std::string_view src, int n_vars) {
    return PotentialField::parse(src, n_vars);
}

} // namespace spikelab
