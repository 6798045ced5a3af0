#include "driftlim/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <utility>
#include <vector>

namespace driftlim {

struct Expr::Node {
    enum class Tag { Const, Var, Unary, Binary };
    Tag tag;
    double value = 0.0; // Const
    int axis = 0;       // Var
    UnaryOp uop{};      // Unary
    BinaryOp bop{};     // Binary
    std::shared_ptr<const Node> a, b;
};

Expr Expr::constant(double value) {
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::Const;
    n->value = value;
    return Expr(std::move(n));
}

Expr Expr::variable(int axis) {
    if (axis != 0 && axis != 1)
        throw InvalidArgumentError("variable axis must be 0 or 1");
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::Var;
    n->axis = axis;
    return Expr(std::move(n));
}

Expr Expr::unary(UnaryOp op, Expr operand) {
    if (!operand.valid())
        throw InvalidArgumentError("unary operand is empty");
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::Unary;
    n->uop = op;
    n->a = operand.node_;
    return Expr(std::move(n));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
    if (!lhs.valid() || !rhs.valid())
        throw InvalidArgumentError("binary operand is empty");
    auto n = std::make_shared<Node>();
    n->tag = Node::Tag::Binary;
    n->bop = op;
    n->a = lhs.node_;
    n->b = rhs.node_;
    return Expr(std::move(n));
}

namespace {

// Scalar concept shared by plain and dual evaluation.

inline double sval(double s) { return s; }
inline double sval(const Dual& s) { return s.v; }

inline double dneg(double a) { return -a; }
inline Dual dneg(const Dual& a) { return {-a.v, -a.d1, -a.d2}; }

inline double dadd(double a, double b) { return a + b; }
inline Dual dadd(const Dual& a, const Dual& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }

inline double dsub(double a, double b) { return a - b; }
inline Dual dsub(const Dual& a, const Dual& b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }

inline double dmul(double a, double b) { return a * b; }
inline Dual dmul(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + a.v * b.d2};
}

inline double ddiv(double a, double b) { return a / b; }
inline Dual ddiv(const Dual& a, const Dual& b) {
    double inv = 1.0 / b.v;
    double q = a.v * inv;
    return {q, (a.d1 - q * b.d1) * inv, (a.d2 - q * b.d2) * inv};
}

// chain(f(v), f'(v), a) applies the chain rule for a unary function.
inline double chain(double fv, double, double) { return fv; }
inline Dual chain(double fv, double fp, const Dual& a) { return {fv, fp * a.d1, fp * a.d2}; }

template <typename S>
S applyUnary(UnaryOp op, const S& a) {
    double v = sval(a);
    switch (op) {
    case UnaryOp::Neg: return dneg(a);
    case UnaryOp::Sin: return chain(std::sin(v), std::cos(v), a);
    case UnaryOp::Cos: return chain(std::cos(v), -std::sin(v), a);
    case UnaryOp::Exp: {
        double e = std::exp(v);
        return chain(e, e, a);
    }
    case UnaryOp::Ln:
        if (v < 0.0)
            throw ExprDomainError("ln of negative argument");
        return chain(std::log(v), 1.0 / v, a);
    case UnaryOp::Sqrt:
        if (v < 0.0)
            throw ExprDomainError("sqrt of negative argument");
        return chain(std::sqrt(v), 0.5 / std::sqrt(v), a);
    case UnaryOp::Abs:
        return chain(std::fabs(v), v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0), a);
    case UnaryOp::Tanh: {
        double t = std::tanh(v);
        return chain(t, 1.0 - t * t, a);
    }
    }
    throw InvalidArgumentError("unknown unary op");
}

inline bool isInteger(double x) { return std::isfinite(x) && x == std::floor(x); }

inline double dpow(double a, double b) {
    if (a < 0.0 && !isInteger(b))
        throw ExprDomainError("fractional power of a negative base");
    return std::pow(a, b);
}

inline Dual dpow(const Dual& a, const Dual& b) {
    bool constExponent = (b.d1 == 0.0 && b.d2 == 0.0);
    if (a.v < 0.0 && !isInteger(b.v))
        throw ExprDomainError("fractional power of a negative base");
    double fv = std::pow(a.v, b.v);
    if (constExponent) {
        // d(a^k) = k a^(k-1) da, valid for negative bases with integer k.
        double fp = (b.v == 0.0) ? 0.0 : b.v * std::pow(a.v, b.v - 1.0);
        return chain(fv, fp, a);
    }
    if (a.v <= 0.0)
        throw ExprDomainError("variable exponent requires a positive base");
    double lnA = std::log(a.v);
    return {fv,
            fv * (b.d1 * lnA + b.v * a.d1 / a.v),
            fv * (b.d2 * lnA + b.v * a.d2 / a.v)};
}

template <typename S>
S applyBinary(BinaryOp op, const S& a, const S& b) {
    switch (op) {
    case BinaryOp::Add: return dadd(a, b);
    case BinaryOp::Sub: return dsub(a, b);
    case BinaryOp::Mul: return dmul(a, b);
    case BinaryOp::Div: return ddiv(a, b);
    case BinaryOp::Pow: return dpow(a, b);
    }
    throw InvalidArgumentError("unknown binary op");
}

template <typename S>
S evalNode(const Expr::Node* n, const S& x1, const S& x2) {
    using Tag = Expr::Node::Tag;
    switch (n->tag) {
    case Tag::Const: {
        if constexpr (std::is_same_v<S, Dual>)
            return Dual{n->value, 0.0, 0.0};
        else
            return n->value;
    }
    case Tag::Var: return n->axis == 0 ? x1 : x2;
    case Tag::Unary: return applyUnary(n->uop, evalNode(n->a.get(), x1, x2));
    case Tag::Binary:
        return applyBinary(n->bop, evalNode(n->a.get(), x1, x2), evalNode(n->b.get(), x1, x2));
    }
    throw InvalidArgumentError("corrupt expression node");
}

} // namespace

double Expr::eval(Vec2 p) const {
    if (!valid())
        throw InvalidArgumentError("eval on empty expression");
    double r = evalNode<double>(node_.get(), p.x, p.y);
    if (std::isnan(r))
        throw ExprDomainError("expression evaluated to NaN");
    return r;
}

Dual Expr::evalDual(Vec2 p) const {
    if (!valid())
        throw InvalidArgumentError("eval on empty expression");
    Dual r = evalNode<Dual>(node_.get(), Dual{p.x, 1.0, 0.0}, Dual{p.y, 0.0, 1.0});
    if (std::isnan(r.v))
        throw ExprDomainError("expression evaluated to NaN");
    return r;
}

Vec2 Expr::grad(Vec2 p) const {
    Dual d = evalDual(p);
    return {d.d1, d.d2};
}

// ---------------------------------------------------------------------------
// Printing

namespace {

const char* unaryName(UnaryOp op) {
    switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Ln: return "ln";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Abs: return "abs";
    case UnaryOp::Tanh: return "tanh";
    }
    return "?";
}

// Precedence levels used for minimal parenthesisation: additive 1,
// multiplicative 2, prefix minus 3, power 4, atoms 5.
int nodePrec(const Expr::Node* n) {
    using Tag = Expr::Node::Tag;
    switch (n->tag) {
    case Tag::Const: return n->value < 0.0 ? 3 : 5;
    case Tag::Var: return 5;
    case Tag::Unary: return n->uop == UnaryOp::Neg ? 3 : 5;
    case Tag::Binary:
        switch (n->bop) {
        case BinaryOp::Add:
        case BinaryOp::Sub: return 1;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 2;
        case BinaryOp::Pow: return 4;
        }
    }
    return 5;
}

std::string formatNumber(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void printNode(const Expr::Node* n, std::string& out, int parentPrec) {
    using Tag = Expr::Node::Tag;
    int prec = nodePrec(n);
    bool parens = prec < parentPrec;
    if (parens)
        out += '(';
    switch (n->tag) {
    case Tag::Const:
        out += formatNumber(n->value);
        break;
    case Tag::Var:
        out += n->axis == 0 ? "x1" : "x2";
        break;
    case Tag::Unary:
        if (n->uop == UnaryOp::Neg) {
            out += '-';
            printNode(n->a.get(), out, 3);
        } else {
            out += unaryName(n->uop);
            out += '(';
            printNode(n->a.get(), out, 0);
            out += ')';
        }
        break;
    case Tag::Binary: {
        char sym = 0;
        switch (n->bop) {
        case BinaryOp::Add: sym = '+'; break;
        case BinaryOp::Sub: sym = '-'; break;
        case BinaryOp::Mul: sym = '*'; break;
        case BinaryOp::Div: sym = '/'; break;
        case BinaryOp::Pow: sym = '^'; break;
        }
        if (n->bop == BinaryOp::Pow) {
            // Right-associative; the exponent may itself be a power or a
            // prefix minus without parentheses.
            printNode(n->a.get(), out, 5);
            out += sym;
            printNode(n->b.get(), out, 3);
        } else {
            printNode(n->a.get(), out, prec);
            out += sym;
            // Left-associative: the right child needs strictly higher binding.
            printNode(n->b.get(), out, prec + 1);
        }
        break;
    }
    }
    if (parens)
        out += ')';
}

} // namespace

std::string Expr::print() const {
    if (!valid())
        return "";
    std::string out;
    printNode(node_.get(), out, 0);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    Expr run() {
        Expr e = parseSum();
        skipSpace();
        if (pos_ != src_.size())
            fail("unexpected trailing input", pos_);
        return e;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& message, std::size_t at) {
        throw ParseError(message, at);
    }

    void skipSpace() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
            ++pos_;
    }

    bool peekIs(char c) {
        skipSpace();
        return pos_ < src_.size() && src_[pos_] == c;
    }

    bool consume(char c) {
        if (peekIs(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    Expr parseSum() {
        Expr lhs = parseProduct();
        for (;;) {
            if (consume('+'))
                lhs = Expr::binary(BinaryOp::Add, lhs, parseProduct());
            else if (consume('-'))
                lhs = Expr::binary(BinaryOp::Sub, lhs, parseProduct());
            else
                return lhs;
        }
    }

    Expr parseProduct() {
        Expr lhs = parseUnary();
        for (;;) {
            if (consume('*'))
                lhs = Expr::binary(BinaryOp::Mul, lhs, parseUnary());
            else if (consume('/'))
                lhs = Expr::binary(BinaryOp::Div, lhs, parseUnary());
            else
                return lhs;
        }
    }

    Expr parseUnary() {
        if (consume('-'))
            return Expr::unary(UnaryOp::Neg, parseUnary());
        return parsePower();
    }

    Expr parsePower() {
        Expr base = parseAtom();
        if (consume('^'))
            return Expr::binary(BinaryOp::Pow, base, parseUnary());
        return base;
    }

    Expr parseAtom() {
        skipSpace();
        if (pos_ >= src_.size())
            fail("expected operand, found end of input", pos_);
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Expr inner = parseSum();
            if (!consume(')'))
                fail("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return parseNumber();
        if (std::isalpha(static_cast<unsigned char>(c)))
            return parseIdent();
        fail(std::string("unexpected character '") + c + "'", pos_);
    }

    Expr parseNumber() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
                ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    ++pos_;
            } else {
                pos_ = mark; // the 'e' belongs to something else ("2exp(...)" is still an error)
            }
        }
        std::string text(src_.substr(start, pos_ - start));
        try {
            std::size_t used = 0;
            double v = std::stod(text, &used);
            if (used != text.size())
                fail("malformed number", start);
            return Expr::constant(v);
        } catch (const std::logic_error&) {
            fail("malformed number", start);
        }
    }

    Expr parseIdent() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string name(src_.substr(start, pos_ - start));
        if (name == "x1" || name == "x")
            return Expr::variable(0);
        if (name == "x2" || name == "y")
            return Expr::variable(1);

        UnaryOp op;
        if (name == "sin") op = UnaryOp::Sin;
        else if (name == "cos") op = UnaryOp::Cos;
        else if (name == "exp") op = UnaryOp::Exp;
        else if (name == "ln") op = UnaryOp::Ln;
        else if (name == "sqrt") op = UnaryOp::Sqrt;
        else if (name == "abs") op = UnaryOp::Abs;
        else if (name == "tanh") op = UnaryOp::Tanh;
        else fail("unknown identifier '" + name + "'", start);

        if (!consume('('))
            fail("expected '(' after function name", pos_);
        Expr arg = parseSum();
        if (!consume(')'))
            fail("expected ')'", pos_);
        return Expr::unary(op, arg);
    }
};

} // namespace

Expr parse(std::string_view source) {
    return Parser(source).run();
}

// ---------------------------------------------------------------------------
// Builder operators

Expr operator+(Expr a, Expr b) { return Expr::binary(BinaryOp::Add, std::move(a), std::move(b)); }
Expr operator-(Expr a, Expr b) { return Expr::binary(BinaryOp::Sub, std::move(a), std::move(b)); }
Expr operator*(Expr a, Expr b) { return Expr::binary(BinaryOp::Mul, std::move(a), std::move(b)); }
Expr operator/(Expr a, Expr b) { return Expr::binary(BinaryOp::Div, std::move(a), std::move(b)); }
Expr operator-(Expr a) { return Expr::unary(UnaryOp::Neg, std::move(a)); }
Expr operator+(Expr a, double b) { return std::move(a) + Expr::constant(b); }
Expr operator+(double a, Expr b) { return Expr::constant(a) + std::move(b); }
Expr operator-(Expr a, double b) { return std::move(a) - Expr::constant(b); }
Expr operator-(double a, Expr b) { return Expr::constant(a) - std::move(b); }
Expr operator*(Expr a, double b) { return std::move(a) * Expr::constant(b); }
Expr operator*(double a, Expr b) { return Expr::constant(a) * std::move(b); }
Expr operator/(Expr a, double b) { return std::move(a) / Expr::constant(b); }
Expr operator/(double a, Expr b) { return Expr::constant(a) / std::move(b); }
Expr pow(Expr base, double exponent) {
    return Expr::binary(BinaryOp::Pow, std::move(base), Expr::constant(exponent));
}
Expr sin(Expr a) { return Expr::unary(UnaryOp::Sin, std::move(a)); }
Expr cos(Expr a) { return Expr::unary(UnaryOp::Cos, std::move(a)); }
Expr exp(Expr a) { return Expr::unary(UnaryOp::Exp, std::move(a)); }
Expr ln(Expr a) { return Expr::unary(UnaryOp::Ln, std::move(a)); }
Expr sqrt(Expr a) { return Expr::unary(UnaryOp::Sqrt, std::move(a)); }
Expr abs(Expr a) { return Expr::unary(UnaryOp::Abs, std::move(a)); }
Expr tanh(Expr a) { return Expr::unary(UnaryOp::Tanh, std::move(a)); }

} // namespace driftlim
