#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "driftlim/core.hpp"

namespace driftlim {

/// First-order forward-mode number carrying a value and the two partial
/// derivatives with respect to x1 and x2.
struct Dual {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

enum class UnaryOp { Neg, Sin, Cos, Exp, Ln, Sqrt, Abs, Tanh };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t offset)
        : std::runtime_error(message + " at offset " + std::to_string(offset)),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Evaluation hit a point outside the mathematical domain of some node
/// (negative ln/sqrt argument, fractional power of a negative base, 0/0).
class ExprDomainError : public std::runtime_error {
public:
    explicit ExprDomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Immutable scalar expression in the planar variables x1, x2. Copying is
/// cheap (shared nodes) and evaluation is const, so a single tree may be
/// evaluated from many threads at once.
class Expr {
public:
    Expr() = default;

    static Expr constant(double value);
    static Expr variable(int axis); // 0 = x1, 1 = x2
    static Expr unary(UnaryOp op, Expr operand);
    static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

    bool valid() const { return node_ != nullptr; }

    double eval(Vec2 p) const;
    Dual evalDual(Vec2 p) const;
    Vec2 grad(Vec2 p) const;

    std::string print() const;

    struct Node;
    const Node* node() const { return node_.get(); }

private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

/// Parses the expression grammar: numbers, x1/x2 (aliases x/y), the unary
/// functions sin cos exp ln sqrt abs tanh, prefix minus, and + - * / ^ with
/// conventional precedence (^ binds tighter than prefix minus and is
/// right-associative). Throws ParseError with the byte offset of the fault.
Expr parse(std::string_view source);

// Builder sugar so fields defined in code read like the formulas they implement.
Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr a);
Expr operator+(Expr a, double b);
Expr operator+(double a, Expr b);
Expr operator-(Expr a, double b);
Expr operator-(double a, Expr b);
Expr operator*(Expr a, double b);
Expr operator*(double a, Expr b);
Expr operator/(Expr a, double b);
Expr operator/(double a, Expr b);
Expr pow(Expr base, double exponent);
Expr sin(Expr a);
Expr cos(Expr a);
Expr exp(Expr a);
Expr ln(Expr a);
Expr sqrt(Expr a);
Expr abs(Expr a);
Expr tanh(Expr a);

} // namespace driftlim
