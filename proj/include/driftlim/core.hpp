#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace driftlim {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }

    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double normSq() const { return x * x + y * y; }
    Vec2 normalized() const { double n = norm(); return {x / n, y / n}; }
    /// Counterclockwise perpendicular.
    Vec2 perp() const { return {-y, x}; }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

struct Mat2 {
    // Row-major 2x2: [a b; c d].
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

    Vec2 apply(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    double trace() const { return a + d; }
    double det() const { return a * d - b * c; }
    Mat2 transpose() const { return {a, c, b, d}; }

    static Mat2 rotation(double angle) {
        double co = std::cos(angle), si = std::sin(angle);
        return {co, -si, si, co};
    }
};

/// Thrown when a numerical routine cannot meet its contract (stagnation,
/// breakdown, loss of positivity).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when the flow structure falls outside the supported component
/// catalogue (e.g. heteroclinic saddle connections).
class UnsupportedTopologyError : public std::runtime_error {
public:
    explicit UnsupportedTopologyError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown on invalid user input (malformed expressions, bad grids, bad configs).
class InvalidArgumentError : public std::invalid_argument {
public:
    explicit InvalidArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

} // namespace driftlim
