#pragma once

#include <functional>
#include <utility>

#include "driftlim/core.hpp"
#include "driftlim/expr.hpp"

namespace driftlim {

/// Scalar function on the plane with a gradient. Backed either by an Expr
/// (gradient via forward-mode duals) or by explicit callables.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(Expr e); // NOLINT: implicit by intent, an Expr is a scalar field
    ScalarField(std::function<double(Vec2)> eval, std::function<Vec2(Vec2)> grad);

    double operator()(Vec2 p) const { return eval_(p); }
    double eval(Vec2 p) const { return eval_(p); }
    Vec2 grad(Vec2 p) const { return grad_(p); }
    bool valid() const { return static_cast<bool>(eval_); }

private:
    std::function<double(Vec2)> eval_;
    std::function<Vec2(Vec2)> grad_;
};

/// Planar vector field with a Jacobian.
class PlanarField {
public:
    PlanarField() = default;
    PlanarField(Expr b1, Expr b2);
    PlanarField(std::function<Vec2(Vec2)> eval, std::function<Mat2(Vec2)> jacobian);

    Vec2 operator()(Vec2 p) const { return eval_(p); }
    Vec2 eval(Vec2 p) const { return eval_(p); }
    Mat2 jacobian(Vec2 p) const { return jac_(p); }
    bool valid() const { return static_cast<bool>(eval_); }

    /// The conjugated field R b(R^T x) for an orthogonal R; trajectories map
    /// to rotated trajectories.
    PlanarField conjugated(Mat2 R) const;

    /// The field sigma * b; orbits are unchanged, periods scale by 1/sigma.
    PlanarField scaledBy(double sigma) const;

private:
    std::function<Vec2(Vec2)> eval_;
    std::function<Mat2(Vec2)> jac_;
};

/// Rigid rotation (-x2, x1).
PlanarField rotationField();

/// The double-well energy x2^2/2 + x1^4/4 - x1^2/2 whose sublevel sets shape
/// the second example family of fields.
Expr doubleWellEnergy();

/// Gradient-perturbed Hamiltonian field
///   b = (-dH/dx2, dH/dx1) - (H - alpha) * grad H
/// for the double-well H. Energy decays onto the level set H = alpha
/// (or onto the well bottoms when alpha is below the saddle level).
PlanarField doubleWellField(double alpha);

/// Rotation with a superimposed constant wind on the unit disk:
///   b = (1-alpha) * (-x2, x1) + alpha * (-1, 0).
PlanarField windedRotationField(double alpha);

/// Radially inward field that vanishes identically on the disk |x| <= r0:
///   b = -x * max(|x|^2 - r0^2, 0)^2. C^1 and inflow on any larger disk.
PlanarField radialInflowField(double r0);

} // namespace driftlim
