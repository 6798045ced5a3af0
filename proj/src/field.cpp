#include "driftlim/field.hpp"

namespace driftlim {

ScalarField::ScalarField(Expr e)
    : eval_([e](Vec2 p) { return e.eval(p); }),
      grad_([e](Vec2 p) { return e.grad(p); }) {}

ScalarField::ScalarField(std::function<double(Vec2)> eval, std::function<Vec2(Vec2)> grad)
    : eval_(std::move(eval)), grad_(std::move(grad)) {}

PlanarField::PlanarField(Expr b1, Expr b2)
    : eval_([b1, b2](Vec2 p) { return Vec2{b1.eval(p), b2.eval(p)}; }),
      jac_([b1, b2](Vec2 p) {
          Vec2 g1 = b1.grad(p);
          Vec2 g2 = b2.grad(p);
          return Mat2{g1.x, g1.y, g2.x, g2.y};
      }) {}

PlanarField::PlanarField(std::function<Vec2(Vec2)> eval, std::function<Mat2(Vec2)> jacobian)
    : eval_(std::move(eval)), jac_(std::move(jacobian)) {}

PlanarField PlanarField::conjugated(Mat2 R) const {
    Mat2 Rt = R.transpose();
    auto ev = eval_;
    auto jc = jac_;
    return PlanarField(
        [R, Rt, ev](Vec2 p) { return R.apply(ev(Rt.apply(p))); },
        [R, Rt, jc](Vec2 p) {
            Mat2 J = jc(Rt.apply(p));
            // R J R^T
            Mat2 JR{J.a * Rt.a + J.b * Rt.c, J.a * Rt.b + J.b * Rt.d,
                    J.c * Rt.a + J.d * Rt.c, J.c * Rt.b + J.d * Rt.d};
            return Mat2{R.a * JR.a + R.b * JR.c, R.a * JR.b + R.b * JR.d,
                        R.c * JR.a + R.d * JR.c, R.c * JR.b + R.d * JR.d};
        });
}

PlanarField PlanarField::scaledBy(double sigma) const {
    auto ev = eval_;
    auto jc = jac_;
    return PlanarField(
        [sigma, ev](Vec2 p) { return ev(p) * sigma; },
        [sigma, jc](Vec2 p) {
            Mat2 J = jc(p);
            return Mat2{J.a * sigma, J.b * sigma, J.c * sigma, J.d * sigma};
        });
}

PlanarField rotationField() {
    Expr x1 = Expr::variable(0), x2 = Expr::variable(1);
    return PlanarField(-x2, x1);
}

Expr doubleWellEnergy() {
    Expr x1 = Expr::variable(0), x2 = Expr::variable(1);
    return pow(x2, 2.0) / 2.0 + pow(x1, 4.0) / 4.0 - pow(x1, 2.0) / 2.0;
}

PlanarField doubleWellField(double alpha) {
    Expr x1 = Expr::variable(0), x2 = Expr::variable(1);
    Expr H = doubleWellEnergy();
    Expr Hx1 = pow(x1, 3.0) - x1; // dH/dx1
    Expr Hx2 = x2;                // dH/dx2
    Expr excess = H - alpha;
    return PlanarField(-Hx2 - excess * Hx1, Hx1 - excess * Hx2);
}

PlanarField windedRotationField(double alpha) {
    Expr x1 = Expr::variable(0), x2 = Expr::variable(1);
    return PlanarField((1.0 - alpha) * (-x2) - alpha, (1.0 - alpha) * x1);
}

PlanarField radialInflowField(double r0) {
    double t0 = r0 * r0;
    return PlanarField(
        [t0](Vec2 p) {
            double ex = std::max(p.normSq() - t0, 0.0);
            return -p * (ex * ex);
        },
        [t0](Vec2 p) {
            double ex = std::max(p.normSq() - t0, 0.0);
            double s = ex * ex;
            double sp = 2.0 * ex; // d(ex^2)/d(|x|^2)
            return Mat2{-s - p.x * sp * 2.0 * p.x, -p.x * sp * 2.0 * p.y,
                        -p.y * sp * 2.0 * p.x, -s - p.y * sp * 2.0 * p.y};
        });
}

} // namespace driftlim
