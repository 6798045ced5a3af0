#pragma once

// Reference implementations used by the test suites to cross-check library
// results. Everything here is deliberately written against the public types
// only, with simple textbook algorithms (central differences, Thomas
// elimination, Sturm bisection, explicit time stepping, fixed-step RK4), so
// a defect in the library cannot hide in its own oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "driftlim/core.hpp"
#include "driftlim/expr.hpp"
#include "driftlim/field.hpp"
#include "driftlim/sparse.hpp"

namespace oracles {

using driftlim::CsrMatrix;
using driftlim::Expr;
using driftlim::Mat2;
using driftlim::PlanarField;
using driftlim::Triplet;
using driftlim::Vec2;

inline Vec2 centralGradient(const Expr& e, Vec2 p, double h = 1e-5) {
    double gx = (e.eval({p.x + h, p.y}) - e.eval({p.x - h, p.y})) / (2.0 * h);
    double gy = (e.eval({p.x, p.y + h}) - e.eval({p.x, p.y - h})) / (2.0 * h);
    return {gx, gy};
}

inline Mat2 centralJacobian(const PlanarField& b, Vec2 p, double h = 1e-6) {
    Vec2 dx = (b.eval({p.x + h, p.y}) - b.eval({p.x - h, p.y})) / (2.0 * h);
    Vec2 dy = (b.eval({p.x, p.y + h}) - b.eval({p.x, p.y - h})) / (2.0 * h);
    return {dx.x, dy.x, dx.y, dy.y};
}

inline double monteCarloArea(const std::function<bool(Vec2)>& inside, Vec2 lo, Vec2 hi,
                             int samples, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> ux(lo.x, hi.x), uy(lo.y, hi.y);
    long hits = 0;
    for (int i = 0; i < samples; ++i)
        if (inside({ux(rng), uy(rng)}))
            ++hits;
    return (hi.x - lo.x) * (hi.y - lo.y) * static_cast<double>(hits) / samples;
}

/// Tridiagonal direct elimination. Bands are the strict sub/super diagonals.
inline std::vector<double> thomasSolve(std::vector<double> sub, std::vector<double> diag,
                                       std::vector<double> sup, std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        double w = sub[i - 1] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;)
        x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    return x;
}

/// Leftmost eigenvalue of a Z-matrix via the explicit semigroup: power
/// iteration on I - tau L with tau = 0.5 / maxdiag, which is entrywise
/// nonnegative, so the iteration converges to the Perron pair and
/// lambda = (1 - rho) / tau.
inline double semigroupSmallest(const CsrMatrix& L, int maxIters = 2000000,
                                double tol = 1e-13) {
    const double tau = 0.5 / L.maxDiag();
    std::vector<double> v(static_cast<std::size_t>(L.n), 1.0), w(v.size());
    double rho = 1.0;
    int flat = 0;
    for (int it = 0; it < maxIters; ++it) {
        driftlim::spmv(L, v, w);
        double peak = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            w[i] = v[i] - tau * w[i];
            peak = std::max(peak, std::abs(w[i]));
        }
        double next = peak; // v has max-norm 1, so the growth factor is the new peak
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = w[i] / peak;
        flat = std::abs(next - rho) <= tol * std::max(1.0, std::abs(next)) ? flat + 1 : 0;
        rho = next;
        if (flat >= 50)
            break;
    }
    return (1.0 - rho) / tau;
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below sigma,
/// from the sign count of the LDL^T pivots.
inline int sturmCountBelow(const std::vector<double>& diag, const std::vector<double>& off,
                           double sigma) {
    int count = 0;
    double d = diag[0] - sigma;
    if (d < 0.0)
        ++count;
    for (std::size_t i = 1; i < diag.size(); ++i) {
        double denom = d;
        if (denom == 0.0)
            denom = 1e-300;
        d = diag[i] - sigma - off[i - 1] * off[i - 1] / denom;
        if (d < 0.0)
            ++count;
    }
    return count;
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
inline double sturmSmallest(const std::vector<double>& diag, const std::vector<double>& off) {
    double lo = diag[0], hi = diag[0];
    for (std::size_t i = 0; i < diag.size(); ++i) {
        double r = 0.0;
        if (i > 0)
            r += std::abs(off[i - 1]);
        if (i + 1 < diag.size())
            r += std::abs(off[i]);
        lo = std::min(lo, diag[i] - r);
        hi = std::max(hi, diag[i] + r);
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (sturmCountBelow(diag, off, mid) >= 1)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

/// Smallest eigenvalue of the pencil K u = lambda M u for symmetric
/// tridiagonal K and positive diagonal M, via the congruent standard form
/// M^{-1/2} K M^{-1/2}.
inline double pencilSmallest(const std::vector<double>& kDiag, const std::vector<double>& kOff,
                             const std::vector<double>& mDiag) {
    const std::size_t n = kDiag.size();
    std::vector<double> d(n), e(n ? n - 1 : 0);
    for (std::size_t i = 0; i < n; ++i)
        d[i] = kDiag[i] / mDiag[i];
    for (std::size_t i = 0; i + 1 < n; ++i)
        e[i] = kOff[i] / std::sqrt(mDiag[i] * mDiag[i + 1]);
    return sturmSmallest(d, e);
}

/// The node pencil solve_1d discretizes: half masses at the ends, averaged
/// face conductivities, Robin terms folded into the corner diagonals.
/// Rebuilt here from the coefficient arrays and solved by Sturm bisection.
struct SturmLiouvillePencil {
    std::vector<double> kDiag, kOff, mDiag;
};

inline SturmLiouvillePencil assemblePencil(const std::vector<double>& kappa,
                                           const std::vector<double>& gamma,
                                           const std::vector<double>& mu, double length,
                                           double robinLeft, double robinRight) {
    const std::size_t m = kappa.size();
    const double h = length / static_cast<double>(m - 1);
    SturmLiouvillePencil p;
    p.kDiag.assign(m, 0.0);
    p.kOff.assign(m - 1, 0.0);
    p.mDiag.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double w = (j == 0 || j == m - 1) ? 0.5 * h : h;
        p.mDiag[j] = mu[j] * w;
        p.kDiag[j] = gamma[j] * w;
    }
    for (std::size_t f = 0; f + 1 < m; ++f) {
        double kf = 0.5 * (kappa[f] + kappa[f + 1]) / h;
        p.kDiag[f] += kf;
        p.kDiag[f + 1] += kf;
        p.kOff[f] = -kf;
    }
    p.kDiag[0] -= kappa[0] * robinLeft;
    p.kDiag[m - 1] += kappa[m - 1] * robinRight;
    return p;
}

/// One fixed RK4 step of x' = f(x).
template <class F>
inline Vec2 rk4Step(const F& f, Vec2 x, double h) {
    Vec2 k1 = f(x);
    Vec2 k2 = f(x + k1 * (h / 2));
    Vec2 k3 = f(x + k2 * (h / 2));
    Vec2 k4 = f(x + k3 * h);
    return x + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
}

/// Period of an attracting cycle: run a transient onto the attractor, then
/// time successive upward crossings of the section x2 = section2 (x1 > 0).
template <class F>
inline double rk4Period(const F& f, Vec2 x0, double transient, double h,
                        double section2 = 0.0) {
    Vec2 x = x0;
    double t = 0.0;
    for (; t < transient; t += h)
        x = rk4Step(f, x, h);
    double first = -1.0;
    Vec2 prev = x;
    for (int i = 0; i < 40000000; ++i) {
        Vec2 next = rk4Step(f, x, h);
        if (prev.y < section2 && next.y >= section2 && next.x > 0.0) {
            double frac = (section2 - prev.y) / (next.y - prev.y);
            double tc = t + frac * h;
            if (first < 0.0)
                first = tc;
            else
                return tc - first;
        }
        prev = next;
        x = next;
        t += h;
    }
    throw std::runtime_error("rk4Period: no two section crossings found");
}

/// Random dominant Z-matrix: nonpositive off-diagonal entries, diagonal a
/// touch beyond the row's absolute off-diagonal sum.
inline CsrMatrix randomZMatrix(int n, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> mag(0.1, 1.0);
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<Triplet> trip;
    std::vector<double> rowSum(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        int neighbours = 3 + static_cast<int>(rng() % 4u);
        for (int k = 0; k < neighbours; ++k) {
            int j = pick(rng);
            if (j == i)
                continue;
            double v = mag(rng);
            trip.push_back({i, j, -v});
            rowSum[static_cast<std::size_t>(i)] += v;
        }
    }
    std::uniform_real_distribution<double> head(0.05, 0.6);
    for (int i = 0; i < n; ++i)
        trip.push_back({i, i, rowSum[static_cast<std::size_t>(i)] + head(rng)});
    return CsrMatrix::fromTriplets(n, std::move(trip));
}

/// Direct minimization of the driftless Rayleigh quotient over functions of
/// the distance to `center`, with all integrals evaluated on a polar grid.
/// This is the constrained 2D quotient for a rotation-like family whose
/// orbits are the circles around `center`; minimizing over radial profiles
/// gives the tridiagonal pencil solved here by bisection.
inline double polarConstrainedSmallest(const std::function<double(Vec2)>& c, Vec2 center,
                                       double radius, int nr = 400, int ntheta = 720) {
    const double dr = radius / nr;
    const double dth = 2.0 * M_PI / ntheta;
    // Node radii r_i = i*dr, i = 1..nr (the center node is folded away by the
    // vanishing measure; profiles there couple through the first face).
    std::vector<double> kDiag(static_cast<std::size_t>(nr), 0.0);
    std::vector<double> kOff(static_cast<std::size_t>(nr) - 1, 0.0);
    std::vector<double> mDiag(static_cast<std::size_t>(nr), 0.0);
    for (int i = 1; i <= nr; ++i) {
        double r = i * dr;
        double w = r * dr * (i == nr ? 0.5 : 1.0) * 2.0 * M_PI;
        double avg = 0.0;
        for (int j = 0; j < ntheta; ++j) {
            double th = (j + 0.5) * dth;
            avg += c({center.x + r * std::cos(th), center.y + r * std::sin(th)});
        }
        avg /= ntheta;
        mDiag[static_cast<std::size_t>(i - 1)] = w;
        kDiag[static_cast<std::size_t>(i - 1)] = avg * w;
    }
    for (int i = 1; i < nr; ++i) {
        double rFace = (i + 0.5) * dr;
        double k = 2.0 * M_PI * rFace / dr;
        kDiag[static_cast<std::size_t>(i - 1)] += k;
        kDiag[static_cast<std::size_t>(i)] += k;
        kOff[static_cast<std::size_t>(i - 1)] = -k;
    }
    return pencilSmallest(kDiag, kOff, mDiag);
}

} // namespace oracles
