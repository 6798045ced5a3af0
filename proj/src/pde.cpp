#include "driftlim/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace driftlim {

namespace {

// q / (e^q - 1), continued by its series near zero and by its asymptotes
// where exp would overflow.
double bernoulli(double q) {
    double a = std::abs(q);
    if (a < 1e-4)
        return 1.0 - 0.5 * q + q * q / 12.0;
    if (q > 700.0)
        return 0.0;
    if (q < -700.0)
        return -q;
    return q / std::expm1(q);
}

// Row-side flux weight for an oriented face: q is the Peclet number signed
// toward the neighbouring cell. Exponential fitting gives B(-q); donor-cell
// upwinding gives 1 + max(q, 0). Both are positive, so the off-diagonal
// -weight/h^2 keeps the Z-matrix property.
double faceWeight(Scheme scheme, double q) {
    if (scheme == Scheme::Upwind)
        return 1.0 + std::max(q, 0.0);
    return bernoulli(-q);
}

// Residual tolerance for an eigensolve on the given matrix. The power
// iteration measures max_i |(Lv)_i - lambda v_i| against a max-normalised v,
// so rounding alone keeps that residual near eps times the largest absolute
// row sum. Asking for less stalls the solver on matrices with fine-grid 1/h^2
// entries; asking for 100x the floor converges reliably and still leaves the
// eigenvalue far more accurate than the discretisation error.
double scaledEigenTol(const CsrMatrix& L) {
    double rowNorm = 0.0;
    for (int i = 0; i < L.n; ++i) {
        double s = 0.0;
        for (int p = L.rowPtr[static_cast<std::size_t>(i)];
             p < L.rowPtr[static_cast<std::size_t>(i) + 1]; ++p)
            s += std::abs(L.val[static_cast<std::size_t>(p)]);
        rowNorm = std::max(rowNorm, s);
    }
    return std::max(1e-10, 100.0 * std::numeric_limits<double>::epsilon() * rowNorm);
}

// Eigensolve with tolerance backoff. How tight a residual the solver can
// reach depends on how singular a shifted system its linear solves can still
// handle, which varies with the advection strength and is cheapest to learn
// by attempting: on stagnation, retry an order of magnitude looser until a
// modest cap, then propagate the failure.
EigenResult solvePrincipal(const CsrMatrix& L, const EigenOptions& opts) {
    EigenOptions eopts = opts;
    eopts.tol = std::max(opts.tol, scaledEigenTol(L));
    for (;;) {
        try {
            return principal_eigenpair(L, eopts);
        } catch (const NumericalError&) {
            if (eopts.tol >= 1e-4)
                throw;
            eopts.tol = std::min(eopts.tol * 10.0, 1e-4);
            eopts.refineAfter = std::min(eopts.refineAfter, 100);
        }
    }
}

bool dirichletAt(const BoundarySpec& bc, const GridFace& face) {
    switch (bc.kind) {
    case BoundarySpec::Kind::AllNeumann:
        return false;
    case BoundarySpec::Kind::AllDirichlet:
        return true;
    case BoundarySpec::Kind::Mixed:
        if (!bc.dirichletFace)
            throw InvalidArgumentError("mixed boundary spec needs a face predicate");
        return bc.dirichletFace(face);
    }
    return false;
}

} // namespace

Discretization assemble(const Grid& grid, const PlanarField& b, double A, const ScalarField& c,
                        const BoundarySpec& bc, Scheme scheme) {
    if (!std::isfinite(A) || A < 0.0)
        throw InvalidArgumentError("drift rate must be finite and nonnegative");
    const int N = grid.unknownCount();
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(N) * 6);

    const double hs[2] = {grid.h1, grid.h2};
    for (int k = 0; k < N; ++k) {
        int cell = grid.cellOfUnknown[static_cast<std::size_t>(k)];
        int i = cell % grid.n1, j = cell / grid.n1;
        Vec2 center = grid.cellCenter(i, j);
        trip.push_back({k, k, c(center)});

        // Forward faces only; each interior face is visited once and
        // contributes to both adjacent rows.
        for (int axis = 0; axis < 2; ++axis) {
            int ni = i + (axis == 0 ? 1 : 0);
            int nj = j + (axis == 0 ? 0 : 1);
            if (ni >= grid.n1 || nj >= grid.n2)
                continue;
            int ncell = grid.flat(ni, nj);
            int kn = grid.unknownIndex[static_cast<std::size_t>(ncell)];
            if (kn < 0)
                continue;
            double h = hs[axis];
            Vec2 unit = axis == 0 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
            Vec2 mid = center + unit * (0.5 * h);
            double q = A * b(mid).dot(unit) * h;
            double wSelf = faceWeight(scheme, q) / (h * h);
            double wNb = faceWeight(scheme, -q) / (h * h);
            trip.push_back({k, k, wSelf});
            trip.push_back({k, kn, -wSelf});
            trip.push_back({kn, kn, wNb});
            trip.push_back({kn, k, -wNb});
        }
    }

    // Exterior faces: Neumann faces carry no flux (reflecting ghost), while
    // Dirichlet faces pin a zero ghost value half a cell away.
    for (const GridFace& face : grid.boundaryFaces) {
        if (!dirichletAt(bc, face))
            continue;
        int k = grid.unknownIndex[static_cast<std::size_t>(face.cell)];
        if (k < 0)
            continue;
        double h = hs[face.axis];
        double q = A * b(face.center).dot(face.normal) * (0.5 * h);
        trip.push_back({k, k, 2.0 * faceWeight(scheme, q) / (h * h)});
    }

    Discretization d;
    d.matrix = CsrMatrix::fromTriplets(N, std::move(trip));
    d.driftRate = A;
    d.scheme = scheme;
    if (!d.matrix.isZMatrix(1e-12))
        throw NumericalError("assembled operator is not a Z-matrix");
    return d;
}

EigenResult principal_eigenvalue(const Grid& grid, const PlanarField& b, double A,
                                 const ScalarField& c, const BoundarySpec& bc, Scheme scheme,
                                 const EigenOptions& opts) {
    Discretization d = assemble(grid, b, A, c, bc, scheme);
    return solvePrincipal(d.matrix, opts);
}

// ---------------------------------------------------------------------------
// 1D generalized Sturm-Liouville solver

Solve1dResult solve_1d(std::span<const double> kappa, std::span<const double> gamma,
                       std::span<const double> mu, double length, End left, End right) {
    const std::size_t m = kappa.size();
    if (m < 16 || gamma.size() != m || mu.size() != m)
        throw InvalidArgumentError("coefficient arrays must share a length of at least 16");
    if (!(length > 0.0))
        throw InvalidArgumentError("interval length must be positive");

    double maxKappa = *std::max_element(kappa.begin(), kappa.end());
    double maxMu = *std::max_element(mu.begin(), mu.end());
    if (!(maxKappa > 0.0) || !(maxMu > 0.0))
        throw InvalidArgumentError("kappa and mu must be positive somewhere");

    const double h = length / static_cast<double>(m - 1);

    // A center of a closed-orbit family shows up as a first node where both
    // kappa and mu vanish (linearly) and the end condition is the natural
    // no-flux one. Fold that node onto its neighbour and solve the reduced
    // problem. Integrating-factor pencils can also make mu[0] this small
    // relative to its peak while staying positive; those carry Robin or
    // Dirichlet ends and go through the standard assembly below.
    if (mu[0] <= 1e-12 * maxMu && left.kind == EndCondition::Neumann) {
        if (kappa[0] > 1e-8 * maxKappa)
            throw InvalidArgumentError("mass weight vanishes at the first node but kappa does not");
        Solve1dResult inner = solve_1d(kappa.subspan(1), gamma.subspan(1), mu.subspan(1),
                                       length - h, left, right);
        inner.u.insert(inner.u.begin(), inner.u.front());
        return inner;
    }

    for (std::size_t f = 0; f + 1 < m; ++f)
        if (0.5 * (kappa[f] + kappa[f + 1]) <= 0.0)
            throw InvalidArgumentError("kappa must be positive on faces");
    for (std::size_t jn = 0; jn < m; ++jn)
        if (mu[jn] <= 0.0)
            throw InvalidArgumentError("mu must be positive away from a degenerate first node");

    // Unknown numbering: Dirichlet end nodes are eliminated.
    std::vector<int> idx(m, -1);
    int nUnk = 0;
    for (std::size_t jn = 0; jn < m; ++jn) {
        if (jn == 0 && left.kind == EndCondition::Dirichlet)
            continue;
        if (jn == m - 1 && right.kind == EndCondition::Dirichlet)
            continue;
        idx[jn] = nUnk++;
    }
    if (nUnk < 2)
        throw InvalidArgumentError("too few unknowns after boundary elimination");

    // K holds the integrated flux form; M the lumped masses. The pencil
    // K u = lambda M u becomes the eigenproblem of M^{-1} K row by row.
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(nUnk) * 3);
    std::vector<double> mass(static_cast<std::size_t>(nUnk), 0.0);

    for (std::size_t jn = 0; jn < m; ++jn) {
        int a = idx[jn];
        if (a < 0)
            continue;
        double w = (jn == 0 || jn == m - 1) ? 0.5 * h : h;
        mass[static_cast<std::size_t>(a)] = mu[jn] * w;
        trip.push_back({a, a, gamma[jn] * w});
    }
    for (std::size_t f = 0; f + 1 < m; ++f) {
        double kf = 0.5 * (kappa[f] + kappa[f + 1]) / h;
        int a = idx[f], bIdx = idx[f + 1];
        if (a >= 0)
            trip.push_back({a, a, kf});
        if (bIdx >= 0)
            trip.push_back({bIdx, bIdx, kf});
        if (a >= 0 && bIdx >= 0) {
            trip.push_back({a, bIdx, -kf});
            trip.push_back({bIdx, a, -kf});
        }
    }
    if (left.kind == EndCondition::Robin)
        trip.push_back({idx[0], idx[0], -kappa[0] * left.robinCoefficient});
    if (right.kind == EndCondition::Robin)
        trip.push_back({idx[m - 1], idx[m - 1], kappa[m - 1] * right.robinCoefficient});

    CsrMatrix K = CsrMatrix::fromTriplets(nUnk, std::move(trip));
    for (int row = 0; row < nUnk; ++row)
        for (int p = K.rowPtr[static_cast<std::size_t>(row)];
             p < K.rowPtr[static_cast<std::size_t>(row) + 1]; ++p)
            K.val[static_cast<std::size_t>(p)] /= mass[static_cast<std::size_t>(row)];

    EigenResult er = solvePrincipal(K, EigenOptions{});

    Solve1dResult out;
    out.lambda = er.lambda;
    out.residualNorm = er.residualNorm;
    out.iterations = er.iterations;
    out.u.assign(m, 0.0);
    for (std::size_t jn = 0; jn < m; ++jn)
        if (idx[jn] >= 0)
            out.u[jn] = er.vector[static_cast<std::size_t>(idx[jn])];
    return out;
}

// ---------------------------------------------------------------------------
// Robin-matched auxiliary problem on a cut-open loop

namespace {

struct RobinSolve {
    double lambda;
    double mismatch; // phi(0) - phi(L), max-normalised
};

RobinSolve solveRobin(double A, std::span<const double> s, std::span<const double> c, double h,
                      double r0, double rL) {
    const std::size_t m = s.size();
    std::vector<Triplet> trip;
    trip.reserve(m * 3);
    auto faceSpeed = [&](std::size_t f) { return 0.5 * (s[f] + s[f + 1]); };

    for (std::size_t j = 0; j < m; ++j) {
        int row = static_cast<int>(j);
        if (j == 0) {
            double qR = A * faceSpeed(0) * h;
            double qG = A * s[0] * h; // mirrored ghost face
            double w = (bernoulli(-qR) + bernoulli(qG)) / (h * h);
            trip.push_back({row, row, w + c[0] - (2.0 * r0 / h) * bernoulli(qG)});
            trip.push_back({row, row + 1, -w});
        } else if (j == m - 1) {
            double qG = A * s[m - 1] * h;
            double qL = A * faceSpeed(m - 2) * h;
            double w = (bernoulli(-qG) + bernoulli(qL)) / (h * h);
            trip.push_back({row, row, w + c[j] + (2.0 * rL / h) * bernoulli(-qG)});
            trip.push_back({row, row - 1, -w});
        } else {
            double qR = A * faceSpeed(j) * h;
            double qL = A * faceSpeed(j - 1) * h;
            double wR = bernoulli(-qR) / (h * h);
            double wL = bernoulli(qL) / (h * h);
            trip.push_back({row, row, wR + wL + c[j]});
            trip.push_back({row, row + 1, -wR});
            trip.push_back({row, row - 1, -wL});
        }
    }
    CsrMatrix L = CsrMatrix::fromTriplets(static_cast<int>(m), std::move(trip));
    EigenResult er = solvePrincipal(L, EigenOptions{});
    return {er.lambda, er.vector.front() - er.vector.back()};
}

} // namespace

RobinMatchResult robin_match(double A, std::span<const double> speed, std::span<const double> c,
                             double length, double eps) {
    const std::size_t m = speed.size();
    if (m < 16 || c.size() != m)
        throw InvalidArgumentError("speed and c arrays must share a length of at least 16");
    if (!(length > 0.0) || !(eps > 0.0) || !(A >= 0.0))
        throw InvalidArgumentError("robin_match needs length > 0, eps > 0, A >= 0");

    double smax = *std::max_element(speed.begin(), speed.end());
    std::vector<double> s(speed.begin(), speed.end());
    for (double& v : s)
        v = std::max(v, 1e-8 * smax);

    const double h = length / static_cast<double>(m - 1);
    RobinMatchResult res;

    auto eval = [&](double alpha) {
        return solveRobin(A, s, c, h, std::min(alpha, eps), alpha);
    };

    RobinSolve at0 = eval(0.0);
    if (std::abs(at0.mismatch) <= 1e-10) {
        res.alpha = 0.0;
        res.lambda = at0.lambda;
        res.matchResidual = at0.mismatch;
        return res;
    }
    if (at0.mismatch > 0.0)
        throw NumericalError("matching function has no sign change: phi(0) > phi(L) at alpha = 0");

    double lo = 0.0, gLo = at0.mismatch;
    double hi = 1.0;
    RobinSolve atHi = eval(hi);
    int steps = 0;
    while (atHi.mismatch <= 0.0) {
        lo = hi;
        gLo = atHi.mismatch;
        hi *= 2.0;
        if (hi > 1024.0)
            throw NumericalError("matching function keeps one sign up to alpha = 1024");
        atHi = eval(hi);
        ++steps;
    }

    RobinSolve best = atHi;
    double alpha = hi;
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        RobinSolve sm = eval(mid);
        ++steps;
        if (std::abs(sm.mismatch) < std::abs(best.mismatch)) {
            best = sm;
            alpha = mid;
        }
        if (std::abs(sm.mismatch) <= 1e-12 || (hi - lo) <= 1e-12 * std::max(1.0, hi))
            break;
        if ((sm.mismatch < 0.0) == (gLo < 0.0)) {
            lo = mid;
            gLo = sm.mismatch;
        } else {
            hi = mid;
        }
    }

    res.alpha = alpha;
    res.lambda = best.lambda;
    res.matchResidual = best.mismatch;
    res.bisectionSteps = steps;
    return res;
}

} // namespace driftlim
