#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <span>
#include <vector>

#include "driftlim/expr.hpp"
#include "driftlim/field.hpp"
#include "driftlim/geometry.hpp"
#include "driftlim/pde.hpp"
#include "oracles.hpp"

using namespace driftlim;

namespace {

constexpr double kPiSq = 9.869604401089358;

Domain unitSquare() { return Domain::rect({0.0, 0.0}, {1.0, 1.0}); }

Rect wellBounds() { return {{-2.0, -1.6}, {2.0, 1.6}}; }

Domain wellDomain() { return Domain::sublevel(doubleWellEnergy(), 1.0, wellBounds()); }

PlanarField zeroField() { return {Expr::constant(0.0), Expr::constant(0.0)}; }

double entryAt(const CsrMatrix& L, int r, int c) {
    for (int p = L.rowPtr[static_cast<std::size_t>(r)];
         p < L.rowPtr[static_cast<std::size_t>(r) + 1]; ++p)
        if (L.col[static_cast<std::size_t>(p)] == c)
            return L.val[static_cast<std::size_t>(p)];
    return 0.0;
}

// Samples of the figure-eight separatrix loop of the double well on the
// right half-plane, cut open at the saddle. Marched at unit speed so the
// parameter is arclength; the loop passes through the saddle at both ends.
struct LoopSamples {
    std::vector<double> speed;   // |b| = |grad H| along the loop
    std::vector<double> cval;    // c = x1^2 along the loop
    std::vector<double> psi;     // cumulative integral of |b| d(arclength)
    double length = 0.0;
};

LoopSamples sampleSeparatrixLoop(std::size_t stations) {
    ScalarField H = doubleWellEnergy();
    auto unitTangent = [&](Vec2 x) {
        Vec2 g = H.grad(x);
        Vec2 t{-g.y, g.x};
        return t * (1.0 / t.norm());
    };
    const double delta = 1e-4;
    // Lower branch leaves the saddle along x2 = -x1.
    Vec2 x{delta, -delta * std::sqrt(1.0 - 0.5 * delta * delta)};
    const double dl = 2e-4;
    std::vector<Vec2> pts{x};
    for (int step = 0; step < 200000; ++step) {
        Vec2 k1 = unitTangent(x);
        Vec2 k2 = unitTangent(x + k1 * (0.5 * dl));
        Vec2 k3 = unitTangent(x + k2 * (0.5 * dl));
        Vec2 k4 = unitTangent(x + k3 * dl);
        x = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dl / 6.0);
        pts.push_back(x);
        if (step > 100 && x.norm() < 2.0 * delta)
            break;
    }
    double lead = pts.front().norm();
    double tail = pts.back().norm();
    double total = lead + dl * static_cast<double>(pts.size() - 1) + tail;

    LoopSamples out;
    out.length = total;
    out.speed.resize(stations);
    out.cval.resize(stations);
    out.psi.resize(stations);
    ScalarField c(parse("x1^2"));
    double psiAcc = 0.0, prevSpeed = 0.0, prevPos = 0.0;
    for (std::size_t k = 0; k < stations; ++k) {
        double y = total * static_cast<double>(k) / static_cast<double>(stations - 1);
        Vec2 p;
        if (y <= lead) {
            p = pts.front() * (y / lead);
        } else if (y >= total - tail) {
            p = pts.back() * ((total - y) / tail);
        } else {
            double t = (y - lead) / dl;
            std::size_t i = std::min(static_cast<std::size_t>(t), pts.size() - 2);
            double frac = t - static_cast<double>(i);
            p = pts[i] + (pts[i + 1] - pts[i]) * frac;
        }
        out.speed[k] = H.grad(p).norm();
        out.cval[k] = c(p);
        psiAcc += 0.5 * (out.speed[k] + prevSpeed) * (y - prevPos);
        prevSpeed = out.speed[k];
        prevPos = y;
        out.psi[k] = psiAcc;
    }
    return out;
}

} // namespace

TEST_CASE("assembled rows carry c and keep the Z-matrix shape") {
    Grid grid = build_grid(wellDomain(), 49);
    ScalarField c(parse("x1^2 + 0.3*x1"));
    for (Scheme scheme : {Scheme::ExponentialFitting, Scheme::Upwind}) {
        Discretization d = assemble(grid, doubleWellField(0.5), 30.0, c,
                                    BoundarySpec::neumann(), scheme);
        CHECK(d.matrix.isZMatrix(1e-12));
        std::vector<double> ones(static_cast<std::size_t>(grid.unknownCount()), 1.0);
        std::vector<double> lu = spmv(d.matrix, ones);
        double worst = 0.0;
        for (int k = 0; k < grid.unknownCount(); ++k)
            worst = std::max(worst,
                             std::abs(lu[static_cast<std::size_t>(k)] -
                                      c(grid.cellCenterFlat(grid.cellOfUnknown[static_cast<std::size_t>(k)]))));
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("exponential fitting reproduces the constant-drift exponential") {
    Grid grid = build_grid(unitSquare(), 32);
    const double A = 1.2, beta = 1.0;
    PlanarField b(Expr::constant(beta), Expr::constant(0.0));
    Discretization d = assemble(grid, b, A, ScalarField(Expr::constant(0.0)),
                                BoundarySpec::neumann(), Scheme::ExponentialFitting);

    const double h = grid.h1;
    const double q = A * beta * h;

    SUBCASE("face weights equal the two-point exponential solve") {
        int k0 = grid.unknownIndex[static_cast<std::size_t>(grid.flat(10, 7))];
        int k1 = grid.unknownIndex[static_cast<std::size_t>(grid.flat(11, 7))];
        double wSelf = -q / std::expm1(-q) / (h * h);
        double wBack = q / std::expm1(q) / (h * h);
        CHECK(entryAt(d.matrix, k0, k1) == doctest::Approx(-wSelf).epsilon(1e-14));
        CHECK(entryAt(d.matrix, k1, k0) == doctest::Approx(-wBack).epsilon(1e-14));
    }

    SUBCASE("sampled exponential lies in the interior kernel") {
        std::vector<double> u(static_cast<std::size_t>(grid.unknownCount()));
        for (int k = 0; k < grid.unknownCount(); ++k) {
            Vec2 p = grid.cellCenterFlat(grid.cellOfUnknown[static_cast<std::size_t>(k)]);
            u[static_cast<std::size_t>(k)] = std::exp(-A * beta * p.x);
        }
        std::vector<double> lu = spmv(d.matrix, u);
        double worst = 0.0;
        for (int k = 0; k < grid.unknownCount(); ++k) {
            int cell = grid.cellOfUnknown[static_cast<std::size_t>(k)];
            int i = cell % grid.n1;
            if (i == 0 || i == grid.n1 - 1)
                continue;
            worst = std::max(worst, std::abs(lu[static_cast<std::size_t>(k)]));
        }
        CHECK(worst <= 1e-10);

        Discretization up = assemble(grid, b, A, ScalarField(Expr::constant(0.0)),
                                     BoundarySpec::neumann(), Scheme::Upwind);
        std::vector<double> luUp = spmv(up.matrix, u);
        double worstUp = 0.0;
        for (int k = 0; k < grid.unknownCount(); ++k) {
            int cell = grid.cellOfUnknown[static_cast<std::size_t>(k)];
            int i = cell % grid.n1;
            if (i == 0 || i == grid.n1 - 1)
                continue;
            worstUp = std::max(worstUp, std::abs(luUp[static_cast<std::size_t>(k)]));
        }
        CHECK(worstUp > 100.0 * std::max(worst, 1e-12));
    }
}

TEST_CASE("separable eigenvalues on the unit square") {
    SUBCASE("all Dirichlet gives the product sine mode") {
        Grid grid = build_grid(unitSquare(), 64);
        EigenResult er = principal_eigenvalue(grid, zeroField(), 0.0,
                                              ScalarField(Expr::constant(0.0)),
                                              BoundarySpec::dirichlet(),
                                              Scheme::ExponentialFitting, {});
        CHECK(std::abs(er.lambda - 2.0 * kPiSq) <= 0.005 * 2.0 * kPiSq);
    }
    SUBCASE("Dirichlet on the left edge only gives the quarter mode") {
        Grid grid = build_grid(unitSquare(), 129);
        BoundarySpec bc = BoundarySpec::mixed(
            [](const GridFace& f) { return f.normal.x < -0.5; });
        EigenResult er = principal_eigenvalue(grid, zeroField(), 0.0,
                                              ScalarField(Expr::constant(0.0)), bc,
                                              Scheme::ExponentialFitting, {});
        CHECK(std::abs(er.lambda - 0.25 * kPiSq) <= 0.01 * 0.25 * kPiSq);
    }
}

TEST_CASE("constant c with no drift returns c0 at machine accuracy") {
    Grid grid = build_grid(unitSquare(), 33);
    for (double A : {0.0, 17.0}) {
        EigenResult er = principal_eigenvalue(grid, zeroField(), A,
                                              ScalarField(Expr::constant(0.7)),
                                              BoundarySpec::neumann(),
                                              Scheme::ExponentialFitting, {});
        CHECK(std::abs(er.lambda - 0.7) <= 1e-8);
    }
}

TEST_CASE("zero c keeps the principal eigenvalue at zero under drift") {
    Grid grid = build_grid(wellDomain(), 65);
    EigenResult er = principal_eigenvalue(grid, doubleWellField(0.5), 40.0,
                                          ScalarField(Expr::constant(0.0)),
                                          BoundarySpec::neumann(),
                                          Scheme::ExponentialFitting, {});
    CHECK(std::abs(er.lambda) <= 1e-8);
    double lo = er.vector[0], hi = er.vector[0];
    for (double v : er.vector) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK((hi - lo) / hi <= 1e-6);
}

TEST_CASE("a stable node pulls the eigenvalue toward the minimum of c") {
    Grid grid = build_grid(Domain::disk({0.0, 0.0}, 1.0), 129);
    PlanarField b(parse("-x1"), parse("-x2"));
    EigenResult er = principal_eigenvalue(grid, b, 100.0, ScalarField(parse("x1^2 + x2^2")),
                                          BoundarySpec::neumann(),
                                          Scheme::ExponentialFitting, {});
    CHECK(std::abs(er.lambda) <= 0.1);
}

TEST_CASE("halving the drift rate against a doubled field changes nothing") {
    Grid grid = build_grid(wellDomain(), 49);
    ScalarField c(parse("x1^2"));
    Discretization d1 = assemble(grid, doubleWellField(0.5), 30.0, c,
                                 BoundarySpec::neumann(), Scheme::ExponentialFitting);
    Discretization d2 = assemble(grid, doubleWellField(0.5).scaledBy(2.0), 15.0, c,
                                 BoundarySpec::neumann(), Scheme::ExponentialFitting);
    REQUIRE(d1.matrix.val.size() == d2.matrix.val.size());
    CHECK(d1.matrix.rowPtr == d2.matrix.rowPtr);
    CHECK(d1.matrix.col == d2.matrix.col);
    bool same = true;
    for (std::size_t p = 0; p < d1.matrix.val.size(); ++p)
        same = same && d1.matrix.val[p] == d2.matrix.val[p];
    CHECK(same);
}

TEST_CASE("shifting c shifts the eigenvalue exactly") {
    Grid grid = build_grid(wellDomain(), 65);
    EigenOptions opts;
    EigenResult base = principal_eigenvalue(grid, doubleWellField(0.5), 30.0,
                                            ScalarField(parse("x1^2")),
                                            BoundarySpec::neumann(),
                                            Scheme::ExponentialFitting, opts);
    EigenResult shifted = principal_eigenvalue(grid, doubleWellField(0.5), 30.0,
                                               ScalarField(parse("x1^2 + 0.7")),
                                               BoundarySpec::neumann(),
                                               Scheme::ExponentialFitting, opts);
    CHECK(std::abs(shifted.lambda - base.lambda - 0.7) <= 1e-10);
}

TEST_CASE("upwind agrees with exponential fitting at small cell Peclet") {
    Grid grid = build_grid(wellDomain(), 81);
    ScalarField c(parse("x1^2"));
    EigenResult ef = principal_eigenvalue(grid, doubleWellField(0.5), 1.5, c,
                                          BoundarySpec::neumann(),
                                          Scheme::ExponentialFitting, {});
    EigenResult up = principal_eigenvalue(grid, doubleWellField(0.5), 1.5, c,
                                          BoundarySpec::neumann(), Scheme::Upwind, {});
    CHECK(std::abs(ef.lambda - up.lambda) <= 0.02 * std::abs(ef.lambda));
}

TEST_CASE("the eigenvalue settles under grid refinement") {
    ScalarField c(parse("x1^2"));
    double lam[3];
    int idx = 0;
    for (int n : {65, 129, 257}) {
        Grid grid = build_grid(wellDomain(), n);
        lam[idx++] = principal_eigenvalue(grid, doubleWellField(0.5), 50.0, c,
                                          BoundarySpec::neumann(),
                                          Scheme::ExponentialFitting, {})
                         .lambda;
    }
    CHECK(std::abs(lam[1] - lam[0]) > std::abs(lam[2] - lam[1]));
}

TEST_CASE("one dimensional solver matches closed forms") {
    SUBCASE("Dirichlet ends select the sine mode") {
        std::size_t m = 512;
        std::vector<double> kap(m, 1.0), gam(m, 0.0), mu(m, 1.0);
        Solve1dResult r = solve_1d(kap, gam, mu, 1.0, End::dirichlet(), End::dirichlet());
        CHECK(std::abs(r.lambda - kPiSq) <= 0.001 * kPiSq);
    }
    SUBCASE("matched Robin ends select a pure exponential") {
        std::size_t m = 1000;
        std::vector<double> kap(m, 1.0), gam(m, 0.0), mu(m, 1.0);
        Solve1dResult r = solve_1d(kap, gam, mu, 1.0, End::robin(0.5), End::robin(0.5));
        CHECK(std::abs(r.lambda + 0.25) <= 1e-4);
    }
    SUBCASE("a degenerate first node folds onto its neighbour") {
        std::size_t m = 64;
        double length = 2.0;
        double h = length / static_cast<double>(m - 1);
        std::vector<double> kap(m), gam(m), mu(m);
        for (std::size_t j = 0; j < m; ++j) {
            double y = h * static_cast<double>(j);
            kap[j] = 1.0 + 0.5 * std::sin(2.0 * y);
            gam[j] = 0.3 + std::cos(y) * std::cos(y);
            mu[j] = 1.0 + 0.25 * std::cos(3.0 * y);
        }
        kap[0] = 0.0;
        mu[0] = 0.0;
        Solve1dResult folded = solve_1d(kap, gam, mu, length, End::neumann(), End::dirichlet());
        std::vector<double> kap2(kap.begin() + 1, kap.end());
        std::vector<double> gam2(gam.begin() + 1, gam.end());
        std::vector<double> mu2(mu.begin() + 1, mu.end());
        Solve1dResult trimmed =
            solve_1d(kap2, gam2, mu2, length - h, End::neumann(), End::dirichlet());
        CHECK(std::abs(folded.lambda - trimmed.lambda) <= 1e-10);
        CHECK(folded.u.front() == folded.u[1]);
    }
}

TEST_CASE("the loop pencil agrees with a dense oracle") {
    LoopSamples loop = sampleSeparatrixLoop(256);
    const double A = 50.0;
    const double mid = 0.5 * loop.psi.back();
    std::size_t m = loop.speed.size();
    std::vector<double> kap(m), gam(m), mu(m);
    for (std::size_t j = 0; j < m; ++j) {
        double w = std::exp(A * (loop.psi[j] - mid));
        kap[j] = w;
        mu[j] = w;
        gam[j] = loop.cval[j] * w;
    }
    double r = 0.4;
    Solve1dResult got = solve_1d(kap, gam, mu, loop.length, End::robin(r), End::robin(r));
    oracles::SturmLiouvillePencil pencil =
        oracles::assemblePencil(kap, gam, mu, loop.length, r, r);
    double want = oracles::pencilSmallest(pencil.kDiag, pencil.kOff, pencil.mDiag);
    CHECK(std::abs(got.lambda - want) <= 1e-6 * std::max(1.0, std::abs(want)));
}

TEST_CASE("robin match balances the loop ends") {
    SUBCASE("no drift and constant coefficients need no absorption") {
        std::vector<double> speed(64, 1.0), c(64, 1.0);
        RobinMatchResult r = robin_match(0.0, speed, c, 1.0, 1.0);
        CHECK(r.alpha <= 1e-12);
        CHECK(std::abs(r.matchResidual) <= 1e-8);
    }
    SUBCASE("stronger drift pulls the matched eigenvalue toward the saddle value") {
        // The drift piles eigenfunction mass into the corner of the loop where
        // the speed vanishes, so the matched eigenvalue slides monotonically
        // from the loop average of c (about 0.56 here) toward c at the saddle
        // (zero), staying strictly between the two at these drift rates.
        LoopSamples loop = sampleSeparatrixLoop(256);
        double prev = 1e300;
        for (double A : {20.0, 40.0, 80.0}) {
            RobinMatchResult r = robin_match(A, loop.speed, loop.cval, loop.length, 0.1);
            CHECK(r.alpha >= 0.0);
            CHECK(std::abs(r.matchResidual) <= 1e-6);
            CHECK(r.lambda > 0.0);
            CHECK(r.lambda < 0.6);
            CHECK(r.lambda < prev);
            prev = r.lambda;
        }
    }
    SUBCASE("a small end cutoff still brackets a nonnegative alpha") {
        LoopSamples loop = sampleSeparatrixLoop(128);
        RobinMatchResult r = robin_match(40.0, loop.speed, loop.cval, loop.length, 0.1);
        CHECK(r.alpha >= 0.0);
    }
}
