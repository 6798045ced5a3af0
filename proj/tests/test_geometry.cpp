#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "driftlim/field.hpp"
#include "driftlim/geometry.hpp"
#include "oracles.hpp"

using namespace driftlim;

namespace {

Rect wellBounds() { return {{-2.0, -1.6}, {2.0, 1.6}}; }

double maskArea(const Grid& g) { return g.unknownCount() * g.h1 * g.h2; }

} // namespace

TEST_CASE("membership tests for the three shapes") {
    Domain disk = Domain::disk({0.0, 0.0}, 1.0);
    CHECK(disk.contains({0.5, 0.0}));
    CHECK_FALSE(disk.contains({1.5, 0.0}));
    CHECK_FALSE(disk.contains({1.0, 0.0})); // open region

    Domain box = Domain::rect({0.0, 0.0}, {1.0, 1.0});
    CHECK(box.contains({0.5, 0.5}));
    CHECK_FALSE(box.contains({1.5, 0.5}));

    Domain well = Domain::sublevel(doubleWellEnergy(), 1.0, wellBounds());
    CHECK(well.contains({0.0, 0.0}));     // H(0,0)=0 < 1
    CHECK(well.contains({1.0, 0.0}));     // well bottom, H=-1/4
    CHECK_FALSE(well.contains({1.9, 0.0}));
}

TEST_CASE("sublevel construction rejects a rectangle the set escapes") {
    CHECK_THROWS_AS(Domain::sublevel(doubleWellEnergy(), 1.0, Rect{{-1.0, -1.0}, {1.0, 1.0}}),
                    InvalidArgumentError);
    CHECK_NOTHROW(Domain::sublevel(doubleWellEnergy(), 1.0, wellBounds()));
}

TEST_CASE("grid over the unit square counts cells and faces exactly") {
    Grid g = build_grid(Domain::rect({0.0, 0.0}, {1.0, 1.0}), 10);
    CHECK(g.unknownCount() == 100);
    CHECK(g.boundaryFaces.size() == 40);
    CHECK(g.h1 == doctest::Approx(0.1));
    CHECK(g.h2 == doctest::Approx(0.1));
}

TEST_CASE("disk mask area approaches the analytic area") {
    Grid g = build_grid(Domain::disk({0.0, 0.0}, 1.0), 64);
    double expected = std::numbers::pi / 4.0 * 64.0 * 64.0;
    CHECK(std::abs(g.unknownCount() - expected) <= 0.03 * expected);
}

TEST_CASE("sublevel mask area matches a Monte Carlo estimate") {
    Domain well = Domain::sublevel(doubleWellEnergy(), 1.0, wellBounds());
    Grid g = build_grid(well, 128);
    Rect bb = wellBounds();
    double mc = oracles::monteCarloArea([&](Vec2 p) { return well.contains(p); },
                                        bb.lo, bb.hi, 2000000, 91);
    CHECK(std::abs(maskArea(g) - mc) <= 0.03 * mc);
}

TEST_CASE("refinement drives the disk mask area to the true area") {
    const double truth = std::numbers::pi;
    double prev = -1.0;
    for (int n : {32, 64, 128, 256}) {
        Grid g = build_grid(Domain::disk({0.0, 0.0}, 1.0), n);
        double err = std::abs(maskArea(g) - truth);
        // First-order stair-step bound: the miscounted cells live in an
        // O(h) collar around the circle.
        CHECK(err <= 8.0 * std::numbers::pi * (2.0 / n));
        if (prev >= 0.0)
            CHECK(err <= prev);
        prev = err;
    }
}

TEST_CASE("every interior cell keeps an interior neighbour") {
    for (int n : {16, 33}) {
        Grid g = build_grid(Domain::disk({0.2, -0.1}, 0.9), n);
        for (int j = 0; j < g.n2; ++j)
            for (int i = 0; i < g.n1; ++i) {
                if (!g.inside[g.flat(i, j)])
                    continue;
                int neighbours = 0;
                if (i > 0 && g.inside[g.flat(i - 1, j)]) ++neighbours;
                if (i + 1 < g.n1 && g.inside[g.flat(i + 1, j)]) ++neighbours;
                if (j > 0 && g.inside[g.flat(i, j - 1)]) ++neighbours;
                if (j + 1 < g.n2 && g.inside[g.flat(i, j + 1)]) ++neighbours;
                CHECK(neighbours >= 1);
            }
    }
}

TEST_CASE("boundary faces separate inside from outside with axis-aligned normals") {
    Domain well = Domain::sublevel(doubleWellEnergy(), 1.0, wellBounds());
    Grid g = build_grid(well, 48);
    CHECK(!g.boundaryFaces.empty());
    for (const GridFace& f : g.boundaryFaces) {
        CHECK(g.inside[f.cell] == 1);
        int i = f.cell % g.n1, j = f.cell / g.n1;
        int ni = i + (f.axis == 0 ? f.side : 0);
        int nj = j + (f.axis == 1 ? f.side : 0);
        bool outside = ni < 0 || ni >= g.n1 || nj < 0 || nj >= g.n2 ||
                       !g.inside[g.flat(ni, nj)];
        CHECK(outside);
        CHECK(std::abs(f.normal.norm() - 1.0) < 1e-15);
        if (f.axis == 0) {
            CHECK(f.normal.x == doctest::Approx(static_cast<double>(f.side)));
            CHECK(f.normal.y == 0.0);
        } else {
            CHECK(f.normal.y == doctest::Approx(static_cast<double>(f.side)));
            CHECK(f.normal.x == 0.0);
        }
    }
}

TEST_CASE("degenerate grids are rejected") {
    CHECK_THROWS_AS(build_grid(Domain::disk({0.0, 0.0}, 1.0), 7), InvalidArgumentError);
    // A pinprick sublevel region inside a huge rectangle leaves almost no
    // interior cells at n=8.
    Domain dot = Domain::sublevel(parse("x1^2 + x2^2"), 1e-4, Rect{{-1.0, -1.0}, {1.0, 1.0}});
    CHECK_THROWS_AS(build_grid(dot, 8), NumericalError);
}

TEST_CASE("boundary samples carry unit outward normals") {
    Domain well = Domain::sublevel(doubleWellEnergy(), 1.0, wellBounds());
    auto pts = well.sampleBoundary(256);
    CHECK(static_cast<int>(pts.size()) >= 256);
    Expr H = doubleWellEnergy();
    for (const auto& bp : pts) {
        CHECK(std::abs(bp.outwardNormal.norm() - 1.0) < 1e-9);
        CHECK(std::abs(H.eval(bp.point) - 1.0) < 0.05); // on the level curve
        // The outward normal leaves the set: a small step along it raises H.
        CHECK(H.eval(bp.point + bp.outwardNormal * 1e-4) >
              H.eval(bp.point - bp.outwardNormal * 1e-4));
    }
}

TEST_CASE("uniform contraction is inflow on the disk") {
    PlanarField b(parse("-x1"), parse("-x2"));
    InflowReport rep = check_inflow(Domain::disk({0.0, 0.0}, 1.0), b, 256);
    CHECK(rep.satisfied);
    CHECK(rep.maxNormalComponent == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(rep.minNormalComponent == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(rep.samples >= 256);
}

TEST_CASE("strong wind breaks the inflow condition on the disk") {
    InflowReport rep = check_inflow(Domain::disk({0.0, 0.0}, 1.0), windedRotationField(0.75), 512);
    CHECK_FALSE(rep.satisfied);
    CHECK(rep.maxNormalComponent > 0.0);
}

TEST_CASE("the energy-decaying well field flows into its sublevel domain") {
    Domain well = Domain::sublevel(doubleWellEnergy(), 1.0, wellBounds());
    InflowReport rep = check_inflow(well, doubleWellField(0.5), 400);
    CHECK(rep.satisfied);
    CHECK(rep.maxNormalComponent < 0.0);
}
