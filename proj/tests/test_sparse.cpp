#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "driftlim/sparse.hpp"
#include "oracles.hpp"

using namespace driftlim;

namespace {

CsrMatrix laplacian1d(int n, bool dirichlet) {
    std::vector<Triplet> trip;
    for (int i = 0; i < n; ++i) {
        double d = 2.0;
        if (!dirichlet && (i == 0 || i == n - 1))
            d = 1.0;
        trip.push_back({i, i, d});
        if (i > 0)
            trip.push_back({i, i - 1, -1.0});
        if (i + 1 < n)
            trip.push_back({i, i + 1, -1.0});
    }
    return CsrMatrix::fromTriplets(n, std::move(trip));
}

CsrMatrix neumannLaplacian2d(int m) {
    std::vector<Triplet> trip;
    auto id = [m](int i, int j) { return i + m * j; };
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            int row = id(i, j);
            int deg = 0;
            auto link = [&](int ii, int jj) {
                if (ii < 0 || ii >= m || jj < 0 || jj >= m)
                    return;
                trip.push_back({row, id(ii, jj), -1.0});
                ++deg;
            };
            link(i - 1, j);
            link(i + 1, j);
            link(i, j - 1);
            link(i, j + 1);
            trip.push_back({row, row, static_cast<double>(deg)});
        }
    return CsrMatrix::fromTriplets(m * m, std::move(trip));
}

double inf(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v)
        m = std::max(m, std::abs(x));
    return m;
}

} // namespace

TEST_CASE("triplet assembly sums duplicates and sorts columns") {
    CsrMatrix M = CsrMatrix::fromTriplets(
        3, {{0, 2, 1.0}, {0, 0, 2.0}, {0, 2, 0.5}, {1, 1, 3.0}, {2, 0, -1.0}, {2, 2, 4.0}});
    for (int r = 0; r < M.n; ++r)
        for (int p = M.rowPtr[r] + 1; p < M.rowPtr[r + 1]; ++p)
            CHECK(M.col[p] > M.col[p - 1]);
    std::vector<double> y = spmv(M, std::vector<double>{1.0, 1.0, 1.0});
    CHECK(y[0] == doctest::Approx(3.5)); // 2.0 on the diagonal, 1.0+0.5 merged at column 2
    CHECK(y[1] == doctest::Approx(3.0));
    CHECK(y[2] == doctest::Approx(3.0));
    CHECK(M.diag(0) == doctest::Approx(2.0));
    CHECK(M.isZMatrix() == false);
}

TEST_CASE("sparse products match dense arithmetic") {
    std::vector<Triplet> eye;
    for (int i = 0; i < 5; ++i)
        eye.push_back({i, i, 1.0});
    CsrMatrix I = CsrMatrix::fromTriplets(5, std::move(eye));
    std::vector<double> v{3.0, -1.0, 0.5, 2.0, -7.0};
    CHECK(spmv(I, v) == v);

    CsrMatrix L = laplacian1d(4, true);
    std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    double dense[4][4] = {{2, -1, 0, 0}, {-1, 2, -1, 0}, {0, -1, 2, -1}, {0, 0, -1, 2}};
    std::vector<double> y = spmv(L, x);
    for (int i = 0; i < 4; ++i) {
        double want = 0.0;
        for (int j = 0; j < 4; ++j)
            want += dense[i][j] * x[j];
        CHECK(y[i] == doctest::Approx(want).epsilon(1e-15));
    }

    CsrMatrix Z = CsrMatrix::fromTriplets(3, {});
    std::vector<double> z = spmv(Z, std::vector<double>{1.0, 2.0, 3.0});
    CHECK(inf(z) == 0.0);
}

TEST_CASE("bicgstab solves a diagonal system immediately") {
    CsrMatrix D = CsrMatrix::fromTriplets(4, {{0, 0, 2.0}, {1, 1, 4.0}, {2, 2, 8.0}, {3, 3, 16.0}});
    std::vector<double> rhs{2.0, 8.0, 8.0, 32.0};
    BicgstabResult r = bicgstab(D, rhs, 1e-12, 50);
    CHECK(r.status == SolveStatus::Converged);
    CHECK(r.iterations <= 2);
    CHECK(r.x[0] == doctest::Approx(1.0));
    CHECK(r.x[1] == doctest::Approx(2.0));
    CHECK(r.x[2] == doctest::Approx(1.0));
    CHECK(r.x[3] == doctest::Approx(2.0));
}

TEST_CASE("bicgstab agrees with direct tridiagonal elimination") {
    const int n = 100;
    CsrMatrix L = laplacian1d(n, true);
    std::vector<double> rhs(n);
    for (int i = 0; i < n; ++i)
        rhs[i] = std::sin(0.37 * i) + 0.2;
    BicgstabResult r = bicgstab(L, rhs, 1e-12, 2000);
    CHECK(r.status == SolveStatus::Converged);

    std::vector<double> sub(n - 1, -1.0), diag(n, 2.0), sup(n - 1, -1.0);
    std::vector<double> direct = oracles::thomasSolve(sub, diag, sup, rhs);
    double scale = inf(direct);
    for (int i = 0; i < n; ++i)
        CHECK(std::abs(r.x[i] - direct[i]) <= 1e-10 * scale);
}

TEST_CASE("bicgstab reports failure on an incompatible singular system") {
    const int n = 60;
    CsrMatrix L = laplacian1d(n, false); // all-Neumann: constants in the kernel
    std::vector<double> rhs(n, 0.0);
    rhs[0] = 1.0; // no solution: the range is orthogonal to constants
    BicgstabResult r = bicgstab(L, rhs, 1e-10, 300);
    CHECK(r.status != SolveStatus::Converged);
    CHECK(r.relativeResidual > 1e-10);
}

TEST_CASE("bicgstab rejects an impossible tolerance") {
    CsrMatrix D = CsrMatrix::fromTriplets(2, {{0, 0, 1.0}, {1, 1, 1.0}});
    std::vector<double> rhs{1.0, 1.0};
    CHECK_THROWS_AS(bicgstab(D, rhs, 1e-15, 10), InvalidArgumentError);
}

TEST_CASE("principal pair of a diagonal matrix is its smallest entry") {
    CsrMatrix D = CsrMatrix::fromTriplets(3, {{0, 0, 3.0}, {1, 1, 5.0}, {2, 2, 7.0}});
    EigenResult er = principal_eigenpair(D);
    CHECK(er.lambda == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(er.vector[0] == doctest::Approx(1.0));
    CHECK(std::abs(er.vector[1]) < 1e-8);
    CHECK(std::abs(er.vector[2]) < 1e-8);
}

TEST_CASE("conservative operators keep the constant kernel") {
    CsrMatrix L = neumannLaplacian2d(20);
    EigenOptions opts;
    opts.tol = 1e-11;
    EigenResult er = principal_eigenpair(L, opts);
    CHECK(std::abs(er.lambda) <= 1e-10);
    CHECK(er.residualNorm <= 1e-10);
    double lo = 1e300, hi = 0.0;
    for (double v : er.vector) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(hi == doctest::Approx(1.0));
    CHECK(hi - lo <= 1e-6);
}

TEST_CASE("shifting the diagonal shifts the eigenvalue exactly") {
    CsrMatrix L = oracles::randomZMatrix(150, 5);
    EigenResult base = principal_eigenpair(L);
    const double kappa = 0.625;
    CsrMatrix shifted = L;
    for (int i = 0; i < shifted.n; ++i)
        for (int p = shifted.rowPtr[i]; p < shifted.rowPtr[i + 1]; ++p)
            if (shifted.col[p] == i)
                shifted.val[p] += kappa;
    EigenResult moved = principal_eigenpair(shifted);
    CHECK(std::abs(moved.lambda - base.lambda - kappa) <= 1e-10);
}

TEST_CASE("reported residual is reproducible from the returned pair") {
    CsrMatrix L = oracles::randomZMatrix(200, 17);
    EigenResult er = principal_eigenpair(L);
    std::vector<double> Lv = spmv(L, er.vector);
    double resid = 0.0, vmax = 0.0;
    for (std::size_t i = 0; i < Lv.size(); ++i) {
        resid = std::max(resid, std::abs(Lv[i] - er.lambda * er.vector[i]));
        vmax = std::max(vmax, std::abs(er.vector[i]));
    }
    CHECK(std::abs(resid / vmax - er.residualNorm) <= 1e-12 * std::max(1.0, er.residualNorm));
    CHECK(er.residualNorm <= 1e-8);
}

TEST_CASE("the eigenvector stays strictly positive") {
    for (std::uint32_t seed : {2u, 9u, 31u}) {
        CsrMatrix L = oracles::randomZMatrix(120, seed);
        EigenResult er = principal_eigenpair(L);
        double lo = 1e300, hi = 0.0;
        for (double v : er.vector) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo > 0.0);
        CHECK(lo / hi > 0.0);
        CHECK(hi == doctest::Approx(1.0));
    }
}

TEST_CASE("symmetric operators match their transpose") {
    CsrMatrix L = neumannLaplacian2d(12);
    for (int i = 0; i < L.n; ++i)
        for (int p = L.rowPtr[i]; p < L.rowPtr[i + 1]; ++p)
            if (L.col[p] == i)
                L.val[p] += 0.3 + 0.01 * (i % 7); // break the constant kernel, stay symmetric
    EigenResult a = principal_eigenpair(L);
    EigenResult b = principal_eigenpair(L.transposed());
    CHECK(std::abs(a.lambda - b.lambda) <= 1e-9);
}

TEST_CASE("eigenvalues agree with the explicit semigroup") {
    for (std::uint32_t seed : {11u, 42u, 77u}) {
        CsrMatrix L = oracles::randomZMatrix(200, seed);
        EigenResult er = principal_eigenpair(L);
        double reference = oracles::semigroupSmallest(L);
        CHECK(std::abs(er.lambda - reference) <= 1e-6);
    }
}
