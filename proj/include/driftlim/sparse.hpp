#pragma once

#include <span>
#include <cstddef>
#include <vector>

#include "driftlim/core.hpp"

namespace driftlim {

struct Triplet {
    int row;
    int col;
    double value;
};

/// Compressed sparse row matrix. Column indices are sorted and unique within
/// each row; duplicate triplets are summed during construction.
struct CsrMatrix {
    int n = 0;
    std::vector<int> rowPtr;
    std::vector<int> col;
    std::vector<double> val;

    static CsrMatrix fromTriplets(int n, std::vector<Triplet> entries);

    double diag(int i) const;
    double maxDiag() const;
    double minDiag() const;
    /// True when all off-diagonal entries are <= 0.
    bool isZMatrix(double tol = 0.0) const;
    CsrMatrix transposed() const;
};

void spmv(const CsrMatrix& M, std::span<const double> x, std::span<double> y);
std::vector<double> spmv(const CsrMatrix& M, std::span<const double> x);

enum class SolveStatus { Converged, MaxIterations, Breakdown };

struct BicgstabResult {
    std::vector<double> x;
    SolveStatus status = SolveStatus::Converged;
    int iterations = 0;
    double relativeResidual = 0.0;
};

/// Jacobi-preconditioned BiCGSTAB for Ax = rhs. Stops when
/// ||Ax - rhs||_2 <= tol * ||rhs||_2. On breakdown or iteration cap the best
/// iterate seen so far is returned with its residual.
BicgstabResult bicgstab(const CsrMatrix& A, std::span<const double> rhs, double tol,
                        int maxIterations, const std::vector<double>* initial = nullptr);

enum class EigenMethod { Power, InverseRefined };

struct EigenOptions {
    double tol = 1e-8;       // target for ||Lv - lambda v||_inf / ||v||_inf
    int maxSweeps = 200000;
    bool refine = true;      // enable the shifted inverse-iteration phase
    int refineAfter = 400;   // power sweeps before attempting refinement
    int linearMaxIterations = 4000;
    std::size_t bandBytes = std::size_t(700) << 20; // memory cap for the banded refinement factor
};

struct EigenResult {
    double lambda = 0.0;
    std::vector<double> vector; // positive, max-norm 1
    double residualNorm = 0.0;
    int iterations = 0;
    EigenMethod method = EigenMethod::Power;
};

/// Leftmost eigenvalue of a Z-matrix L together with its positive
/// eigenvector. Phase one runs the power method on sI - L (s = max diagonal
/// plus one), which is entrywise nonnegative; phase two optionally sharpens
/// the pair by inverse iteration on L - mu I with a shift kept safely below
/// the current estimate. Throws NumericalError on stagnation or if the
/// iterate loses positivity.
EigenResult principal_eigenpair(const CsrMatrix& L, const EigenOptions& opts = {});

} // namespace driftlim
