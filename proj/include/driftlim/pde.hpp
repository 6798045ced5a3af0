#pragma once

#include <functional>
#include <span>

#include "driftlim/field.hpp"
#include "driftlim/geometry.hpp"
#include "driftlim/sparse.hpp"

namespace driftlim {

enum class Scheme { ExponentialFitting, Upwind };

/// Boundary handling for the masked grid. Mixed conditions classify each
/// exterior face through a caller predicate (true = Dirichlet).
struct BoundarySpec {
    enum class Kind { AllNeumann, AllDirichlet, Mixed };
    Kind kind = Kind::AllNeumann;
    std::function<bool(const GridFace&)> dirichletFace;

    static BoundarySpec neumann() { return {Kind::AllNeumann, {}}; }
    static BoundarySpec dirichlet() { return {Kind::AllDirichlet, {}}; }
    static BoundarySpec mixed(std::function<bool(const GridFace&)> pred) {
        return {Kind::Mixed, std::move(pred)};
    }
};

/// Discrete form of  -Laplace u - A b . grad u + c u  on the grid unknowns.
struct Discretization {
    CsrMatrix matrix;
    double driftRate = 0.0;
    Scheme scheme = Scheme::ExponentialFitting;
};

/// Assembles the operator with two-point fluxes per face. The default
/// exponential-fitting weights q e^q/(e^q - 1) and q/(e^q - 1) (q = face
/// Peclet number) reproduce one-dimensional exponential solutions exactly for
/// piecewise-constant drift; the upwind alternative uses donor-cell weights
/// 1 + max(+-q, 0). Both keep the matrix a Z-matrix for any drift rate.
Discretization assemble(const Grid& grid, const PlanarField& b, double A,
                        const ScalarField& c, const BoundarySpec& bc,
                        Scheme scheme = Scheme::ExponentialFitting);

/// Leftmost eigenvalue of the assembled operator via principal_eigenpair.
EigenResult principal_eigenvalue(const Grid& grid, const PlanarField& b, double A,
                                 const ScalarField& c, const BoundarySpec& bc,
                                 Scheme scheme = Scheme::ExponentialFitting,
                                 const EigenOptions& opts = {});

enum class EndCondition { Neumann, Dirichlet, Robin };

struct End {
    EndCondition kind = EndCondition::Neumann;
    double robinCoefficient = 0.0;

    static End neumann() { return {EndCondition::Neumann, 0.0}; }
    static End dirichlet() { return {EndCondition::Dirichlet, 0.0}; }
    static End robin(double r) { return {EndCondition::Robin, r}; }
};

struct Solve1dResult {
    double lambda = 0.0;
    std::vector<double> u; // on the full node grid, max-norm 1 (Dirichlet nodes hold 0)
    double residualNorm = 0.0;
    int iterations = 0;
};

/// Principal eigenpair of the generalized Sturm-Liouville pencil
///   -(kappa u')' + gamma u = lambda mu u   on (0, L)
/// with the coefficient arrays sampled on uniformly spaced nodes including
/// both endpoints. Robin ends impose u'(0) + r u(0) = 0 (resp. at L) through
/// the boundary flux. kappa must be positive on faces and mu positive except
/// possibly at a degenerate first node (both vanishing there).
Solve1dResult solve_1d(std::span<const double> kappa, std::span<const double> gamma,
                       std::span<const double> mu, double length, End left, End right);

struct RobinMatchResult {
    double alpha = 0.0;
    double lambda = 0.0;
    double matchResidual = 0.0; // phi(0) - phi(L) after max-normalisation
    int bisectionSteps = 0;
};

/// One-dimensional auxiliary eigenvalue problem on a cut-open loop:
///   -phi'' - A s(y) phi' + c(y) phi = lambda phi   on (0, L),
///   phi'(0) + min(alpha, eps) phi(0) = 0,  phi'(L) + alpha phi(L) = 0,
/// where s is the (nonnegative) speed along the loop. Finds by bisection the
/// alpha at which the max-normalised eigenfunction takes equal boundary
/// values, closing the loop. Speeds are floored at 1e-8 of their maximum.
RobinMatchResult robin_match(double A, std::span<const double> speed,
                             std::span<const double> c, double length, double eps = 1.0);

} // namespace driftlim
