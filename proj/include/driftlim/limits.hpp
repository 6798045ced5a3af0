#pragma once

#include <limits>
#include <string>
#include <vector>

#include "driftlim/dynamics.hpp"
#include "driftlim/field.hpp"

namespace driftlim {

enum class LimitCase {
    FixedPointValue,
    OrbitAverage,
    SaddleValue,
    FamilyRayleigh,
    DegenerateN,
    DegenerateD,
    DegenerateDN,
    Unstable,
};

/// Large-drift limit contribution of one limit-set component. Unstable
/// components contribute +infinity and never win the aggregate minimum.
struct PredictedLimit {
    double value = std::numeric_limits<double>::infinity();
    LimitCase caseTag = LimitCase::Unstable;
    double crossCheckError = 0.0; // disagreement of the independent secondary form
    double solverResidual = 0.0;  // eigensolver residual where one was involved
    std::string note;

    bool finite() const { return std::isfinite(value); }
};

/// One-dimensional reduction weights of a closed-orbit family. At each
/// transversal station ell, kappa weighs u'(ell)^2 in the energy, mu weighs
/// u^2 in the mass, and gamma weighs u^2 against the potential c; all three
/// are loop integrals over the orbit through that station.
struct CoareaWeights {
    std::vector<double> ell;
    std::vector<double> kappa;
    std::vector<double> mu;
    std::vector<double> gamma;
    bool centerAtInnerEnd = false; // first station is the family center itself
};

/// c at an attracting fixed point; +infinity otherwise.
PredictedLimit fixed_point_value(const ScalarField& c, const FixedPointComponent& k);

/// Period average of c over a stable limit cycle, cross-checked against the
/// arc-length form (loop integral of c/|b| over loop integral of 1/|b|)
/// evaluated geometrically on the sampled polyline. Unstable and semi-stable
/// cycles contribute +infinity. Throws NumericalError when the two forms
/// disagree beyond 1e-4 relative.
PredictedLimit orbit_average(const ScalarField& c, const PlanarField& b,
                             const PeriodicOrbit& orbit);

/// c at the saddle of a two-loop homoclinic union that attracts from every
/// side; +infinity for single loops and for unions unstable on any side.
PredictedLimit saddle_value(const ScalarField& c, const HomoclinicStructure& k);

/// Loop-integral weights at `stations` transversal nodes across the family
/// band. Throws NumericalError when a weight is singular or nonpositive away
/// from the center endpoint.
CoareaWeights coarea_weights(const ScalarField& c, const PlanarField& b,
                             const ClosedOrbitFamily& fam, int stations = 256);

/// Smallest eigenvalue of the reduced problem -(kappa u')' + gamma u =
/// lambda mu u across the family band, with a Dirichlet end at each unstable
/// boundary cycle and natural ends elsewhere. The half-resolution eigenvalue
/// is recomputed as a consistency diagnostic.
PredictedLimit family_rayleigh(const ScalarField& c, const PlanarField& b,
                               const ClosedOrbitFamily& fam, int stations = 256);

/// Principal eigenvalue of the driftless operator on a declared degenerate
/// region under its case's boundary condition (Sink: Neumann, Source:
/// Dirichlet, Mixed: Dirichlet on the marked faces).
PredictedLimit degenerate_value(const ScalarField& c, const DegenerateRegion& region,
                                int gridSize = 129);

/// Dispatches on the component kind.
PredictedLimit component_limit(const ScalarField& c, const PlanarField& b,
                               const LimitComponent& k);

/// Minimum contribution over all components. Throws InvalidArgumentError on
/// an empty list and NumericalError when every component is unstable, which
/// signals a missed stable structure upstream.
PredictedLimit predicted_limit(const std::vector<LimitComponent>& components,
                               const ScalarField& c, const PlanarField& b);

} // namespace driftlim
