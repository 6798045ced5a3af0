#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "driftlim/field.hpp"
#include "driftlim/geometry.hpp"

namespace driftlim {

struct IntegrateOptions {
    double blowupRadius = 1e6;
    double maxStep = 0.0;            // 0 = no cap
    const Domain* stopOutside = nullptr;
};

/// Numerical solution curve of x' = b(x) with cubic Hermite dense output
/// between accepted steps.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec2> states;
    std::vector<Vec2> derivs;
    double tolUsed = 0.0;
    bool leftDomain = false; // stopped early after exiting opts.stopOutside

    double duration() const { return times.empty() ? 0.0 : times.back(); }
    Vec2 sample(double t) const;
    Vec2 sampleVelocity(double t) const;
    double arcLength() const;
};

/// Adaptive embedded Runge-Kutta 4(5) integration of x' = b(x) from x0 over
/// [0, tEnd] with local error per step at most tol.
Trajectory integrate(const PlanarField& b, Vec2 x0, double tEnd, double tol,
                     const IntegrateOptions& opts = {});

enum class FixedPointKind {
    StableNode, StableSpiral, UnstableNode, UnstableSpiral, Saddle, Center, Degenerate
};

struct FixedPointInfo {
    Vec2 location;
    std::complex<double> eig1, eig2;
    Mat2 jacobian;
    FixedPointKind kind = FixedPointKind::Degenerate;
};

/// Newton refinement from lattice seeds at local minima of |b|, deduplicated
/// within 1e-6 of the domain diameter (smaller residual wins) and classified
/// through the Jacobian eigenvalues. Purely imaginary pairs are Center;
/// a vanishing real part elsewhere is Degenerate.
std::vector<FixedPointInfo> find_fixed_points(const PlanarField& b, const Domain& d,
                                              int gridSeeds = 48);

enum class OrbitStability { Stable, Unstable, SemiStable };

struct PeriodicOrbit {
    Trajectory path;      // one period, first and last state agree within tol
    double period = 0.0;
    OrbitStability stability = OrbitStability::Stable;
    double innerMultiplierSlope = 0.0;
    double outerMultiplierSlope = 0.0;
    double sectionResidual = 0.0;

    const std::vector<Vec2>& samples() const { return path.states; }
};

class NoRecurrenceError : public NumericalError {
public:
    explicit NoRecurrenceError(const std::string& what) : NumericalError(what) {}
};

/// Locates an isolated periodic orbit from a seed: approach the attractor,
/// place a Poincare section normal to the flow, and solve the return map by
/// secant iteration to `tol`. Stability comes from one-sided return-map
/// slopes at offsets of 1e-4 of the orbit size.
PeriodicOrbit find_limit_cycle(const PlanarField& b, Vec2 seed, double tol,
                               const Domain* domain = nullptr);

struct HomoclinicStructure {
    Vec2 saddle;
    std::vector<Trajectory> loops; // one or two, each starting and ending at the saddle
    bool stableOutside = false;
    std::vector<bool> stableInside; // per loop
};

class HomoclinicNotFound : public NumericalError {
public:
    HomoclinicNotFound(const std::string& what, std::vector<Vec2> branchEndpoints)
        : NumericalError(what), branchEndpoints(std::move(branchEndpoints)) {}
    std::vector<Vec2> branchEndpoints; // where the shot branches ended up
};

/// Shoots along the saddle's unstable eigendirections (offset 1e-6) forward
/// and its stable directions backward; a loop is accepted when the branch
/// reconnects to within tol of the saddle with monotone approach over the
/// last fifth of its arc length. Throws HomoclinicNotFound otherwise, with
/// the branch endpoints attached for heteroclinic diagnosis.
HomoclinicStructure detect_homoclinic(const PlanarField& b, const FixedPointInfo& saddle,
                                      double tol, const Domain* domain = nullptr);

/// Transversal parametrization of a band of nested periodic orbits. ell is
/// arc length along a straight ray; orbitAt integrates the orbit through
/// rayOrigin + ell * rayDir.
struct ClosedOrbitFamily {
    Vec2 rayOrigin;
    Vec2 rayDir;             // unit
    double ell0 = 0.0, ell1 = 0.0;
    std::function<PeriodicOrbit(double)> orbitAt;

    enum class EndKind { CenterPoint, BoundaryCycle, DomainBoundary };
    EndKind innerEnd = EndKind::CenterPoint;
    EndKind outerEnd = EndKind::DomainBoundary;
    bool innerUnstable = false; // true demands a Dirichlet condition there
    bool outerUnstable = false;
};

enum class DegenerateCase { Sink, Source, Mixed }; // inflow, outflow, split boundary

struct DegenerateRegion {
    Domain region;
    DegenerateCase caseTag = DegenerateCase::Sink;
    // For Mixed: outward-boundary predicate marking the Dirichlet part.
    std::function<bool(const GridFace&)> dirichletFace;
};

struct FixedPointComponent {
    FixedPointInfo info;
    // Probe-based resolution for Center/Degenerate kinds: true when nearby
    // trajectories demonstrably converge to the point.
    std::optional<bool> stableByProbing;
    bool effectivelyStable() const {
        if (info.kind == FixedPointKind::StableNode || info.kind == FixedPointKind::StableSpiral)
            return true;
        return stableByProbing.value_or(false);
    }
};

struct LimitComponent {
    using Kind = std::variant<FixedPointComponent, PeriodicOrbit, HomoclinicStructure,
                              ClosedOrbitFamily, DegenerateRegion>;
    Kind kind;
    bool singleLoopHomoclinic() const {
        auto* h = std::get_if<HomoclinicStructure>(&kind);
        return h && h->loops.size() == 1;
    }
};

struct AssembleOptions {
    int gridSeeds = 48;
    int probeSeeds = 10;       // probe lattice is probeSeeds x probeSeeds
    double probeTime = 400.0;
    double tol = 1e-9;         // integrator / cycle refinement tolerance
    std::vector<DegenerateRegion> declaredRegions;
};

struct ProbeResult {
    enum class Outcome { FixedPoint, Periodic, LeftDomain, Undecided };
    int seedIndex = 0;
    Vec2 seed;
    Outcome outcome = Outcome::Undecided;
    Vec2 finalState;
    int fixedPointIndex = -1;      // for Outcome::FixedPoint
    bool periodicThroughSeed = false; // orbit closes through the probe start
    PeriodicOrbit orbit;           // for Outcome::Periodic
};

/// Long-time probes from a seed lattice with recurrence detection; the raw
/// material for assemble_components, exposed for observability.
std::vector<ProbeResult> run_probes(const PlanarField& b, const Domain& d,
                                    const std::vector<FixedPointInfo>& fixedPoints,
                                    const AssembleOptions& opts);

struct ComponentSet {
    std::vector<LimitComponent> components;
    std::vector<std::string> warnings;
};

/// Discovers the connected components of the flow's limit set: fixed points,
/// limit cycles, homoclinic loops and closed-orbit families, plus any
/// declared degenerate regions. Throws UnsupportedTopologyError when a
/// saddle's branches connect to a different saddle.
ComponentSet assemble_components(const PlanarField& b, const Domain& d,
                                 const AssembleOptions& opts = {});

} // namespace driftlim
