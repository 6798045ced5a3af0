#include "driftlim/limits.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <variant>

#include "driftlim/pde.hpp"

namespace driftlim {

namespace {

PredictedLimit unstableLimit(std::string note) {
    PredictedLimit p;
    p.value = std::numeric_limits<double>::infinity();
    p.caseTag = LimitCase::Unstable;
    p.note = std::move(note);
    return p;
}

double pointSegmentDistance(Vec2 p, Vec2 a, Vec2 b) {
    Vec2 d = b - a;
    double len2 = d.normSq();
    if (len2 <= 0.0)
        return (p - a).norm();
    double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    return (p - (a + d * t)).norm();
}

double pointLoopDistance(Vec2 p, const std::vector<Vec2>& loop) {
    if (loop.size() == 1)
        return (p - loop.front()).norm();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < loop.size(); ++i) {
        double di = pointSegmentDistance(p, loop[i], loop[(i + 1) % loop.size()]);
        best = std::min(best, di);
    }
    return best;
}

std::string formatValue(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

} // namespace

PredictedLimit fixed_point_value(const ScalarField& c, const FixedPointComponent& k) {
    if (!k.effectivelyStable())
        return unstableLimit("fixed point does not attract");
    PredictedLimit p;
    p.value = c(k.info.location);
    p.caseTag = LimitCase::FixedPointValue;
    return p;
}

PredictedLimit orbit_average(const ScalarField& c, const PlanarField& b,
                             const PeriodicOrbit& orbit) {
    if (orbit.stability != OrbitStability::Stable)
        return unstableLimit(orbit.stability == OrbitStability::SemiStable
                                 ? "semi-stable cycle"
                                 : "unstable cycle");
    const double T = orbit.period;
    if (!(T > 0.0))
        throw InvalidArgumentError("periodic orbit has no positive period");

    const int n = 32768;
    std::vector<Vec2> pts(n + 1);
    std::vector<double> cs(n + 1), speed(n + 1);
    for (int i = 0; i <= n; ++i) {
        pts[static_cast<std::size_t>(i)] = orbit.path.sample(T * i / n);
        cs[static_cast<std::size_t>(i)] = c(pts[static_cast<std::size_t>(i)]);
        speed[static_cast<std::size_t>(i)] = b(pts[static_cast<std::size_t>(i)]).norm();
    }

    // Primary form: composite Simpson in time for (1/T) * integral of c.
    double sumC = 0.0, sumAbsC = 0.0;
    for (int i = 0; i <= n; ++i) {
        double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        sumC += w * cs[static_cast<std::size_t>(i)];
        sumAbsC += w * std::abs(cs[static_cast<std::size_t>(i)]);
    }
    double timeForm = sumC / (3.0 * n);
    double magScale = sumAbsC / (3.0 * n);

    // Secondary form: arc-length quadrature of c/|b| against 1/|b| with
    // chord lengths, a geometric discretization of the same average that
    // shares none of the time-quadrature error terms.
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        auto k0 = static_cast<std::size_t>(i);
        double ds = (pts[k0 + 1] - pts[k0]).norm();
        num += 0.5 * (cs[k0] / speed[k0] + cs[k0 + 1] / speed[k0 + 1]) * ds;
        den += 0.5 * (1.0 / speed[k0] + 1.0 / speed[k0 + 1]) * ds;
    }
    double arcForm = num / den;

    double rel = std::abs(timeForm - arcForm) /
                 std::max({std::abs(timeForm), std::abs(arcForm), magScale, 1e-300});
    if (rel > 1e-4)
        throw NumericalError("orbit average forms disagree: time form " + formatValue(timeForm) +
                             " vs arc form " + formatValue(arcForm));

    PredictedLimit p;
    p.value = timeForm;
    p.caseTag = LimitCase::OrbitAverage;
    p.crossCheckError = rel;
    p.note = "arc form " + formatValue(arcForm);
    return p;
}

PredictedLimit saddle_value(const ScalarField& c, const HomoclinicStructure& k) {
    if (k.loops.size() < 2)
        return unstableLimit("single homoclinic loop");
    bool stable = k.stableOutside;
    for (bool s : k.stableInside)
        stable = stable && s;
    if (!stable)
        return unstableLimit("homoclinic union does not attract on every side");
    PredictedLimit p;
    p.value = c(k.saddle);
    p.caseTag = LimitCase::SaddleValue;
    return p;
}

CoareaWeights coarea_weights(const ScalarField& c, const PlanarField& b,
                             const ClosedOrbitFamily& fam, int stations) {
    if (stations < 17)
        throw InvalidArgumentError("coarea reduction needs at least 17 stations");
    if (!fam.orbitAt)
        throw InvalidArgumentError("family has no orbit sampler");

    const bool centerIn = fam.innerEnd == ClosedOrbitFamily::EndKind::CenterPoint;
    const double lLo = centerIn ? 0.0 : fam.ell0;
    const double lHi = fam.ell1;
    if (!(lHi > lLo))
        throw InvalidArgumentError("family transversal interval is empty");

    const int m = stations;
    const double h = (lHi - lLo) / (m - 1);
    const int first = centerIn ? 1 : 0;
    const int samplesPerOrbit = 512;

    // Polyline of every station orbit, sampled uniformly in time. The center
    // endpoint degenerates to the ray origin itself.
    std::vector<std::vector<Vec2>> loops(static_cast<std::size_t>(m));
    if (centerIn)
        loops[0] = {fam.rayOrigin};
    for (int j = first; j < m; ++j) {
        PeriodicOrbit orb = fam.orbitAt(lLo + h * j);
        auto& loop = loops[static_cast<std::size_t>(j)];
        loop.resize(samplesPerOrbit);
        for (int i = 0; i < samplesPerOrbit; ++i)
            loop[static_cast<std::size_t>(i)] =
                orb.path.sample(orb.period * i / samplesPerOrbit);
    }

    CoareaWeights w;
    w.centerAtInnerEnd = centerIn;
    w.ell.resize(static_cast<std::size_t>(m));
    w.kappa.assign(static_cast<std::size_t>(m), 0.0);
    w.mu.assign(static_cast<std::size_t>(m), 0.0);
    w.gamma.assign(static_cast<std::size_t>(m), 0.0);
    for (int j = 0; j < m; ++j)
        w.ell[static_cast<std::size_t>(j)] = lLo + h * j;

    std::vector<double> grad(samplesPerOrbit), cvals(samplesPerOrbit);
    for (int j = first; j < m; ++j) {
        const auto& loop = loops[static_cast<std::size_t>(j)];
        for (int i = 0; i < samplesPerOrbit; ++i) {
            Vec2 p = loop[static_cast<std::size_t>(i)];
            cvals[static_cast<std::size_t>(i)] = c(p);
            // |grad ell| from normal distances to the neighbouring station
            // orbits: two-sided harmonic estimate inside the band, one-sided
            // at the outer edge.
            double dist = 0.0, dl = 0.0;
            if (j > 0) {
                dist += pointLoopDistance(p, loops[static_cast<std::size_t>(j - 1)]);
                dl += h;
            }
            if (j < m - 1) {
                dist += pointLoopDistance(p, loops[static_cast<std::size_t>(j + 1)]);
                dl += h;
            }
            grad[static_cast<std::size_t>(i)] = dl / dist;
        }
        double kj = 0.0, mj = 0.0, gj = 0.0;
        for (int i = 0; i < samplesPerOrbit; ++i) {
            auto i0 = static_cast<std::size_t>(i);
            auto i1 = static_cast<std::size_t>((i + 1) % samplesPerOrbit);
            double ds = (loop[i1] - loop[i0]).norm();
            kj += 0.5 * (grad[i0] + grad[i1]) * ds;
            mj += 0.5 * (1.0 / grad[i0] + 1.0 / grad[i1]) * ds;
            gj += 0.5 * (cvals[i0] / grad[i0] + cvals[i1] / grad[i1]) * ds;
        }
        if (!std::isfinite(kj) || !std::isfinite(mj) || !std::isfinite(gj) || kj <= 0.0 ||
            mj <= 0.0)
            throw NumericalError("singular coarea weight at ell = " +
                                 formatValue(lLo + h * j));
        w.kappa[static_cast<std::size_t>(j)] = kj;
        w.mu[static_cast<std::size_t>(j)] = mj;
        w.gamma[static_cast<std::size_t>(j)] = gj;
    }
    return w;
}

namespace {

Solve1dResult reducedSolve(const CoareaWeights& w, const ClosedOrbitFamily& fam) {
    End left = End::neumann();
    if (!w.centerAtInnerEnd && fam.innerUnstable)
        left = End::dirichlet();
    End right = fam.outerUnstable ? End::dirichlet() : End::neumann();
    return solve_1d(w.kappa, w.gamma, w.mu, w.ell.back() - w.ell.front(), left, right);
}

} // namespace

PredictedLimit family_rayleigh(const ScalarField& c, const PlanarField& b,
                               const ClosedOrbitFamily& fam, int stations) {
    if (stations < 34)
        throw InvalidArgumentError("family reduction needs at least 34 stations");
    CoareaWeights w = coarea_weights(c, b, fam, stations);
    Solve1dResult fine = reducedSolve(w, fam);
    CoareaWeights wHalf = coarea_weights(c, b, fam, stations / 2);
    Solve1dResult coarse = reducedSolve(wHalf, fam);

    PredictedLimit p;
    p.value = fine.lambda;
    p.caseTag = LimitCase::FamilyRayleigh;
    p.solverResidual = fine.residualNorm;
    p.crossCheckError =
        std::abs(fine.lambda - coarse.lambda) / std::max(1.0, std::abs(fine.lambda));
    p.note = "half-resolution eigenvalue " + formatValue(coarse.lambda);
    return p;
}

PredictedLimit degenerate_value(const ScalarField& c, const DegenerateRegion& region,
                                int gridSize) {
    Grid grid = build_grid(region.region, gridSize);
    PlanarField still([](Vec2) { return Vec2{0.0, 0.0}; },
                      [](Vec2) { return Mat2{}; });
    BoundarySpec bc = BoundarySpec::neumann();
    LimitCase tag = LimitCase::DegenerateN;
    switch (region.caseTag) {
    case DegenerateCase::Sink:
        break;
    case DegenerateCase::Source:
        bc = BoundarySpec::dirichlet();
        tag = LimitCase::DegenerateD;
        break;
    case DegenerateCase::Mixed:
        if (!region.dirichletFace)
            throw InvalidArgumentError("mixed degenerate region needs a face predicate");
        bc = BoundarySpec::mixed(region.dirichletFace);
        tag = LimitCase::DegenerateDN;
        break;
    }
    EigenResult er = principal_eigenvalue(grid, still, 0.0, c, bc, Scheme::ExponentialFitting);
    PredictedLimit p;
    p.value = er.lambda;
    p.caseTag = tag;
    p.solverResidual = er.residualNorm;
    return p;
}

PredictedLimit component_limit(const ScalarField& c, const PlanarField& b,
                               const LimitComponent& k) {
    return std::visit(
        [&](const auto& piece) -> PredictedLimit {
            using T = std::decay_t<decltype(piece)>;
            if constexpr (std::is_same_v<T, FixedPointComponent>)
                return fixed_point_value(c, piece);
            else if constexpr (std::is_same_v<T, PeriodicOrbit>)
                return orbit_average(c, b, piece);
            else if constexpr (std::is_same_v<T, HomoclinicStructure>)
                return saddle_value(c, piece);
            else if constexpr (std::is_same_v<T, ClosedOrbitFamily>)
                return family_rayleigh(c, b, piece);
            else
                return degenerate_value(c, piece);
        },
        k.kind);
}

PredictedLimit predicted_limit(const std::vector<LimitComponent>& components,
                               const ScalarField& c, const PlanarField& b) {
    if (components.empty())
        throw InvalidArgumentError("no limit-set components to aggregate");
    PredictedLimit best;
    for (const auto& k : components) {
        PredictedLimit p = component_limit(c, b, k);
        if (p.value < best.value)
            best = p;
    }
    if (!best.finite())
        throw NumericalError(
            "every component is unstable; a stable limit structure was missed");
    return best;
}

} // namespace driftlim
