#include "driftlim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace driftlim {

namespace {

constexpr double kMinTol = 1e-12;
constexpr double kMaxTol = 1e-3;

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) stepper with first-same-as-last reuse.

struct Step {
    double t0 = 0.0, t1 = 0.0;
    Vec2 x0, x1;
    Vec2 f0, f1;

    Vec2 hermite(double t) const {
        double h = t1 - t0;
        double s = (t - t0) / h;
        double s2 = s * s, s3 = s2 * s;
        double h00 = 2 * s3 - 3 * s2 + 1;
        double h10 = s3 - 2 * s2 + s;
        double h01 = -2 * s3 + 3 * s2;
        double h11 = s3 - s2;
        return x0 * h00 + f0 * (h10 * h) + x1 * h01 + f1 * (h11 * h);
    }
};

class Stepper {
public:
    Stepper(const PlanarField& b, Vec2 x0, double tol, const IntegrateOptions& opts)
        : b_(b), opts_(opts), tol_(tol), t_(0.0), x_(x0) {
        f_ = b_(x_);
        double fn = f_.norm();
        h_ = std::min(0.1, 0.01 * (1.0 + x_.norm()) / (1e-8 + fn));
        if (opts_.maxStep > 0.0)
            h_ = std::min(h_, opts_.maxStep);
    }

    double t() const { return t_; }
    Vec2 x() const { return x_; }
    Vec2 f() const { return f_; }
    const Step& last() const { return last_; }

    // Advances by one accepted step (clipped to tLimit when positive).
    // Returns false when t has already reached tLimit.
    bool advance(double tLimit) {
        if (tLimit > 0.0 && t_ >= tLimit)
            return false;
        for (int attempt = 0; attempt < 400; ++attempt) {
            double h = h_;
            if (tLimit > 0.0)
                h = std::min(h, tLimit - t_);
            if (h < 1e-14 * std::max(1.0, std::abs(t_)))
                throw NumericalError("step size underflow during integration");

            Vec2 k1 = f_;
            Vec2 k2 = b_(x_ + k1 * (h * a21));
            Vec2 k3 = b_(x_ + k1 * (h * a31) + k2 * (h * a32));
            Vec2 k4 = b_(x_ + k1 * (h * a41) + k2 * (h * a42) + k3 * (h * a43));
            Vec2 k5 = b_(x_ + k1 * (h * a51) + k2 * (h * a52) + k3 * (h * a53) + k4 * (h * a54));
            Vec2 k6 = b_(x_ + k1 * (h * a61) + k2 * (h * a62) + k3 * (h * a63) + k4 * (h * a64) +
                         k5 * (h * a65));
            Vec2 x5 = x_ + k1 * (h * b1) + k3 * (h * b3) + k4 * (h * b4) + k5 * (h * b5) +
                      k6 * (h * b6);
            Vec2 k7 = b_(x5);
            Vec2 err = k1 * (e1 * h) + k3 * (e3 * h) + k4 * (e4 * h) + k5 * (e5 * h) +
                       k6 * (e6 * h) + k7 * (e7 * h);

            double sc1 = tol_ * (1.0 + std::max(std::abs(x_.x), std::abs(x5.x)));
            double sc2 = tol_ * (1.0 + std::max(std::abs(x_.y), std::abs(x5.y)));
            double errNorm = std::max(std::abs(err.x) / sc1, std::abs(err.y) / sc2);

            double factor = errNorm > 0.0 ? 0.9 * std::pow(errNorm, -0.2) : 5.0;
            factor = std::clamp(factor, 0.2, 5.0);
            double hNext = h * factor;
            if (opts_.maxStep > 0.0)
                hNext = std::min(hNext, opts_.maxStep);

            if (errNorm <= 1.0) {
                last_ = Step{t_, t_ + h, x_, x5, k1, k7};
                t_ += h;
                x_ = x5;
                f_ = k7;
                h_ = hNext;
                if (x_.norm() > opts_.blowupRadius)
                    throw NumericalError("trajectory blow-up: |x| exceeded the configured bound");
                return true;
            }
            h_ = hNext;
        }
        throw NumericalError("step size control failed to accept a step");
    }

private:
    const PlanarField& b_;
    IntegrateOptions opts_;
    double tol_;
    double t_;
    Vec2 x_, f_;
    double h_ = 1e-3;
    Step last_;

    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    // Difference between the 5th and embedded 4th order weights.
    static constexpr double e1 = b1 - 5179.0 / 57600.0;
    static constexpr double e3 = b3 - 7571.0 / 16695.0;
    static constexpr double e4 = b4 - 393.0 / 640.0;
    static constexpr double e5 = b5 + 92097.0 / 339200.0;
    static constexpr double e6 = b6 - 187.0 / 2100.0;
    static constexpr double e7 = -1.0 / 40.0;
};

double validatedTol(double tol) {
    if (!(tol >= kMinTol && tol <= kMaxTol))
        throw InvalidArgumentError("integration tolerance must lie in [1e-12, 1e-3]");
    return tol;
}

// Scale used for absolute geometric thresholds.
double diameterScale(const Domain& d) { return std::max(1.0, d.diameter()); }

double fieldScale(const PlanarField& b, const Domain& d) {
    Rect bb = d.boundingBox();
    double m = 0.0;
    const int K = 16;
    for (int j = 0; j < K; ++j)
        for (int i = 0; i < K; ++i) {
            Vec2 p{bb.lo.x + (i + 0.5) * bb.width() / K, bb.lo.y + (j + 0.5) * bb.height() / K};
            if (d.contains(p))
                m = std::max(m, b(p).norm());
        }
    return m > 0.0 ? m : 1.0;
}

} // namespace

Vec2 Trajectory::sample(double t) const {
    if (times.empty())
        throw InvalidArgumentError("empty trajectory");
    if (t <= times.front())
        return states.front();
    if (t >= times.back())
        return states.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t i = static_cast<std::size_t>(it - times.begin());
    Step st{times[i - 1], times[i], states[i - 1], states[i], derivs[i - 1], derivs[i]};
    return st.hermite(t);
}

Vec2 Trajectory::sampleVelocity(double t) const {
    if (times.empty())
        throw InvalidArgumentError("empty trajectory");
    if (t <= times.front())
        return derivs.front();
    if (t >= times.back())
        return derivs.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t i = static_cast<std::size_t>(it - times.begin());
    double h = times[i] - times[i - 1];
    double s = (t - times[i - 1]) / h;
    // Derivative of the cubic Hermite interpolant.
    double g00 = (6 * s * s - 6 * s) / h;
    double g10 = 3 * s * s - 4 * s + 1;
    double g01 = (-6 * s * s + 6 * s) / h;
    double g11 = 3 * s * s - 2 * s;
    return states[i - 1] * g00 + derivs[i - 1] * g10 + states[i] * g01 + derivs[i] * g11;
}

double Trajectory::arcLength() const {
    double L = 0.0;
    for (std::size_t i = 1; i < states.size(); ++i)
        L += (states[i] - states[i - 1]).norm();
    return L;
}

Trajectory integrate(const PlanarField& b, Vec2 x0, double tEnd, double tol,
                     const IntegrateOptions& opts) {
    validatedTol(tol);
    if (!(tEnd > 0.0))
        throw InvalidArgumentError("tEnd must be positive");
    Trajectory tr;
    tr.tolUsed = tol;
    Stepper st(b, x0, tol, opts);
    tr.times.push_back(0.0);
    tr.states.push_back(st.x());
    tr.derivs.push_back(st.f());
    while (st.advance(tEnd)) {
        tr.times.push_back(st.t());
        tr.states.push_back(st.x());
        tr.derivs.push_back(st.f());
        if (opts.stopOutside && !opts.stopOutside->contains(st.x())) {
            tr.leftDomain = true;
            break;
        }
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Fixed points

namespace {

FixedPointKind classifyJacobian(const Mat2& J, std::complex<double>& e1,
                                std::complex<double>& e2) {
    double tr = J.trace(), det = J.det();
    double disc = tr * tr - 4.0 * det;
    if (disc < 0.0) {
        double re = 0.5 * tr;
        double im = 0.5 * std::sqrt(-disc);
        e1 = {re, im};
        e2 = {re, -im};
        double mod = std::hypot(re, im);
        if (std::abs(re) <= 1e-8 * mod)
            return FixedPointKind::Center;
        return re < 0.0 ? FixedPointKind::StableSpiral : FixedPointKind::UnstableSpiral;
    }
    double sq = std::sqrt(disc);
    double l1 = 0.5 * (tr - sq), l2 = 0.5 * (tr + sq);
    e1 = {l1, 0.0};
    e2 = {l2, 0.0};
    double mod = std::max(std::abs(l1), std::abs(l2));
    if (mod == 0.0 || std::abs(l1) <= 1e-8 * mod || std::abs(l2) <= 1e-8 * mod)
        return FixedPointKind::Degenerate;
    if (l1 < 0.0 && l2 < 0.0)
        return FixedPointKind::StableNode;
    if (l1 > 0.0 && l2 > 0.0)
        return FixedPointKind::UnstableNode;
    return FixedPointKind::Saddle;
}

bool containsClosed(const Domain& d, Vec2 p, double tol) {
    if (d.contains(p))
        return true;
    // Inflate by nudging toward the bounding-box centre.
    Rect bb = d.boundingBox();
    Vec2 c{0.5 * (bb.lo.x + bb.hi.x), 0.5 * (bb.lo.y + bb.hi.y)};
    Vec2 dir = c - p;
    double n = dir.norm();
    if (n < tol)
        return d.contains(c);
    return d.contains(p + dir * (tol / n));
}

} // namespace

std::vector<FixedPointInfo> find_fixed_points(const PlanarField& b, const Domain& d,
                                              int gridSeeds) {
    if (gridSeeds < 16)
        throw InvalidArgumentError("gridSeeds must be at least 16");
    Rect bb = d.boundingBox();
    double scale = diameterScale(d);
    const int m = gridSeeds;

    std::vector<double> mag(static_cast<std::size_t>(m) * m,
                            std::numeric_limits<double>::infinity());
    auto seedPoint = [&](int i, int j) {
        return Vec2{bb.lo.x + (i + 0.5) * bb.width() / m, bb.lo.y + (j + 0.5) * bb.height() / m};
    };
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            Vec2 p = seedPoint(i, j);
            if (d.contains(p))
                mag[i + static_cast<std::size_t>(m) * j] = b(p).normSq();
        }

    std::vector<Vec2> starts;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            double v = mag[i + static_cast<std::size_t>(m) * j];
            if (!std::isfinite(v))
                continue;
            bool isMin = true;
            for (int dj = -1; dj <= 1 && isMin; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    if (di == 0 && dj == 0)
                        continue;
                    int ii = i + di, jj = j + dj;
                    if (ii < 0 || ii >= m || jj < 0 || jj >= m)
                        continue;
                    if (mag[ii + static_cast<std::size_t>(m) * jj] < v) {
                        isMin = false;
                        break;
                    }
                }
            if (isMin)
                starts.push_back(seedPoint(i, j));
        }

    struct Root {
        Vec2 p;
        double residual;
    };
    std::vector<Root> roots;
    double bscale = fieldScale(b, d);

    for (Vec2 x : starts) {
        bool ok = false;
        for (int it = 0; it < 80; ++it) {
            Vec2 fx = b(x);
            if (fx.norm() <= 1e-12 * bscale) {
                ok = true;
                break;
            }
            Mat2 J = b.jacobian(x);
            double det = J.det();
            if (std::abs(det) < 1e-14 * (1.0 + J.a * J.a + J.b * J.b + J.c * J.c + J.d * J.d))
                break; // singular Jacobian: drop this seed
            Vec2 step{(J.d * fx.x - J.b * fx.y) / det, (-J.c * fx.x + J.a * fx.y) / det};
            x -= step;
            if (x.norm() > 4.0 * scale + 10.0)
                break;
            if (step.norm() <= 1e-15 * scale) {
                ok = b(x).norm() <= 1e-9 * bscale;
                break;
            }
        }
        if (!ok)
            ok = b(x).norm() <= 1e-9 * bscale;
        if (!ok || !containsClosed(d, x, 1e-9 * scale))
            continue;
        double res = b(x).norm();
        bool merged = false;
        for (auto& r : roots) {
            if ((r.p - x).norm() <= 1e-6 * scale) {
                if (res < r.residual)
                    r = {x, res};
                merged = true;
                break;
            }
        }
        if (!merged)
            roots.push_back({x, res});
    }

    std::sort(roots.begin(), roots.end(), [](const Root& a, const Root& b) {
        return a.p.x != b.p.x ? a.p.x < b.p.x : a.p.y < b.p.y;
    });

    std::vector<FixedPointInfo> out;
    for (const auto& r : roots) {
        FixedPointInfo info;
        info.location = r.p;
        info.jacobian = b.jacobian(r.p);
        info.kind = classifyJacobian(info.jacobian, info.eig1, info.eig2);
        out.push_back(info);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Poincare sections

namespace {

struct Section {
    Vec2 origin;
    Vec2 flowDir;  // unit; the section is the line through origin normal to it
    Vec2 coordDir; // unit; transverse coordinate on the section

    static Section at(Vec2 p, Vec2 velocity) {
        Vec2 v = velocity.normalized();
        return {p, v, v.perp()};
    }
    double s(Vec2 x) const { return (x - origin).dot(flowDir); }
    double u(Vec2 x) const { return (x - origin).dot(coordDir); }
};

struct Crossing {
    double t = 0.0;
    Vec2 x;
};

// Locates s(x(t)) = 0 inside the stepper's last accepted step by bisection on
// the dense output.
Crossing locateCrossing(const Step& step, const Section& sec) {
    double lo = step.t0, hi = step.t1;
    double slo = sec.s(step.x0);
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        double sm = sec.s(step.hermite(mid));
        if ((sm < 0.0) == (slo < 0.0)) {
            lo = mid;
            slo = sm;
        } else {
            hi = mid;
        }
    }
    double tc = 0.5 * (lo + hi);
    return {tc, step.hermite(tc)};
}

// Watches a trajectory for oriented crossings of a section. The detector
// arms once the state has been on the negative side, so a start on the
// section itself does not count.
class CrossingDetector {
public:
    CrossingDetector(const Section& sec, double armEps) : sec_(sec), armEps_(armEps) {}

    std::optional<Crossing> observe(const Step& step, Vec2 velocityAtEnd) {
        double s0 = sec_.s(step.x0);
        double s1 = sec_.s(step.x1);
        std::optional<Crossing> hit;
        if (armed_ && s0 < 0.0 && s1 >= 0.0 && velocityAtEnd.dot(sec_.flowDir) > 0.0) {
            hit = locateCrossing(step, sec_);
            armed_ = false;
        }
        if (s1 < -armEps_)
            armed_ = true;
        return hit;
    }

    void rearm() { armed_ = false; }

private:
    Section sec_;
    double armEps_;
    bool armed_ = false;
};

// Records accepted steps so an orbit can be cut out between two crossings.
struct PathRecorder {
    std::vector<double> times;
    std::vector<Vec2> states;
    std::vector<Vec2> derivs;

    void reset(double t, Vec2 x, Vec2 f) {
        times.assign(1, t);
        states.assign(1, x);
        derivs.assign(1, f);
    }
    void push(double t, Vec2 x, Vec2 f) {
        times.push_back(t);
        states.push_back(x);
        derivs.push_back(f);
    }

    // Trajectory from recorded start to the crossing (t, x), rebased to time 0.
    Trajectory cutTo(const Crossing& c, const PlanarField& b, double tol) const {
        Trajectory tr;
        tr.tolUsed = tol;
        double t0 = times.front();
        for (std::size_t i = 0; i < times.size() && times[i] < c.t; ++i) {
            tr.times.push_back(times[i] - t0);
            tr.states.push_back(states[i]);
            tr.derivs.push_back(derivs[i]);
        }
        tr.times.push_back(c.t - t0);
        tr.states.push_back(c.x);
        tr.derivs.push_back(b(c.x));
        return tr;
    }
};

double polylineDistance(Vec2 p, const std::vector<Vec2>& poly) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < poly.size(); ++i) {
        Vec2 a = poly[i - 1], bb = poly[i];
        Vec2 ab = bb - a;
        double L2 = ab.normSq();
        double t = L2 > 0.0 ? std::clamp((p - a).dot(ab) / L2, 0.0, 1.0) : 0.0;
        best = std::min(best, (p - (a + ab * t)).norm());
    }
    return best;
}

double orbitSize(const std::vector<Vec2>& pts) {
    Vec2 lo = pts.front(), hi = pts.front();
    for (Vec2 p : pts) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    }
    return std::hypot(hi.x - lo.x, hi.y - lo.y);
}

// Winding number of a closed polyline around p.
double windingNumber(const std::vector<Vec2>& poly, Vec2 p) {
    double total = 0.0;
    for (std::size_t i = 1; i < poly.size(); ++i) {
        Vec2 a = poly[i - 1] - p, b = poly[i] - p;
        total += std::atan2(a.x * b.y - a.y * b.x, a.dot(b));
    }
    return total / (2.0 * std::numbers::pi);
}

bool encloses(const std::vector<Vec2>& poly, Vec2 p) {
    return std::abs(windingNumber(poly, p)) > 0.5;
}

} // namespace

// ---------------------------------------------------------------------------
// Limit cycles

namespace {

// Integrates from `start` to the next oriented crossing of `sec`.
// Returns nullopt when the budget runs out or the trajectory escapes.
std::optional<Crossing> nextCrossing(const PlanarField& b, Vec2 start, const Section& sec,
                                     double itol, double tBudget, const Domain* domain,
                                     double armEps, PathRecorder* rec = nullptr) {
    IntegrateOptions iopts;
    Stepper st(b, start, itol, iopts);
    CrossingDetector det(sec, armEps);
    if (rec)
        rec->reset(0.0, st.x(), st.f());
    while (st.t() < tBudget) {
        st.advance(tBudget);
        if (domain && !domain->contains(st.x()))
            return std::nullopt;
        auto hit = det.observe(st.last(), st.f());
        if (rec)
            rec->push(st.t(), st.x(), st.f());
        if (hit)
            return hit;
    }
    return std::nullopt;
}

} // namespace

PeriodicOrbit find_limit_cycle(const PlanarField& b, Vec2 seed, double tol,
                               const Domain* domain) {
    if (!(tol > 0.0))
        throw InvalidArgumentError("tolerance must be positive");
    double scale = domain ? diameterScale(*domain) : std::max(1.0, seed.norm());
    double itol = std::clamp(tol * 1e-2, kMinTol, 1e-9);
    double armEps = 1e-7 * scale;
    double fpTol = 1e-9;

    if (b(seed).norm() < fpTol)
        throw NoRecurrenceError("seed velocity vanishes: seed is at a fixed point");

    // Transient: ride the flow until successive section crossings contract.
    IntegrateOptions iopts;
    Stepper st(b, seed, itol, iopts);
    std::optional<Section> sec;
    std::optional<Crossing> prev;
    Vec2 anchor;
    bool anchored = false;
    double budget = 2000.0;
    std::optional<CrossingDetector> det;

    while (st.t() < budget && !anchored) {
        st.advance(budget);
        if (domain && !domain->contains(st.x()))
            throw NoRecurrenceError("trajectory left the domain before recurrence");
        if (st.f().norm() < fpTol)
            throw NoRecurrenceError("trajectory converged to a fixed point");
        if (!sec && st.t() > 0.5) {
            sec = Section::at(st.x(), st.f());
            det.emplace(*sec, armEps);
            continue;
        }
        if (!sec)
            continue;
        auto hit = det->observe(st.last(), st.f());
        if (!hit)
            continue;
        if (prev && (hit->x - prev->x).norm() <= 1e-3 * scale) {
            anchor = hit->x;
            anchored = true;
            break;
        }
        prev = hit;
    }
    if (!anchored)
        throw NoRecurrenceError("no recurrence detected within the time budget");

    // Return map on the section through the anchor.
    Section psec = Section::at(anchor, b(anchor));
    double retBudget = 400.0;
    auto returnMap = [&](double u) {
        Vec2 start = psec.origin + psec.coordDir * u;
        auto hit = nextCrossing(b, start, psec, itol, retBudget, domain, armEps);
        if (!hit)
            throw NoRecurrenceError("return map failed: trajectory did not come back");
        return psec.u(hit->x);
    };

    double u0 = 0.0;
    double F0 = returnMap(u0) - u0;
    double u1 = F0 != 0.0 ? u0 + F0 : u0 + 1e-7 * scale;
    double F1 = returnMap(u1) - u1;
    double uStar = u1, FStar = F1;
    for (int it = 0; it < 60 && std::abs(FStar) > tol; ++it) {
        double denom = F1 - F0;
        double uNext;
        if (std::abs(denom) < 1e-18 * scale)
            uNext = u1 + F1;
        else
            uNext = u1 - F1 * (u1 - u0) / denom;
        u0 = u1;
        F0 = F1;
        u1 = uNext;
        F1 = returnMap(u1) - u1;
        uStar = u1;
        FStar = F1;
    }
    if (std::abs(FStar) > tol)
        throw NoRecurrenceError("return-map secant iteration did not reach tolerance");

    // Cut one period out of the flow starting at the fixed point of the map.
    Vec2 start = psec.origin + psec.coordDir * uStar;
    PathRecorder rec;
    auto hit = nextCrossing(b, start, psec, itol, retBudget, domain, armEps, &rec);
    if (!hit)
        throw NoRecurrenceError("closed orbit lost while recording samples");

    PeriodicOrbit orbit;
    orbit.path = rec.cutTo(*hit, b, itol);
    orbit.period = orbit.path.times.back();
    orbit.sectionResidual = std::abs(FStar);

    double size = orbitSize(orbit.path.states);
    double delta = 1e-4 * size;
    double rPlus = returnMap(uStar + delta);
    double rMinus = returnMap(uStar - delta);
    orbit.outerMultiplierSlope = (rPlus - uStar) / delta;
    orbit.innerMultiplierSlope = (rMinus - uStar) / (-delta);
    double so = std::abs(orbit.outerMultiplierSlope);
    double si = std::abs(orbit.innerMultiplierSlope);
    if (so < 1.0 && si < 1.0)
        orbit.stability = OrbitStability::Stable;
    else if (so > 1.0 && si > 1.0)
        orbit.stability = OrbitStability::Unstable;
    else
        orbit.stability = OrbitStability::SemiStable;
    return orbit;
}

// ---------------------------------------------------------------------------
// Homoclinic structures

namespace {

struct BranchResult {
    bool reconnected = false;
    Trajectory path;
    Vec2 terminal;
};

BranchResult shootBranch(const PlanarField& field, Vec2 saddle, Vec2 dir, double offset,
                         double reconnectTol, double escapeRadius, const Domain* domain,
                         double tBudget) {
    BranchResult res;
    IntegrateOptions iopts;
    Stepper st(field, saddle + dir * offset, 1e-10, iopts);
    Trajectory& tr = res.path;
    tr.tolUsed = 1e-10;
    tr.times.push_back(0.0);
    tr.states.push_back(st.x());
    tr.derivs.push_back(st.f());
    bool escaped = false;
    while (st.t() < tBudget) {
        try {
            st.advance(tBudget);
        } catch (const NumericalError&) {
            break;
        }
        tr.times.push_back(st.t());
        tr.states.push_back(st.x());
        tr.derivs.push_back(st.f());
        if (domain && !domain->contains(st.x()))
            break;
        double dist = (st.x() - saddle).norm();
        if (!escaped && dist > escapeRadius)
            escaped = true;
        if (escaped && dist <= reconnectTol) {
            res.reconnected = true;
            break;
        }
    }
    res.terminal = tr.states.back();
    return res;
}

bool monotoneApproach(const Trajectory& tr, Vec2 saddle) {
    // Distance to the saddle must not increase over the last fifth of the
    // branch's arc length.
    std::vector<double> cum(tr.states.size(), 0.0);
    for (std::size_t i = 1; i < tr.states.size(); ++i)
        cum[i] = cum[i - 1] + (tr.states[i] - tr.states[i - 1]).norm();
    double total = cum.back();
    double from = 0.8 * total;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
        if (cum[i] < from)
            continue;
        double dist = (tr.states[i] - saddle).norm();
        if (dist > prev * (1.0 + 1e-6))
            return false;
        prev = dist;
    }
    return true;
}

struct SaddleDirections {
    Vec2 unstable;
    Vec2 stable;
};

SaddleDirections saddleEigenvectors(const Mat2& J) {
    double tr = J.trace(), det = J.det();
    double disc = tr * tr - 4.0 * det;
    if (disc <= 0.0)
        throw InvalidArgumentError("saddle Jacobian has no real eigenpair");
    double sq = std::sqrt(disc);
    double lu = 0.5 * (tr + sq);
    double ls = 0.5 * (tr - sq);
    auto eigvec = [&](double lambda) {
        // (J - lambda I) v = 0; pick the better-conditioned row.
        Vec2 r1{J.a - lambda, J.b};
        Vec2 r2{J.c, J.d - lambda};
        Vec2 v = r1.normSq() > r2.normSq() ? Vec2{-r1.y, r1.x} : Vec2{-r2.y, r2.x};
        return v.normalized();
    };
    return {eigvec(lu), eigvec(ls)};
}

} // namespace

HomoclinicStructure detect_homoclinic(const PlanarField& b, const FixedPointInfo& saddle,
                                      double tol, const Domain* domain) {
    if (saddle.kind != FixedPointKind::Saddle)
        throw InvalidArgumentError("detect_homoclinic requires a saddle point");
    double scale = domain ? diameterScale(*domain) : 1.0;
    double reconnectTol = tol;
    double escapeRadius = std::max(20.0 * reconnectTol, 0.02 * scale);
    double offset = 1e-6;
    double tBudget = 400.0;

    SaddleDirections dirs = saddleEigenvectors(saddle.jacobian);
    PlanarField backward = b.scaledBy(-1.0);

    std::vector<Vec2> terminals;
    std::vector<Trajectory> loops;
    int backwardReconnects = 0;

    for (double sign : {1.0, -1.0}) {
        BranchResult fwd = shootBranch(b, saddle.location, dirs.unstable * sign, offset,
                                       reconnectTol, escapeRadius, domain, tBudget);
        if (fwd.reconnected && monotoneApproach(fwd.path, saddle.location))
            loops.push_back(std::move(fwd.path));
        else
            terminals.push_back(fwd.terminal);

        BranchResult bwd = shootBranch(backward, saddle.location, dirs.stable * sign, offset,
                                       reconnectTol, escapeRadius, domain, tBudget);
        if (bwd.reconnected)
            ++backwardReconnects;
        else
            terminals.push_back(bwd.terminal);
    }

    if (loops.empty() || static_cast<int>(loops.size()) != backwardReconnects)
        throw HomoclinicNotFound("no homoclinic reconnection from this saddle",
                                 std::move(terminals));

    HomoclinicStructure hs;
    hs.saddle = saddle.location;
    hs.loops = std::move(loops);

    // Probe stability of each side by dropping a transversal point near the
    // farthest loop sample and watching its distance to the structure.
    auto unionDistance = [&](Vec2 p) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& loop : hs.loops)
            d = std::min(d, polylineDistance(p, loop.states));
        return d;
    };
    double probeOffset = 1e-3 * scale;
    double probeTime = 80.0;
    auto probeSide = [&](Vec2 start) {
        IntegrateOptions iopts;
        iopts.stopOutside = domain;
        Trajectory tr = integrate(b, start, probeTime, 1e-9, iopts);
        if (tr.leftDomain)
            return false;
        return unionDistance(tr.states.back()) < 0.5 * probeOffset;
    };

    hs.stableInside.clear();
    bool outsideChecked = false;
    for (const auto& loop : hs.loops) {
        Vec2 centroid{0.0, 0.0};
        for (Vec2 p : loop.states)
            centroid += p;
        centroid = centroid / static_cast<double>(loop.states.size());
        Vec2 far = loop.states.front();
        for (Vec2 p : loop.states)
            if ((p - hs.saddle).norm() > (far - hs.saddle).norm())
                far = p;
        Vec2 inward = (centroid - far).normalized();
        hs.stableInside.push_back(probeSide(far + inward * probeOffset));
        if (!outsideChecked) {
            hs.stableOutside = probeSide(far - inward * probeOffset);
            outsideChecked = true;
        }
    }
    return hs;
}

// ---------------------------------------------------------------------------
// Probes

namespace {

struct ProbeContext {
    const PlanarField& b;
    const Domain& domain;
    const std::vector<FixedPointInfo>& fixedPoints;
    double diamScale;
    double bscale;
    double probeTime;
    double itol;
};

int nearestFixedPoint(const std::vector<FixedPointInfo>& fps, Vec2 x) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < fps.size(); ++i) {
        double d = (fps[i].location - x).norm();
        if (d < bd) {
            bd = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

ProbeResult probeOne(const ProbeContext& ctx, int seedIndex, Vec2 seed) {
    ProbeResult res;
    res.seedIndex = seedIndex;
    res.seed = seed;
    res.finalState = seed;

    double recurrBall = 1e-5 * ctx.diamScale;
    double armEps = 1e-7 * ctx.diamScale;
    double fpVelocity = 1e-9 * ctx.bscale;
    double fpBall = 1e-6 * ctx.diamScale;

    Vec2 v0 = ctx.b(seed);
    if (v0.norm() < fpVelocity) {
        res.outcome = ProbeResult::Outcome::FixedPoint;
        res.fixedPointIndex = nearestFixedPoint(ctx.fixedPoints, seed);
        return res;
    }

    IntegrateOptions iopts;
    Stepper st(ctx.b, seed, ctx.itol, iopts);
    Section secA = Section::at(seed, v0);
    CrossingDetector detA(secA, armEps);
    std::optional<Section> secB;
    std::optional<CrossingDetector> detB;
    std::optional<Crossing> lastCross;
    PathRecorder rec;
    rec.reset(0.0, st.x(), st.f());

    while (st.t() < ctx.probeTime) {
        try {
            st.advance(ctx.probeTime);
        } catch (const NumericalError&) {
            res.outcome = ProbeResult::Outcome::Undecided;
            res.finalState = st.x();
            return res;
        }
        rec.push(st.t(), st.x(), st.f());
        res.finalState = st.x();

        if (!ctx.domain.contains(st.x())) {
            res.outcome = ProbeResult::Outcome::LeftDomain;
            return res;
        }
        if (st.f().norm() < fpVelocity) {
            res.outcome = ProbeResult::Outcome::FixedPoint;
            res.fixedPointIndex = nearestFixedPoint(ctx.fixedPoints, st.x());
            return res;
        }
        for (std::size_t i = 0; i < ctx.fixedPoints.size(); ++i) {
            const auto& fp = ctx.fixedPoints[i];
            if (fp.kind == FixedPointKind::StableNode || fp.kind == FixedPointKind::StableSpiral) {
                if ((st.x() - fp.location).norm() < fpBall) {
                    res.outcome = ProbeResult::Outcome::FixedPoint;
                    res.fixedPointIndex = static_cast<int>(i);
                    return res;
                }
            }
        }

        if (!secB) {
            auto hit = detA.observe(st.last(), st.f());
            if (hit) {
                double gap = (hit->x - seed).norm();
                double align = ctx.b(hit->x).normalized().dot(v0.normalized());
                if (gap <= recurrBall && align > 0.999) {
                    res.outcome = ProbeResult::Outcome::Periodic;
                    res.periodicThroughSeed = true;
                    res.orbit.path = rec.cutTo(*hit, ctx.b, ctx.itol);
                    res.orbit.period = res.orbit.path.times.back();
                    res.orbit.sectionResidual = gap;
                    return res;
                }
                secB = Section::at(hit->x, ctx.b(hit->x));
                detB.emplace(*secB, armEps);
                lastCross = *hit;
                rec.reset(hit->t, hit->x, ctx.b(hit->x));
            }
            continue;
        }

        auto hit = detB->observe(st.last(), st.f());
        if (!hit)
            continue;
        double gap = (hit->x - lastCross->x).norm();
        double align = ctx.b(hit->x).normalized().dot(ctx.b(lastCross->x).normalized());
        if (gap <= recurrBall && align > 0.999) {
            res.outcome = ProbeResult::Outcome::Periodic;
            res.periodicThroughSeed = false;
            res.orbit.path = rec.cutTo(*hit, ctx.b, ctx.itol);
            res.orbit.period = res.orbit.path.times.back();
            res.orbit.sectionResidual = gap;
            return res;
        }
        lastCross = *hit;
        rec.reset(hit->t, hit->x, ctx.b(hit->x));
    }
    res.outcome = ProbeResult::Outcome::Undecided;
    return res;
}

} // namespace

std::vector<ProbeResult> run_probes(const PlanarField& b, const Domain& d,
                                    const std::vector<FixedPointInfo>& fixedPoints,
                                    const AssembleOptions& opts) {
    Rect bb = d.boundingBox();
    double diamScale = diameterScale(d);
    double bscale = fieldScale(b, d);
    ProbeContext ctx{b, d, fixedPoints, diamScale, bscale, opts.probeTime,
                     std::clamp(opts.tol, kMinTol, 1e-9)};

    std::vector<ProbeResult> out;
    int m = std::max(2, opts.probeSeeds);
    int idx = 0;
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) {
            Vec2 seed{bb.lo.x + (i + 0.5) * bb.width() / m, bb.lo.y + (j + 0.5) * bb.height() / m};
            if (!d.contains(seed))
                continue;
            out.push_back(probeOne(ctx, idx++, seed));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Component assembly

namespace {

// Ring-probe resolution of Center/Degenerate fixed points: genuinely
// periodic neighbours mean a true center (a family seed), contraction means
// the point attracts despite its indefinite linearisation.
enum class CenterResolution { FamilyCenter, Attracting, Repelling, Unresolved };

CenterResolution resolveCenterStability(const PlanarField& b, const Domain& d,
                                        const FixedPointInfo& fp, double diamScale) {
    double r0 = 1e-2 * diamScale;
    const int K = 8;
    int periodic = 0, shrinking = 0, growing = 0, usable = 0;
    for (int k = 0; k < K; ++k) {
        double th = 2.0 * std::numbers::pi * (k + 0.25) / K;
        Vec2 start = fp.location + Vec2{std::cos(th), std::sin(th)} * r0;
        if (!d.contains(start))
            continue;
        ++usable;

        Vec2 v0 = b(start);
        if (v0.norm() < 1e-14) {
            ++shrinking;
            continue;
        }
        // First-return test against the ray through the start point.
        Section sec = Section::at(start, v0);
        auto hit = nextCrossing(b, start, sec, 1e-10, 200.0, &d, 1e-9 * diamScale);
        if (hit && (hit->x - start).norm() <= 1e-7 * diamScale) {
            ++periodic;
            continue;
        }
        // Long-run radius trend.
        IntegrateOptions iopts;
        iopts.stopOutside = &d;
        double T = 600.0;
        Trajectory tr = integrate(b, start, T, 1e-9, iopts);
        double rT = (tr.states.back() - fp.location).norm();
        if (tr.leftDomain || rT > 1.6 * r0)
            ++growing;
        else if (rT < 0.6 * r0)
            ++shrinking;
    }
    if (usable == 0)
        return CenterResolution::Unresolved;
    if (periodic == usable)
        return CenterResolution::FamilyCenter;
    if (shrinking == usable)
        return CenterResolution::Attracting;
    if (growing == usable)
        return CenterResolution::Repelling;
    return CenterResolution::Unresolved;
}

double hausdorffDistance(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    auto oneSided = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
        double worst = 0.0;
        for (Vec2 p : from)
            worst = std::max(worst, polylineDistance(p, to));
        return worst;
    };
    return std::max(oneSided(a, b), oneSided(b, a));
}

// Integrates the closed orbit through `start`, cutting at the first oriented
// return to the section through the start point.
std::optional<PeriodicOrbit> orbitThrough(const PlanarField& b, const Domain& d, Vec2 start,
                                          double itol, double closeTol) {
    Vec2 v0 = b(start);
    if (v0.norm() < 1e-13)
        return std::nullopt;
    Section sec = Section::at(start, v0);
    PathRecorder rec;
    auto hit = nextCrossing(b, start, sec, itol, 2000.0, &d, 1e-9, &rec);
    if (!hit || (hit->x - start).norm() > closeTol)
        return std::nullopt;
    PeriodicOrbit orbit;
    orbit.path = rec.cutTo(*hit, b, itol);
    orbit.period = orbit.path.times.back();
    orbit.sectionResidual = (hit->x - start).norm();
    orbit.stability = OrbitStability::Stable;
    return orbit;
}

} // namespace

ComponentSet assemble_components(const PlanarField& b, const Domain& d,
                                 const AssembleOptions& opts) {
    ComponentSet set;
    double diamScale = diameterScale(d);

    InflowReport inflow = check_inflow(d, b);
    if (!inflow.satisfied)
        set.warnings.push_back("inflow condition violated: max boundary normal component " +
                               std::to_string(inflow.maxNormalComponent));

    auto fps = find_fixed_points(b, d, opts.gridSeeds);

    // Saddles first: homoclinic structures consume their saddle.
    std::vector<HomoclinicStructure> homoclinics;
    std::vector<bool> saddleConsumed(fps.size(), false);
    double reconnectTol = 1e-4 * d.diameter();
    for (std::size_t i = 0; i < fps.size(); ++i) {
        if (fps[i].kind != FixedPointKind::Saddle)
            continue;
        try {
            homoclinics.push_back(detect_homoclinic(b, fps[i], reconnectTol, &d));
            saddleConsumed[i] = true;
        } catch (const HomoclinicNotFound& nf) {
            for (Vec2 term : nf.branchEndpoints)
                for (std::size_t j = 0; j < fps.size(); ++j)
                    if (j != i && fps[j].kind == FixedPointKind::Saddle &&
                        (term - fps[j].location).norm() <= reconnectTol)
                        throw UnsupportedTopologyError(
                            "saddle branches connect two distinct saddles (heteroclinic)");
        }
    }

    // Resolve indefinite fixed points by probing.
    std::vector<CenterResolution> resolution(fps.size(), CenterResolution::Unresolved);
    for (std::size_t i = 0; i < fps.size(); ++i)
        if (fps[i].kind == FixedPointKind::Center || fps[i].kind == FixedPointKind::Degenerate)
            resolution[i] = resolveCenterStability(b, d, fps[i], diamScale);

    auto probes = run_probes(b, d, fps, opts);

    // Partition periodic probe orbits.
    std::vector<const ProbeResult*> immediate, converged;
    for (const auto& pr : probes) {
        if (pr.outcome != ProbeResult::Outcome::Periodic)
            continue;
        (pr.periodicThroughSeed ? immediate : converged).push_back(&pr);
    }

    // Families grow around confirmed centers.
    std::vector<ClosedOrbitFamily> families;
    std::vector<bool> centerConsumed(fps.size(), false);
    double itol = std::clamp(opts.tol, kMinTol, 1e-9);
    double closeTol = 1e-5 * diamScale;

    for (std::size_t ci = 0; ci < fps.size(); ++ci) {
        if (fps[ci].kind != FixedPointKind::Center ||
            resolution[ci] != CenterResolution::FamilyCenter)
            continue;
        Vec2 c0 = fps[ci].location;

        // Collect member orbits around this centre to size the band.
        double bestR = 0.0;
        Vec2 farPoint = c0 + Vec2{1.0, 0.0};
        bool haveMember = false;
        for (const auto* pr : immediate) {
            if (!encloses(pr->orbit.path.states, c0))
                continue;
            bool othersInside = false;
            for (std::size_t oj = 0; oj < fps.size(); ++oj)
                if (oj != ci && encloses(pr->orbit.path.states, fps[oj].location))
                    othersInside = true;
            if (othersInside)
                continue; // orbits of this band must wind around the centre alone
            haveMember = true;
            for (Vec2 p : pr->orbit.path.states) {
                double r = (p - c0).norm();
                if (r > bestR) {
                    bestR = r;
                    farPoint = p;
                }
            }
        }
        if (!haveMember) {
            // The ring probes are periodic even if no lattice seed landed in
            // the band; start from the ring radius.
            bestR = 1e-2 * diamScale;
            farPoint = c0 + Vec2{bestR, 0.0};
        }

        Vec2 dir = (farPoint - c0).normalized();
        auto orbitAtRay = [&, c0, dir](double ell) {
            auto orb = orbitThrough(b, d, c0 + dir * ell, itol, closeTol);
            return orb;
        };

        // Validity interval along the ray: double outward from the best-known
        // member, then bisect the edge.
        double lGood = bestR;
        if (!orbitAtRay(lGood)) {
            // retreat until a valid orbit is found
            bool found = false;
            for (int k = 0; k < 12; ++k) {
                lGood *= 0.7;
                if (orbitAtRay(lGood)) {
                    found = true;
                    break;
                }
            }
            if (!found)
                continue;
        }
        double rayMax = 4.0 * diamScale;
        double lBad = 0.0;
        {
            double probeL = lGood;
            bool foundBad = false;
            for (int k = 0; k < 40; ++k) {
                probeL = std::min(probeL * 1.3 + 1e-3 * diamScale, rayMax);
                if (!d.contains(c0 + dir * probeL) || !orbitAtRay(probeL)) {
                    lBad = probeL;
                    foundBad = true;
                    break;
                }
                lGood = probeL;
                if (probeL >= rayMax)
                    break;
            }
            if (!foundBad)
                lBad = rayMax;
        }
        for (int k = 0; k < 40 && (lBad - lGood) > 1e-6 * diamScale; ++k) {
            double mid = 0.5 * (lGood + lBad);
            if (d.contains(c0 + dir * mid) && orbitAtRay(mid))
                lGood = mid;
            else
                lBad = mid;
        }

        ClosedOrbitFamily fam;
        fam.rayOrigin = c0;
        fam.rayDir = dir;
        fam.ell0 = 0.0;
        fam.ell1 = lGood;
        fam.innerEnd = ClosedOrbitFamily::EndKind::CenterPoint;
        fam.innerUnstable = false;

        PlanarField bCopy = b;
        Domain dCopy = d;
        double itolCopy = itol, closeTolCopy = closeTol;
        fam.orbitAt = [bCopy, dCopy, c0, dir, itolCopy, closeTolCopy](double ell) {
            auto orb = orbitThrough(bCopy, dCopy, c0 + dir * ell, itolCopy, closeTolCopy);
            if (!orb)
                throw NumericalError("family orbit sampling failed at ell = " +
                                     std::to_string(ell));
            return *orb;
        };

        // Outer end: beyond the band either the domain ends, or orbits leave,
        // or a bounding cycle attracts/repels.
        double delta = std::max(4e-6 * diamScale, 0.25 * (lBad - lGood));
        Vec2 beyond = c0 + dir * (lGood + delta);
        if (!d.contains(beyond)) {
            fam.outerEnd = ClosedOrbitFamily::EndKind::DomainBoundary;
            fam.outerUnstable = false;
        } else {
            auto edgeOrbit = orbitAtRay(lGood);
            IntegrateOptions iopts;
            iopts.stopOutside = &d;
            Trajectory tr = integrate(b, beyond, 120.0, 1e-9, iopts);
            if (tr.leftDomain) {
                fam.outerEnd = ClosedOrbitFamily::EndKind::DomainBoundary;
                fam.outerUnstable = false;
            } else {
                double d0 = edgeOrbit ? polylineDistance(beyond, edgeOrbit->path.states) : delta;
                double dT = edgeOrbit ? polylineDistance(tr.states.back(), edgeOrbit->path.states)
                                      : delta;
                fam.outerEnd = ClosedOrbitFamily::EndKind::BoundaryCycle;
                fam.outerUnstable = dT > 2.0 * d0;
            }
        }
        centerConsumed[ci] = true;
        families.push_back(std::move(fam));
    }

    // Leftover immediate orbits (periodic through their seed) belong to some
    // family band; if none claimed them, surface a warning rather than invent
    // a component.
    for (const auto* pr : immediate) {
        bool claimed = false;
        for (const auto& fam : families) {
            if (encloses(pr->orbit.path.states, fam.rayOrigin)) {
                claimed = true;
                break;
            }
        }
        if (!claimed)
            set.warnings.push_back("periodic orbit through seed not claimed by any family");
    }

    // Converged probe orbits cluster into isolated limit cycles.
    std::vector<PeriodicOrbit> cycles;
    {
        std::vector<std::vector<Vec2>> reps;
        std::vector<Vec2> repSeeds;
        double clusterTol = std::max(1e-3 * diamScale, 20.0 * closeTol);
        double saddleHug = std::max(2.0 * reconnectTol, 1e-2 * diamScale);
        for (const auto* pr : converged) {
            // Orbits hugging a homoclinic structure belong to that component.
            bool nearSaddle = false;
            for (const auto& hs : homoclinics)
                for (Vec2 p : pr->orbit.path.states)
                    if ((p - hs.saddle).norm() < saddleHug) {
                        nearSaddle = true;
                        break;
                    }
            if (nearSaddle)
                continue;
            // Orbits inside a family band are family members that a probe
            // reached after drifting numerically; ignore them.
            bool inFamily = false;
            for (const auto& fam : families)
                if (encloses(pr->orbit.path.states, fam.rayOrigin))
                    inFamily = true;
            if (inFamily)
                continue;
            bool merged = false;
            for (auto& rep : reps)
                if (hausdorffDistance(pr->orbit.path.states, rep) < clusterTol) {
                    merged = true;
                    break;
                }
            if (!merged) {
                reps.push_back(pr->orbit.path.states);
                repSeeds.push_back(pr->orbit.path.states.front());
            }
        }
        for (std::size_t r = 0; r < reps.size(); ++r) {
            try {
                PeriodicOrbit refined = find_limit_cycle(b, repSeeds[r], opts.tol, &d);
                // A shrinking halo around an attracting indefinite point is
                // convergence in disguise, not a cycle.
                bool halo = false;
                for (std::size_t i = 0; i < fps.size(); ++i) {
                    if (resolution[i] != CenterResolution::Attracting)
                        continue;
                    double maxDist = 0.0;
                    for (Vec2 p : refined.path.states)
                        maxDist = std::max(maxDist, (p - fps[i].location).norm());
                    if (maxDist < 0.05 * diamScale)
                        halo = true;
                }
                if (halo)
                    continue;
                bool dup = false;
                for (const auto& cy : cycles)
                    if (hausdorffDistance(refined.path.states, cy.path.states) < clusterTol)
                        dup = true;
                if (!dup)
                    cycles.push_back(std::move(refined));
            } catch (const NoRecurrenceError&) {
                continue;
            }
        }
    }

    // Emit components in a deterministic order.
    for (std::size_t i = 0; i < fps.size(); ++i) {
        if (saddleConsumed[i] || centerConsumed[i])
            continue;
        FixedPointComponent fc;
        fc.info = fps[i];
        if (fps[i].kind == FixedPointKind::Center || fps[i].kind == FixedPointKind::Degenerate) {
            switch (resolution[i]) {
            case CenterResolution::Attracting:
                fc.info.kind = FixedPointKind::Degenerate;
                fc.stableByProbing = true;
                break;
            case CenterResolution::Repelling:
                fc.info.kind = FixedPointKind::Degenerate;
                fc.stableByProbing = false;
                break;
            case CenterResolution::FamilyCenter:
                // center seeded no family (band construction failed); leave kind
                break;
            case CenterResolution::Unresolved:
                set.warnings.push_back("indefinite fixed point could not be resolved by probing");
                break;
            }
        }
        set.components.push_back({LimitComponent::Kind{fc}});
    }
    std::sort(homoclinics.begin(), homoclinics.end(),
              [](const HomoclinicStructure& ha, const HomoclinicStructure& hb) {
                  return ha.saddle.x != hb.saddle.x ? ha.saddle.x < hb.saddle.x
                                                    : ha.saddle.y < hb.saddle.y;
              });
    for (auto& hs : homoclinics)
        set.components.push_back({LimitComponent::Kind{std::move(hs)}});
    std::sort(cycles.begin(), cycles.end(), [](const PeriodicOrbit& ca, const PeriodicOrbit& cb) {
        Vec2 pa = ca.path.states.front(), pb = cb.path.states.front();
        return pa.x != pb.x ? pa.x < pb.x : pa.y < pb.y;
    });
    for (auto& cy : cycles)
        set.components.push_back({LimitComponent::Kind{std::move(cy)}});
    for (auto& fam : families)
        set.components.push_back({LimitComponent::Kind{std::move(fam)}});
    for (const auto& reg : opts.declaredRegions)
        set.components.push_back({LimitComponent::Kind{reg}});
    return set;
}

} // namespace driftlim
