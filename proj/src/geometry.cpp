#include "driftlim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace driftlim {

Domain Domain::disk(Vec2 center, double radius) {
    if (!(radius > 0.0))
        throw InvalidArgumentError("disk radius must be positive");
    Domain d;
    d.shape_ = Disk{center, radius};
    return d;
}

Domain Domain::rect(Vec2 lo, Vec2 hi) {
    if (!(lo.x < hi.x && lo.y < hi.y))
        throw InvalidArgumentError("rectangle corners must satisfy lo < hi");
    Domain d;
    d.shape_ = Box{Rect{lo, hi}};
    return d;
}

Domain Domain::sublevel(Expr H, double level, Rect bounds) {
    if (!H.valid())
        throw InvalidArgumentError("sublevel domain needs a level function");
    if (!(bounds.lo.x < bounds.hi.x && bounds.lo.y < bounds.hi.y))
        throw InvalidArgumentError("sublevel bounding rectangle is empty");
    // The rectangle must strictly contain {H < level}: if the sublevel set
    // reaches the rectangle's edge the stair-step boundary would cut it off.
    const int edgeSamples = 256;
    for (int k = 0; k <= edgeSamples; ++k) {
        double tx = bounds.lo.x + bounds.width() * k / edgeSamples;
        double ty = bounds.lo.y + bounds.height() * k / edgeSamples;
        for (Vec2 p : {Vec2{tx, bounds.lo.y}, Vec2{tx, bounds.hi.y},
                       Vec2{bounds.lo.x, ty}, Vec2{bounds.hi.x, ty}})
            if (H.eval(p) < level)
                throw InvalidArgumentError(
                    "sublevel set reaches the bounding rectangle's edge");
    }
    Domain d;
    d.shape_ = Sublevel{std::move(H), level, bounds};
    return d;
}

bool Domain::contains(Vec2 p) const {
    if (auto* dk = asDisk())
        return (p - dk->center).norm() < dk->radius;
    if (auto* bx = asBox())
        return p.x > bx->rect.lo.x && p.x < bx->rect.hi.x &&
               p.y > bx->rect.lo.y && p.y < bx->rect.hi.y;
    auto* sl = asSublevel();
    if (p.x <= sl->bounds.lo.x || p.x >= sl->bounds.hi.x ||
        p.y <= sl->bounds.lo.y || p.y >= sl->bounds.hi.y)
        return false;
    return sl->H.eval(p) < sl->level;
}

Rect Domain::boundingBox() const {
    if (auto* dk = asDisk())
        return {{dk->center.x - dk->radius, dk->center.y - dk->radius},
                {dk->center.x + dk->radius, dk->center.y + dk->radius}};
    if (auto* bx = asBox())
        return bx->rect;
    return asSublevel()->bounds;
}

double Domain::diameter() const {
    Rect bb = boundingBox();
    return std::hypot(bb.width(), bb.height());
}

namespace {

std::vector<BoundaryPoint> sampleSublevelBoundary(const Domain::Sublevel& sl, int count) {
    // March a lattice fine enough to catch the level curve and bisect every
    // sign-changing edge of it.
    std::vector<BoundaryPoint> pts;
    int m = std::max(32, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count)) * 4.0)));
    double dx = sl.bounds.width() / m;
    double dy = sl.bounds.height() / m;
    auto f = [&](Vec2 p) { return sl.H.eval(p) - sl.level; };

    auto bisect = [&](Vec2 a, Vec2 b, double fa) {
        for (int it = 0; it < 60; ++it) {
            Vec2 mid = (a + b) * 0.5;
            double fm = f(mid);
            if ((fm < 0.0) == (fa < 0.0)) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        Vec2 p = (a + b) * 0.5;
        Vec2 g = sl.H.grad(p);
        double gn = g.norm();
        if (gn < 1e-14)
            return; // grazing a critical point of H, skip
        pts.push_back({p, g / gn});
    };

    std::vector<double> vals(static_cast<std::size_t>(m + 1) * (m + 1));
    for (int j = 0; j <= m; ++j)
        for (int i = 0; i <= m; ++i)
            vals[i + (m + 1) * j] =
                f({sl.bounds.lo.x + i * dx, sl.bounds.lo.y + j * dy});

    for (int j = 0; j <= m; ++j) {
        for (int i = 0; i <= m; ++i) {
            double v0 = vals[i + (m + 1) * j];
            Vec2 p0{sl.bounds.lo.x + i * dx, sl.bounds.lo.y + j * dy};
            if (i < m) {
                double v1 = vals[i + 1 + (m + 1) * j];
                if ((v0 < 0.0) != (v1 < 0.0))
                    bisect(p0, {p0.x + dx, p0.y}, v0);
            }
            if (j < m) {
                double v1 = vals[i + (m + 1) * (j + 1)];
                if ((v0 < 0.0) != (v1 < 0.0))
                    bisect(p0, {p0.x, p0.y + dy}, v0);
            }
        }
    }
    return pts;
}

} // namespace

std::vector<BoundaryPoint> Domain::sampleBoundary(int count) const {
    count = std::max(count, 100);
    std::vector<BoundaryPoint> pts;
    if (auto* dk = asDisk()) {
        pts.reserve(count);
        for (int k = 0; k < count; ++k) {
            double th = 2.0 * M_PI * k / count;
            Vec2 n{std::cos(th), std::sin(th)};
            pts.push_back({dk->center + n * dk->radius, n});
        }
        return pts;
    }
    if (auto* bx = asBox()) {
        const Rect& r = bx->rect;
        int perEdge = (count + 3) / 4;
        pts.reserve(static_cast<std::size_t>(perEdge) * 4);
        for (int k = 0; k < perEdge; ++k) {
            double s = (k + 0.5) / perEdge;
            pts.push_back({{r.lo.x + s * r.width(), r.lo.y}, {0.0, -1.0}});
            pts.push_back({{r.lo.x + s * r.width(), r.hi.y}, {0.0, 1.0}});
            pts.push_back({{r.lo.x, r.lo.y + s * r.height()}, {-1.0, 0.0}});
            pts.push_back({{r.hi.x, r.lo.y + s * r.height()}, {1.0, 0.0}});
        }
        return pts;
    }
    auto* sl = asSublevel();
    pts = sampleSublevelBoundary(*sl, count);
    int m = 4;
    while (static_cast<int>(pts.size()) < count && m <= 64) {
        // Lattice too coarse for the requested sample count; refine.
        pts = sampleSublevelBoundary(
            Sublevel{sl->H, sl->level, sl->bounds}, count * m);
        m *= 4;
    }
    if (static_cast<int>(pts.size()) < 3)
        throw NumericalError("sublevel boundary not found inside the bounding rectangle");
    return pts;
}

Grid build_grid(const Domain& domain, int n) {
    if (n < 8)
        throw InvalidArgumentError("grid resolution must be at least 8");
    Rect bb = domain.boundingBox();
    Grid g;
    g.n1 = n;
    g.n2 = n;
    g.h1 = bb.width() / n;
    g.h2 = bb.height() / n;
    g.origin = bb.lo;
    g.inside.assign(static_cast<std::size_t>(n) * n, 0);

    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            if (domain.contains(g.cellCenter(i, j)))
                g.inside[g.flat(i, j)] = 1;

    // Drop cells with no interior neighbour, then keep the largest connected
    // component so the assembled operator is irreducible.
    auto neighbourCount = [&](int i, int j) {
        int cnt = 0;
        if (i > 0 && g.inside[g.flat(i - 1, j)]) ++cnt;
        if (i + 1 < n && g.inside[g.flat(i + 1, j)]) ++cnt;
        if (j > 0 && g.inside[g.flat(i, j - 1)]) ++cnt;
        if (j + 1 < n && g.inside[g.flat(i, j + 1)]) ++cnt;
        return cnt;
    };
    bool changed = true;
    while (changed) {
        changed = false;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                if (g.inside[g.flat(i, j)] && neighbourCount(i, j) == 0) {
                    g.inside[g.flat(i, j)] = 0;
                    changed = true;
                }
    }

    std::vector<int> comp(static_cast<std::size_t>(n) * n, -1);
    int nComp = 0;
    std::vector<int> compSize;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            int c0 = g.flat(i, j);
            if (!g.inside[c0] || comp[c0] >= 0)
                continue;
            int size = 0;
            std::queue<int> q;
            q.push(c0);
            comp[c0] = nComp;
            while (!q.empty()) {
                int c = q.front();
                q.pop();
                ++size;
                int ci = c % n, cj = c / n;
                int nb[4] = {ci > 0 ? g.flat(ci - 1, cj) : -1,
                             ci + 1 < n ? g.flat(ci + 1, cj) : -1,
                             cj > 0 ? g.flat(ci, cj - 1) : -1,
                             cj + 1 < n ? g.flat(ci, cj + 1) : -1};
                for (int b : nb)
                    if (b >= 0 && g.inside[b] && comp[b] < 0) {
                        comp[b] = nComp;
                        q.push(b);
                    }
            }
            compSize.push_back(size);
            ++nComp;
        }
    }
    if (nComp > 1) {
        int keep = static_cast<int>(std::max_element(compSize.begin(), compSize.end()) -
                                    compSize.begin());
        for (std::size_t c = 0; c < g.inside.size(); ++c)
            if (g.inside[c] && comp[c] != keep)
                g.inside[c] = 0;
    }

    g.unknownIndex.assign(static_cast<std::size_t>(n) * n, -1);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            if (g.inside[g.flat(i, j)]) {
                g.unknownIndex[g.flat(i, j)] = g.unknownCount();
                g.cellOfUnknown.push_back(g.flat(i, j));
            }
    if (g.unknownCount() < 16)
        throw NumericalError("degenerate grid: fewer than 16 interior cells");

    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            int c = g.flat(i, j);
            if (!g.inside[c])
                continue;
            Vec2 cc = g.cellCenter(i, j);
            auto outside = [&](int ii, int jj) {
                return ii < 0 || ii >= n || jj < 0 || jj >= n || !g.inside[g.flat(ii, jj)];
            };
            if (outside(i - 1, j))
                g.boundaryFaces.push_back({c, 0, -1, {cc.x - 0.5 * g.h1, cc.y}, {-1.0, 0.0}});
            if (outside(i + 1, j))
                g.boundaryFaces.push_back({c, 0, +1, {cc.x + 0.5 * g.h1, cc.y}, {1.0, 0.0}});
            if (outside(i, j - 1))
                g.boundaryFaces.push_back({c, 1, -1, {cc.x, cc.y - 0.5 * g.h2}, {0.0, -1.0}});
            if (outside(i, j + 1))
                g.boundaryFaces.push_back({c, 1, +1, {cc.x, cc.y + 0.5 * g.h2}, {0.0, 1.0}});
        }
    }
    return g;
}

InflowReport check_inflow(const Domain& domain, const PlanarField& b, int samples) {
    auto pts = domain.sampleBoundary(std::max(samples, 100));
    InflowReport rep;
    rep.samples = static_cast<int>(pts.size());
    bool first = true;
    for (const auto& bp : pts) {
        double d = b(bp.point).dot(bp.outwardNormal);
        if (first || d > rep.maxNormalComponent) {
            rep.maxNormalComponent = d;
            rep.worstPoint = bp.point;
        }
        if (first || d < rep.minNormalComponent)
            rep.minNormalComponent = d;
        first = false;
    }
    rep.satisfied = rep.maxNormalComponent < 0.0;
    return rep;
}

} // namespace driftlim
