#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "driftlim/core.hpp"
#include "driftlim/expr.hpp"
#include "driftlim/field.hpp"

namespace driftlim {

struct Rect {
    Vec2 lo, hi;
    double width() const { return hi.x - lo.x; }
    double height() const { return hi.y - lo.y; }
};

struct BoundaryPoint {
    Vec2 point;
    Vec2 outwardNormal;
};

/// Planar computational domain: a disk, an axis-aligned rectangle, or an open
/// sublevel region {H < level} clipped to a caller-supplied bounding rectangle.
class Domain {
public:
    struct Disk {
        Vec2 center;
        double radius;
    };
    struct Box {
        Rect rect;
    };
    struct Sublevel {
        Expr H;
        double level;
        Rect bounds;
    };

    static Domain disk(Vec2 center, double radius);
    static Domain rect(Vec2 lo, Vec2 hi);
    static Domain sublevel(Expr H, double level, Rect bounds);

    /// Open-region membership test.
    bool contains(Vec2 p) const;
    Rect boundingBox() const;
    double diameter() const;

    /// Samples at least `count` boundary points with unit outward normals.
    /// Disk and rectangle normals are analytic; sublevel boundaries are
    /// located by sign change of H - level along lattice edges and carry
    /// grad H / |grad H| as the normal.
    std::vector<BoundaryPoint> sampleBoundary(int count) const;

    const Disk* asDisk() const { return std::get_if<Disk>(&shape_); }
    const Box* asBox() const { return std::get_if<Box>(&shape_); }
    const Sublevel* asSublevel() const { return std::get_if<Sublevel>(&shape_); }

private:
    std::variant<Disk, Box, Sublevel> shape_;
};

/// One exterior face of a masked cell. `axis` is 0 for faces orthogonal to
/// x1 and 1 for faces orthogonal to x2; `side` is -1 or +1 along that axis.
struct GridFace {
    int cell;    // flat cell index i + n1*j
    int axis;
    int side;
    Vec2 center; // face midpoint
    Vec2 normal; // outward unit normal (axis-aligned)
};

/// Cell-centred stair-step cover of a domain. Cells whose centres lie in the
/// domain are interior unknowns; everything else is masked out.
struct Grid {
    int n1 = 0, n2 = 0;
    double h1 = 0.0, h2 = 0.0;
    Vec2 origin; // lower-left corner of the bounding box
    std::vector<std::uint8_t> inside;  // n1*n2 flags
    std::vector<int> unknownIndex;     // flat cell -> unknown id, -1 if masked
    std::vector<int> cellOfUnknown;    // unknown id -> flat cell
    std::vector<GridFace> boundaryFaces;

    int unknownCount() const { return static_cast<int>(cellOfUnknown.size()); }
    int flat(int i, int j) const { return i + n1 * j; }
    Vec2 cellCenter(int i, int j) const {
        return {origin.x + (i + 0.5) * h1, origin.y + (j + 0.5) * h2};
    }
    Vec2 cellCenterFlat(int cell) const { return cellCenter(cell % n1, cell / n1); }
};

/// Builds an n-by-n stair-step grid over the domain's bounding box.
/// Throws InvalidArgumentError for n < 8 and NumericalError when fewer than
/// 16 interior cells survive masking. Masked cells that lose all interior
/// neighbours are pruned; only the largest connected component is kept.
Grid build_grid(const Domain& domain, int n);

struct InflowReport {
    bool satisfied = false;
    double maxNormalComponent = 0.0; // max over samples of b . n
    double minNormalComponent = 0.0;
    int samples = 0;
    Vec2 worstPoint;
};

/// Checks the strict inflow condition b . n < 0 on the sampled boundary.
InflowReport check_inflow(const Domain& domain, const PlanarField& b, int samples = 256);

} // namespace driftlim
