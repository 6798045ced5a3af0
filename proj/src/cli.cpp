#include "driftlim/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <thread>
#include <variant>

#include <CLI11.hpp>
#include <json.hpp>

namespace driftlim {

namespace {

using json = nlohmann::ordered_json;

std::string fmtShort(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string fmtFull(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Config decoding

Vec2 vec2At(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2)
        throw ConfigError(std::string(key) + " must be an [x, y] pair");
    return {j[key][0].get<double>(), j[key][1].get<double>()};
}

Expr parseExprOrThrow(const std::string& text, const std::string& what) {
    try {
        return parse(text);
    } catch (const ParseError& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

Domain parseDomain(const json& j) {
    if (!j.is_object() || !j.contains("type"))
        throw ConfigError("domain needs a \"type\" key");
    std::string type = j["type"].get<std::string>();
    if (type == "disk")
        return Domain::disk(vec2At(j, "center"), j.at("radius").get<double>());
    if (type == "box")
        return Domain::rect(vec2At(j, "lo"), vec2At(j, "hi"));
    if (type == "sublevel") {
        Expr H = parseExprOrThrow(j.at("H").get<std::string>(), "domain H");
        const json& bj = j.at("bounds");
        Rect bounds{vec2At(bj, "lo"), vec2At(bj, "hi")};
        return Domain::sublevel(std::move(H), j.at("level").get<double>(), bounds);
    }
    throw ConfigError("unknown domain type \"" + type + "\"");
}

DegenerateRegion parseRegion(const json& j) {
    DegenerateRegion r;
    r.region = parseDomain(j.at("region"));
    std::string tag = j.at("case").get<std::string>();
    if (tag == "N") {
        r.caseTag = DegenerateCase::Sink;
    } else if (tag == "D") {
        r.caseTag = DegenerateCase::Source;
    } else if (tag == "DN") {
        r.caseTag = DegenerateCase::Mixed;
        std::vector<std::pair<double, double>> sectors;
        for (const json& s : j.at("dirichlet_sectors")) {
            if (!s.is_array() || s.size() != 2)
                throw ConfigError("dirichlet_sectors entries must be [from, to] angle pairs");
            sectors.emplace_back(s[0].get<double>(), s[1].get<double>());
        }
        if (sectors.empty())
            throw ConfigError("case DN needs at least one dirichlet sector");
        Rect bb = r.region.boundingBox();
        Vec2 center = (bb.lo + bb.hi) * 0.5;
        r.dirichletFace = [center, sectors](const GridFace& f) {
            const double twoPi = 2.0 * std::numbers::pi;
            double ang = std::atan2(f.center.y - center.y, f.center.x - center.x);
            if (ang < 0.0)
                ang += twoPi;
            for (auto [a0, a1] : sectors) {
                a0 = std::fmod(std::fmod(a0, twoPi) + twoPi, twoPi);
                a1 = std::fmod(std::fmod(a1, twoPi) + twoPi, twoPi);
                bool inside = a0 <= a1 ? (ang >= a0 && ang <= a1) : (ang >= a0 || ang <= a1);
                if (inside)
                    return true;
            }
            return false;
        };
    } else {
        throw ConfigError("degenerate case must be \"N\", \"D\" or \"DN\"");
    }
    return r;
}

} // namespace

RunConfig parse_config(const std::string& jsonText) {
    json j;
    try {
        j = json::parse(jsonText);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    try {
        RunConfig cfg;

        if (!j.contains("c"))
            throw ConfigError("config needs a \"c\" expression");
        cfg.cLabel = j["c"].get<std::string>();
        cfg.c = ScalarField(parseExprOrThrow(cfg.cLabel, "c"));

        bool domainGiven = j.contains("domain");
        if (domainGiven)
            cfg.domain = parseDomain(j["domain"]);

        if (!j.contains("field"))
            throw ConfigError("config needs a \"field\" object");
        const json& fj = j["field"];
        if (fj.contains("builtin")) {
            std::string name = fj["builtin"].get<std::string>();
            if (name == "rotation") {
                cfg.b = rotationField();
                cfg.fieldLabel = "rotation";
            } else if (name == "corollary") {
                double alpha = fj.at("alpha").get<double>();
                cfg.b = doubleWellField(alpha);
                cfg.fieldLabel = "corollary(" + fmtShort(alpha) + ")";
                if (!domainGiven)
                    cfg.domain = Domain::sublevel(doubleWellEnergy(), 1.0,
                                                  Rect{{-2.0, -1.6}, {2.0, 1.6}});
            } else if (name == "prop12") {
                double alpha = fj.at("alpha").get<double>();
                cfg.b = windedRotationField(alpha);
                cfg.fieldLabel = "prop12(" + fmtShort(alpha) + ")";
                if (alpha >= 0.5) {
                    // The single rest point sits on the unit circle; the flow
                    // pushes everything onto it, so the limit is just c there.
                    Vec2 rest{-std::sqrt(2.0 * alpha - 1.0) / alpha, -(1.0 - alpha) / alpha};
                    cfg.knownLimit = cfg.c(rest);
                }
            } else {
                throw ConfigError("unknown builtin field \"" + name + "\"");
            }
        } else {
            if (!fj.contains("b1") || !fj.contains("b2"))
                throw ConfigError("field needs either a builtin name or b1/b2 expressions");
            std::string s1 = fj["b1"].get<std::string>(), s2 = fj["b2"].get<std::string>();
            cfg.b = PlanarField(parseExprOrThrow(s1, "b1"), parseExprOrThrow(s2, "b2"));
            cfg.fieldLabel = "(" + s1 + ", " + s2 + ")";
        }

        if (j.contains("A")) {
            for (const json& a : j["A"])
                cfg.driftRates.push_back(a.get<double>());
            for (std::size_t i = 0; i < cfg.driftRates.size(); ++i) {
                if (cfg.driftRates[i] <= 0.0)
                    throw ConfigError("A values must be positive");
                if (i > 0 && cfg.driftRates[i] <= cfg.driftRates[i - 1])
                    throw ConfigError("A values must be strictly increasing");
            }
        }

        cfg.n = j.value("n", 257);
        if (cfg.n < 16 || cfg.n > 2048)
            throw ConfigError("n must lie in [16, 2048]");

        std::string scheme = j.value("scheme", std::string("exponential_fitting"));
        if (scheme == "exponential_fitting")
            cfg.scheme = Scheme::ExponentialFitting;
        else if (scheme == "upwind")
            cfg.scheme = Scheme::Upwind;
        else
            throw ConfigError("scheme must be \"exponential_fitting\" or \"upwind\"");

        std::string bc = j.value("bc", std::string("neumann"));
        if (bc == "neumann")
            cfg.bc = BoundarySpec::neumann();
        else if (bc == "dirichlet")
            cfg.bc = BoundarySpec::dirichlet();
        else
            throw ConfigError("bc must be \"neumann\" or \"dirichlet\"");

        cfg.tol = j.value("tol", 0.07);
        if (!(cfg.tol > 0.0))
            throw ConfigError("tol must be positive");
        cfg.solverTol = j.value("solver_tol", 1e-8);
        if (!(cfg.solverTol > 0.0))
            throw ConfigError("solver_tol must be positive");
        cfg.jobs = j.value("jobs", 1);
        if (cfg.jobs < 1)
            throw ConfigError("jobs must be at least 1");
        cfg.outDir = j.value("out", std::string("."));

        if (j.contains("degenerate_regions"))
            for (const json& r : j["degenerate_regions"])
                cfg.regions.push_back(parseRegion(r));

        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in)
        throw ConfigError("cannot open config file " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Report pieces

namespace {

json vecJson(Vec2 v) { return json::array({v.x, v.y}); }

const char* kindName(FixedPointKind k) {
    switch (k) {
    case FixedPointKind::StableNode: return "StableNode";
    case FixedPointKind::StableSpiral: return "StableSpiral";
    case FixedPointKind::UnstableNode: return "UnstableNode";
    case FixedPointKind::UnstableSpiral: return "UnstableSpiral";
    case FixedPointKind::Saddle: return "Saddle";
    case FixedPointKind::Center: return "Center";
    case FixedPointKind::Degenerate: return "Degenerate";
    }
    return "Degenerate";
}

const char* caseName(LimitCase k) {
    switch (k) {
    case LimitCase::FixedPointValue: return "FixedPointValue";
    case LimitCase::OrbitAverage: return "OrbitAverage";
    case LimitCase::SaddleValue: return "SaddleValue";
    case LimitCase::FamilyRayleigh: return "FamilyRayleigh";
    case LimitCase::DegenerateN: return "DegenerateN";
    case LimitCase::DegenerateD: return "DegenerateD";
    case LimitCase::DegenerateDN: return "DegenerateDN";
    case LimitCase::Unstable: return "Unstable";
    }
    return "Unstable";
}

const char* stabilityName(OrbitStability s) {
    switch (s) {
    case OrbitStability::Stable: return "Stable";
    case OrbitStability::Unstable: return "Unstable";
    case OrbitStability::SemiStable: return "SemiStable";
    }
    return "Stable";
}

const char* endName(ClosedOrbitFamily::EndKind e) {
    switch (e) {
    case ClosedOrbitFamily::EndKind::CenterPoint: return "CenterPoint";
    case ClosedOrbitFamily::EndKind::BoundaryCycle: return "BoundaryCycle";
    case ClosedOrbitFamily::EndKind::DomainBoundary: return "DomainBoundary";
    }
    return "CenterPoint";
}

const char* degenerateCaseName(DegenerateCase c) {
    switch (c) {
    case DegenerateCase::Sink: return "N";
    case DegenerateCase::Source: return "D";
    case DegenerateCase::Mixed: return "DN";
    }
    return "N";
}

json predictedJson(const PredictedLimit& p) {
    json j;
    if (p.finite())
        j["value"] = p.value;
    else
        j["value"] = nullptr;
    j["case"] = caseName(p.caseTag);
    j["cross_check_error"] = p.crossCheckError;
    j["solver_residual"] = p.solverResidual;
    if (!p.note.empty())
        j["note"] = p.note;
    return j;
}

std::vector<Vec2> orbitPolyline(const PeriodicOrbit& orbit, int count) {
    std::vector<Vec2> pts(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        pts[static_cast<std::size_t>(i)] = orbit.path.sample(orbit.period * i / count);
    return pts;
}

json componentJson(const LimitComponent& k) {
    return std::visit(
        [](const auto& piece) -> json {
            using T = std::decay_t<decltype(piece)>;
            json j;
            if constexpr (std::is_same_v<T, FixedPointComponent>) {
                j["type"] = "fixed_point";
                j["kind"] = kindName(piece.info.kind);
                j["location"] = vecJson(piece.info.location);
                j["eigenvalues"] = json::array(
                    {json::array({piece.info.eig1.real(), piece.info.eig1.imag()}),
                     json::array({piece.info.eig2.real(), piece.info.eig2.imag()})});
                j["attracting"] = piece.effectivelyStable();
                if (piece.stableByProbing)
                    j["stable_by_probing"] = *piece.stableByProbing;
            } else if constexpr (std::is_same_v<T, PeriodicOrbit>) {
                j["type"] = "limit_cycle";
                j["period"] = piece.period;
                j["stability"] = stabilityName(piece.stability);
                j["multiplier_slopes"] =
                    json::array({piece.innerMultiplierSlope, piece.outerMultiplierSlope});
                json pts = json::array();
                for (Vec2 p : orbitPolyline(piece, 256))
                    pts.push_back(vecJson(p));
                j["samples"] = pts;
            } else if constexpr (std::is_same_v<T, HomoclinicStructure>) {
                j["type"] = "homoclinic_union";
                j["saddle"] = vecJson(piece.saddle);
                j["loops"] = piece.loops.size();
                j["stable_outside"] = piece.stableOutside;
                json si = json::array();
                for (bool s : piece.stableInside)
                    si.push_back(s);
                j["stable_inside"] = si;
            } else if constexpr (std::is_same_v<T, ClosedOrbitFamily>) {
                j["type"] = "orbit_family";
                j["ray_origin"] = vecJson(piece.rayOrigin);
                j["ray_dir"] = vecJson(piece.rayDir);
                j["ell"] = json::array({piece.ell0, piece.ell1});
                j["inner_end"] = endName(piece.innerEnd);
                j["outer_end"] = endName(piece.outerEnd);
                j["inner_unstable"] = piece.innerUnstable;
                j["outer_unstable"] = piece.outerUnstable;
            } else {
                j["type"] = "degenerate_region";
                j["case"] = degenerateCaseName(piece.caseTag);
            }
            return j;
        },
        k.kind);
}

json configJson(const RunConfig& cfg) {
    json j;
    j["field"] = cfg.fieldLabel;
    j["c"] = cfg.cLabel;
    j["n"] = cfg.n;
    j["scheme"] = cfg.scheme == Scheme::ExponentialFitting ? "exponential_fitting" : "upwind";
    j["A"] = cfg.driftRates;
    j["tol"] = cfg.tol;
    return j;
}

void writeTextFile(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw NumericalError("cannot write " + path.string());
    out << text;
}

void writeJsonFile(const std::filesystem::path& path, const json& j) {
    writeTextFile(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Phase portrait

class SvgCanvas {
public:
    SvgCanvas(Rect world) {
        double w = world.width(), h = world.height();
        double pad = 0.06 * std::max(w, h);
        world.lo -= Vec2{pad, pad};
        world.hi += Vec2{pad, pad};
        center_ = (world.lo + world.hi) * 0.5;
        scale_ = 760.0 / std::max(world.width(), world.height());
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" "
                "viewBox=\"0 0 800 800\">\n";
        out_ << "<rect width=\"800\" height=\"800\" fill=\"#ffffff\"/>\n";
    }

    Vec2 toScreen(Vec2 p) const {
        return {400.0 + scale_ * (p.x - center_.x), 400.0 - scale_ * (p.y - center_.y)};
    }

    void polyline(const std::vector<Vec2>& pts, const char* color, double width, bool closed) {
        if (pts.size() < 2)
            return;
        out_ << "<path d=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            Vec2 s = toScreen(pts[i]);
            char buf[64];
            std::snprintf(buf, sizeof buf, "%c%.2f %.2f", i == 0 ? 'M' : 'L', s.x, s.y);
            out_ << buf;
        }
        if (closed)
            out_ << "Z";
        out_ << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
             << "\"/>\n";
    }

    void dot(Vec2 p, double rpx, const char* color) {
        Vec2 s = toScreen(p);
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.1f\" fill=\"%s\"/>\n", s.x, s.y,
                      rpx, color);
        out_ << buf;
    }

    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    std::ostringstream out_;
    Vec2 center_;
    double scale_ = 1.0;
};

const char* fixedPointColor(const FixedPointComponent& fp) {
    if (fp.effectivelyStable())
        return "#2a9d5c";
    switch (fp.info.kind) {
    case FixedPointKind::Saddle: return "#e8872a";
    case FixedPointKind::Center:
    case FixedPointKind::Degenerate: return "#3566c4";
    default: return "#c43535";
    }
}

std::vector<Vec2> domainOutline(const Domain& d, int count) {
    std::vector<Vec2> pts;
    for (const BoundaryPoint& bp : d.sampleBoundary(count))
        pts.push_back(bp.point);
    return pts;
}

void writePhaseSvg(const std::filesystem::path& path, const RunConfig& cfg,
                   const ComponentSet& set) {
    SvgCanvas canvas(cfg.domain.boundingBox());
    canvas.polyline(domainOutline(cfg.domain, 512), "#888888", 1.5, true);

    for (const auto& k : set.components) {
        if (const auto* reg = std::get_if<DegenerateRegion>(&k.kind))
            canvas.polyline(domainOutline(reg->region, 256), "#a06fd6", 1.0, true);
    }
    for (const auto& k : set.components) {
        if (const auto* fam = std::get_if<ClosedOrbitFamily>(&k.kind)) {
            for (int s = 1; s <= 6; ++s) {
                double ell = fam->ell1 * s / 6.5;
                try {
                    canvas.polyline(orbitPolyline(fam->orbitAt(ell), 200), "#9bbcf0", 0.8,
                                    true);
                } catch (const NumericalError&) {
                    break;
                }
            }
        }
    }
    for (const auto& k : set.components) {
        if (const auto* hc = std::get_if<HomoclinicStructure>(&k.kind)) {
            for (const Trajectory& loop : hc->loops)
                canvas.polyline(loop.states, "#e8872a", 1.6, false);
            canvas.dot(hc->saddle, 5.0, "#e8872a");
        }
    }
    for (const auto& k : set.components) {
        if (const auto* orbit = std::get_if<PeriodicOrbit>(&k.kind)) {
            const char* color =
                orbit->stability == OrbitStability::Stable ? "#2a9d5c" : "#c43535";
            canvas.polyline(orbitPolyline(*orbit, 300), color, 2.0, true);
        }
    }
    for (const auto& k : set.components) {
        if (const auto* fp = std::get_if<FixedPointComponent>(&k.kind))
            canvas.dot(fp->info.location, 5.0, fixedPointColor(*fp));
    }
    writeTextFile(path, canvas.finish());
}

// ---------------------------------------------------------------------------
// Shared command plumbing

void ensureOutDir(const RunConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.outDir, ec);
    if (ec)
        throw ConfigError("cannot create output directory " + cfg.outDir.string());
}

PredictedLimit resolvePredicted(const RunConfig& cfg, const ComponentSet& set) {
    if (cfg.knownLimit) {
        PredictedLimit p;
        p.value = *cfg.knownLimit;
        p.caseTag = LimitCase::FixedPointValue;
        p.note = "analytic limit at a boundary rest point";
        return p;
    }
    return predicted_limit(set.components, cfg.c, cfg.b);
}

ComponentSet assembleFromConfig(const RunConfig& cfg) {
    AssembleOptions opts;
    opts.declaredRegions = cfg.regions;
    return assemble_components(cfg.b, cfg.domain, opts);
}

void requireSweepList(const RunConfig& cfg) {
    if (cfg.driftRates.empty())
        throw ConfigError("config needs a nonempty \"A\" list for this command");
}

json tableJson(const SweepOutcome& sw) {
    json rows = json::array();
    for (const SweepRow& r : sw.rows) {
        json row;
        row["A"] = r.driftRate;
        if (r.failed) {
            row["error"] = r.error;
        } else {
            row["lambda"] = r.lambda;
            row["residual"] = r.residual;
            row["iters"] = r.iters;
            row["gap"] = r.gap;
        }
        rows.push_back(row);
    }
    return rows;
}

json verdictsJson(const SweepOutcome& sw) {
    json v;
    v["rows_failed"] = sw.rowsFailed;
    v["gaps_non_increasing"] = sw.gapsNonIncreasing;
    double finalGap = std::numeric_limits<double>::quiet_NaN();
    for (auto it = sw.rows.rbegin(); it != sw.rows.rend(); ++it)
        if (!it->failed) {
            finalGap = it->gap;
            break;
        }
    if (std::isnan(finalGap))
        v["final_gap"] = nullptr;
    else
        v["final_gap"] = finalGap;
    v["final_gap_within_tol"] = sw.finalGapWithinTol;
    v["pass"] = sw.pass;
    return v;
}

void writeSweepCsv(const std::filesystem::path& path, const SweepOutcome& sw) {
    std::ostringstream out;
    out << "A,lambda,residual,iters,gap\n";
    for (const SweepRow& r : sw.rows) {
        if (r.failed)
            out << fmtFull(r.driftRate) << ",nan,nan,0,nan\n";
        else
            out << fmtFull(r.driftRate) << ',' << fmtFull(r.lambda) << ','
                << fmtFull(r.residual) << ',' << r.iters << ',' << fmtFull(r.gap) << '\n';
    }
    writeTextFile(path, out.str());
}

} // namespace

SweepOutcome run_sweep(const RunConfig& cfg, double predicted) {
    Grid grid = build_grid(cfg.domain, cfg.n);

    SweepOutcome out;
    out.predicted = predicted;
    out.rows.resize(cfg.driftRates.size());

    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= out.rows.size())
                return;
            SweepRow& row = out.rows[i];
            row.driftRate = cfg.driftRates[i];
            try {
                EigenOptions eo;
                eo.tol = cfg.solverTol;
                eo.bandBytes = (std::size_t(3) << 30) / static_cast<unsigned>(std::max(1, cfg.jobs));
                EigenResult er = principal_eigenvalue(grid, cfg.b, row.driftRate, cfg.c,
                                                      cfg.bc, cfg.scheme, eo);
                row.lambda = er.lambda;
                row.residual = er.residualNorm;
                row.iters = er.iterations;
                row.gap = std::abs(er.lambda - predicted);
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
        }
    };

    int jobs = std::clamp(cfg.jobs, 1, static_cast<int>(out.rows.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }

    for (const SweepRow& r : out.rows)
        if (r.failed)
            ++out.rowsFailed;

    // Verdicts over the successfully solved rows: the gap trend is judged on
    // the last half of the list, the tolerance on the final row.
    out.gapsNonIncreasing = true;
    std::size_t half = out.rows.size() / 2;
    double prevGap = std::numeric_limits<double>::infinity();
    for (std::size_t i = half; i < out.rows.size(); ++i) {
        if (out.rows[i].failed) {
            out.gapsNonIncreasing = false;
            break;
        }
        if (out.rows[i].gap > prevGap + 1e-12)
            out.gapsNonIncreasing = false;
        prevGap = out.rows[i].gap;
    }
    out.finalGapWithinTol = !out.rows.empty() && !out.rows.back().failed &&
                            out.rows.back().gap <= cfg.tol;
    bool fewFailures = 4 * out.rowsFailed <= static_cast<int>(out.rows.size());
    out.pass = out.gapsNonIncreasing && out.finalGapWithinTol && fewFailures;
    return out;
}

namespace {

json componentsWithLimits(const RunConfig& cfg, const ComponentSet& set) {
    json comps = json::array();
    for (const auto& k : set.components) {
        json cj = componentJson(k);
        try {
            cj["limit"] = predictedJson(component_limit(cfg.c, cfg.b, k));
        } catch (const std::exception& e) {
            cj["limit"] = json{{"error", e.what()}};
        }
        comps.push_back(cj);
    }
    return comps;
}

} // namespace

int cmd_analyze(const RunConfig& cfg) {
    ensureOutDir(cfg);
    ComponentSet set = assembleFromConfig(cfg);
    PredictedLimit predicted = resolvePredicted(cfg, set);

    json doc;
    doc["config"] = configJson(cfg);
    doc["components"] = componentsWithLimits(cfg, set);
    doc["warnings"] = set.warnings;
    doc["predicted"] = predictedJson(predicted);
    writeJsonFile(cfg.outDir / "components.json", doc);
    writePhaseSvg(cfg.outDir / "phase.svg", cfg, set);

    std::cout << "analyze: " << set.components.size() << " component(s), predicted ";
    if (predicted.finite())
        std::cout << fmtShort(predicted.value);
    else
        std::cout << "+inf";
    std::cout << " (" << caseName(predicted.caseTag) << ")\n";
    return 0;
}

int cmd_sweep(const RunConfig& cfg) {
    requireSweepList(cfg);
    ensureOutDir(cfg);
    ComponentSet set = assembleFromConfig(cfg);
    PredictedLimit predicted = resolvePredicted(cfg, set);
    if (!predicted.finite())
        throw NumericalError("predicted limit is not finite; sweep gaps are undefined");

    SweepOutcome sw = run_sweep(cfg, predicted.value);
    writeSweepCsv(cfg.outDir / "sweep.csv", sw);

    json doc;
    doc["config"] = configJson(cfg);
    doc["predicted"] = predictedJson(predicted);
    doc["table"] = tableJson(sw);
    doc["verdicts"] = verdictsJson(sw);
    writeJsonFile(cfg.outDir / "report.json", doc);

    std::cout << "sweep: predicted " << fmtShort(predicted.value) << ", "
              << (sw.pass ? "pass" : "fail") << "\n";
    return sw.pass ? 0 : 2;
}

namespace {

// Direct 2D check of the reduced eigenvalue: minimize the Rayleigh quotient
// of the driftless operator over grid functions that are constant on orbit
// bands. Bands come from nearest-station binning, so the check shares no
// quadrature with coarea_weights.
json reduce2dCrossCheck(const RunConfig& cfg, const ClosedOrbitFamily& fam, double lambda1d) {
    json j;
    if (fam.innerUnstable || fam.outerUnstable) {
        j["skipped"] = "family has a Dirichlet end";
        return j;
    }

    const int bins = 64;
    const int loopSamples = 256;
    const bool centerIn = fam.innerEnd == ClosedOrbitFamily::EndKind::CenterPoint;
    const double lLo = centerIn ? 0.0 : fam.ell0;
    const double step = (fam.ell1 - lLo) / bins;

    std::vector<std::vector<Vec2>> loops(bins + 1);
    loops[0] = centerIn ? std::vector<Vec2>{fam.rayOrigin}
                        : std::vector<Vec2>();
    if (!centerIn)
        loops[0] = orbitPolyline(fam.orbitAt(lLo), loopSamples);
    for (int k = 1; k <= bins; ++k)
        loops[static_cast<std::size_t>(k)] =
            orbitPolyline(fam.orbitAt(lLo + step * k), loopSamples);

    auto loopDistance = [](Vec2 p, const std::vector<Vec2>& loop) {
        if (loop.size() == 1)
            return (p - loop.front()).norm();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < loop.size(); ++i) {
            Vec2 a = loop[i], b2 = loop[(i + 1) % loop.size()];
            Vec2 d = b2 - a;
            double len2 = d.normSq();
            double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
            best = std::min(best, (p - (a + d * t)).norm());
        }
        return best;
    };
    auto enclosed = [](Vec2 p, const std::vector<Vec2>& loop) {
        bool in = false;
        for (std::size_t i = 0, jw = loop.size() - 1; i < loop.size(); jw = i++) {
            Vec2 a = loop[i], b2 = loop[jw];
            if ((a.y > p.y) != (b2.y > p.y) &&
                p.x < (b2.x - a.x) * (p.y - a.y) / (b2.y - a.y) + a.x)
                in = !in;
        }
        return in;
    };

    Grid grid = build_grid(cfg.domain, cfg.n);
    PlanarField still([](Vec2) { return Vec2{0.0, 0.0}; }, [](Vec2) { return Mat2{}; });
    Discretization disc =
        assemble(grid, still, 0.0, cfg.c, BoundarySpec::neumann(), Scheme::ExponentialFitting);

    const int nUnk = grid.unknownCount();
    std::vector<int> bin(static_cast<std::size_t>(nUnk), -1);
    const auto& outer = loops[static_cast<std::size_t>(bins)];
    for (int i = 0; i < nUnk; ++i) {
        Vec2 p = grid.cellCenterFlat(grid.cellOfUnknown[static_cast<std::size_t>(i)]);
        if (!enclosed(p, outer))
            continue;
        if (!centerIn && enclosed(p, loops[0]))
            continue;
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int k = 0; k <= bins; ++k) {
            double dk = loopDistance(p, loops[static_cast<std::size_t>(k)]);
            if (dk < best) {
                best = dk;
                arg = k;
            }
        }
        bin[static_cast<std::size_t>(i)] = arg;
    }

    std::vector<double> mass(bins + 1, 0.0);
    std::vector<std::vector<double>> dense(bins + 1, std::vector<double>(bins + 1, 0.0));
    for (int i = 0; i < nUnk; ++i) {
        int bi = bin[static_cast<std::size_t>(i)];
        if (bi < 0)
            continue;
        mass[static_cast<std::size_t>(bi)] += 1.0;
        for (int p = disc.matrix.rowPtr[static_cast<std::size_t>(i)];
             p < disc.matrix.rowPtr[static_cast<std::size_t>(i) + 1]; ++p) {
            int bj = bin[static_cast<std::size_t>(disc.matrix.col[static_cast<std::size_t>(p)])];
            if (bj < 0)
                continue;
            dense[static_cast<std::size_t>(bi)][static_cast<std::size_t>(bj)] +=
                disc.matrix.val[static_cast<std::size_t>(p)];
        }
    }

    std::vector<int> keep;
    for (int k = 0; k <= bins; ++k)
        if (mass[static_cast<std::size_t>(k)] > 0.0)
            keep.push_back(k);
    if (keep.size() < 3) {
        j["skipped"] = "too few populated bins";
        return j;
    }
    std::vector<Triplet> trip;
    for (std::size_t r = 0; r < keep.size(); ++r)
        for (std::size_t s = 0; s < keep.size(); ++s) {
            double v = dense[static_cast<std::size_t>(keep[r])][static_cast<std::size_t>(keep[s])];
            if (v != 0.0)
                trip.push_back({static_cast<int>(r), static_cast<int>(s),
                                v / mass[static_cast<std::size_t>(keep[r])]});
        }
    CsrMatrix reduced = CsrMatrix::fromTriplets(static_cast<int>(keep.size()), std::move(trip));
    EigenOptions eo;
    eo.tol = 1e-10;
    EigenResult er = principal_eigenpair(reduced, eo);

    j["lambda_2d"] = er.lambda;
    j["lambda_1d"] = lambda1d;
    j["relative_difference"] =
        std::abs(er.lambda - lambda1d) / std::max(1.0, std::abs(lambda1d));
    j["bins"] = keep.size();
    return j;
}

} // namespace

int cmd_reduce(const RunConfig& cfg) {
    ensureOutDir(cfg);
    ComponentSet set = assembleFromConfig(cfg);
    const ClosedOrbitFamily* fam = nullptr;
    for (const auto& k : set.components)
        if (const auto* f = std::get_if<ClosedOrbitFamily>(&k.kind)) {
            fam = f;
            break;
        }
    if (!fam)
        throw NumericalError("no closed-orbit family found to reduce");

    const int stations = 256;
    CoareaWeights w = coarea_weights(cfg.c, cfg.b, *fam, stations);
    std::ostringstream csv;
    csv << "ell,kappa,mu,gamma\n";
    for (std::size_t i = 0; i < w.ell.size(); ++i)
        csv << fmtFull(w.ell[i]) << ',' << fmtFull(w.kappa[i]) << ',' << fmtFull(w.mu[i])
            << ',' << fmtFull(w.gamma[i]) << '\n';
    writeTextFile(cfg.outDir / "weights.csv", csv.str());

    PredictedLimit reduced = family_rayleigh(cfg.c, cfg.b, *fam, stations);

    json doc;
    doc["config"] = configJson(cfg);
    json fj = componentJson(LimitComponent{*fam});
    doc["family"] = fj;
    doc["reduced"] = predictedJson(reduced);
    if (cfg.n <= 129)
        doc["cross_check_2d"] = reduce2dCrossCheck(cfg, *fam, reduced.value);
    writeJsonFile(cfg.outDir / "report.json", doc);

    std::cout << "reduce: lambda " << fmtShort(reduced.value) << "\n";
    return 0;
}

int cmd_degenerate(const RunConfig& cfg) {
    if (cfg.regions.empty())
        throw ConfigError("degenerate command needs declared degenerate_regions");
    ensureOutDir(cfg);

    json doc;
    doc["config"] = configJson(cfg);
    json regs = json::array();
    for (const DegenerateRegion& r : cfg.regions) {
        PredictedLimit p = degenerate_value(cfg.c, r, std::min(cfg.n, 257));
        json rj;
        rj["case"] = degenerateCaseName(r.caseTag);
        rj["limit"] = predictedJson(p);
        regs.push_back(rj);
    }
    doc["regions"] = regs;

    bool pass = true;
    if (!cfg.driftRates.empty()) {
        ComponentSet set = assembleFromConfig(cfg);
        PredictedLimit predicted = resolvePredicted(cfg, set);
        if (!predicted.finite())
            throw NumericalError("predicted limit is not finite; sweep gaps are undefined");
        SweepOutcome sw = run_sweep(cfg, predicted.value);
        writeSweepCsv(cfg.outDir / "sweep.csv", sw);
        doc["predicted"] = predictedJson(predicted);
        doc["table"] = tableJson(sw);
        doc["verdicts"] = verdictsJson(sw);
        pass = sw.pass;
    }
    writeJsonFile(cfg.outDir / "report.json", doc);

    std::cout << "degenerate: " << cfg.regions.size() << " region(s), "
              << (pass ? "pass" : "fail") << "\n";
    return pass ? 0 : 2;
}

int cmd_report(const RunConfig& cfg) {
    requireSweepList(cfg);
    ensureOutDir(cfg);

    ComponentSet set = assembleFromConfig(cfg);
    PredictedLimit predicted = resolvePredicted(cfg, set);

    json doc;
    doc["config"] = configJson(cfg);
    doc["components"] = componentsWithLimits(cfg, set);
    doc["warnings"] = set.warnings;
    doc["predicted"] = predictedJson(predicted);

    bool pass = true;
    if (predicted.finite()) {
        SweepOutcome sw = run_sweep(cfg, predicted.value);
        writeSweepCsv(cfg.outDir / "sweep.csv", sw);
        doc["table"] = tableJson(sw);
        doc["verdicts"] = verdictsJson(sw);
        pass = sw.pass;
    } else {
        throw NumericalError("predicted limit is not finite; sweep gaps are undefined");
    }

    writeJsonFile(cfg.outDir / "components.json", doc);
    writeJsonFile(cfg.outDir / "report.json", doc);
    writePhaseSvg(cfg.outDir / "phase.svg", cfg, set);

    std::cout << "report: predicted " << fmtShort(predicted.value) << ", "
              << (pass ? "pass" : "fail") << "\n";
    return pass ? 0 : 2;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"large-drift principal eigenvalue analysis"};
    app.require_subcommand(1);

    std::string configPath, outDir;
    int jobs = 0;
    double tol = 0.0;
    bool tolSet = false;

    const std::pair<const char*, int (*)(const RunConfig&)> commands[] = {
        {"analyze", cmd_analyze},   {"sweep", cmd_sweep},   {"reduce", cmd_reduce},
        {"degenerate", cmd_degenerate}, {"report", cmd_report},
    };
    for (const auto& [name, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, "");
        sub->add_option("--config", configPath, "JSON config file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", outDir, "output directory override");
        sub->add_option("--jobs", jobs, "sweep worker count override");
        sub->add_option("--tol", tol, "verdict tolerance override")
            ->each([&tolSet](const std::string&) { tolSet = true; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 4;
    }

    try {
        RunConfig cfg = load_config(configPath);
        if (!outDir.empty())
            cfg.outDir = outDir;
        if (jobs > 0)
            cfg.jobs = jobs;
        if (tolSet) {
            if (!(tol > 0.0))
                throw ConfigError("--tol must be positive");
            cfg.tol = tol;
        }
        for (const auto& [name, fn] : commands)
            if (app.get_subcommand(name)->parsed())
                return fn(cfg);
        return 4;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 4;
    } catch (const InvalidArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 4;
    } catch (const UnsupportedTopologyError& e) {
        std::cerr << "unsupported topology: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace driftlim
