#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "driftlim/dynamics.hpp"
#include "driftlim/field.hpp"
#include "driftlim/geometry.hpp"
#include "driftlim/limits.hpp"
#include "driftlim/pde.hpp"

namespace driftlim {

class ConfigError : public InvalidArgumentError {
public:
    explicit ConfigError(const std::string& what) : InvalidArgumentError(what) {}
};

/// Everything one command run needs, decoded from a JSON config document.
struct RunConfig {
    Domain domain = Domain::disk({0.0, 0.0}, 1.0);
    PlanarField b;
    ScalarField c;
    std::string fieldLabel;
    std::string cLabel;
    std::vector<double> driftRates;
    int n = 257;
    Scheme scheme = Scheme::ExponentialFitting;
    BoundarySpec bc = BoundarySpec::neumann();
    double tol = 0.07;        // sweep verdict bound on the final gap
    double solverTol = 1e-8;  // eigensolver tolerance
    int jobs = 1;
    std::filesystem::path outDir = ".";
    std::vector<DegenerateRegion> regions;
    // Analytic limit for flows whose attractor sits on the domain boundary,
    // outside what the component classifier supports.
    std::optional<double> knownLimit;
};

RunConfig parse_config(const std::string& jsonText);
RunConfig load_config(const std::filesystem::path& file);

struct SweepRow {
    double driftRate = 0.0;
    double lambda = 0.0;
    double residual = 0.0;
    int iters = 0;
    double gap = 0.0;
    bool failed = false;
    std::string error;
};

struct SweepOutcome {
    double predicted = 0.0;
    std::vector<SweepRow> rows;
    int rowsFailed = 0;
    bool gapsNonIncreasing = false; // over the last half of the list
    bool finalGapWithinTol = false;
    bool pass = false;
};

/// Eigenvalue sweep over cfg.driftRates against a fixed predicted value;
/// rows keep their input order, failures are recorded in place.
SweepOutcome run_sweep(const RunConfig& cfg, double predicted);

/// Commands. Each returns a process exit code: 0 pass, 2 numerical failure,
/// 3 unsupported topology, 4 config error.
int cmd_analyze(const RunConfig& cfg);
int cmd_sweep(const RunConfig& cfg);
int cmd_reduce(const RunConfig& cfg);
int cmd_degenerate(const RunConfig& cfg);
int cmd_report(const RunConfig& cfg);

/// Argument parsing plus dispatch; the entry point of the binary.
int run_cli(int argc, char** argv);

} // namespace driftlim
