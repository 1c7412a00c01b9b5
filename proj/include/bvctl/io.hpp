#pragma once

#include "bvctl/boundary.hpp"
#include "bvctl/model.hpp"
#include "bvctl/pde.hpp"
#include "bvctl/simulator.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bvctl {

std::string tool_version();

struct SolverSection {
    double y_lo = -20.0;
    double y_hi = 20.0;
    int ny = 401;
    double tol = 1e-8;
    int max_iter = 200;

    SolverOptions options() const { return {tol, max_iter, 0.5}; }
};

struct PdeSection {
    Grid2D grid{-3.0, 3.0, 601, -20.0, 20.0, 401};
    double tol = 1e-11;
    double omega = 1.9;
    long max_sweeps = 400000;

    PdeOptions options() const { return {tol, max_sweeps, omega}; }
};

/// Everything one config file drives. Construct through parse_config or
/// load_config; the defaults are the symmetric quadratic model.
struct RunConfig {
    ModelParams model{-1.0, 1.0, 1.0, 0.5, 1.0, 1.0};
    CostSpec cost = CostSpec::quadratic(0.0);
    SolverSection solver;
    PdeSection pde;
    SimConfig sim;
    std::string output_dir = "out";

    /// Throws ValidationError naming the first offending key.
    void validate() const;
    nlohmann::json to_json() const;
    /// FNV-1a (64 bit) of the canonical JSON dump, as 16 hex digits.
    std::string hash() const;
};

/// INI text: model keys at top level, sections [cost], [solver], [pde], [sim], [output].
/// Unknown keys are rejected.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

std::string fnv1a_hex(const std::string& data);

/// Headered delimited numeric table:
///   # config_hash=<hex>
///   # tool_version=<v>
///   col0,col1,...
///   rows with 12 significant digits
struct CurveFile {
    std::string config_hash;
    std::string version;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;  // one vector per column

    const std::vector<double>& column(const std::string& name) const;
};

void write_curve(const std::filesystem::path& path, const CurveFile& curve);
CurveFile read_curve(const std::filesystem::path& path);

CurveFile boundary_curve(const BoundaryPair& c, const std::string& hash);
CurveFile policy_curve_phi(const PolicyBoundaries& p, const std::string& hash);
CurveFile policy_curve_pi(const PolicyBoundaries& p, const std::string& hash);

/// Boundaries back from a y,c_plus,c_minus file (metadata fields left at defaults).
BoundaryPair boundary_from_curve(const CurveFile& f);
/// Policy back from a phi,b_plus,b_minus file.
PolicyBoundaries policy_from_curve(const CurveFile& f);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace bvctl
