#pragma once

#include "bvctl/boundary.hpp"
#include "bvctl/model.hpp"

#include <cstdint>
#include <vector>

namespace bvctl {

/// Truncated (x, y) rectangle with uniform spacing; node (i, j) sits at
/// (x_lo + i dx, y_lo + j dy).
struct Grid2D {
    double x_lo, x_hi;
    int nx;
    double y_lo, y_hi;
    int ny;

    double dx() const noexcept { return (x_hi - x_lo) / (nx - 1); }
    double dy() const noexcept { return (y_hi - y_lo) / (ny - 1); }
    double x(int i) const noexcept { return i == nx - 1 ? x_hi : x_lo + i * dx(); }
    double y(int j) const noexcept { return j == ny - 1 ? y_hi : y_lo + j * dy(); }
    std::size_t index(int i, int j) const noexcept { return static_cast<std::size_t>(j) * nx + i; }

    /// Throws ValidationError unless the rectangle contains [x+* - 1, x-* + 1]
    /// strictly and nx, ny >= 3.
    void validate(const ModelParams& params, const CostSpec& cost) const;
};

/// Five-point stencil of rho - L_{X,Y}:
///   (rho - L)u = diag u_ij - west u_{i-1,j} - east u_{i+1,j} - south u_{i,j-1} - north u_{i,j+1}
/// Central second difference in x, first-order upwind for both transport terms.
struct Stencil {
    double diag, west, east, south, north;

    /// (rho - L)u at an interior node of a row-major field.
    double apply(const std::vector<double>& u, const Grid2D& g, int i, int j) const noexcept;
};

Stencil assemble_operator(const Grid2D& grid, const ModelParams& params);

enum class NodeState : std::int8_t { lower = -1, interior = 0, upper = 1 };

struct ValueField {
    Grid2D grid;
    std::vector<double> vhat;     // row-major, index(i, j)
    std::vector<NodeState> mask;
    bool converged = false;
    double omega = 0.0;           // relaxation factor finally used
    long total_sweeps = 0;
    std::vector<double> row_update;  // last max update per row, relative to q
    std::vector<int> row_sweeps;
    std::vector<double> worst_history;  // update history of the slowest row

    double at(int i, int j) const noexcept { return vhat[grid.index(i, j)]; }
};

struct PdeOptions {
    double tol = 1e-11;       // max update per sweep, relative to q
    long max_sweeps = 400000; // per row
    double omega = 1.5;
};

/// Projected SOR for the linear complementarity problem
///   min(max((rho - L)v - f, v - upper), v - lower) = 0
/// on the interior nodes. v must hold the Dirichlet data on the x-edges and on
/// the inflow y-edge; its remaining entries are the initial guess. `scale`
/// normalises updates for the stopping test. Rows are solved one at a time in
/// upwind order, which is exact for the upwind transport in y.
void psor_solve(const Grid2D& grid, const Stencil& st, const std::vector<double>& f,
                const std::vector<double>& lower, const std::vector<double>& upper,
                const std::vector<double>& scale, std::vector<double>& v, const PdeOptions& opts,
                ValueField& report);

/// Double-obstacle problem for v-hat: (rho - L)v = q C' between the obstacles
/// -K+ q <= v <= K- q.
ValueField solve_double_obstacle(const Grid2D& grid, const ModelParams& params,
                                 const CostSpec& cost, const PdeOptions& opts = {});

struct ExtractedBoundaries {
    BoundaryPair pair;               // determinate rows only, projected
    std::vector<double> raw_plus;    // before projection
    std::vector<double> raw_minus;
    std::vector<int> iplus;          // node index of the raw estimates
    std::vector<int> iminus;
    std::vector<int> rows;           // field row of each entry in pair
    std::vector<double> indeterminate_y;
};

/// Per row: c+ is the largest x with v <= -K+ q + eps, c- the smallest with
/// v >= K- q - eps, eps = eps_rel K q. Rows whose only binding nodes are the
/// Dirichlet edges are indeterminate.
ExtractedBoundaries extract_boundaries(const ValueField& field, const ModelParams& params,
                                       const CostSpec& cost, double eps_rel = 1e-6);

struct SmoothFitRow {
    double y;
    double dev_plus;   // |quotient - limit| / q at c+
    double dev_minus;
};

struct SmoothFitReport {
    std::vector<SmoothFitRow> rows;
    double max_deviation = 0.0;  // sup over rows in the interior 80% of the y-range
};

/// One-sided x-difference quotient from the continuation side at each extracted
/// boundary node against the limit -+(gamma/eta) K+- e^{(gamma/eta)(x - y)},
/// normalised by q(x, y).
SmoothFitReport smooth_fit_check(const ValueField& field, const ExtractedBoundaries& b,
                                 const ModelParams& params);

/// Smooth-fit limit -+(gamma/eta) K+- e^{(gamma/eta)(x - y)}; side is +1 for c+ and -1 for c-.
double smooth_fit_limit(double x, double y, int side, const ModelParams& params) noexcept;

/// Sup-norm gap between solver curves and the extraction over rows whose y
/// lies in the interior `fraction` of the extraction's y-range.
double boundary_gap(const BoundaryPair& solved, const ExtractedBoundaries& b, double fraction = 0.8);

/// Count of nodes outside the obstacle band (exact comparison).
long obstacle_violations(const ValueField& field, const ModelParams& params);

/// v-hat(x, y) = v-bar(x, e^{(gamma/eta)(x - y)}) with v-bar nondecreasing in x,
/// so v-hat must be nondecreasing along every line x - y = const. Returns the
/// largest relative decrease along such lines through grid nodes (dy must be a
/// multiple of dx), or a negative value when the grid has no such lines.
double phi_monotonicity_defect(const ValueField& field);

}  // namespace bvctl
