#pragma once

#include "bvctl/model.hpp"
#include "bvctl/onedim.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace bvctl {

/// Free boundaries c+(y) < c-(y) in parabolic coordinates, sampled on ygrid.
struct BoundaryPair {
    std::vector<double> ygrid;
    std::vector<double> cplus;
    std::vector<double> cminus;
    double residual = 0.0;           // last sup-norm change of the fixed-point map
    double equation_residual = 0.0;  // max |scalar equation| / (K q) at the returned curves
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;     // sup-norm change per iteration
    std::vector<std::string> warnings;

    double cplus_at(double y) const noexcept;
    double cminus_at(double y) const noexcept;
};

/// Box each boundary has to live in: [x+*, (C')^{-1}(-rho K+)] for c+ and
/// [(C')^{-1}(rho K-), x-*] for c-.
struct BoundaryBox {
    double plus_lo, plus_hi;
    double minus_lo, minus_hi;
};

BoundaryBox boundary_box(const ModelParams& params, const CostSpec& cost);

/// Uniform grid of n points on [lo, hi].
std::vector<double> uniform_grid(double lo, double hi, int n);

/// In-place projection onto nondecreasing, 1-Lipschitz curves inside [lo, hi].
/// The result satisfies the constraints exactly in floating point on every
/// pair of grid points, not just neighbours.
void project_monotone_lipschitz(std::span<const double> ygrid, std::span<double> c, double lo,
                                double hi);

/// Empty string if every BoundaryPair invariant holds exactly, otherwise a
/// description of the first violation.
std::string check_boundary_invariants(const BoundaryPair& c, const BoundaryBox& box);

/// Integral over z of q(z, ys) g(z) G(z; m, var), where g is -rho K+ for
/// z <= cplus, C'(z) between the boundaries and rho K- above max(cplus, cminus).
double inner_integral(double cplus, double cminus, double ys, double m, double var,
                      const ModelParams& params, const CostSpec& cost);

struct RhsResult {
    double value;
    /// Bound on the discarded tail int_{Smax}^inf of the time integral.
    double truncation;
};

/// Representation of the Dynkin value at (x, y) with boundaries c:
///   int_0^inf e^{-rho s} inner_integral(c+(Y_s) + shift_plus, c-(Y_s) + shift_minus,
///                                       Y_s, x + mu0 s, eta^2 s) ds,
/// Y_s = y + (mu0 + mu1) s / 2. With zero shifts this is v-hat(x, y).
RhsResult rhs_integral(const BoundaryPair& c, double y, double x, const ModelParams& params,
                       const CostSpec& cost, double shift_plus = 0.0, double shift_minus = 0.0);

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 200;
    double damping = 0.5;
};

BoundaryPair solve_boundaries(const ModelParams& params, const CostSpec& cost,
                              std::vector<double> ygrid, const SolverOptions& opts = {});

/// Scalar equation residuals |K+ q + rhs| / (K+ q) and |K- q - rhs| / (K- q)
/// at the sampled boundaries; returns the sup over the grid.
double equation_residual(const BoundaryPair& c, const ModelParams& params, const CostSpec& cost);

/// Largest increment of either boundary over the outer 10% of the grid on each side.
double edge_increment(const BoundaryPair& c);

/// Generalised inverses of the piecewise-linear boundaries:
///   c+^{-1}(x) = sup{y : c+(y) <= x},  c-^{-1}(x) = inf{y : c-(y) >= x},
/// returning +-infinity outside the range of the samples.
double cplus_inverse(const BoundaryPair& c, double x) noexcept;
double cminus_inverse(const BoundaryPair& c, double x) noexcept;

/// Reflection boundaries in (x, phi) and (x, pi) coordinates. bplus/bminus
/// are sampled on a grid uniform in log phi; -inf/+inf mark a do-nothing
/// policy.
struct PolicyBoundaries {
    std::vector<double> log_phigrid;
    std::vector<double> bplus;
    std::vector<double> bminus;

    static PolicyBoundaries do_nothing();
    /// Copy with each boundary translated by a constant (perturbation studies).
    PolicyBoundaries shifted(double dplus, double dminus) const;
    bool is_do_nothing() const noexcept { return log_phigrid.empty(); }

    double bplus_at(double phi) const noexcept { return bplus_at_log(std::log(phi)); }
    double bminus_at(double phi) const noexcept { return bminus_at_log(std::log(phi)); }
    /// Fast lookups by log phi (grid assumed uniform, flat extension).
    double bplus_at_log(double log_phi) const noexcept;
    double bminus_at_log(double log_phi) const noexcept;

    /// Cell of log_phi on the grid: index i and weight w in [0, 1] so that
    /// bplus_at_log = bplus[i] + w (bplus[i + 1] - bplus[i]).
    struct Cell {
        std::size_t i;
        double w;
    };
    Cell locate(double log_phi) const noexcept;
    bool same_grid(const PolicyBoundaries& other) const noexcept;

    double aplus(double pi) const { return bplus_at(belief_to_likelihood(pi)); }
    double aminus(double pi) const { return bminus_at(belief_to_likelihood(pi)); }

    std::vector<double> phigrid() const;
};

/// Exact b+(phi) = sup{x : x <= c+(x - log(phi) eta/gamma)} and the analogous
/// inf for b-, from the piecewise-linear boundaries.
double bplus_from(const BoundaryPair& c, double log_phi, const ModelParams& params);
double bminus_from(const BoundaryPair& c, double log_phi, const ModelParams& params);

/// b-inverse maps of the boundaries: b+^{-1}(x) = exp((gamma/eta)(x - c+^{-1}(x))).
double bplus_inverse(const BoundaryPair& c, double x, const ModelParams& params) noexcept;
double bminus_inverse(const BoundaryPair& c, double x, const ModelParams& params) noexcept;

PolicyBoundaries to_policy(const BoundaryPair& c, const ModelParams& params,
                           std::vector<double> log_phigrid);

/// Default likelihood grid: log phi uniform on [-30, 30], odd count so phi = 1 is a node.
std::vector<double> default_log_phigrid(int n = 6001);

/// Empty string if b+- are nonincreasing, separated and inside [x+*, x-*].
std::string check_policy_invariants(const PolicyBoundaries& p, const BoundaryBox& box);

}  // namespace bvctl
