#pragma once

#include "bvctl/model.hpp"

namespace bvctl {

/// Expected discounted cost of never acting, E int_0^inf e^{-rho t} C(x + drift t + eta W_t) dt,
/// and its first three x-derivatives.
struct Resolvent {
    double value;
    double d1;
    double d2;
    double d3;
    /// Quadrature error estimate; zero on the closed-form path.
    double error;
};

Resolvent resolvent_cost(double x, double drift, const ModelParams& params, const CostSpec& cost);

/// Full-information (constant drift) two-sided reflection problem.
///
/// The derivative of the control value on [lower, upper] is
///   w(x) = a lambda_neg e^{lambda_neg (x - lower)} + b lambda_pos e^{lambda_pos (x - upper)} + R'(x)
/// with R the resolvent cost. The homogeneous coefficients are anchored at the
/// boundary they dominate so they stay O(1) for any parameter scale. w is also
/// the value of the one-dimensional Dynkin game at this drift.
struct OneDimSolution {
    double drift;
    double lower;
    double upper;
    double lambda_neg;
    double lambda_pos;
    double coeff_neg;
    double coeff_pos;
    /// Sup norm of the four smooth-fit equations at the returned solution.
    double residual;
    /// False when the Newton iteration failed and nested bisection was used.
    bool newton_converged;

    /// Game value: -K+ below lower, w(x) on the band, K- above upper.
    double game_value(double x, const ModelParams& params, const CostSpec& cost) const;
    double game_slope(double x, const ModelParams& params, const CostSpec& cost) const;
};

/// Roots lambda_neg < 0 < lambda_pos of eta^2 l^2 / 2 + drift l - rho = 0.
std::pair<double, double> characteristic_roots(double drift, const ModelParams& params) noexcept;

OneDimSolution solve_constant_drift(double drift, const ModelParams& params, const CostSpec& cost);

/// Same problem solved by nested bisection only; exposed for cross-checks.
OneDimSolution solve_constant_drift_bisection(double drift, const ModelParams& params,
                                              const CostSpec& cost);

/// Bounds x+* (lower boundary at drift mu1) and x-* (upper boundary at drift mu0)
/// enclosing every free boundary of the partial-information problem.
struct XStarBounds {
    double xplus;
    double xminus;
};

XStarBounds bounds_xstar(const ModelParams& params, const CostSpec& cost);

}  // namespace bvctl
