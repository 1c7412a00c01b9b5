#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace bvctl::numerics {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule (Newton on the three-term recurrence).
/// Rules are cached per n, so repeated calls are cheap.
const GaussRule& gauss_legendre(int n);

inline double normal_pdf(double z) noexcept {
    return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double normal_cdf(double z) noexcept {
    return 0.5 * std::erfc(-z * std::numbers::sqrt2 * 0.5);
}

/// Upper tail 1 - Phi(z), accurate for large positive z.
inline double normal_sf(double z) noexcept {
    return 0.5 * std::erfc(z * std::numbers::sqrt2 * 0.5);
}

/// Bracketed root of a continuous function with a sign change on [lo, hi].
/// Throws NumericalError when the bracket does not straddle a root.
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double xtol = 1e-13, int max_iter = 200);

struct IntegralResult {
    double value;
    double error;
};

/// Adaptive Gauss-Kronrod integral of f on [a, b] (either end may be infinite).
/// Throws NumericalError if the estimated error exceeds abs_tol.
IntegralResult integrate(const std::function<double(double)>& f, double a, double b,
                         double abs_tol);

/// Linear interpolation on a strictly increasing grid with flat extension.
double interp_flat(std::span<const double> grid, std::span<const double> values, double x) noexcept;

}  // namespace bvctl::numerics
