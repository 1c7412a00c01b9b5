#include "bvctl/numerics.hpp"

#include "bvctl/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <map>
#include <mutex>

namespace bvctl::numerics {

namespace {

GaussRule build_gauss_legendre(int n) {
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    static std::mutex mutex;
    static std::map<int, GaussRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_gauss_legendre(n)).first;
    return it->second;
}

double find_root(const std::function<double(double)>& f, double lo, double hi, double xtol,
                 int max_iter) {
    const double flo = f(lo);
    if (flo == 0.0) return lo;
    const double fhi = f(hi);
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw NumericalError("find_root: bracket does not straddle a root", std::min(std::abs(flo), std::abs(fhi)));
    boost::uintmax_t iters = static_cast<boost::uintmax_t>(max_iter);
    auto tol = [xtol](double a, double b) { return std::abs(b - a) <= xtol; };
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
    return 0.5 * (a + b);
}

IntegralResult integrate(const std::function<double(double)>& f, double a, double b,
                         double abs_tol) {
    double err = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, a, b, 15, 1e-11, &err, &l1);
    if (!(err <= abs_tol) && err > 1e-10 * l1)
        throw NumericalError("integrate: adaptive quadrature did not reach tolerance", err);
    return {value, err};
}

double interp_flat(std::span<const double> grid, std::span<const double> values, double x) noexcept {
    if (x <= grid.front()) return values.front();
    if (x >= grid.back()) return values.back();
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
    const double w = (x - grid[i]) / (grid[i + 1] - grid[i]);
    return values[i] + w * (values[i + 1] - values[i]);
}

}  // namespace bvctl::numerics
