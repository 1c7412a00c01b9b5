#include "bvctl/onedim.hpp"

#include "common.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bvctl;
using fixtures::default_cost;
using fixtures::default_params;

// Frozen values from the default model (pinned before the main build).
TEST(OneDim, FrozenThresholds) {
    const auto& p = default_params();
    const auto& c = default_cost();
    const auto s0 = solve_constant_drift(0.0, p, c);
    EXPECT_NEAR(s0.lower, -1.0197747912, 1e-9);
    EXPECT_NEAR(s0.upper, 1.0197747912, 1e-9);
    const auto s1 = solve_constant_drift(1.0, p, c);
    EXPECT_NEAR(s1.lower, -1.5182480441, 1e-9);
    EXPECT_NEAR(s1.upper, 0.6553632625, 1e-9);
    const auto sm = solve_constant_drift(-1.0, p, c);
    EXPECT_NEAR(sm.lower, -0.6553632625, 1e-9);
    EXPECT_NEAR(sm.upper, 1.5182480441, 1e-9);
    const auto xs = bounds_xstar(p, c);
    EXPECT_NEAR(xs.xplus, -1.5182480441, 1e-9);
    EXPECT_NEAR(xs.xminus, 1.5182480441, 1e-9);
}

TEST(OneDim, SymmetricConfigGivesMirrorThresholds) {
    const auto& p = default_params();
    const auto s0 = solve_constant_drift(0.0, p, default_cost());
    EXPECT_NEAR(s0.lower, -s0.upper, 1e-12);
    const auto a = solve_constant_drift(p.mu0(), p, default_cost());
    const auto b = solve_constant_drift(p.mu1(), p, default_cost());
    EXPECT_NEAR(a.lower, -b.upper, 1e-12);
    EXPECT_NEAR(a.upper, -b.lower, 1e-12);
}

TEST(OneDim, NewtonAndBisectionAgree) {
    const auto& p = default_params();
    for (double drift : {-1.0, -0.3, 0.0, 1.0, 2.5}) {
        const auto n = solve_constant_drift(drift, p, default_cost());
        const auto b = solve_constant_drift_bisection(drift, p, default_cost());
        EXPECT_TRUE(n.newton_converged);
        EXPECT_NEAR(n.lower, b.lower, 1e-8) << drift;
        EXPECT_NEAR(n.upper, b.upper, 1e-8) << drift;
    }
}

namespace {

// Cost of reflecting at a fixed band [l, r]: V = R + A e^{lneg (x - l)} + B e^{lpos (x - r)}
// with V'(l) = -K+ and V'(r) = K-. The game thresholds must be the band that minimises it.
double band_cost(double x, double l, double r, double drift, const ModelParams& p, const CostSpec& c) {
    const auto [ln, lp] = characteristic_roots(drift, p);
    const double a11 = ln, a12 = lp * std::exp(lp * (l - r));
    const double a21 = ln * std::exp(ln * (r - l)), a22 = lp;
    const double b1 = -p.kplus() - resolvent_cost(l, drift, p, c).d1;
    const double b2 = p.kminus() - resolvent_cost(r, drift, p, c).d1;
    const double det = a11 * a22 - a12 * a21;
    const double A = (b1 * a22 - a12 * b2) / det, B = (a11 * b2 - a21 * b1) / det;
    return resolvent_cost(x, drift, p, c).value + A * std::exp(ln * (x - l)) + B * std::exp(lp * (x - r));
}

}  // namespace

TEST(OneDim, GameThresholdsAreTheOptimalReflectionBand) {
    const ModelParams p(-1.0, 1.0, 0.8, 0.5, 1.0, 1.5);
    for (const CostSpec& c : {CostSpec::quadratic(0.1), CostSpec::asymmetric(1.0, 2.0, 0.0)}) {
        for (double drift : {-0.6, 0.0, 0.9}) {
            const auto s = solve_constant_drift(drift, p, c);
            const double x = 0.5 * (s.lower + s.upper);
            const double best = band_cost(x, s.lower, s.upper, drift, p, c);
            const double h = 1e-4;
            const double dl = (band_cost(x, s.lower + h, s.upper, drift, p, c) -
                               band_cost(x, s.lower - h, s.upper, drift, p, c)) / (2 * h);
            const double dr = (band_cost(x, s.lower, s.upper + h, drift, p, c) -
                               band_cost(x, s.lower, s.upper - h, drift, p, c)) / (2 * h);
            EXPECT_NEAR(dl, 0.0, 1e-6) << c.kind_name() << " drift " << drift;
            EXPECT_NEAR(dr, 0.0, 1e-6) << c.kind_name() << " drift " << drift;
            for (double d : {-0.1, 0.1}) {
                EXPECT_GT(band_cost(x, s.lower + d, s.upper, drift, p, c), best);
                EXPECT_GT(band_cost(x, s.lower, s.upper + d, drift, p, c), best);
            }
        }
    }
}

TEST(OneDim, CharacteristicRootsSolveTheQuadratic) {
    const ModelParams p(-0.4, 1.3, 0.7, 0.2, 1.0, 1.0);
    for (double drift : {-2.0, 0.0, 0.9}) {
        const auto [ln, lp] = characteristic_roots(drift, p);
        EXPECT_LT(ln, 0.0);
        EXPECT_GT(lp, 0.0);
        for (double l : {ln, lp})
            EXPECT_NEAR(0.5 * p.eta() * p.eta() * l * l + drift * l - p.rho(), 0.0, 1e-13);
    }
}

TEST(OneDim, QuadraticResolventClosedForm) {
    const auto& p = default_params();
    const double rho = p.rho(), eta = p.eta();
    for (double drift : {-1.0, 0.0, 0.7})
        for (double x : {-2.0, 0.0, 1.5}) {
            const auto r = resolvent_cost(x, drift, p, default_cost());
            const double exact = x * x / rho + 2.0 * x * drift / (rho * rho) +
                                 2.0 * drift * drift / (rho * rho * rho) + eta * eta / (rho * rho);
            EXPECT_NEAR(r.value, exact, 1e-12 * std::max(1.0, exact));
            EXPECT_NEAR(r.d1, 2.0 * x / rho + 2.0 * drift / (rho * rho), 1e-12);
            EXPECT_NEAR(r.d2, 2.0 / rho, 1e-12);
            EXPECT_NEAR(r.d3, 0.0, 1e-12);
        }
}

TEST(OneDim, GenericQuadraturePathMatchesClosedForm) {
    // asymmetric(1, 1) is the quadratic cost evaluated through quadrature
    const auto& p = default_params();
    const CostSpec generic = CostSpec::asymmetric(1.0, 1.0, 0.0);
    for (double drift : {-1.0, 1.0}) {
        const auto a = solve_constant_drift(drift, p, default_cost());
        const auto b = solve_constant_drift(drift, p, generic);
        EXPECT_NEAR(a.lower, b.lower, 1e-8);
        EXPECT_NEAR(a.upper, b.upper, 1e-8);
        const auto r = resolvent_cost(0.3, drift, p, generic);
        const auto q = resolvent_cost(0.3, drift, p, default_cost());
        EXPECT_NEAR(r.value, q.value, 1e-8);
        EXPECT_NEAR(r.d1, q.d1, 1e-8);
    }
}

TEST(OneDim, SmoothFitAndCprimeBounds) {
    const auto& p = default_params();
    const auto& c = default_cost();
    for (double drift : {-1.0, 1.0}) {
        const auto s = solve_constant_drift(drift, p, c);
        EXPECT_LE(s.residual, 1e-9);
        EXPECT_LE(s.lower, c.cprime_inv(-p.rho() * p.kplus()));
        EXPECT_GE(s.upper, c.cprime_inv(p.rho() * p.kminus()));
        // game value is pinned to the obstacles outside the band and C^1 across
        EXPECT_DOUBLE_EQ(s.game_value(s.lower - 1.0, p, c), -p.kplus());
        EXPECT_DOUBLE_EQ(s.game_value(s.upper + 1.0, p, c), p.kminus());
        EXPECT_NEAR(s.game_value(s.lower, p, c), -p.kplus(), 1e-9);
        EXPECT_NEAR(s.game_value(s.upper, p, c), p.kminus(), 1e-9);
        EXPECT_NEAR(s.game_slope(s.lower, p, c), 0.0, 1e-9);
        EXPECT_NEAR(s.game_slope(s.upper, p, c), 0.0, 1e-9);
        // and strictly inside the obstacles in between
        for (int k = 1; k < 20; ++k) {
            const double x = s.lower + (s.upper - s.lower) * k / 20.0;
            const double v = s.game_value(x, p, c);
            EXPECT_GT(v, -p.kplus());
            EXPECT_LT(v, p.kminus());
        }
    }
}

TEST(OneDim, PropertyRandomParameters) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 40; ++k) {
        const double mu0 = -2.0 + 2.0 * u(rng);
        const double mu1 = mu0 + 0.1 + 2.0 * u(rng);
        const ModelParams p(mu0, mu1, 0.3 + 1.5 * u(rng), 0.05 + u(rng), 0.2 + 2.0 * u(rng), 0.2 + 2.0 * u(rng));
        const CostSpec c = k % 2 ? CostSpec::quadratic(u(rng) - 0.5)
                                 : CostSpec::asymmetric(0.5 + u(rng), 0.5 + 2.0 * u(rng), u(rng) - 0.5);
        const auto xs = bounds_xstar(p, c);
        for (double drift : {mu0, mu1}) {
            const auto s = solve_constant_drift(drift, p, c);
            EXPECT_LE(s.residual, 1e-9);
            EXPECT_LT(s.lower, s.upper);
            EXPECT_GE(s.lower, xs.xplus - 1e-9);
            EXPECT_LE(s.upper, xs.xminus + 1e-9);
        }
        // drift raises the need to push down and lowers the need to push up
        const auto a = solve_constant_drift(mu0, p, c), b = solve_constant_drift(mu1, p, c);
        EXPECT_GT(a.lower, b.lower);
        EXPECT_GT(a.upper, b.upper);
    }
}
