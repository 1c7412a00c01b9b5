#include "bvctl/error.hpp"
#include "bvctl/model.hpp"
#include "bvctl/numerics.hpp"

#include "common.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace bvctl;
using fixtures::default_params;

namespace {

std::string field_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        return e.field();
    }
    return "";
}

}  // namespace

TEST(ModelParams, DerivedQuantities) {
    const auto& p = default_params();
    EXPECT_DOUBLE_EQ(p.gamma(), 2.0);
    EXPECT_DOUBLE_EQ(p.tilt(), 2.0);
    EXPECT_DOUBLE_EQ(p.ydrift(), 0.0);
    const ModelParams q(0.5, 2.0, 0.5, 0.1, 1.0, 2.0);
    EXPECT_DOUBLE_EQ(q.gamma(), 3.0);
    EXPECT_DOUBLE_EQ(q.tilt(), 6.0);
    EXPECT_DOUBLE_EQ(q.ydrift(), 1.25);
    EXPECT_DOUBLE_EQ(gamma(q), 3.0);
}

TEST(ModelParams, RejectsInvalidFieldsByName) {
    EXPECT_EQ(field_of([] { ModelParams(1.0, 1.0, 1.0, 0.5, 1.0, 1.0); }), "mu1");
    EXPECT_EQ(field_of([] { ModelParams(1.0, -1.0, 1.0, 0.5, 1.0, 1.0); }), "mu1");
    EXPECT_EQ(field_of([] { ModelParams(NAN, 1.0, 1.0, 0.5, 1.0, 1.0); }), "mu0");
    EXPECT_EQ(field_of([] { ModelParams(-1.0, 1.0, 0.0, 0.5, 1.0, 1.0); }), "eta");
    EXPECT_EQ(field_of([] { ModelParams(-1.0, 1.0, 1.0, 0.0, 1.0, 1.0); }), "rho");
    EXPECT_EQ(field_of([] { ModelParams(-1.0, 1.0, 1.0, 0.5, -1.0, 1.0); }), "kplus");
    EXPECT_EQ(field_of([] { ModelParams(-1.0, 1.0, 1.0, 0.5, 1.0, 0.0); }), "kminus");
}

TEST(CostSpec, QuadraticClosedForms) {
    const CostSpec c = CostSpec::quadratic(0.5);
    EXPECT_TRUE(c.is_quadratic());
    EXPECT_EQ(c.kind_name(), "quadratic");
    EXPECT_DOUBLE_EQ(c.c(1.5), 1.0);
    EXPECT_DOUBLE_EQ(c.cprime(1.5), 2.0);
    EXPECT_DOUBLE_EQ(c.csecond(-3.0), 2.0);
    EXPECT_DOUBLE_EQ(c.cprime_inv(2.0), 1.5);
    EXPECT_NO_THROW(c.validate());
    // the bounds used throughout: (C')^{-1}(-+rho K) = -+0.25 at the defaults
    const CostSpec d = CostSpec::quadratic();
    EXPECT_DOUBLE_EQ(d.cprime_inv(-0.5), -0.25);
    EXPECT_DOUBLE_EQ(d.cprime_inv(0.5), 0.25);
}

TEST(CostSpec, AsymmetricBranches) {
    const CostSpec c = CostSpec::asymmetric(2.0, 3.0, 1.0);
    EXPECT_FALSE(c.is_quadratic());
    EXPECT_DOUBLE_EQ(c.c(2.0), 2.0);
    EXPECT_DOUBLE_EQ(c.c(0.0), 3.0);
    EXPECT_DOUBLE_EQ(c.cprime(2.0), 4.0);
    EXPECT_DOUBLE_EQ(c.cprime(0.0), -6.0);
    for (double v : {-10.0, -1.0, 0.0, 0.3, 7.0}) EXPECT_NEAR(c.cprime(c.cprime_inv(v)), v, 1e-12);
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(field_of([] { CostSpec::asymmetric(0.0, 1.0); }), "cost.holding");
    EXPECT_EQ(field_of([] { CostSpec::asymmetric(1.0, -1.0); }), "cost.shortage");
    EXPECT_EQ(field_of([] { CostSpec::quadratic(INFINITY); }), "cost.target");
}

TEST(Transforms, BeliefLikelihoodRoundTrip) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-25.0, 25.0);
    for (int k = 0; k < 10000; ++k) {
        const double pi = 1.0 / (1.0 + std::exp(-u(rng)));
        if (!(pi > 0 && pi < 1)) continue;
        EXPECT_LE(fixtures::rel_diff(likelihood_to_belief(belief_to_likelihood(pi)), pi), 1e-12);
        // 1 - pi carries the information once phi is large: relative error grows like eps * phi
        const double phi = std::exp(std::min(u(rng), 9.0));
        EXPECT_LE(fixtures::rel_diff(belief_to_likelihood(likelihood_to_belief(phi)), phi), 1e-12);
    }
    EXPECT_DOUBLE_EQ(belief_to_likelihood(0.5), 1.0);
    EXPECT_EQ(field_of([] { belief_to_likelihood(0.0); }), "pi");
    EXPECT_EQ(field_of([] { belief_to_likelihood(1.0); }), "pi");
    EXPECT_EQ(field_of([] { likelihood_to_belief(-1.0); }), "phi");
}

TEST(Transforms, ParabolicRoundTripAndWeightIdentity) {
    const ModelParams p(-0.3, 1.7, 0.8, 0.4, 1.0, 2.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> ux(-5.0, 5.0), ul(-20.0, 20.0);
    for (int k = 0; k < 10000; ++k) {
        const double x = ux(rng);
        const double phi = std::exp(ul(rng));
        const auto pt = to_parabolic(x, phi, p);
        EXPECT_EQ(pt.x, x);
        EXPECT_LE(fixtures::rel_diff(parabolic_to_likelihood(pt.x, pt.y, p), phi), 1e-10);
        // q(x, x - (eta/gamma) log phi) = 1 + phi
        EXPECT_LE(fixtures::rel_diff(weight_q(pt.x, pt.y, p), 1.0 + phi), 1e-10);
        EXPECT_NEAR(log_weight_q(pt.x, pt.y, p), std::log1p(phi), 1e-10 * std::max(1.0, std::log1p(phi)));
    }
}

TEST(Transforms, LogWeightStaysFiniteForLargeArguments) {
    const auto& p = default_params();
    EXPECT_NEAR(log_weight_q(500.0, 0.0, p), 1000.0, 1e-9);
    EXPECT_NEAR(log_weight_q(-500.0, 0.0, p), 0.0, 1e-300);
    EXPECT_TRUE(std::isfinite(log_weight_q(1e4, -1e4, p)));
    EXPECT_DOUBLE_EQ(parabolic_log_likelihood(3.0, 1.0, p), 4.0);
}

TEST(Filter, ExplicitFormulaOnDeterministicObservations) {
    const auto& p = default_params();
    // S_t = S_0 + c t gives log Phi_t = log phi0 + 2 c t at the defaults
    const double dt = 0.01, c = 0.3;
    std::vector<double> s(101);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = 2.0 + c * dt * k;
    const auto pi = filter_explicit(s, dt, 0.25, p);
    ASSERT_EQ(pi.size(), s.size());
    EXPECT_DOUBLE_EQ(pi[0], 0.25);
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double lphi = std::log(1.0 / 3.0) + 2.0 * c * dt * k;
        EXPECT_NEAR(pi[k], 1.0 / (1.0 + std::exp(-lphi)), 1e-14);
    }
    // extreme observations stay inside (0, 1)
    const auto far = filter_explicit(std::vector<double>{0.0, 1e3, -1e3}, 1.0, 0.5, p);
    EXPECT_EQ(far[1], 1.0 - kBeliefClamp);
    EXPECT_EQ(far[2], kBeliefClamp);
}

TEST(Filter, SdeStepBasics) {
    const auto& p = default_params();
    // zero innovation: dS equals the filtered drift (0 at pi = 0.5) and the
    // Milstein correction vanishes at pi = 0.5
    EXPECT_DOUBLE_EQ(filter_sde_step(0.5, 0.0, 1e-3, p), 0.5);
    // Pi (1 - Pi) vanishes at the edges
    EXPECT_NEAR(filter_sde_step(1e-9, 0.05, 1e-3, p) - 1e-9, 0.0, 1e-9);
    EXPECT_GE(filter_sde_step(kBeliefClamp, -10.0, 1e-3, p), kBeliefClamp);
    EXPECT_LE(filter_sde_step(1.0 - kBeliefClamp, 10.0, 1e-3, p), 1.0 - kBeliefClamp);
}

TEST(Filter, SdeTracksExplicitFilterPathwise) {
    const auto& p = default_params();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    const double dt = 1e-4;
    const int steps = 10000;
    std::vector<double> s(steps + 1, 0.0);
    for (int k = 0; k < steps; ++k) s[k + 1] = s[k] + p.mu1() * dt + p.eta() * std::sqrt(dt) * n01(rng);
    const auto exact = filter_explicit(s, dt, 0.5, p);
    double pi = 0.5, gap = 0.0;
    for (int k = 0; k < steps; ++k) {
        pi = filter_sde_step(pi, s[k + 1] - s[k], dt, p);
        gap = std::max(gap, std::abs(pi - exact[k + 1]));
    }
    EXPECT_LT(gap, 1e-3);
}

TEST(Numerics, GaussLegendreIsExactForPolynomials) {
    for (int n : {2, 5, 16, 64}) {
        const auto& g = numerics::gauss_legendre(n);
        ASSERT_EQ(g.nodes.size(), static_cast<std::size_t>(n));
        for (int deg = 0; deg <= 2 * n - 1; deg += (n > 5 ? 7 : 1)) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += g.weights[i] * std::pow(g.nodes[i], deg);
            const double exact = deg % 2 ? 0.0 : 2.0 / (deg + 1);
            EXPECT_NEAR(s, exact, 1e-13) << "n=" << n << " deg=" << deg;
        }
    }
    EXPECT_EQ(&numerics::gauss_legendre(16), &numerics::gauss_legendre(16));
}

TEST(Numerics, NormalTailsAndRootsAndQuadrature) {
    EXPECT_DOUBLE_EQ(numerics::normal_cdf(0.0), 0.5);
    EXPECT_NEAR(numerics::normal_cdf(1.96), 0.9750021048517795, 1e-15);
    EXPECT_NEAR(numerics::normal_sf(10.0) / 7.619853024160527e-24, 1.0, 1e-12);
    EXPECT_NEAR(numerics::find_root([](double x) { return x * x - 2.0; }, 0.0, 2.0), std::sqrt(2.0), 1e-13);
    EXPECT_THROW(numerics::find_root([](double x) { return x * x + 1.0; }, -1.0, 1.0), NumericalError);
    const auto r = numerics::integrate([](double x) { return numerics::normal_pdf(x); }, -INFINITY, INFINITY, 1e-10);
    EXPECT_NEAR(r.value, 1.0, 1e-12);
    const std::vector<double> g{0.0, 1.0, 3.0}, v{1.0, 3.0, -1.0};
    EXPECT_DOUBLE_EQ(numerics::interp_flat(g, v, -5.0), 1.0);
    EXPECT_DOUBLE_EQ(numerics::interp_flat(g, v, 0.5), 2.0);
    EXPECT_DOUBLE_EQ(numerics::interp_flat(g, v, 2.0), 1.0);
    EXPECT_DOUBLE_EQ(numerics::interp_flat(g, v, 9.0), -1.0);
}
