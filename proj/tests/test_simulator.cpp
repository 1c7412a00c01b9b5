#include "bvctl/error.hpp"
#include "bvctl/simulator.hpp"

#include "common.hpp"

#include <gtest/gtest.h>

using namespace bvctl;
using fixtures::default_boundaries;
using fixtures::default_cost;
using fixtures::default_params;
using fixtures::default_policy;

namespace {

SimConfig small_config(long paths = 200, double dt = 1e-2) {
    SimConfig c;
    c.dt = dt;
    c.horizon = 40.0;
    c.npaths = paths;
    c.seed = 2024;
    return c;
}

PolicyBoundaries constant_band(double lo, double hi) {
    PolicyBoundaries p;
    p.log_phigrid = {-30.0, 0.0, 30.0};
    p.bplus.assign(3, lo);
    p.bminus.assign(3, hi);
    return p;
}

}  // namespace

TEST(SimConfig, Validation) {
    const auto& p = default_params();
    SimConfig c;
    EXPECT_NO_THROW(c.validate(p));
    EXPECT_EQ(c.steps(), 40000);
    auto field_of = [&](SimConfig s) {
        try {
            s.validate(p);
        } catch (const ValidationError& e) {
            return e.field();
        }
        return std::string();
    };
    c.dt = 0.0;
    EXPECT_EQ(field_of(c), "sim.dt");
    c = {};
    c.horizon = 39.0;  // rho T = 19.5
    EXPECT_EQ(field_of(c), "sim.horizon");
    c = {};
    c.npaths = 0;
    EXPECT_EQ(field_of(c), "sim.npaths");
    c = {};
    c.pi0 = 1.0;
    EXPECT_EQ(field_of(c), "sim.pi0");
}

TEST(ControlledPath, DeterministicAndIndependentOfRunSize) {
    const auto cfg = small_config();
    const auto a = simulate_controlled_path(default_params(), default_cost(), default_policy(), cfg, 17);
    const auto b = simulate_controlled_path(default_params(), default_cost(), default_policy(), cfg, 17);
    EXPECT_EQ(a.total, b.total);
    EXPECT_EQ(a.x_T, b.x_T);
    EXPECT_EQ(a.pi_T, b.pi_T);
    const auto c = simulate_controlled_path(default_params(), default_cost(), default_policy(), cfg, 18);
    EXPECT_NE(a.total, c.total);
    // a policy simulated alongside others sees the same path
    const auto shifted = default_policy().shifted(-0.2, 0.0);
    const auto both = simulate_controlled_paths(default_params(), default_cost(), {&default_policy(), &shifted}, cfg, 17);
    EXPECT_EQ(both[0].total, a.total);
    EXPECT_EQ(both[1].s_T, a.s_T);
}

TEST(ControlledPath, CostDecompositionAndBookkeeping) {
    for (SimMode mode : {SimMode::true_measure, SimMode::q_measure}) {
        auto cfg = small_config();
        cfg.mode = mode;
        for (long k = 0; k < 20; ++k) {
            const auto r = simulate_controlled_path(default_params(), default_cost(), default_policy(), cfg, k);
            EXPECT_GE(r.discounted_running_cost, 0.0);
            EXPECT_GE(r.discounted_up_cost, 0.0);
            EXPECT_GE(r.discounted_down_cost, 0.0);
            EXPECT_EQ(r.total, r.discounted_running_cost + r.discounted_up_cost + r.discounted_down_cost);
            // X = S + P+ - P-
            EXPECT_NEAR(r.x_T, r.s_T + r.p_plus - r.p_minus, 1e-9 * (1.0 + r.p_plus + r.p_minus));
            EXPECT_GT(r.pi_T, 0.0);
            EXPECT_LT(r.pi_T, 1.0);
        }
    }
}

TEST(ControlledPath, StaysInsideTheBandAfterProjection) {
    auto cfg = small_config(1, 1e-3);
    PathTrace tr;
    simulate_controlled_path(default_params(), default_cost(), default_policy(), cfg, 3, &tr);
    ASSERT_EQ(tr.x.size(), static_cast<std::size_t>(cfg.steps() + 1));
    for (std::size_t k = 0; k < tr.x.size(); ++k) {
        EXPECT_GE(tr.x[k], tr.bplus[k]);
        EXPECT_LE(tr.x[k], tr.bminus[k]);
    }
}

TEST(ControlledPath, InitialJumpIsChargedUndiscounted) {
    auto cfg = small_config(1);
    cfg.x0 = -3.0;
    PathTrace tr;
    const auto r = simulate_controlled_path(default_params(), default_cost(), default_policy(), cfg, 0, &tr);
    const double b0 = default_policy().bplus_at(1.0);
    EXPECT_EQ(tr.x[0], b0);
    EXPECT_GE(r.p_plus, b0 + 3.0);
    EXPECT_GE(r.discounted_up_cost, default_params().kplus() * (b0 + 3.0));
}

TEST(ControlledPath, NoActionWhenNoiseIsNegligibleInsideAWideBand) {
    const ModelParams p(-1e-3, 1e-3, 1e-4, 0.5, 1.0, 1.0);
    auto cfg = small_config(1, 1e-2);
    const auto band = constant_band(-5.0, 5.0);
    const auto r = simulate_controlled_path(p, default_cost(), band, cfg, 0);
    EXPECT_EQ(r.p_plus, 0.0);
    EXPECT_EQ(r.p_minus, 0.0);
}

TEST(Evaluate, DoNothingMatchesMixtureOracle) {
    const auto cfg = small_config(4000, 1e-2);
    const auto e = evaluate_policy(default_params(), default_cost(), PolicyBoundaries::do_nothing(), cfg);
    const double oracle = do_nothing_cost(default_params(), default_cost(), 0.0, 0.5);
    EXPECT_DOUBLE_EQ(oracle, 20.0);  // pi R(0; 1) + (1 - pi) R(0; -1) with R = 2b^2/rho^3 + eta^2/rho^2
    // left-point rule bias at dt = 1e-2 is about rho dt / 2 relative
    EXPECT_LT(std::abs(e.total.mean - oracle), 3.0 * e.total.se + 0.01 * oracle);
    EXPECT_EQ(e.up, 0.0);
    EXPECT_EQ(e.down, 0.0);
}

TEST(Evaluate, StandardErrorScalesLikeInverseRootN) {
    const auto a = evaluate_policy(default_params(), default_cost(), default_policy(), small_config(400));
    const auto b = evaluate_policy(default_params(), default_cost(), default_policy(), small_config(800));
    const double ratio = b.total.se / a.total.se;
    EXPECT_GT(ratio, 0.6);
    EXPECT_LT(ratio, 0.82);
    EXPECT_GT(a.tail_bound, 0.0);
    EXPECT_LT(a.tail_bound, 1e-6);
}

TEST(Evaluate, CommonRandomNumbersDifferenceHasSmallerError) {
    const auto& opt = default_policy();
    const auto cmp = evaluate_policies(default_params(), default_cost(), {opt, opt.shifted(0.0, 0.2)}, small_config(300));
    EXPECT_EQ(cmp.diff_vs_first[0].mean, 0.0);
    EXPECT_LT(cmp.diff_vs_first[1].se, 0.3 * cmp.policies[1].total.se);
}

TEST(Dynkin, ImmediateStopPayoffs) {
    const auto& c = default_boundaries();
    const auto& p = default_params();
    auto cfg = small_config(50, 1e-3);
    const double y = 0.5;
    const double xl = c.cplus_at(y) - 0.3;
    const auto lo = simulate_dynkin_value(p, default_cost(), c, xl, y, cfg);
    EXPECT_NEAR(lo.mean, -p.kplus() * (1.0 + std::exp(p.tilt() * (xl - y))), 1e-12);
    EXPECT_EQ(lo.se, 0.0);
    const double xh = c.cminus_at(y) + 0.1;
    const auto hi = simulate_dynkin_value(p, default_cost(), c, xh, y, cfg);
    EXPECT_NEAR(hi.mean, p.kminus() * (1.0 + std::exp(p.tilt() * (xh - y))), 1e-12);
}

TEST(Dynkin, InteriorEstimateNearRepresentation) {
    const auto& c = default_boundaries();
    auto cfg = small_config(4000, 1e-3);
    const auto est = simulate_dynkin_value(default_params(), default_cost(), c, 0.2, 0.5, cfg);
    const double ref = rhs_integral(c, 0.5, 0.2, default_params(), default_cost()).value;
    // discrete monitoring lets paths overshoot the boundaries; allow sqrt(dt)-order bias
    EXPECT_LT(std::abs(est.mean - ref), 3.0 * est.se + 0.05);
}

TEST(Representation, MonteCarloAgreesWithQuadrature) {
    const auto& c = default_boundaries();
    for (auto [x, y] : {std::pair{0.0, 0.0}, std::pair{0.5, -1.0}}) {
        const auto mc = representation_mc(default_params(), default_cost(), c, x, y, 20000, 77);
        const double ref = rhs_integral(c, y, x, default_params(), default_cost()).value;
        EXPECT_LT(std::abs(mc.mean - ref), 4.0 * mc.se) << x << "," << y;
    }
    EXPECT_THROW(representation_mc(default_params(), default_cost(), c, 0.0, 0.0, 100, 1, 401), ValidationError);
}

TEST(Martingale, BeliefMeanAndGrowingVariance) {
    const auto rep = martingale_suite(default_params(), 0.3, {1.0, 5.0, 25.0}, 20000, 99);
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_DOUBLE_EQ(rep.phi0, 0.3 / 0.7);
    for (const auto& r : rep.rows) EXPECT_LT(std::abs(r.pi_T.mean - 0.3), 3.0 * r.pi_T.se) << r.horizon;
    EXPECT_LT(std::abs(rep.rows[0].phi_T.mean - rep.phi0), 3.0 * rep.rows[0].phi_T.se);
    EXPECT_LT(rep.rows[0].pi_var, rep.rows[1].pi_var);
    EXPECT_LT(rep.rows[1].pi_var, rep.rows[2].pi_var);
    EXPECT_LT(rep.rows[2].pi_var, 0.3 * 0.7 + 0.01);
}

TEST(FilterGap, FirstOrderInDt) {
    const std::vector<double> dts{1e-2, 1e-3, 1e-4};
    const auto gaps = filter_gap_study(default_params(), 0.5, 1.0, dts, 50, 5);
    ASSERT_EQ(gaps.size(), 3u);
    EXPECT_GT(gaps[0], gaps[1]);
    EXPECT_GT(gaps[1], gaps[2]);
    EXPECT_NEAR(loglog_slope(dts, gaps), 1.0, 0.2);
    EXPECT_THROW(filter_gap_study(default_params(), 0.5, 1.0, {1e-2, 3e-4}, 5, 1), ValidationError);
}

TEST(FilterGap, SlopeHelper) {
    EXPECT_NEAR(loglog_slope({1.0, 2.0, 4.0}, {3.0, 12.0, 48.0}), 2.0, 1e-12);
}
