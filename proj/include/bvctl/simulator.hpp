#pragma once

#include "bvctl/boundary.hpp"
#include "bvctl/model.hpp"

#include <cstdint>
#include <vector>

namespace bvctl {

enum class SimMode {
    true_measure,  // mu ~ Bernoulli(pi0), belief filtered from S = X - P
    q_measure      // X^0 has drift mu0, Phi an exponential martingale, costs weighted by (1 + Phi)/(1 + phi0)
};

struct SimConfig {
    double dt = 1e-3;
    double horizon = 40.0;
    long npaths = 10000;
    std::uint64_t seed = 12345;
    double x0 = 0.0;
    double pi0 = 0.5;
    SimMode mode = SimMode::true_measure;

    long steps() const;
    /// Throws ValidationError for dt <= 0, rho * horizon < 20, npaths < 1 or pi0 outside (0, 1).
    void validate(const ModelParams& params) const;
};

struct PathResult {
    double discounted_running_cost = 0.0;
    double discounted_up_cost = 0.0;    // K+ times discounted dP+
    double discounted_down_cost = 0.0;  // K- times discounted dP-
    double total = 0.0;
    double x_T = 0.0;
    double pi_T = 0.0;
    double p_plus = 0.0;   // undiscounted control totals
    double p_minus = 0.0;
    double s_T = 0.0;      // uncontrolled observation X - P at the horizon
};

/// Optional per-step record of one path (after the end-of-step projection).
struct PathTrace {
    std::vector<double> t, x, log_phi, bplus, bminus;
};

/// One path of the reflected process. Path k of a run with seed s always uses
/// the same random stream, independent of how many other paths are simulated.
PathResult simulate_controlled_path(const ModelParams& params, const CostSpec& cost,
                                    const PolicyBoundaries& policy, const SimConfig& cfg,
                                    long path_index = 0, PathTrace* trace = nullptr);

/// Same random path for every policy (common random numbers): the belief only
/// depends on the uncontrolled observation, so one pass serves all policies.
std::vector<PathResult> simulate_controlled_paths(const ModelParams& params, const CostSpec& cost,
                                                  const std::vector<const PolicyBoundaries*>& policies,
                                                  const SimConfig& cfg, long path_index);

struct Estimate {
    double mean = 0.0;
    double se = 0.0;
};

struct PolicyEstimate {
    Estimate total;
    double running = 0.0, up = 0.0, down = 0.0;  // component means
    double tail_bound = 0.0;  // e^{-rho T} times the do-nothing cost from the terminal states
};

struct PolicyComparison {
    std::vector<PolicyEstimate> policies;
    /// Per-path difference policy[k] - policy[0]; entry 0 is zero.
    std::vector<Estimate> diff_vs_first;
    long npaths = 0;
};

PolicyEstimate evaluate_policy(const ModelParams& params, const CostSpec& cost,
                               const PolicyBoundaries& policy, const SimConfig& cfg);

PolicyComparison evaluate_policies(const ModelParams& params, const CostSpec& cost,
                                   const std::vector<PolicyBoundaries>& policies, const SimConfig& cfg);

/// Cost of never acting, mixed over the prior: pi0 R(x0; mu1) + (1 - pi0) R(x0; mu0).
double do_nothing_cost(const ModelParams& params, const CostSpec& cost, double x0, double pi0);

/// Monte Carlo of the Dynkin game under the decoupled dynamics: stop at the
/// first grid time with X <= c+(Y) (payoff -K+ q) or X >= c-(Y) (payoff K- q),
/// accruing e^{-rho t} q C'(X) dt before. Paths alive at the horizon keep their
/// running payoff only. The q weight is removed by a change of drift (see the
/// source), which keeps the estimator's variance finite.
Estimate simulate_dynkin_value(const ModelParams& params, const CostSpec& cost, const BoundaryPair& c,
                               double x, double y, const SimConfig& cfg);

/// Monte Carlo of the representation
///   E int_0^S e^{-rho s} q(X_s, Y_s) {C'(X_s) 1{c+ < X_s < c-} + rho K- 1{X_s >= c-} - rho K+ 1{X_s <= c+}} ds
/// with X_s = x + mu0 s + eta W_s sampled exactly on s = t^2, t uniform, Simpson in t (nsteps even),
/// estimated through the same change of drift as simulate_dynkin_value.
/// With include_rho = false the K terms lose their factor rho (for the
/// discrepancy check only).
Estimate representation_mc(const ModelParams& params, const CostSpec& cost, const BoundaryPair& c,
                           double x, double y, long npaths, std::uint64_t seed, int nsteps = 400,
                           bool include_rho = true);

struct MartingaleRow {
    double horizon;
    Estimate pi_T;        // true measure
    double pi_var;        // sample variance of Pi_T
    Estimate phi_T;       // decoupled measure
};

struct MartingaleReport {
    double pi0, phi0;
    std::vector<MartingaleRow> rows;
};

/// Exact sampling of Pi_T and Phi_T at each horizon.
MartingaleReport martingale_suite(const ModelParams& params, double pi0, const std::vector<double>& horizons,
                                  long npaths, std::uint64_t seed);

/// Mean over paths of the pathwise sup |Pi explicit - Pi SDE| on [0, horizon]
/// for each dt; all levels share one Brownian path per sample (nested grids).
/// dts must be integer multiples of the smallest one.
std::vector<double> filter_gap_study(const ModelParams& params, double pi0, double horizon,
                                     const std::vector<double>& dts, long npaths, std::uint64_t seed);

/// Least-squares slope of log(gap) against log(dt).
double loglog_slope(const std::vector<double>& dts, const std::vector<double>& gaps);

}  // namespace bvctl
