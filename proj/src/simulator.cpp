#include "bvctl/simulator.hpp"

#include "bvctl/error.hpp"
#include "bvctl/onedim.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace bvctl {

namespace {

using Engine = std::mt19937_64;

// one independent stream per (seed, path)
Engine path_engine(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    return Engine(seq);
}

struct Welford {
    long n = 0;
    double mean = 0.0, m2 = 0.0;
    void add(double v) {
        ++n;
        const double d = v - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (v - mean);
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    Estimate estimate() const {
        return {mean, n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0};
    }
};

double logistic(double l) noexcept {
    const double pi = l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
    return std::clamp(pi, kBeliefClamp, 1.0 - kBeliefClamp);
}

}  // namespace

long SimConfig::steps() const { return std::lround(horizon / dt); }

void SimConfig::validate(const ModelParams& params) const {
    if (!(dt > 0) || !std::isfinite(dt)) throw ValidationError("sim.dt", "must be positive");
    if (!(horizon * params.rho() >= 20.0))
        throw ValidationError("sim.horizon", "rho * horizon must be at least 20");
    if (npaths < 1) throw ValidationError("sim.npaths", "must be at least 1");
    if (!(pi0 > 0 && pi0 < 1)) throw ValidationError("sim.pi0", "must lie in (0, 1)");
    if (!std::isfinite(x0)) throw ValidationError("sim.x0", "must be finite");
}

namespace {

// Core of the reflected simulation; the trace, if any, follows policy 0.
std::vector<PathResult> run_path(const ModelParams& params, const CostSpec& cost,
                                 const std::vector<const PolicyBoundaries*>& policies,
                                 const SimConfig& cfg, long path_index, PathTrace* trace) {
    const std::size_t np = policies.size();
    std::vector<PathResult> res(np);
    std::vector<double> x(np, cfg.x0);

    Engine eng = path_engine(cfg.seed, static_cast<std::uint64_t>(path_index));
    boost::random::uniform_01<double> unif;
    boost::random::normal_distribution<double> normal;

    const bool q_mode = cfg.mode == SimMode::q_measure;
    double drift = params.mu0();
    if (!q_mode && unif(eng) < cfg.pi0) drift = params.mu1();

    const double a = params.tilt();
    const double b = params.ydrift();
    const double dt = cfg.dt;
    const double sd = params.eta() * std::sqrt(dt);
    const double decay = std::exp(-params.rho() * dt);
    const double phi0 = belief_to_likelihood(cfg.pi0);
    double log_phi = std::log(phi0);
    double weight = 1.0;  // (1 + Phi_t) / (1 + phi0) in q-mode
    double disc = 1.0;
    double s = cfg.x0;

    // policies on a common likelihood grid share one cell lookup per step
    std::vector<int> group(np, -1);
    for (std::size_t k = 0; k < np; ++k) {
        if (policies[k]->is_do_nothing()) continue;
        group[k] = static_cast<int>(k);
        for (std::size_t j = 0; j < k; ++j)
            if (group[j] >= 0 && policies[j]->same_grid(*policies[k])) {
                group[k] = group[j];
                break;
            }
    }
    std::vector<PolicyBoundaries::Cell> cell(np, {0, 0.0});
    auto locate_all = [&] {
        for (std::size_t k = 0; k < np; ++k)
            if (group[k] == static_cast<int>(k)) cell[k] = policies[k]->locate(log_phi);
    };

    auto project = [&](std::size_t k) {
        if (group[k] < 0) return;
        const PolicyBoundaries& pol = *policies[k];
        const auto [i, w] = cell[group[k]];
        const double bp = pol.bplus[i] + w * (pol.bplus[i + 1] - pol.bplus[i]);
        const double bm = pol.bminus[i] + w * (pol.bminus[i + 1] - pol.bminus[i]);
        if (x[k] < bp) {
            const double d = bp - x[k];
            x[k] = bp;
            res[k].p_plus += d;
            res[k].discounted_up_cost += weight * disc * params.kplus() * d;
        } else if (x[k] > bm) {
            const double d = x[k] - bm;
            x[k] = bm;
            res[k].p_minus += d;
            res[k].discounted_down_cost += weight * disc * params.kminus() * d;
        }
    };
    auto record = [&](double t) {
        if (!trace) return;
        trace->t.push_back(t);
        trace->x.push_back(x[0]);
        trace->log_phi.push_back(log_phi);
        trace->bplus.push_back(policies[0]->bplus_at_log(log_phi));
        trace->bminus.push_back(policies[0]->bminus_at_log(log_phi));
    };

    locate_all();
    for (std::size_t k = 0; k < np; ++k) project(k);
    record(0.0);

    const long n = cfg.steps();
    for (long step = 0; step < n; ++step) {
        for (std::size_t k = 0; k < np; ++k)
            res[k].discounted_running_cost += weight * disc * cost.c(x[k]) * dt;
        const double ds = drift * dt + sd * normal(eng);
        s += ds;
        log_phi += a * (ds - b * dt);
        disc *= decay;
        if (q_mode) weight = (1.0 + std::exp(log_phi)) / (1.0 + phi0);
        locate_all();
        for (std::size_t k = 0; k < np; ++k) {
            x[k] += ds;
            project(k);
        }
        record(static_cast<double>(step + 1) * dt);
    }
    for (std::size_t k = 0; k < np; ++k) {
        PathResult& r = res[k];
        r.total = r.discounted_running_cost + r.discounted_up_cost + r.discounted_down_cost;
        r.x_T = x[k];
        r.pi_T = logistic(log_phi);
        r.s_T = s;
    }
    return res;
}

}  // namespace

std::vector<PathResult> simulate_controlled_paths(const ModelParams& params, const CostSpec& cost,
                                                  const std::vector<const PolicyBoundaries*>& policies,
                                                  const SimConfig& cfg, long path_index) {
    return run_path(params, cost, policies, cfg, path_index, nullptr);
}

PathResult simulate_controlled_path(const ModelParams& params, const CostSpec& cost,
                                    const PolicyBoundaries& policy, const SimConfig& cfg,
                                    long path_index, PathTrace* trace) {
    return run_path(params, cost, {&policy}, cfg, path_index, trace).front();
}

PolicyComparison evaluate_policies(const ModelParams& params, const CostSpec& cost,
                                   const std::vector<PolicyBoundaries>& policies, const SimConfig& cfg) {
    cfg.validate(params);
    if (policies.empty()) throw ValidationError("policies", "need at least one policy");
    const std::size_t np = policies.size();
    std::vector<const PolicyBoundaries*> ptrs;
    for (const auto& p : policies) ptrs.push_back(&p);

    std::vector<Welford> total(np), running(np), up(np), down(np), diff(np), tail(np);
    const long stride = std::max(1L, cfg.npaths / 1000);
    const double tail_factor = std::exp(-params.rho() * cfg.steps() * cfg.dt);
    for (long path = 0; path < cfg.npaths; ++path) {
        const auto res = simulate_controlled_paths(params, cost, ptrs, cfg, path);
        for (std::size_t k = 0; k < np; ++k) {
            total[k].add(res[k].total);
            running[k].add(res[k].discounted_running_cost);
            up[k].add(res[k].discounted_up_cost);
            down[k].add(res[k].discounted_down_cost);
            diff[k].add(res[k].total - res[0].total);
            if (path % stride == 0) {
                const double worst =
                    std::max(resolvent_cost(res[k].x_T, params.mu0(), params, cost).value,
                             resolvent_cost(res[k].x_T, params.mu1(), params, cost).value);
                tail[k].add(tail_factor * worst);
            }
        }
    }
    PolicyComparison out;
    out.npaths = cfg.npaths;
    for (std::size_t k = 0; k < np; ++k) {
        PolicyEstimate e;
        e.total = total[k].estimate();
        e.running = running[k].mean;
        e.up = up[k].mean;
        e.down = down[k].mean;
        e.tail_bound = tail[k].mean;
        out.policies.push_back(e);
        out.diff_vs_first.push_back(k == 0 ? Estimate{} : diff[k].estimate());
    }
    return out;
}

PolicyEstimate evaluate_policy(const ModelParams& params, const CostSpec& cost,
                               const PolicyBoundaries& policy, const SimConfig& cfg) {
    return evaluate_policies(params, cost, {policy}, cfg).policies.front();
}

double do_nothing_cost(const ModelParams& params, const CostSpec& cost, double x0, double pi0) {
    return pi0 * resolvent_cost(x0, params.mu1(), params, cost).value +
           (1.0 - pi0) * resolvent_cost(x0, params.mu0(), params, cost).value;
}

// e^{(gamma/eta)(X_t - Y_t)} = e^{(gamma/eta)(x - y)} times the density that turns drift mu0
// into mu1, so every q-weighted expectation under mu0 splits into
//   E^{mu0}[F] + e^{(gamma/eta)(x - y)} E^{mu1}[F]
// with F free of q. Both parts have bounded integrands; the direct estimator
// does not (its weight is lognormal with variance growing like e^{gamma^2 t}).

Estimate simulate_dynkin_value(const ModelParams& params, const CostSpec& cost, const BoundaryPair& c,
                               double x, double y, const SimConfig& cfg) {
    if (!(cfg.dt > 0)) throw ValidationError("sim.dt", "must be positive");
    if (cfg.npaths < 2) throw ValidationError("sim.npaths", "need at least 2 paths");
    const double b = params.ydrift(), dt = cfg.dt, rho = params.rho();
    const double sd = params.eta() * std::sqrt(dt);
    const double phi = std::exp(params.tilt() * (x - y));
    const long n = cfg.steps();
    const double drifts[2] = {params.mu0(), params.mu1()};
    Welford acc;
    std::vector<double> z(n);
    for (long path = 0; path < cfg.npaths; ++path) {
        Engine eng = path_engine(cfg.seed, static_cast<std::uint64_t>(path));
        boost::random::normal_distribution<double> normal;
        for (long k = 0; k < n; ++k) z[k] = normal(eng);
        double parts[2] = {0.0, 0.0};
        for (int d = 0; d < 2; ++d) {
            double X = x, Y = y, payoff = 0.0, disc = 1.0;
            const double decay = std::exp(-rho * dt);
            for (long step = 0; step <= n; ++step) {
                if (X <= c.cplus_at(Y)) {
                    payoff -= disc * params.kplus();
                    break;
                }
                if (X >= c.cminus_at(Y)) {
                    payoff += disc * params.kminus();
                    break;
                }
                if (step == n) break;
                payoff += disc * cost.cprime(X) * dt;
                X += drifts[d] * dt + sd * z[step];
                Y += b * dt;
                disc *= decay;
            }
            parts[d] = payoff;
        }
        acc.add(parts[0] + phi * parts[1]);
    }
    return acc.estimate();
}

Estimate representation_mc(const ModelParams& params, const CostSpec& cost, const BoundaryPair& c,
                           double x, double y, long npaths, std::uint64_t seed, int nsteps,
                           bool include_rho) {
    if (nsteps < 2 || nsteps % 2) throw ValidationError("nsteps", "need an even count of at least 2");
    if (npaths < 2) throw ValidationError("npaths", "need at least 2 paths");
    const double b = params.ydrift(), rho = params.rho();
    const double kp = (include_rho ? rho : 1.0) * params.kplus();
    const double km = (include_rho ? rho : 1.0) * params.kminus();
    const double phi = std::exp(params.tilt() * (x - y));
    const double smax = 30.0 / rho;
    const double h = std::sqrt(smax) / nsteps;

    // static part of each node: time, discount and Simpson weight in t
    std::vector<double> s(nsteps + 1), w(nsteps + 1), sd(nsteps + 1), cp(nsteps + 1), cm(nsteps + 1);
    for (int k = 0; k <= nsteps; ++k) {
        const double t = k * h;
        s[k] = t * t;
        const double simpson = (k == 0 || k == nsteps) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        w[k] = simpson * h / 3.0 * 2.0 * t * std::exp(-rho * s[k]);
        sd[k] = k == 0 ? 0.0 : params.eta() * std::sqrt(s[k] - s[k - 1]);
        cp[k] = c.cplus_at(y + b * s[k]);
        cm[k] = c.cminus_at(y + b * s[k]);
    }
    auto g = [&](double X, int k) { return X <= cp[k] ? -kp : (X >= cm[k] ? km : cost.cprime(X)); };

    Welford acc;
    for (long path = 0; path < npaths; ++path) {
        Engine eng = path_engine(seed, static_cast<std::uint64_t>(path));
        boost::random::normal_distribution<double> normal;
        double X0 = x, X1 = x, i0 = 0.0, i1 = 0.0;
        for (int k = 1; k <= nsteps; ++k) {
            const double ds = s[k] - s[k - 1];
            const double dw = sd[k] * normal(eng);
            X0 += params.mu0() * ds + dw;
            X1 += params.mu1() * ds + dw;
            i0 += w[k] * g(X0, k);
            i1 += w[k] * g(X1, k);
        }
        acc.add(i0 + phi * i1);
    }
    return acc.estimate();
}

MartingaleReport martingale_suite(const ModelParams& params, double pi0, const std::vector<double>& horizons,
                                  long npaths, std::uint64_t seed) {
    if (npaths < 2) throw ValidationError("npaths", "need at least 2 paths");
    MartingaleReport rep;
    rep.pi0 = pi0;
    rep.phi0 = belief_to_likelihood(pi0);
    const double a = params.tilt(), b = params.ydrift(), g = params.gamma();
    for (std::size_t h = 0; h < horizons.size(); ++h) {
        const double T = horizons[h];
        if (!(T > 0)) throw ValidationError("horizon", "must be positive");
        Welford pi_acc, phi_acc;
        for (long path = 0; path < npaths; ++path) {
            Engine eng = path_engine(seed + h, static_cast<std::uint64_t>(path));
            boost::random::uniform_01<double> unif;
            boost::random::normal_distribution<double> normal;
            const double mu = unif(eng) < pi0 ? params.mu1() : params.mu0();
            const double ds = mu * T + params.eta() * std::sqrt(T) * normal(eng);
            pi_acc.add(logistic(std::log(rep.phi0) + a * (ds - b * T)));
            // decoupled measure: Phi_T = phi0 exp(gamma W_T - gamma^2 T / 2)
            phi_acc.add(rep.phi0 * std::exp(g * std::sqrt(T) * normal(eng) - 0.5 * g * g * T));
        }
        rep.rows.push_back({T, pi_acc.estimate(), pi_acc.variance(), phi_acc.estimate()});
    }
    return rep;
}

std::vector<double> filter_gap_study(const ModelParams& params, double pi0, double horizon,
                                     const std::vector<double>& dts, long npaths, std::uint64_t seed) {
    if (dts.empty()) throw ValidationError("dts", "need at least one step size");
    const double fine = *std::min_element(dts.begin(), dts.end());
    const long nfine = std::lround(horizon / fine);
    std::vector<long> ratio;
    for (double dt : dts) {
        const long m = std::lround(dt / fine);
        if (m < 1 || std::abs(m * fine - dt) > 1e-9 * dt || nfine % m != 0)
            throw ValidationError("dts", "each step must be an integer multiple of the smallest");
        ratio.push_back(m);
    }
    const double a = params.tilt(), b = params.ydrift();
    const double lphi0 = std::log(belief_to_likelihood(pi0));
    std::vector<Welford> acc(dts.size());
    std::vector<double> inc(nfine);
    for (long path = 0; path < npaths; ++path) {
        Engine eng = path_engine(seed, static_cast<std::uint64_t>(path));
        boost::random::uniform_01<double> unif;
        boost::random::normal_distribution<double> normal;
        const double mu = unif(eng) < pi0 ? params.mu1() : params.mu0();
        const double sd = params.eta() * std::sqrt(fine);
        for (long k = 0; k < nfine; ++k) inc[k] = mu * fine + sd * normal(eng);
        for (std::size_t lvl = 0; lvl < dts.size(); ++lvl) {
            const long m = ratio[lvl];
            const double dt = dts[lvl];
            double s = 0.0, pi = pi0, gap = 0.0;
            for (long k = 0; k < nfine / m; ++k) {
                double ds = 0.0;
                for (long i = 0; i < m; ++i) ds += inc[k * m + i];
                s += ds;
                pi = filter_sde_step(pi, ds, dt, params);
                const double t = static_cast<double>(k + 1) * dt;
                gap = std::max(gap, std::abs(logistic(lphi0 + a * (s - b * t)) - pi));
            }
            acc[lvl].add(gap);
        }
    }
    std::vector<double> out;
    for (const auto& w : acc) out.push_back(w.mean);
    return out;
}

double loglog_slope(const std::vector<double>& dts, const std::vector<double>& gaps) {
    const std::size_t n = dts.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(dts[i]), ly = std::log(gaps[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace bvctl
