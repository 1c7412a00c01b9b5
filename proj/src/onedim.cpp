#include "bvctl/onedim.hpp"

#include "bvctl/error.hpp"
#include "bvctl/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace bvctl {

std::pair<double, double> characteristic_roots(double drift, const ModelParams& params) noexcept {
    const double eta2 = params.eta() * params.eta();
    const double disc = std::sqrt(drift * drift + 2.0 * params.rho() * eta2);
    return {(-drift - disc) / eta2, (-drift + disc) / eta2};
}

Resolvent resolvent_cost(double x, double drift, const ModelParams& params, const CostSpec& cost) {
    const double rho = params.rho();
    const double eta2 = params.eta() * params.eta();
    if (cost.is_quadratic()) {
        const double d = x - cost.target();
        const double value = d * d / rho + 2.0 * d * drift / (rho * rho) +
                             2.0 * drift * drift / (rho * rho * rho) + eta2 / (rho * rho);
        return {value, 2.0 * d / rho + 2.0 * drift / (rho * rho), 2.0 / rho, 0.0, 0.0};
    }

    // Green's kernel of rho - L on the line:
    //   k e^{lneg (x - z)} for z < x,  k e^{lpos (x - z)} for z > x.
    const auto [lneg, lpos] = characteristic_roots(drift, params);
    const double k = 2.0 / (eta2 * (lpos - lneg));
    constexpr double tol = 1e-8;
    // each half-line is split at the cost kink, which the tail map would otherwise smear
    auto half_line = [&](auto&& g, double kink) {
        constexpr double inf = std::numeric_limits<double>::infinity();
        if (!(kink > 0.0)) return numerics::integrate(g, 0.0, inf, 0.125 * tol / k);
        const auto head = numerics::integrate(g, 0.0, kink, 0.125 * tol / k);
        const auto tail = numerics::integrate(g, kink, inf, 0.125 * tol / k);
        return numerics::IntegralResult{head.value + tail.value, head.error + tail.error};
    };
    auto against = [&](auto&& f) {
        const auto below = half_line([&](double u) { return std::exp(lneg * u) * f(x - u); }, x - cost.target());
        const auto above = half_line([&](double u) { return std::exp(-lpos * u) * f(x + u); }, cost.target() - x);
        return numerics::IntegralResult{k * (below.value + above.value),
                                        k * (below.error + above.error)};
    };
    const auto r0 = against([&](double z) { return cost.c(z); });
    const auto r1 = against([&](double z) { return cost.cprime(z); });
    // the remaining derivatives follow from the ODE rho R = drift R' + eta^2 R'' / 2 + C
    const double d2 = 2.0 / eta2 * (rho * r0.value - drift * r1.value - cost.c(x));
    const double d3 = 2.0 / eta2 * (rho * r1.value - drift * d2 - cost.cprime(x));
    return {r0.value, r1.value, d2, d3, r0.error + r1.error};
}

namespace {

// Homogeneous part a lneg e^{lneg (x - xa)} + b lpos e^{lpos (x - xb)} with fixed anchors.
struct Basis {
    double lneg, lpos, xa, xb;

    // d^k/dx^k of the a- and b-terms divided by a and b respectively, k = 0..2
    std::array<double, 3> neg(double x) const {
        const double e = std::exp(lneg * (x - xa));
        return {lneg * e, lneg * lneg * e, lneg * lneg * lneg * e};
    }
    std::array<double, 3> pos(double x) const {
        const double e = std::exp(lpos * (x - xb));
        return {lpos * e, lpos * lpos * e, lpos * lpos * lpos * e};
    }
};

// w, w', w'' at x
std::array<double, 3> band_value(double x, double a, double b, const Basis& h, double drift,
                                 const ModelParams& params, const CostSpec& cost) {
    const Resolvent r = resolvent_cost(x, drift, params, cost);
    const auto n = h.neg(x);
    const auto p = h.pos(x);
    return {a * n[0] + b * p[0] + r.d1, a * n[1] + b * p[1] + r.d2, a * n[2] + b * p[2] + r.d3};
}

Eigen::Vector4d smooth_fit_residual(const Eigen::Vector4d& u, const Basis& h, double drift,
                                    const ModelParams& params, const CostSpec& cost,
                                    Eigen::Matrix4d* jac) {
    const double a = u[0], b = u[1], l = u[2], r = u[3];
    const auto wl = band_value(l, a, b, h, drift, params, cost);
    const auto wr = band_value(r, a, b, h, drift, params, cost);
    if (jac) {
        const auto nl = h.neg(l), pl = h.pos(l), nr = h.neg(r), pr = h.pos(r);
        *jac << nl[0], pl[0], wl[1], 0.0,
                nl[1], pl[1], wl[2], 0.0,
                nr[0], pr[0], 0.0, wr[1],
                nr[1], pr[1], 0.0, wr[2];
    }
    return {wl[0] + params.kplus(), wl[1], wr[0] - params.kminus(), wr[1]};
}

OneDimSolution finish(double drift, double a, double b, double l, double r, const Basis& h,
                      bool newton, const ModelParams& params, const CostSpec& cost) {
    OneDimSolution s;
    s.drift = drift;
    s.lower = l;
    s.upper = r;
    s.lambda_neg = h.lneg;
    s.lambda_pos = h.lpos;
    // re-anchor at the solved boundaries
    s.coeff_neg = a * std::exp(h.lneg * (l - h.xa));
    s.coeff_pos = b * std::exp(h.lpos * (r - h.xb));
    s.newton_converged = newton;
    const Basis anchored{h.lneg, h.lpos, l, r};
    s.residual = smooth_fit_residual({s.coeff_neg, s.coeff_pos, l, r}, anchored, drift, params,
                                     cost, nullptr)
                     .cwiseAbs()
                     .maxCoeff();
    return s;
}

void check_solution(const OneDimSolution& s, const ModelParams& params, const CostSpec& cost) {
    if (!(s.residual <= 1e-9))
        throw NumericalError("solve_constant_drift: smooth-fit residual above 1e-9", s.residual);
    if (!(s.lower < s.upper))
        throw NumericalError("solve_constant_drift: boundaries not separated", s.upper - s.lower);
    if (s.lower > cost.cprime_inv(-params.rho() * params.kplus()) + 1e-9 ||
        s.upper < cost.cprime_inv(params.rho() * params.kminus()) - 1e-9)
        throw NumericalError("solve_constant_drift: boundaries violate the (C')^{-1} bounds",
                             s.residual);
}

}  // namespace

double OneDimSolution::game_value(double x, const ModelParams& params, const CostSpec& cost) const {
    if (x <= lower) return -params.kplus();
    if (x >= upper) return params.kminus();
    const Basis h{lambda_neg, lambda_pos, lower, upper};
    return band_value(x, coeff_neg, coeff_pos, h, drift, params, cost)[0];
}

double OneDimSolution::game_slope(double x, const ModelParams& params, const CostSpec& cost) const {
    if (x <= lower || x >= upper) return 0.0;
    const Basis h{lambda_neg, lambda_pos, lower, upper};
    return band_value(x, coeff_neg, coeff_pos, h, drift, params, cost)[1];
}

OneDimSolution solve_constant_drift(double drift, const ModelParams& params, const CostSpec& cost) {
    const auto [lneg, lpos] = characteristic_roots(drift, params);
    const double l0 = cost.cprime_inv(-params.rho() * params.kplus()) - 1.0;
    const double r0 = cost.cprime_inv(params.rho() * params.kminus()) + 1.0;
    const Basis h{lneg, lpos, l0, r0};

    // start from the coefficients that make w' vanish at both initial boundaries
    Eigen::Vector4d u;
    {
        const auto nl = h.neg(l0), pl = h.pos(l0), nr = h.neg(r0), pr = h.pos(r0);
        Eigen::Matrix2d m;
        m << nl[1], pl[1], nr[1], pr[1];
        const Eigen::Vector2d rhs(-resolvent_cost(l0, drift, params, cost).d2,
                                  -resolvent_cost(r0, drift, params, cost).d2);
        const Eigen::Vector2d ab = m.partialPivLu().solve(rhs);
        u << ab[0], ab[1], l0, r0;
    }

    Eigen::Matrix4d jac;
    Eigen::Vector4d f = smooth_fit_residual(u, h, drift, params, cost, &jac);
    bool converged = false;
    for (int it = 0; it < 100 && !converged; ++it) {
        const Eigen::Vector4d step = jac.fullPivLu().solve(-f);
        if (!step.allFinite()) break;
        double damping = 1.0;
        bool accepted = false;
        for (int k = 0; k < 40; ++k) {
            const Eigen::Vector4d trial = u + damping * step;
            if (trial[2] < trial[3]) {
                Eigen::Matrix4d jt;
                const Eigen::Vector4d ft = smooth_fit_residual(trial, h, drift, params, cost, &jt);
                if (ft.allFinite() && ft.cwiseAbs().maxCoeff() < f.cwiseAbs().maxCoeff()) {
                    u = trial;
                    f = ft;
                    jac = jt;
                    accepted = true;
                    break;
                }
            }
            damping *= 0.5;
        }
        if (f.cwiseAbs().maxCoeff() < 1e-12) converged = true;
        if (!accepted) break;
    }
    if (converged || f.cwiseAbs().maxCoeff() <= 1e-10) {
        OneDimSolution s = finish(drift, u[0], u[1], u[2], u[3], h, true, params, cost);
        check_solution(s, params, cost);
        return s;
    }
    return solve_constant_drift_bisection(drift, params, cost);
}

OneDimSolution solve_constant_drift_bisection(double drift, const ModelParams& params,
                                              const CostSpec& cost) {
    const auto [lneg, lpos] = characteristic_roots(drift, params);
    const double l_hi = cost.cprime_inv(-params.rho() * params.kplus());
    const double r_min = cost.cprime_inv(params.rho() * params.kminus());

    // For a trial lower boundary l, the conditions w(l) = -K+, w'(l) = 0 fix the
    // coefficients. w then rises until w' first vanishes at r(l); the overshoot
    // w(r(l)) - K- is monotone in l and vanishes at the solution.
    struct Trial {
        double a, b, r, mismatch;
    };
    auto trial = [&](double l) {
        const Basis h{lneg, lpos, l, l};
        const Resolvent rl = resolvent_cost(l, drift, params, cost);
        const auto n = h.neg(l), p = h.pos(l);
        Eigen::Matrix2d m;
        m << n[0], p[0], n[1], p[1];
        const Eigen::Vector2d ab = m.partialPivLu().solve(Eigen::Vector2d(-params.kplus() - rl.d1, -rl.d2));
        auto w = [&](double x) { return band_value(x, ab[0], ab[1], h, drift, params, cost); };
        const double span = 4.0 * (r_min - l) + 10.0 * params.eta() / std::sqrt(params.rho());
        const int steps = 4000;
        const double dx = span / steps;
        double xprev = l + 1e-9;
        for (int i = 1; i <= steps; ++i) {
            const double x = l + i * dx;
            const auto wx = w(x);
            if (wx[1] <= 0.0) {
                const double r = numerics::find_root([&](double z) { return w(z)[1]; }, xprev, x, 1e-14);
                return Trial{ab[0], ab[1], r, w(r)[0] - params.kminus()};
            }
            if (wx[0] > params.kminus() + 1e3 * (params.kplus() + params.kminus()))
                return Trial{ab[0], ab[1], x, std::numeric_limits<double>::infinity()};
            xprev = x;
        }
        return Trial{ab[0], ab[1], l + span, std::numeric_limits<double>::infinity()};
    };

    // walk down until w overshoots K-
    double hi = l_hi - 1e-9;
    double lo = l_hi - 1.0;
    Trial tlo = trial(lo);
    for (int k = 0; k < 60 && !(tlo.mismatch > 0); ++k) {
        lo -= std::pow(2.0, k);
        tlo = trial(lo);
    }
    Trial thi = trial(hi);
    if (!(tlo.mismatch > 0) || !(thi.mismatch < 0))
        throw NumericalError("solve_constant_drift: bisection could not bracket the lower boundary",
                             std::min(std::abs(tlo.mismatch), std::abs(thi.mismatch)));
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (trial(mid).mismatch > 0) lo = mid;
        else hi = mid;
    }
    const double l = 0.5 * (lo + hi);
    const Trial t = trial(l);
    OneDimSolution s = finish(drift, t.a, t.b, l, t.r, Basis{lneg, lpos, l, l}, false, params, cost);
    check_solution(s, params, cost);
    return s;
}

XStarBounds bounds_xstar(const ModelParams& params, const CostSpec& cost) {
    const OneDimSolution high = solve_constant_drift(params.mu1(), params, cost);
    const OneDimSolution low = solve_constant_drift(params.mu0(), params, cost);
    return {high.lower, low.upper};
}

}  // namespace bvctl
