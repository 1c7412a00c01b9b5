#include "bvctl/boundary.hpp"

#include "bvctl/error.hpp"
#include "bvctl/numerics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bvctl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// L2 isotonic (nondecreasing) regression with unit weights.
void pav_increasing(std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> mean;
    std::vector<std::size_t> count;
    mean.reserve(n);
    count.reserve(n);
    for (double x : v) {
        mean.push_back(x);
        count.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
            const std::size_t c2 = count.back();
            const double m2 = mean.back();
            mean.pop_back();
            count.pop_back();
            const std::size_t c1 = count.back();
            mean.back() = (mean.back() * c1 + m2 * c2) / static_cast<double>(c1 + c2);
            count.back() = c1 + c2;
        }
    }
    std::size_t k = 0;
    for (std::size_t b = 0; b < mean.size(); ++b)
        for (std::size_t j = 0; j < count[b]; ++j) v[k++] = mean[b];
}

// projection onto {c : c - y nonincreasing}
void project_slope_le_one(std::span<const double> y, std::vector<double>& v) {
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = y[i] - v[i];
    pav_increasing(d);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = y[i] - d[i];
}

// P(alpha < Z < beta) for standard normal Z, accurate in both tails
double normal_mass(double alpha, double beta) noexcept {
    if (!(beta > alpha)) return 0.0;
    if (alpha > 0) return numerics::normal_sf(alpha) - numerics::normal_sf(beta);
    return numerics::normal_cdf(beta) - numerics::normal_cdf(alpha);
}

double pdf_or_zero(double z) noexcept { return std::isfinite(z) ? numerics::normal_pdf(z) : 0.0; }

double cprime_slope(const CostSpec& cost) {
    const double t = cost.target();
    return std::max(cost.cprime(t + 1.0) - cost.cprime(t), cost.cprime(t) - cost.cprime(t - 1.0));
}

// Gauss-Legendre panels in t = sqrt(s), refined geometrically towards t = 0
struct TimeRule {
    std::vector<double> s;
    std::vector<double> w;  // includes ds = 2 t dt and the discount
};

TimeRule time_rule(double smax, double rho) {
    const auto& gl = numerics::gauss_legendre(64);
    const double tmax = std::sqrt(smax);
    constexpr int panels = 12;
    std::vector<double> edges{0.0};
    for (int k = 0; k < panels; ++k)
        edges.push_back(tmax * std::pow(1e-3, 1.0 - k / static_cast<double>(panels - 1)));
    TimeRule rule;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double half = 0.5 * (edges[p + 1] - edges[p]);
        const double mid = 0.5 * (edges[p + 1] + edges[p]);
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double t = mid + half * gl.nodes[i];
            rule.s.push_back(t * t);
            rule.w.push_back(half * gl.weights[i] * 2.0 * t * std::exp(-rho * t * t));
        }
    }
    return rule;
}

}  // namespace

// ---------------------------------------------------------------------------

double BoundaryPair::cplus_at(double y) const noexcept { return numerics::interp_flat(ygrid, cplus, y); }
double BoundaryPair::cminus_at(double y) const noexcept { return numerics::interp_flat(ygrid, cminus, y); }

BoundaryBox boundary_box(const ModelParams& params, const CostSpec& cost) {
    const XStarBounds xs = bounds_xstar(params, cost);
    return {xs.xplus, cost.cprime_inv(-params.rho() * params.kplus()),
            cost.cprime_inv(params.rho() * params.kminus()), xs.xminus};
}

std::vector<double> uniform_grid(double lo, double hi, int n) {
    if (n < 2 || !(hi > lo)) throw ValidationError("grid", "need n >= 2 and hi > lo");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = lo + (hi - lo) * i / (n - 1);
    g.back() = hi;
    return g;
}

void project_monotone_lipschitz(std::span<const double> y, std::span<double> c, double lo, double hi) {
    const std::size_t n = c.size();
    if (n == 0) return;
    // Dykstra's alternating projections between the two cones
    std::vector<double> x(c.begin(), c.end()), p(n, 0.0), q(n, 0.0), a(n), prev(n);
    for (int it = 0; it < 2000; ++it) {
        prev = x;
        for (std::size_t i = 0; i < n; ++i) a[i] = x[i] + p[i];
        pav_increasing(a);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = x[i] + p[i] - a[i];
            x[i] = a[i] + q[i];
        }
        project_slope_le_one(y, x);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            q[i] = a[i] + q[i] - x[i];
            change = std::max(change, std::abs(x[i] - prev[i]));
        }
        if (change < 1e-15) break;
    }

    // exact repair: every pair (i, j) must satisfy 0 <= c_j - c_i <= y_j - y_i in floating point
    c[0] = std::clamp(x[0], lo, hi);
    for (std::size_t j = 1; j < n; ++j) {
        double v = std::clamp(x[j], lo, hi);
        for (std::size_t i = 0; i < j; ++i) v = std::min(v, c[i] + (y[j] - y[i]));
        for (std::size_t i = 0; i < j; ++i)
            while (v - c[i] > y[j] - y[i]) v = std::nextafter(v, -kInf);
        c[j] = std::max(v, c[j - 1]);
    }
}

std::string check_boundary_invariants(const BoundaryPair& c, const BoundaryBox& box) {
    const std::size_t n = c.ygrid.size();
    if (c.cplus.size() != n || c.cminus.size() != n) return "size mismatch";
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (!(c.ygrid[i + 1] > c.ygrid[i])) return fmt::format("ygrid not increasing at {}", i);
    for (std::size_t j = 0; j < n; ++j) {
        const double p = c.cplus[j], m = c.cminus[j], y = c.ygrid[j];
        if (!(p >= box.plus_lo && p <= box.plus_hi))
            return fmt::format("c_plus({}) = {} outside [{}, {}]", y, p, box.plus_lo, box.plus_hi);
        if (!(m >= box.minus_lo && m <= box.minus_hi))
            return fmt::format("c_minus({}) = {} outside [{}, {}]", y, m, box.minus_lo, box.minus_hi);
        if (!(p < m)) return fmt::format("c_plus >= c_minus at y = {}", y);
        for (std::size_t i = 0; i < j; ++i) {
            const double dy = y - c.ygrid[i];
            const double dp = p - c.cplus[i], dm = m - c.cminus[i];
            if (!(dp >= 0 && dp <= dy))
                return fmt::format("c_plus violates monotone/Lipschitz between y = {} and {}", c.ygrid[i], y);
            if (!(dm >= 0 && dm <= dy))
                return fmt::format("c_minus violates monotone/Lipschitz between y = {} and {}", c.ygrid[i], y);
        }
    }
    return {};
}

// ---------------------------------------------------------------------------

double inner_integral(double cplus, double cminus, double ys, double m, double var,
                      const ModelParams& params, const CostSpec& cost) {
    if (!(var > 0)) throw ValidationError("var", "Gaussian variance must be positive");
    const double a = params.tilt();
    const double sd = std::sqrt(var);
    const double top = std::max(cplus, cminus);
    const double lower_pay = -params.rho() * params.kplus();
    const double upper_pay = params.rho() * params.kminus();

    // q(z, ys) G(z; m, var) = G(z; m, var) + w G(z; m + a var, var)
    const double means[2] = {m, m + a * var};
    const double weights[2] = {1.0, std::exp(a * (m - ys) + 0.5 * a * a * var)};

    double total = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double mu = means[k];
        const double alpha = (cplus - mu) / sd;
        const double beta = (top - mu) / sd;
        const double p_low = numerics::normal_cdf(alpha);
        const double p_high = numerics::normal_sf(beta);
        double middle = 0.0;
        if (top > cplus) {
            // C' is linear on each side of the target: int 2 slope (z - target) G via truncated moments
            auto piece = [&](double lo, double hi, double slope) {
                if (!(hi > lo)) return 0.0;
                const double za = (lo - mu) / sd, zb = (hi - mu) / sd;
                const double mass = normal_mass(za, zb);
                const double first = mu * mass - sd * (pdf_or_zero(zb) - pdf_or_zero(za));
                return 2.0 * slope * (first - cost.target() * mass);
            };
            const double t = cost.target();
            middle = piece(cplus, std::min(top, t), cost.shortage()) + piece(std::max(cplus, t), top, cost.holding());
        }
        total += weights[k] * (lower_pay * p_low + middle + upper_pay * p_high);
    }
    return total;
}

RhsResult rhs_integral(const BoundaryPair& c, double y, double x, const ModelParams& params,
                       const CostSpec& cost, double shift_plus, double shift_minus) {
    const double rho = params.rho();
    const double b = params.ydrift();
    const double eta2 = params.eta() * params.eta();
    const double qxy = weight_q(x, y, params);

    // |inner| <= q(x, y) (A + B s + C sqrt(s)); the tilted mean moves at speed mu1
    const double slope = cprime_slope(cost);
    const double A = rho * std::max(params.kplus(), params.kminus()) + slope * std::abs(x - cost.target());
    const double B = slope * std::max(std::abs(params.mu0()), std::abs(params.mu1()));
    const double C = slope * params.eta();
    auto tail = [&](double s) {
        return qxy * std::exp(-rho * s) * ((A + C) / rho + (B + C) * (s / rho + 1.0 / (rho * rho)));
    };
    double smax = 20.0 / rho;
    while (tail(smax) > 1e-10 && smax < 4000.0 / rho) smax *= 1.1;

    const TimeRule rule = time_rule(smax, rho);
    double total = 0.0;
    if (b == 0.0) {
        const double cp = c.cplus_at(y) + shift_plus;
        const double cm = c.cminus_at(y) + shift_minus;
        for (std::size_t i = 0; i < rule.s.size(); ++i) {
            const double s = rule.s[i];
            total += rule.w[i] * inner_integral(cp, cm, y, x + params.mu0() * s, eta2 * s, params, cost);
        }
    } else {
        for (std::size_t i = 0; i < rule.s.size(); ++i) {
            const double s = rule.s[i];
            const double ys = y + b * s;
            total += rule.w[i] * inner_integral(c.cplus_at(ys) + shift_plus, c.cminus_at(ys) + shift_minus,
                                                ys, x + params.mu0() * s, eta2 * s, params, cost);
        }
    }
    return {total, tail(smax)};
}

// ---------------------------------------------------------------------------

namespace {

// Root of an increasing function, searched first near a guess.
double increasing_root(const std::function<double(double)>& f, double guess, double lo_full,
                       double hi_full, double y) {
    double delta = 0.05;
    double lo = std::max(lo_full, guess - delta), hi = std::min(hi_full, guess + delta);
    double flo = f(lo), fhi = f(hi);
    while (!(flo <= 0 && fhi >= 0)) {
        if (lo <= lo_full && hi >= hi_full)
            throw NumericalError(fmt::format("solve_boundaries: no root in [{}, {}] at y = {}", lo_full,
                                             hi_full, y),
                                 std::min(std::abs(flo), std::abs(fhi)));
        delta *= 2.0;
        if (flo > 0) {
            hi = lo;
            fhi = flo;
            lo = std::max(lo_full, guess - delta);
            flo = f(lo);
        } else {
            lo = hi;
            flo = fhi;
            hi = std::min(hi_full, guess + delta);
            fhi = f(hi);
        }
    }
    return numerics::find_root(f, lo, hi, 1e-12);
}

}  // namespace

BoundaryPair solve_boundaries(const ModelParams& params, const CostSpec& cost,
                              std::vector<double> ygrid, const SolverOptions& opts) {
    for (std::size_t i = 0; i + 1 < ygrid.size(); ++i)
        if (!(ygrid[i + 1] > ygrid[i])) throw ValidationError("ygrid", "must be strictly increasing");
    if (ygrid.size() < 3) throw ValidationError("ygrid", "need at least 3 nodes");
    if (!(opts.tol > 0)) throw ValidationError("solver.tol", "must be positive");

    const BoundaryBox box = boundary_box(params, cost);
    const double lo_full = box.plus_lo - 1.0;
    const double hi_full = box.minus_hi + 1.0;
    const std::size_t n = ygrid.size();

    BoundaryPair cur;
    cur.ygrid = std::move(ygrid);
    cur.cplus.assign(n, box.plus_lo);
    cur.cminus.assign(n, box.minus_hi);

    BoundaryPair best = cur;
    double best_change = kInf;
    bool damped = false;
    double prev_change = kInf;

    for (int k = 1; k <= opts.max_iter; ++k) {
        // c+ update: the integrand's c+ curve is translated to pass through (x, y)
        std::vector<double> next(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double y = cur.ygrid[i];
            const double anchor = cur.cplus[i];
            auto h = [&](double x) {
                return params.kplus() * weight_q(x, y, params) +
                       rhs_integral(cur, y, x, params, cost, x - anchor, 0.0).value;
            };
            next[i] = increasing_root(h, anchor, lo_full, hi_full, y);
        }
        if (damped)
            for (std::size_t i = 0; i < n; ++i) next[i] = cur.cplus[i] + opts.damping * (next[i] - cur.cplus[i]);
        project_monotone_lipschitz(cur.ygrid, next, box.plus_lo, box.plus_hi);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - cur.cplus[i]));
        cur.cplus = next;

        // c- update against the new c+
        for (std::size_t i = 0; i < n; ++i) {
            const double y = cur.ygrid[i];
            const double anchor = cur.cminus[i];
            auto h = [&](double x) {
                return rhs_integral(cur, y, x, params, cost, 0.0, x - anchor).value -
                       params.kminus() * weight_q(x, y, params);
            };
            next[i] = increasing_root(h, anchor, lo_full, hi_full, y);
        }
        if (damped)
            for (std::size_t i = 0; i < n; ++i) next[i] = cur.cminus[i] + opts.damping * (next[i] - cur.cminus[i]);
        project_monotone_lipschitz(cur.ygrid, next, box.minus_lo, box.minus_hi);
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - cur.cminus[i]));
        cur.cminus = next;

        cur.history.push_back(change);
        cur.iterations = k;
        cur.residual = change;
        if (change < best_change) {
            best_change = change;
            best = cur;
        }
        if (change < opts.tol) {
            cur.converged = true;
            break;
        }
        if (k > 1 && change > prev_change) damped = true;
        prev_change = change;
    }

    BoundaryPair out = cur.converged ? cur : best;
    out.history = cur.history;
    out.iterations = cur.iterations;
    if (!cur.converged)
        out.warnings.push_back(fmt::format("no convergence after {} iterations; best change {:.3g}",
                                           cur.iterations, best_change));

    const std::size_t h = out.history.size();
    if (h >= 5)
        for (std::size_t i = h - 4; i < h; ++i)
            if (out.history[i] > out.history[i - 1]) {
                out.warnings.push_back("sup-norm change not monotone over the final 5 iterations");
                break;
            }

    const double edge = edge_increment(out);
    if (!(edge < 1e-3))
        out.warnings.push_back(fmt::format(
            "boundaries not flat near the grid ends (increment {:.3g}); widen the y-range", edge));

    out.equation_residual = equation_residual(out, params, cost);
    if (out.equation_residual > 10.0 * opts.tol) {
        out.warnings.push_back(fmt::format("self-consistency residual {:.3g} exceeds 10 tol",
                                           out.equation_residual));
        out.converged = false;
    }
    return out;
}

double equation_residual(const BoundaryPair& c, const ModelParams& params, const CostSpec& cost) {
    double worst = 0.0;
    for (std::size_t i = 0; i < c.ygrid.size(); ++i) {
        const double y = c.ygrid[i];
        const double xp = c.cplus[i], xm = c.cminus[i];
        const double qp = params.kplus() * weight_q(xp, y, params);
        const double qm = params.kminus() * weight_q(xm, y, params);
        worst = std::max(worst, std::abs(qp + rhs_integral(c, y, xp, params, cost).value) / qp);
        worst = std::max(worst, std::abs(qm - rhs_integral(c, y, xm, params, cost).value) / qm);
    }
    return worst;
}

double edge_increment(const BoundaryPair& c) {
    const std::size_t n = c.ygrid.size();
    const std::size_t m = std::max<std::size_t>(1, n / 10);
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (i >= m && i + 1 < n - m) continue;
        worst = std::max({worst, c.cplus[i + 1] - c.cplus[i], c.cminus[i + 1] - c.cminus[i]});
    }
    return worst;
}

// ---------------------------------------------------------------------------

double cplus_inverse(const BoundaryPair& c, double x) noexcept {
    const auto& v = c.cplus;
    if (x < v.front()) return -kInf;
    if (x >= v.back()) return kInf;
    const std::size_t i = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), x) - v.begin()) - 1;
    // v[i] <= x < v[i+1]
    return c.ygrid[i] + (x - v[i]) / (v[i + 1] - v[i]) * (c.ygrid[i + 1] - c.ygrid[i]);
}

double cminus_inverse(const BoundaryPair& c, double x) noexcept {
    const auto& v = c.cminus;
    if (x <= v.front()) return -kInf;
    if (x > v.back()) return kInf;
    const std::size_t j = static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
    // v[j-1] < x <= v[j]
    return c.ygrid[j - 1] + (x - v[j - 1]) / (v[j] - v[j - 1]) * (c.ygrid[j] - c.ygrid[j - 1]);
}

double bplus_inverse(const BoundaryPair& c, double x, const ModelParams& params) noexcept {
    return std::exp(params.tilt() * (x - cplus_inverse(c, x)));
}

double bminus_inverse(const BoundaryPair& c, double x, const ModelParams& params) noexcept {
    return std::exp(params.tilt() * (x - cminus_inverse(c, x)));
}

double bplus_from(const BoundaryPair& c, double log_phi, const ModelParams& params) {
    const double shift = log_phi / params.tilt();
    // g(x) = x - c+(x - shift) is nondecreasing; b+ = sup{g <= 0}
    auto g = [&](double x) { return x - c.cplus_at(x - shift); };
    double lo = *std::min_element(c.cplus.begin(), c.cplus.end()) - 1.0;
    double hi = *std::max_element(c.cplus.begin(), c.cplus.end()) + 1.0;
    for (int it = 0; it < 2000 && std::nextafter(lo, hi) < hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) <= 0) lo = mid;
        else hi = mid;
    }
    return lo;
}

double bminus_from(const BoundaryPair& c, double log_phi, const ModelParams& params) {
    const double shift = log_phi / params.tilt();
    // h(x) = x - c-(x - shift) is nondecreasing; b- = inf{h >= 0}
    auto h = [&](double x) { return x - c.cminus_at(x - shift); };
    double lo = *std::min_element(c.cminus.begin(), c.cminus.end()) - 1.0;
    double hi = *std::max_element(c.cminus.begin(), c.cminus.end()) + 1.0;
    for (int it = 0; it < 2000 && std::nextafter(lo, hi) < hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) >= 0) hi = mid;
        else lo = mid;
    }
    return hi;
}

std::vector<double> default_log_phigrid(int n) {
    if (n % 2 == 0) ++n;
    return uniform_grid(-30.0, 30.0, n);
}

PolicyBoundaries to_policy(const BoundaryPair& c, const ModelParams& params,
                           std::vector<double> log_phigrid) {
    if (log_phigrid.size() < 2) throw ValidationError("phigrid", "need at least 2 nodes");
    PolicyBoundaries p;
    p.log_phigrid = std::move(log_phigrid);
    const std::size_t n = p.log_phigrid.size();
    p.bplus.resize(n);
    p.bminus.resize(n);
    const auto [plo, phi] = std::minmax_element(c.cplus.begin(), c.cplus.end());
    const auto [mlo, mhi] = std::minmax_element(c.cminus.begin(), c.cminus.end());
    for (std::size_t k = 0; k < n; ++k) {
        p.bplus[k] = std::clamp(bplus_from(c, p.log_phigrid[k], params), *plo, *phi);
        p.bminus[k] = std::clamp(bminus_from(c, p.log_phigrid[k], params), *mlo, *mhi);
        if (k > 0) {
            p.bplus[k] = std::min(p.bplus[k], p.bplus[k - 1]);
            p.bminus[k] = std::min(p.bminus[k], p.bminus[k - 1]);
        }
    }
    return p;
}

PolicyBoundaries PolicyBoundaries::do_nothing() { return {}; }

PolicyBoundaries PolicyBoundaries::shifted(double dplus, double dminus) const {
    PolicyBoundaries out = *this;
    for (double& b : out.bplus) b += dplus;
    for (double& b : out.bminus) b += dminus;
    return out;
}

PolicyBoundaries::Cell PolicyBoundaries::locate(double log_phi) const noexcept {
    const std::size_t n = log_phigrid.size();
    const double l0 = log_phigrid.front();
    const double h = (log_phigrid.back() - l0) / static_cast<double>(n - 1);
    const double u = (log_phi - l0) / h;
    if (!(u > 0)) return {0, 0.0};
    const std::size_t i = static_cast<std::size_t>(u);
    if (i + 1 >= n) return {n - 2, 1.0};
    return {i, u - static_cast<double>(i)};
}

bool PolicyBoundaries::same_grid(const PolicyBoundaries& other) const noexcept {
    return log_phigrid.size() == other.log_phigrid.size() && !log_phigrid.empty() &&
           log_phigrid.front() == other.log_phigrid.front() && log_phigrid.back() == other.log_phigrid.back();
}

double PolicyBoundaries::bplus_at_log(double log_phi) const noexcept {
    if (is_do_nothing()) return -kInf;
    const Cell c = locate(log_phi);
    return bplus[c.i] + c.w * (bplus[c.i + 1] - bplus[c.i]);
}

double PolicyBoundaries::bminus_at_log(double log_phi) const noexcept {
    if (is_do_nothing()) return kInf;
    const Cell c = locate(log_phi);
    return bminus[c.i] + c.w * (bminus[c.i + 1] - bminus[c.i]);
}

std::vector<double> PolicyBoundaries::phigrid() const {
    std::vector<double> out(log_phigrid.size());
    std::transform(log_phigrid.begin(), log_phigrid.end(), out.begin(), [](double l) { return std::exp(l); });
    return out;
}

std::string check_policy_invariants(const PolicyBoundaries& p, const BoundaryBox& box) {
    for (std::size_t k = 0; k < p.log_phigrid.size(); ++k) {
        if (!(p.bplus[k] >= box.plus_lo && p.bminus[k] <= box.minus_hi))
            return fmt::format("b outside [x+*, x-*] at log phi = {}", p.log_phigrid[k]);
        if (!(p.bplus[k] < p.bminus[k])) return fmt::format("b+ >= b- at log phi = {}", p.log_phigrid[k]);
        if (k > 0 && (p.bplus[k] > p.bplus[k - 1] || p.bminus[k] > p.bminus[k - 1]))
            return fmt::format("b not nonincreasing at log phi = {}", p.log_phigrid[k]);
    }
    return {};
}

}  // namespace bvctl
