#include "bvctl/pde.hpp"

#include "bvctl/error.hpp"
#include "bvctl/onedim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace bvctl {

void Grid2D::validate(const ModelParams& params, const CostSpec& cost) const {
    if (nx < 3) throw ValidationError("pde.nx", "need at least 3 nodes");
    if (ny < 3) throw ValidationError("pde.ny", "need at least 3 nodes");
    if (!(y_hi > y_lo)) throw ValidationError("pde.y_hi", "must exceed y_lo");
    const XStarBounds xs = bounds_xstar(params, cost);
    if (!(x_lo < xs.xplus - 1.0))
        throw ValidationError("pde.x_lo", fmt::format("must be below x+* - 1 = {:.6g}", xs.xplus - 1.0));
    if (!(x_hi > xs.xminus + 1.0))
        throw ValidationError("pde.x_hi", fmt::format("must exceed x-* + 1 = {:.6g}", xs.xminus + 1.0));
}

Stencil assemble_operator(const Grid2D& g, const ModelParams& params) {
    const double dx = g.dx(), dy = g.dy();
    const double diff = 0.5 * params.eta() * params.eta() / (dx * dx);
    const double mu = params.mu0();
    const double b = params.ydrift();
    Stencil s;
    s.west = diff + std::max(-mu, 0.0) / dx;
    s.east = diff + std::max(mu, 0.0) / dx;
    s.south = std::max(-b, 0.0) / dy;
    s.north = std::max(b, 0.0) / dy;
    s.diag = params.rho() + s.west + s.east + s.south + s.north;
    return s;
}

double Stencil::apply(const std::vector<double>& u, const Grid2D& g, int i, int j) const noexcept {
    const std::size_t k = g.index(i, j);
    double r = diag * u[k] - west * u[k - 1] - east * u[k + 1];
    if (south != 0.0) r -= south * u[k - g.nx];
    if (north != 0.0) r -= north * u[k + g.nx];
    return r;
}

namespace {

// PSOR on row j with the neighbouring row already fixed; returns sweeps used or -1 on divergence
long psor_row(const Grid2D& g, const Stencil& st, int j, const std::vector<double>& f,
              const std::vector<double>& lower, const std::vector<double>& upper,
              const std::vector<double>& scale, std::vector<double>& v, double omega, double tol,
              long max_sweeps, std::vector<double>* history, double& last_update) {
    const int nx = g.nx;
    const std::size_t base = g.index(0, j);
    std::vector<double> rhs(nx, 0.0);
    for (int i = 1; i < nx - 1; ++i) {
        const std::size_t k = base + i;
        double r = f[k];
        if (st.south != 0.0) r += st.south * v[k - nx];
        if (st.north != 0.0) r += st.north * v[k + nx];
        rhs[i] = r;
    }
    const double inv_diag = 1.0 / st.diag;
    double* row = v.data() + base;
    const double* lo = lower.data() + base;
    const double* hi = upper.data() + base;
    const double* sc = scale.data() + base;
    double first = -1.0;
    for (long sweep = 1; sweep <= max_sweeps; ++sweep) {
        double worst = 0.0;
        for (int i = 1; i < nx - 1; ++i) {
            const double gs = (rhs[i] + st.west * row[i - 1] + st.east * row[i + 1]) * inv_diag;
            double nv = row[i] + omega * (gs - row[i]);
            nv = std::min(std::max(nv, lo[i]), hi[i]);
            worst = std::max(worst, std::abs(nv - row[i]) / sc[i]);
            row[i] = nv;
        }
        if (history) history->push_back(worst);
        last_update = worst;
        if (!std::isfinite(worst)) return -1;
        if (first < 0) first = worst;
        else if (worst > 1e6 * first + 1.0) return -1;
        if (worst < tol) return sweep;
    }
    return max_sweeps + 1;
}

}  // namespace

void psor_solve(const Grid2D& g, const Stencil& st, const std::vector<double>& f,
                const std::vector<double>& lower, const std::vector<double>& upper,
                const std::vector<double>& scale, std::vector<double>& v, const PdeOptions& opts,
                ValueField& report) {
    if (!(opts.omega > 0 && opts.omega < 2)) throw ValidationError("pde.omega", "must lie in (0, 2)");
    if (!(opts.tol > 0)) throw ValidationError("pde.tol", "must be positive");
    const int nx = g.nx, ny = g.ny;

    // upwind order: the inflow row is Dirichlet data, everything else is solved
    std::vector<int> order;
    if (st.north > 0)
        for (int j = ny - 2; j >= 0; --j) order.push_back(j);
    else if (st.south > 0)
        for (int j = 1; j < ny; ++j) order.push_back(j);
    else
        for (int j = 0; j < ny; ++j) order.push_back(j);

    report.row_update.assign(ny, 0.0);
    report.row_sweeps.assign(ny, 0);
    report.total_sweeps = 0;
    report.converged = true;
    report.worst_history.clear();
    double omega = opts.omega;
    int worst_row_sweeps = -1;
    int prev = -1;
    for (int j : order) {
        if (prev >= 0) {
            // warm start from the previous row in units of the local scale
            for (int i = 1; i < nx - 1; ++i) {
                const std::size_t k = g.index(i, j), kp = g.index(i, prev);
                v[k] = std::clamp(v[kp] / scale[kp] * scale[k], lower[k], upper[k]);
            }
        }
        const std::vector<double> start(v.begin() + g.index(0, j), v.begin() + g.index(0, j) + nx);
        std::vector<double> history;
        long used = -1;
        double last = 0.0;
        while (true) {
            history.clear();
            used = psor_row(g, st, j, f, lower, upper, scale, v, omega, opts.tol, opts.max_sweeps,
                            &history, last);
            if (used >= 0) break;
            // diverged: halve the over-relaxation and restart the row
            omega = 1.0 + 0.5 * (omega - 1.0);
            std::copy(start.begin(), start.end(), v.begin() + g.index(0, j));
            if (omega - 1.0 < 1e-3) {
                report.converged = false;
                break;
            }
        }
        if (used > opts.max_sweeps) report.converged = false;
        report.row_update[j] = last;
        report.row_sweeps[j] = static_cast<int>(std::max(used, 0L));
        report.total_sweeps += std::max(used, 0L);
        if (used > worst_row_sweeps) {
            worst_row_sweeps = static_cast<int>(used);
            report.worst_history = std::move(history);
        }
        prev = j;
    }
    report.omega = omega;
}

ValueField solve_double_obstacle(const Grid2D& grid, const ModelParams& params, const CostSpec& cost,
                                 const PdeOptions& opts) {
    grid.validate(params, cost);
    const Stencil st = assemble_operator(grid, params);
    const int nx = grid.nx, ny = grid.ny;
    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    std::vector<double> f(n), lower(n), upper(n), scale(n), v(n);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const std::size_t k = grid.index(i, j);
            const double x = grid.x(i), y = grid.y(j);
            const double q = weight_q(x, y, params);
            f[k] = q * cost.cprime(x);
            lower[k] = -params.kplus() * q;
            upper[k] = params.kminus() * q;
            scale[k] = q;
            v[k] = std::clamp(0.0, lower[k], upper[k]);
        }
    for (int j = 0; j < ny; ++j) {
        v[grid.index(0, j)] = lower[grid.index(0, j)];
        v[grid.index(nx - 1, j)] = upper[grid.index(nx - 1, j)];
    }
    // inflow edge: full-information game value of the limiting drift
    if (st.north > 0 || st.south > 0) {
        const double drift = st.north > 0 ? params.mu0() : params.mu1();
        const int j = st.north > 0 ? ny - 1 : 0;
        const OneDimSolution sol = solve_constant_drift(drift, params, cost);
        for (int i = 1; i < nx - 1; ++i) {
            const std::size_t k = grid.index(i, j);
            v[k] = std::clamp(scale[k] * sol.game_value(grid.x(i), params, cost), lower[k], upper[k]);
        }
    }

    ValueField field;
    field.grid = grid;
    psor_solve(grid, st, f, lower, upper, scale, v, opts, field);
    field.mask.assign(n, NodeState::interior);
    for (std::size_t k = 0; k < n; ++k) {
        if (v[k] <= lower[k]) field.mask[k] = NodeState::lower;
        else if (v[k] >= upper[k]) field.mask[k] = NodeState::upper;
    }
    field.vhat = std::move(v);
    return field;
}

ExtractedBoundaries extract_boundaries(const ValueField& field, const ModelParams& params,
                                       const CostSpec& cost, double eps_rel) {
    const Grid2D& g = field.grid;
    ExtractedBoundaries out;
    for (int j = 0; j < g.ny; ++j) {
        const double y = g.y(j);
        int ip = -1, im = g.nx;
        for (int i = 0; i < g.nx; ++i) {
            const double q = weight_q(g.x(i), y, params);
            const double v = field.at(i, j);
            if (v <= -params.kplus() * q + eps_rel * params.kplus() * q) ip = i;
            if (im == g.nx && v >= params.kminus() * q - eps_rel * params.kminus() * q) im = i;
        }
        if (ip <= 0 || im >= g.nx - 1 || ip >= im) {
            out.indeterminate_y.push_back(y);
            continue;
        }
        out.rows.push_back(j);
        out.iplus.push_back(ip);
        out.iminus.push_back(im);
        out.raw_plus.push_back(g.x(ip));
        out.raw_minus.push_back(g.x(im));
        out.pair.ygrid.push_back(y);
    }
    out.pair.cplus = out.raw_plus;
    out.pair.cminus = out.raw_minus;
    if (!out.pair.ygrid.empty()) {
        const BoundaryBox box = boundary_box(params, cost);
        project_monotone_lipschitz(out.pair.ygrid, out.pair.cplus, box.plus_lo, box.plus_hi);
        project_monotone_lipschitz(out.pair.ygrid, out.pair.cminus, box.minus_lo, box.minus_hi);
    }
    out.pair.converged = field.converged;
    return out;
}

double smooth_fit_limit(double x, double y, int side, const ModelParams& params) noexcept {
    const double k = side > 0 ? -params.kplus() : params.kminus();
    return k * params.tilt() * std::exp(params.tilt() * (x - y));
}

SmoothFitReport smooth_fit_check(const ValueField& field, const ExtractedBoundaries& b,
                                 const ModelParams& params) {
    const Grid2D& g = field.grid;
    const double dx = g.dx();
    const double span = g.y_hi - g.y_lo;
    SmoothFitReport rep;
    for (std::size_t r = 0; r < b.rows.size(); ++r) {
        const int j = b.rows[r];
        const double y = g.y(j);
        const int ip = b.iplus[r], im = b.iminus[r];
        const double xp = g.x(ip), xm = g.x(im);
        const double dp = (field.at(ip + 1, j) - field.at(ip, j)) / dx;
        const double dm = (field.at(im, j) - field.at(im - 1, j)) / dx;
        SmoothFitRow row{y, std::abs(dp - smooth_fit_limit(xp, y, +1, params)) / weight_q(xp, y, params),
                         std::abs(dm - smooth_fit_limit(xm, y, -1, params)) / weight_q(xm, y, params)};
        rep.rows.push_back(row);
        if (y >= g.y_lo + 0.1 * span && y <= g.y_hi - 0.1 * span)
            rep.max_deviation = std::max({rep.max_deviation, row.dev_plus, row.dev_minus});
    }
    return rep;
}

double boundary_gap(const BoundaryPair& solved, const ExtractedBoundaries& b, double fraction) {
    const auto& ys = b.pair.ygrid;
    if (ys.empty()) return 0.0;
    const double lo = ys.front(), hi = ys.back();
    const double margin = 0.5 * (1.0 - fraction) * (hi - lo);
    double gap = 0.0;
    for (std::size_t r = 0; r < ys.size(); ++r) {
        const double y = ys[r];
        if (y < lo + margin || y > hi - margin) continue;
        gap = std::max({gap, std::abs(solved.cplus_at(y) - b.pair.cplus[r]),
                        std::abs(solved.cminus_at(y) - b.pair.cminus[r])});
    }
    return gap;
}

long obstacle_violations(const ValueField& field, const ModelParams& params) {
    const Grid2D& g = field.grid;
    long bad = 0;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const double q = weight_q(g.x(i), g.y(j), params);
            const double v = field.at(i, j);
            if (v < -params.kplus() * q || v > params.kminus() * q) ++bad;
        }
    return bad;
}

double phi_monotonicity_defect(const ValueField& field) {
    const Grid2D& g = field.grid;
    const double ratio = g.dy() / g.dx();
    const int m = static_cast<int>(std::lround(ratio));
    if (m < 1 || std::abs(ratio - m) > 1e-9 * ratio) return -1.0;
    double worst = 0.0;
    // along (i + m k, j + k) the likelihood ratio, and with it q, is fixed
    for (int j0 = 0; j0 < g.ny; ++j0)
        for (int i0 = 0; i0 < g.nx; ++i0) {
            if (j0 > 0 && i0 >= m) continue;  // start each line at its first node
            double prev = field.at(i0, j0);
            for (int i = i0 + m, j = j0 + 1; i < g.nx && j < g.ny; i += m, ++j) {
                const double v = field.at(i, j);
                const double scale = std::max({std::abs(prev), std::abs(v), 1e-300});
                if (v < prev) worst = std::max(worst, (prev - v) / scale);
                prev = v;
            }
        }
    return worst;
}

}  // namespace bvctl
