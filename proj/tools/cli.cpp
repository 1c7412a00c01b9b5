#include "cli.hpp"

#include "bvctl/boundary.hpp"
#include "bvctl/error.hpp"
#include "bvctl/io.hpp"
#include "bvctl/onedim.hpp"
#include "bvctl/pde.hpp"
#include "bvctl/simulator.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

namespace bvctl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Flags {
    std::string config;
    std::optional<std::string> out;
    std::optional<double> perturb;
    bool refine = false;
    std::optional<std::uint64_t> seed;
    std::optional<long> paths;
    std::optional<double> dt;
    bool do_nothing = false;
    std::optional<std::string> policy;
    bool force = false;
};

struct Context {
    RunConfig cfg;
    json file_config;
    std::string hash;
    json overrides = json::object();
    fs::path out_dir;
    bool force = false;
    std::ostream& out;
    std::ostream& err;

    json meta(const std::string& command) const {
        return {{"command", command},          {"config_hash", hash},   {"tool_version", tool_version()},
                {"config", file_config},       {"overrides", overrides}};
    }
    fs::path path(const std::string& name) const { return out_dir / name; }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// hash check for artifacts produced by another command; true when usable
bool hash_ok(const Context& ctx, const std::string& file_hash, const fs::path& file) {
    if (file_hash == ctx.hash) return true;
    if (ctx.force) {
        fmt::print(ctx.err, "warning: {} has config_hash={} (current {}), used because of --force\n",
                   file.string(), file_hash, ctx.hash);
        return true;
    }
    fmt::print(ctx.err, "error: {} has config_hash={} but the current config hashes to {} (use --force)\n",
               file.string(), file_hash, ctx.hash);
    return false;
}

// ---------------------------------------------------------------------------

int cmd_baseline(Context& ctx) {
    const ModelParams& p = ctx.cfg.model;
    const CostSpec& cost = ctx.cfg.cost;
    const OneDimSolution s0 = solve_constant_drift(p.mu0(), p, cost);
    const OneDimSolution s1 = solve_constant_drift(p.mu1(), p, cost);
    const double inv_lo = cost.cprime_inv(-p.rho() * p.kplus());
    const double inv_hi = cost.cprime_inv(p.rho() * p.kminus());

    std::string report = fmt::format("# config_hash={}\n# tool_version={}\n", ctx.hash, tool_version());
    report += "drift,lower,upper,residual,newton\n";
    for (const auto* s : {&s0, &s1})
        report += fmt::format("{:.12g},{:.12g},{:.12g},{:.3g},{}\n", s->drift, s->lower, s->upper, s->residual,
                              s->newton_converged ? 1 : 0);
    report += fmt::format("cprime_inv(-rho*kplus)={:.12g}\n", inv_lo);
    report += fmt::format("cprime_inv(rho*kminus)={:.12g}\n", inv_hi);
    report += fmt::format("x_plus_star={:.12g}\n", s1.lower);
    report += fmt::format("x_minus_star={:.12g}\n", s0.upper);
    // mirror image under x -> -x when mu0 = -mu1, K+ = K- and the cost is even
    report += fmt::format("mirror_gap={:.3g}\n", std::abs(s1.lower + s0.upper));

    fmt::print(ctx.out, "{}", report);
    fs::create_directories(ctx.out_dir);
    std::ofstream(ctx.path("baseline.txt"), std::ios::binary) << report;

    json j = ctx.meta("baseline");
    for (const auto* s : {&s0, &s1})
        j["solutions"].push_back({{"drift", s->drift},
                                  {"lower", s->lower},
                                  {"upper", s->upper},
                                  {"residual", s->residual},
                                  {"newton_converged", s->newton_converged}});
    j["cprime_inv_lower"] = inv_lo;
    j["cprime_inv_upper"] = inv_hi;
    j["x_plus_star"] = s1.lower;
    j["x_minus_star"] = s0.upper;
    write_json(ctx.path("baseline.json"), j);
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_solve(Context& ctx) {
    const ModelParams& p = ctx.cfg.model;
    const CostSpec& cost = ctx.cfg.cost;
    const SolverSection& s = ctx.cfg.solver;
    const auto t0 = std::chrono::steady_clock::now();

    const BoundaryPair c = solve_boundaries(p, cost, uniform_grid(s.y_lo, s.y_hi, s.ny), s.options());
    const BoundaryBox box = boundary_box(p, cost);
    const std::string inv = check_boundary_invariants(c, box);
    const PolicyBoundaries pol = to_policy(c, p, default_log_phigrid());
    const std::string pinv = check_policy_invariants(pol, box);
    const bool a_eq_b = pol.aplus(0.5) == pol.bplus_at(1.0) && pol.aminus(0.5) == pol.bminus_at(1.0);
    const double elapsed = seconds_since(t0);

    fs::create_directories(ctx.out_dir);
    write_curve(ctx.path("boundaries_c.csv"), boundary_curve(c, ctx.hash));
    write_curve(ctx.path("boundaries_b.csv"), policy_curve_phi(pol, ctx.hash));
    write_curve(ctx.path("boundaries_a.csv"), policy_curve_pi(pol, ctx.hash));

    json j = ctx.meta("solve");
    j["ny"] = c.ygrid.size();
    j["converged"] = c.converged;
    j["iterations"] = c.iterations;
    j["residual"] = c.residual;
    j["equation_residual"] = c.equation_residual;
    j["history"] = c.history;
    j["warnings"] = c.warnings;
    j["boundary_invariants"] = inv.empty() ? "ok" : inv;
    j["policy_invariants"] = pinv.empty() ? "ok" : pinv;
    j["a_equals_b_at_half"] = a_eq_b;
    j["box"] = {box.plus_lo, box.plus_hi, box.minus_lo, box.minus_hi};
    j["files"] = {"boundaries_c.csv", "boundaries_b.csv", "boundaries_a.csv"};
    write_json(ctx.path("solve.json"), j);

    fmt::print(ctx.out, "solve: {} after {} iterations (change {:.3g}, equation residual {:.3g}) in {:.1f} s\n",
               c.converged ? "converged" : "NOT converged", c.iterations, c.residual, c.equation_residual,
               elapsed);
    fmt::print(ctx.out, "c_plus(0)={:.12g} c_minus(0)={:.12g}\n", c.cplus_at(0.0), c.cminus_at(0.0));
    fmt::print(ctx.out, "a_plus(0.5)={:.12g} a_minus(0.5)={:.12g}\n", pol.aplus(0.5), pol.aminus(0.5));
    fmt::print(ctx.out, "boundary invariants: {}\npolicy invariants: {}\n", inv.empty() ? "ok" : inv,
               pinv.empty() ? "ok" : pinv);
    for (const auto& w : c.warnings) fmt::print(ctx.err, "warning: {}\n", w);
    fmt::print(ctx.out, "wrote {}\n", ctx.out_dir.string());

    return c.converged && inv.empty() && pinv.empty() && a_eq_b ? kOk : kFailed;
}

// ---------------------------------------------------------------------------

struct OracleLevel {
    ValueField field;
    ExtractedBoundaries ext;
    SmoothFitReport fit;
    long violations;
    double mono_defect;
    double seconds;
};

OracleLevel run_oracle(const Context& ctx, const Grid2D& grid) {
    const auto t0 = std::chrono::steady_clock::now();
    ValueField field = solve_double_obstacle(grid, ctx.cfg.model, ctx.cfg.cost, ctx.cfg.pde.options());
    ExtractedBoundaries ext = extract_boundaries(field, ctx.cfg.model, ctx.cfg.cost);
    SmoothFitReport fit = smooth_fit_check(field, ext, ctx.cfg.model);
    const long bad = obstacle_violations(field, ctx.cfg.model);
    const double mono = phi_monotonicity_defect(field);
    const double secs = seconds_since(t0);
    return {std::move(field), std::move(ext), std::move(fit), bad, mono, secs};
}

void write_field(const fs::path& path, const ValueField& f, const std::string& hash) {
    const Grid2D& g = f.grid;
    CurveFile c{hash, tool_version(), {"x", "y", "vhat", "mask"}, std::vector<std::vector<double>>(4)};
    for (auto& col : c.data) col.reserve(f.vhat.size());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            c.data[0].push_back(g.x(i));
            c.data[1].push_back(g.y(j));
            c.data[2].push_back(f.at(i, j));
            c.data[3].push_back(static_cast<double>(f.mask[g.index(i, j)]));
        }
    write_curve(path, c);
}

void write_smooth_fit(const fs::path& path, const SmoothFitReport& r, const std::string& hash) {
    CurveFile c{hash, tool_version(), {"y", "dev_plus", "dev_minus"}, std::vector<std::vector<double>>(3)};
    for (const auto& row : r.rows) {
        c.data[0].push_back(row.y);
        c.data[1].push_back(row.dev_plus);
        c.data[2].push_back(row.dev_minus);
    }
    write_curve(path, c);
}

double gap_tolerance(double dx) { return std::max(2.0 * dx, 5e-3); }

int cmd_oracle(Context& ctx) {
    std::vector<Grid2D> grids{ctx.cfg.pde.grid};
    if (ctx.overrides.contains("refine")) {
        Grid2D fine = grids.front();
        fine.nx = 2 * (fine.nx - 1) + 1;
        fine.ny = 2 * (fine.ny - 1) + 1;
        grids.push_back(fine);
    }

    std::optional<BoundaryPair> solved;
    const fs::path cfile = ctx.path("boundaries_c.csv");
    std::string comparison = "no boundaries_c.csv in the output directory";
    if (fs::exists(cfile)) {
        const CurveFile f = read_curve(cfile);
        if (hash_ok(ctx, f.config_hash, cfile)) {
            solved = boundary_from_curve(f);
            comparison = "done";
        } else {
            comparison = "refused: config hash mismatch";
        }
    }

    fs::create_directories(ctx.out_dir);
    json j = ctx.meta("oracle");
    j["comparison"] = comparison;
    bool ok = true;
    std::vector<OracleLevel> levels;
    for (std::size_t k = 0; k < grids.size(); ++k) {
        OracleLevel lvl = run_oracle(ctx, grids[k]);
        const std::string suffix = k == 0 ? "" : "_refined";
        write_field(ctx.path("field" + suffix + ".csv"), lvl.field, ctx.hash);
        write_curve(ctx.path("oracle_c" + suffix + ".csv"), boundary_curve(lvl.ext.pair, ctx.hash));
        write_smooth_fit(ctx.path("smooth_fit" + suffix + ".csv"), lvl.fit, ctx.hash);

        const Grid2D& g = grids[k];
        json row = {{"nx", g.nx},
                    {"ny", g.ny},
                    {"dx", g.dx()},
                    {"dy", g.dy()},
                    {"converged", lvl.field.converged},
                    {"omega", lvl.field.omega},
                    {"total_sweeps", lvl.field.total_sweeps},
                    {"obstacle_violations", lvl.violations},
                    {"phi_monotonicity_defect", lvl.mono_defect},
                    {"indeterminate_rows", lvl.ext.indeterminate_y.size()},
                    {"smooth_fit_max", lvl.fit.max_deviation},
                    {"smooth_fit_tol", 5.0 * g.dx()},
                    {"seconds", lvl.seconds}};
        fmt::print(ctx.out,
                   "oracle nx={} ny={}: {} ({} sweeps, omega {}), obstacle violations {}, "
                   "smooth-fit deviation {:.4g} (tol {:.4g}), {:.1f} s\n",
                   g.nx, g.ny, lvl.field.converged ? "converged" : "NOT converged", lvl.field.total_sweeps,
                   lvl.field.omega, lvl.violations, lvl.fit.max_deviation, 5.0 * g.dx(), lvl.seconds);
        if (solved) {
            const double gap = boundary_gap(*solved, lvl.ext, 0.8);
            row["gap_vs_solve"] = gap;
            row["gap_tol"] = gap_tolerance(g.dx());
            fmt::print(ctx.out, "  gap to solved boundaries {:.4g} (tol {:.4g})\n", gap, gap_tolerance(g.dx()));
        }
        j["levels"].push_back(row);
        ok = ok && lvl.field.converged && lvl.violations == 0;
        levels.push_back(std::move(lvl));
    }
    if (levels.size() == 2) {
        const double ratio = levels[0].fit.max_deviation / levels[1].fit.max_deviation;
        j["smooth_fit_ratio"] = ratio;
        fmt::print(ctx.out, "smooth-fit deviation ratio coarse/fine {:.3f}\n", ratio);
        if (solved) {
            const double gratio = j["levels"][0]["gap_vs_solve"].get<double>() /
                                  j["levels"][1]["gap_vs_solve"].get<double>();
            j["gap_ratio"] = gratio;
            fmt::print(ctx.out, "gap ratio coarse/fine {:.3f}\n", gratio);
        }
    }
    if (comparison != "done") fmt::print(ctx.out, "comparison with solve: {}\n", comparison);
    write_json(ctx.path("oracle.json"), j);
    return ok ? kOk : kFailed;
}

// ---------------------------------------------------------------------------

int cmd_simulate(Context& ctx, const Flags& flags) {
    const ModelParams& p = ctx.cfg.model;
    const CostSpec& cost = ctx.cfg.cost;
    const fs::path pfile = flags.policy ? fs::path(*flags.policy) : ctx.path("boundaries_b.csv");
    if (!fs::exists(pfile)) {
        fmt::print(ctx.err, "error: policy file '{}' not found (run `solve` first or pass --policy)\n",
                   pfile.string());
        return kUsage;
    }
    const CurveFile f = read_curve(pfile);
    if (!hash_ok(ctx, f.config_hash, pfile)) return kUsage;
    const bool is_c = std::find(f.columns.begin(), f.columns.end(), "y") != f.columns.end();
    const PolicyBoundaries opt =
        is_c ? to_policy(boundary_from_curve(f), p, default_log_phigrid()) : policy_from_curve(f);
    // file values carry 12 significant digits, so the box check allows that much slack
    BoundaryBox box = boundary_box(p, cost);
    auto slack = [](double v) { return 1e-11 * std::max(1.0, std::abs(v)); };
    box.plus_lo -= slack(box.plus_lo);
    box.plus_hi += slack(box.plus_hi);
    box.minus_lo -= slack(box.minus_lo);
    box.minus_hi += slack(box.minus_hi);
    const std::string pinv = check_policy_invariants(opt, box);
    if (!pinv.empty()) {
        fmt::print(ctx.err, "error: policy in '{}' is invalid: {}\n", pfile.string(), pinv);
        return kUsage;
    }

    std::vector<PolicyBoundaries> pols{opt};
    std::vector<std::string> names{"optimal"};
    if (flags.perturb) {
        const double d = *flags.perturb;
        for (auto [dp, dm, name] : {std::tuple{-d, 0.0, "b_plus-"}, std::tuple{d, 0.0, "b_plus+"},
                                    std::tuple{0.0, -d, "b_minus-"}, std::tuple{0.0, d, "b_minus+"}}) {
            pols.push_back(opt.shifted(dp, dm));
            names.push_back(fmt::format("{}{:g}", name, d));
        }
    }
    if (flags.do_nothing) {
        pols.push_back(PolicyBoundaries::do_nothing());
        names.push_back("do_nothing");
    }

    const SimConfig& sc = ctx.cfg.sim;
    const auto t0 = std::chrono::steady_clock::now();
    const PolicyComparison cmp = evaluate_policies(p, cost, pols, sc);
    const MartingaleReport mart = martingale_suite(p, sc.pi0, {1.0, 5.0, 25.0}, sc.npaths, sc.seed);
    const double elapsed = seconds_since(t0);

    json j = ctx.meta("simulate");
    j["policy_file"] = pfile.string();
    j["npaths"] = cmp.npaths;
    fmt::print(ctx.out, "{:<14} {:>12} {:>10} {:>14} {:>10}\n", "policy", "mean", "se", "diff_vs_opt", "diff_se");
    for (std::size_t k = 0; k < pols.size(); ++k) {
        const PolicyEstimate& e = cmp.policies[k];
        const Estimate& d = cmp.diff_vs_first[k];
        fmt::print(ctx.out, "{:<14} {:>12.6f} {:>10.6f} {:>14.6f} {:>10.6f}\n", names[k], e.total.mean, e.total.se,
                   d.mean, d.se);
        j["policies"].push_back({{"name", names[k]},
                                 {"mean", e.total.mean},
                                 {"se", e.total.se},
                                 {"running", e.running},
                                 {"up", e.up},
                                 {"down", e.down},
                                 {"tail_bound", e.tail_bound},
                                 {"diff_vs_optimal", d.mean},
                                 {"diff_se", d.se}});
    }
    if (flags.do_nothing) {
        const double mix = do_nothing_cost(p, cost, sc.x0, sc.pi0);
        j["do_nothing_mixture"] = mix;
        fmt::print(ctx.out, "do-nothing mixture cost (analytic) {:.6f}\n", mix);
    }
    for (const auto& r : mart.rows) {
        fmt::print(ctx.out, "T={:g}: mean Pi_T {:.5f} ± {:.5f} (pi0 {:g}), var {:.4f}; mean Phi_T {:.4f} ± {:.4f}\n",
                   r.horizon, r.pi_T.mean, r.pi_T.se, mart.pi0, r.pi_var, r.phi_T.mean, r.phi_T.se);
        j["martingale"].push_back({{"horizon", r.horizon},
                                   {"pi_mean", r.pi_T.mean},
                                   {"pi_se", r.pi_T.se},
                                   {"pi_var", r.pi_var},
                                   {"phi_mean", r.phi_T.mean},
                                   {"phi_se", r.phi_T.se}});
    }
    j["seconds"] = elapsed;
    fs::create_directories(ctx.out_dir);
    write_json(ctx.path("simulate.json"), j);
    return kOk;
}

// ---------------------------------------------------------------------------

int cmd_compare(Context& ctx) {
    const fs::path a = ctx.path("boundaries_c.csv"), b = ctx.path("oracle_c.csv");
    for (const auto& f : {a, b})
        if (!fs::exists(f)) {
            fmt::print(ctx.err, "error: '{}' not found (run `solve` and `oracle` first)\n", f.string());
            return kUsage;
        }
    const CurveFile fa = read_curve(a), fb = read_curve(b);
    if (fa.config_hash != fb.config_hash && !ctx.force) {
        fmt::print(ctx.err, "error: config hashes differ ({} vs {}); use --force to compare anyway\n",
                   fa.config_hash, fb.config_hash);
        return kUsage;
    }
    if (!hash_ok(ctx, fa.config_hash, a)) return kUsage;

    const BoundaryPair solved = boundary_from_curve(fa);
    ExtractedBoundaries ext;
    ext.pair = boundary_from_curve(fb);
    double dx = ctx.cfg.pde.grid.dx();
    const fs::path meta = ctx.path("oracle.json");
    if (fs::exists(meta)) {
        const json m = read_json(meta);
        if (m.contains("levels") && !m["levels"].empty()) dx = m["levels"][0]["dx"].get<double>();
    }
    const double gap = boundary_gap(solved, ext, 0.8);
    const double tol = gap_tolerance(dx);
    json j = ctx.meta("compare");
    j["gap"] = gap;
    j["tolerance"] = tol;
    j["pass"] = gap <= tol;
    fs::create_directories(ctx.out_dir);
    write_json(ctx.path("compare.json"), j);
    fmt::print(ctx.out, "sup gap over the interior 80% of y: {:.4g} (tolerance {:.4g}) {}\n", gap, tol,
               gap <= tol ? "PASS" : "FAIL");
    return gap <= tol ? kOk : kFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Partial-information inventory control: boundaries, oracle and simulation", "bvctl"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1);

    Flags flags;
    app.add_option("--config", flags.config, "run configuration (INI)")->required();
    app.add_option("--out", flags.out, "output directory (overrides [output] dir)");
    app.add_option("--perturb", flags.perturb, "simulate: also shift each boundary by +-delta")
        ->check(CLI::PositiveNumber);
    app.add_flag("--refine", flags.refine, "oracle: repeat on a grid with halved spacing");
    app.add_option("--seed", flags.seed, "override [sim] seed");
    app.add_option("--paths", flags.paths, "override [sim] npaths")->check(CLI::PositiveNumber);
    app.add_option("--dt", flags.dt, "override [sim] dt")->check(CLI::PositiveNumber);
    app.add_flag("--do-nothing", flags.do_nothing, "simulate: include the never-act policy");
    app.add_option("--policy", flags.policy, "simulate: policy file (default <out>/boundaries_b.csv)");
    app.add_flag("--force", flags.force, "use artifacts whose config hash differs");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"baseline", "full-information thresholds at both drifts"},
        {"solve", "free boundaries c, b and a"},
        {"oracle", "finite-difference game value and boundary extraction"},
        {"simulate", "Monte Carlo cost of the solved policy"},
        {"compare", "solved vs oracle boundaries"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        RunConfig cfg = load_config(flags.config);
        Context ctx{cfg, cfg.to_json(), cfg.hash(), json::object(), {}, flags.force, out, err};
        if (flags.out) {
            ctx.cfg.output_dir = *flags.out;
            ctx.overrides["out"] = *flags.out;
        }
        if (flags.seed) {
            ctx.cfg.sim.seed = *flags.seed;
            ctx.overrides["seed"] = *flags.seed;
        }
        if (flags.paths) {
            ctx.cfg.sim.npaths = *flags.paths;
            ctx.overrides["paths"] = *flags.paths;
        }
        if (flags.dt) {
            ctx.cfg.sim.dt = *flags.dt;
            ctx.overrides["dt"] = *flags.dt;
        }
        if (flags.refine) ctx.overrides["refine"] = true;
        if (flags.perturb) ctx.overrides["perturb"] = *flags.perturb;
        if (flags.do_nothing) ctx.overrides["do_nothing"] = true;
        if (flags.force) ctx.overrides["force"] = true;
        ctx.cfg.validate();
        ctx.out_dir = ctx.cfg.output_dir;

        if (command == "baseline") return cmd_baseline(ctx);
        if (command == "solve") return cmd_solve(ctx);
        if (command == "oracle") return cmd_oracle(ctx);
        if (command == "simulate") return cmd_simulate(ctx, flags);
        return cmd_compare(ctx);
    } catch (const ValidationError& e) {
        fmt::print(err, "error: invalid config: {}\n", e.what());
        return kUsage;
    } catch (const NumericalError& e) {
        fmt::print(err, "error: {} (achieved {:.3g})\n", e.what(), e.achieved());
        return kFailed;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return kFailed;
    }
}

}  // namespace bvctl::cli
