#include "bvctl/io.hpp"

#include "bvctl/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#ifndef BVCTL_VERSION
#define BVCTL_VERSION "0.0.0"
#endif

namespace bvctl {

namespace pt = boost::property_tree;
using nlohmann::json;

std::string tool_version() { return BVCTL_VERSION; }

namespace {

template <class T>
T get_value(const pt::ptree& tree, const std::string& key, T fallback) {
    const auto node = tree.get_child_optional(pt::ptree::path_type(key, '.'));
    if (!node) return fallback;
    try {
        return node->get_value<T>();
    } catch (const pt::ptree_bad_data&) {
        throw ValidationError(key, fmt::format("cannot parse '{}'", node->data()));
    }
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "mu0", "mu1", "eta", "rho", "kplus", "kminus",
        "cost.kind", "cost.target", "cost.holding", "cost.shortage",
        "solver.y_lo", "solver.y_hi", "solver.ny", "solver.tol", "solver.max_iter",
        "pde.x_lo", "pde.x_hi", "pde.nx", "pde.y_lo", "pde.y_hi", "pde.ny", "pde.tol", "pde.omega",
        "pde.max_sweeps",
        "sim.dt", "sim.horizon", "sim.npaths", "sim.seed", "sim.x0", "sim.pi0", "sim.mode",
        "output.dir"};
    return keys;
}

void check_keys(const pt::ptree& tree) {
    for (const auto& [name, child] : tree) {
        if (child.empty()) {
            if (!known_keys().count(name)) throw ValidationError(name, "unknown key");
            continue;
        }
        for (const auto& [sub, leaf] : child) {
            const std::string key = name + "." + sub;
            if (!known_keys().count(key)) throw ValidationError(key, "unknown key");
        }
    }
}

std::string format_number(double v) { return fmt::format("{:.12g}", v); }

}  // namespace

void RunConfig::validate() const {
    cost.validate();
    if (!(solver.y_hi > solver.y_lo)) throw ValidationError("solver.y_hi", "must exceed solver.y_lo");
    if (solver.ny < 3) throw ValidationError("solver.ny", "need at least 3 nodes");
    if (!(solver.tol > 0)) throw ValidationError("solver.tol", "must be positive");
    if (solver.max_iter < 1) throw ValidationError("solver.max_iter", "must be positive");
    pde.grid.validate(model, cost);
    if (!(pde.tol > 0)) throw ValidationError("pde.tol", "must be positive");
    if (!(pde.omega > 0 && pde.omega < 2)) throw ValidationError("pde.omega", "must lie in (0, 2)");
    if (pde.max_sweeps < 1) throw ValidationError("pde.max_sweeps", "must be positive");
    sim.validate(model);
    if (output_dir.empty()) throw ValidationError("output.dir", "must not be empty");
}

json RunConfig::to_json() const {
    // nlohmann's default object is key-sorted, so dump() is canonical
    json j;
    j["mu0"] = model.mu0();
    j["mu1"] = model.mu1();
    j["eta"] = model.eta();
    j["rho"] = model.rho();
    j["kplus"] = model.kplus();
    j["kminus"] = model.kminus();
    j["cost"] = {{"kind", cost.kind_name()}, {"target", cost.target()}};
    if (!cost.is_quadratic()) {
        j["cost"]["holding"] = cost.holding();
        j["cost"]["shortage"] = cost.shortage();
    }
    j["solver"] = {{"y_lo", solver.y_lo}, {"y_hi", solver.y_hi}, {"ny", solver.ny},
                   {"tol", solver.tol},   {"max_iter", solver.max_iter}};
    const Grid2D& g = pde.grid;
    j["pde"] = {{"x_lo", g.x_lo}, {"x_hi", g.x_hi}, {"nx", g.nx},       {"y_lo", g.y_lo},
                {"y_hi", g.y_hi}, {"ny", g.ny},     {"tol", pde.tol},   {"omega", pde.omega},
                {"max_sweeps", pde.max_sweeps}};
    j["sim"] = {{"dt", sim.dt},
                {"horizon", sim.horizon},
                {"npaths", sim.npaths},
                {"seed", sim.seed},
                {"x0", sim.x0},
                {"pi0", sim.pi0},
                {"mode", sim.mode == SimMode::true_measure ? "true" : "q"}};
    j["output"] = {{"dir", output_dir}};
    return j;
}

std::string RunConfig::hash() const { return fnv1a_hex(to_json().dump()); }

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

RunConfig parse_config(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError("config", fmt::format("line {}: {}", e.line(), e.message()));
    }
    check_keys(tree);

    RunConfig cfg;
    const ModelParams& d = cfg.model;
    cfg.model = ModelParams(get_value(tree, "mu0", d.mu0()), get_value(tree, "mu1", d.mu1()),
                            get_value(tree, "eta", d.eta()), get_value(tree, "rho", d.rho()),
                            get_value(tree, "kplus", d.kplus()), get_value(tree, "kminus", d.kminus()));

    const std::string kind = get_value<std::string>(tree, "cost.kind", "quadratic");
    const double target = get_value(tree, "cost.target", 0.0);
    if (kind == "quadratic") {
        if (tree.get_child_optional(pt::ptree::path_type("cost.holding", '.')) ||
            tree.get_child_optional(pt::ptree::path_type("cost.shortage", '.')))
            throw ValidationError("cost.kind", "holding/shortage need kind = asymmetric");
        cfg.cost = CostSpec::quadratic(target);
    } else if (kind == "asymmetric") {
        cfg.cost = CostSpec::asymmetric(get_value(tree, "cost.holding", 1.0),
                                        get_value(tree, "cost.shortage", 1.0), target);
    } else {
        throw ValidationError("cost.kind", fmt::format("unknown cost kind '{}'", kind));
    }

    auto& s = cfg.solver;
    s.y_lo = get_value(tree, "solver.y_lo", s.y_lo);
    s.y_hi = get_value(tree, "solver.y_hi", s.y_hi);
    s.ny = get_value(tree, "solver.ny", s.ny);
    s.tol = get_value(tree, "solver.tol", s.tol);
    s.max_iter = get_value(tree, "solver.max_iter", s.max_iter);

    auto& p = cfg.pde;
    p.grid.x_lo = get_value(tree, "pde.x_lo", p.grid.x_lo);
    p.grid.x_hi = get_value(tree, "pde.x_hi", p.grid.x_hi);
    p.grid.nx = get_value(tree, "pde.nx", p.grid.nx);
    p.grid.y_lo = get_value(tree, "pde.y_lo", p.grid.y_lo);
    p.grid.y_hi = get_value(tree, "pde.y_hi", p.grid.y_hi);
    p.grid.ny = get_value(tree, "pde.ny", p.grid.ny);
    p.tol = get_value(tree, "pde.tol", p.tol);
    p.omega = get_value(tree, "pde.omega", p.omega);
    p.max_sweeps = get_value(tree, "pde.max_sweeps", p.max_sweeps);

    auto& m = cfg.sim;
    m.dt = get_value(tree, "sim.dt", m.dt);
    m.horizon = get_value(tree, "sim.horizon", m.horizon);
    m.npaths = get_value(tree, "sim.npaths", m.npaths);
    m.seed = get_value(tree, "sim.seed", m.seed);
    m.x0 = get_value(tree, "sim.x0", m.x0);
    m.pi0 = get_value(tree, "sim.pi0", m.pi0);
    const std::string mode = get_value<std::string>(tree, "sim.mode", "true");
    if (mode == "true")
        m.mode = SimMode::true_measure;
    else if (mode == "q")
        m.mode = SimMode::q_measure;
    else
        throw ValidationError("sim.mode", fmt::format("expected 'true' or 'q', got '{}'", mode));

    cfg.output_dir = get_value<std::string>(tree, "output.dir", cfg.output_dir);
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config", fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------

const std::vector<double>& CurveFile::column(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
        if (columns[k] == name) return data[k];
    throw ValidationError(name, "column not present");
}

void write_curve(const std::filesystem::path& path, const CurveFile& curve) {
    if (curve.columns.size() != curve.data.size()) throw Error("write_curve: column count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    std::string buf = fmt::format("# config_hash={}\n# tool_version={}\n", curve.config_hash, curve.version);
    for (std::size_t k = 0; k < curve.columns.size(); ++k) {
        if (k) buf += ',';
        buf += curve.columns[k];
    }
    buf += '\n';
    const std::size_t n = curve.data.empty() ? 0 : curve.data.front().size();
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < curve.data.size(); ++k) {
            if (k) buf += ',';
            buf += format_number(curve.data[k].at(r));
        }
        buf += '\n';
    }
    out << buf;
}

CurveFile read_curve(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("file", fmt::format("cannot open '{}'", path.string()));
    CurveFile f;
    std::string line;
    bool have_header = false;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(' '));
            const std::string value = line.substr(eq + 1);
            if (key == "config_hash") f.config_hash = value;
            if (key == "tool_version") f.version = value;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            f.columns = cells;
            f.data.assign(cells.size(), {});
            have_header = true;
            continue;
        }
        if (cells.size() != f.columns.size())
            throw ValidationError("file", fmt::format("{}:{}: expected {} fields", path.string(), lineno,
                                                      f.columns.size()));
        for (std::size_t k = 0; k < cells.size(); ++k) {
            std::size_t used = 0;
            double v;
            try {
                v = std::stod(cells[k], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0)
                throw ValidationError("file", fmt::format("{}:{}: bad number '{}'", path.string(), lineno, cells[k]));
            f.data[k].push_back(v);
        }
    }
    if (!have_header) throw ValidationError("file", fmt::format("'{}' has no column header", path.string()));
    if (f.config_hash.empty())
        throw ValidationError("file", fmt::format("'{}' has no config_hash line", path.string()));
    return f;
}

CurveFile boundary_curve(const BoundaryPair& c, const std::string& hash) {
    return {hash, tool_version(), {"y", "c_plus", "c_minus"}, {c.ygrid, c.cplus, c.cminus}};
}

CurveFile policy_curve_phi(const PolicyBoundaries& p, const std::string& hash) {
    return {hash, tool_version(), {"phi", "b_plus", "b_minus"}, {p.phigrid(), p.bplus, p.bminus}};
}

CurveFile policy_curve_pi(const PolicyBoundaries& p, const std::string& hash) {
    std::vector<double> pis;
    pis.reserve(p.log_phigrid.size());
    for (double l : p.log_phigrid) pis.push_back(likelihood_to_belief(std::exp(l)));
    return {hash, tool_version(), {"pi", "a_plus", "a_minus"}, {pis, p.bplus, p.bminus}};
}

BoundaryPair boundary_from_curve(const CurveFile& f) {
    BoundaryPair c;
    c.ygrid = f.column("y");
    c.cplus = f.column("c_plus");
    c.cminus = f.column("c_minus");
    if (c.ygrid.size() < 2) throw ValidationError("file", "boundary file needs at least two rows");
    return c;
}

PolicyBoundaries policy_from_curve(const CurveFile& f) {
    PolicyBoundaries p;
    const auto& phi = f.column("phi");
    if (phi.size() < 2) throw ValidationError("file", "policy file needs at least two rows");
    p.log_phigrid.reserve(phi.size());
    for (double v : phi) {
        if (!(v > 0)) throw ValidationError("phi", "likelihood ratios must be positive");
        p.log_phigrid.push_back(std::log(v));
    }
    p.bplus = f.column("b_plus");
    p.bminus = f.column("b_minus");
    return p;
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("file", fmt::format("cannot open '{}'", path.string()));
    return json::parse(in);
}

}  // namespace bvctl
