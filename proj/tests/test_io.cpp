#include "bvctl/error.hpp"
#include "bvctl/io.hpp"

#include "common.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace bvctl;
namespace fs = std::filesystem;

namespace {

std::string field_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ValidationError& e) {
        return e.field();
    }
    return "";
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "bvctl_test_io";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Config, DefaultsFromEmptyFile) {
    const RunConfig c = parse_config("");
    EXPECT_EQ(c.model.mu0(), -1.0);
    EXPECT_EQ(c.model.mu1(), 1.0);
    EXPECT_EQ(c.model.rho(), 0.5);
    EXPECT_TRUE(c.cost.is_quadratic());
    EXPECT_EQ(c.solver.ny, 401);
    EXPECT_EQ(c.pde.grid.nx, 601);
    EXPECT_DOUBLE_EQ(c.pde.grid.dx(), 0.01);
    EXPECT_EQ(c.sim.dt, 1e-3);
    EXPECT_EQ(c.output_dir, "out");
}

TEST(Config, ParsesEverySection) {
    const RunConfig c = parse_config(R"(
mu0 = -0.5
mu1 = 1.5
eta = 0.8
rho = 0.6
kplus = 2
kminus = 3
[cost]
kind = asymmetric
target = 0.1
holding = 1.5
shortage = 2.5
[solver]
y_lo = -10
y_hi = 12
ny = 111
tol = 1e-9
max_iter = 50
[pde]
x_lo = -4
x_hi = 4
nx = 401
ny = 201
omega = 1.7
[sim]
dt = 0.002
horizon = 50
npaths = 123
seed = 42
x0 = 0.3
pi0 = 0.25
mode = q
[output]
dir = results
)");
    EXPECT_EQ(c.model.kminus(), 3.0);
    EXPECT_EQ(c.cost.kind_name(), "asymmetric");
    EXPECT_EQ(c.cost.shortage(), 2.5);
    EXPECT_EQ(c.solver.ny, 111);
    EXPECT_EQ(c.solver.max_iter, 50);
    EXPECT_EQ(c.pde.grid.ny, 201);
    EXPECT_EQ(c.pde.omega, 1.7);
    EXPECT_EQ(c.sim.npaths, 123);
    EXPECT_EQ(c.sim.seed, 42u);
    EXPECT_EQ(c.sim.mode, SimMode::q_measure);
    EXPECT_EQ(c.output_dir, "results");
}

TEST(Config, ErrorsNameTheField) {
    EXPECT_EQ(field_of("mu0 = 1\nmu1 = 0.5\n"), "mu1");
    EXPECT_EQ(field_of("rho = -1\n"), "rho");
    EXPECT_EQ(field_of("rho = abc\n"), "rho");
    EXPECT_EQ(field_of("bogus = 1\n"), "bogus");
    EXPECT_EQ(field_of("[cost]\nkind = cubic\n"), "cost.kind");
    EXPECT_EQ(field_of("[cost]\nholding = 2\n"), "cost.kind");
    EXPECT_EQ(field_of("[solver]\nny = 2\n"), "solver.ny");
    EXPECT_EQ(field_of("[pde]\nx_lo = -1\n"), "pde.x_lo");
    EXPECT_EQ(field_of("[pde]\nomega = 2\n"), "pde.omega");
    EXPECT_EQ(field_of("[sim]\nhorizon = 10\n"), "sim.horizon");
    EXPECT_EQ(field_of("[sim]\nmode = other\n"), "sim.mode");
    EXPECT_EQ(field_of("[sim]\nunknown = 1\n"), "sim.unknown");
    EXPECT_THROW(load_config("/nonexistent/bvctl.ini"), ValidationError);
}

TEST(Config, HashIsCanonical) {
    const std::string a = "mu0 = -1\nmu1 = 1\n[sim]\nseed = 5\n";
    const std::string b = "\n; comment\n[sim]\nseed=5\n";  // same values, defaults implied
    EXPECT_EQ(parse_config(a).hash(), parse_config(b).hash());
    EXPECT_NE(parse_config(a).hash(), parse_config("[sim]\nseed = 6\n").hash());
    EXPECT_EQ(parse_config(a).hash().size(), 16u);
}

TEST(Hash, KnownFnvVectors) {
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Curves, RoundTripWithTwelveDigits) {
    CurveFile f{"00ff", tool_version(), {"y", "c_plus", "c_minus"}, {{-1.0, 0.5}, {-0.123456789012345, 1e-20}, {2.0, 3.0}}};
    const auto path = scratch("curve.csv");
    write_curve(path, f);
    std::ifstream in(path);
    std::string l1, l2, l3, l4;
    std::getline(in, l1);
    std::getline(in, l2);
    std::getline(in, l3);
    std::getline(in, l4);
    EXPECT_EQ(l1, "# config_hash=00ff");
    EXPECT_EQ(l2, "# tool_version=" + tool_version());
    EXPECT_EQ(l3, "y,c_plus,c_minus");
    EXPECT_EQ(l4, "-1,-0.123456789012,2");
    const CurveFile g = read_curve(path);
    EXPECT_EQ(g.config_hash, "00ff");
    EXPECT_EQ(g.columns, f.columns);
    EXPECT_EQ(g.column("c_minus"), f.data[2]);
    EXPECT_NEAR(g.column("c_plus")[0], f.data[1][0], 1e-12);
    EXPECT_THROW(g.column("phi"), ValidationError);
}

TEST(Curves, ReaderRejectsMalformedFiles) {
    const auto path = scratch("bad.csv");
    std::ofstream(path) << "y,c_plus\n1,2\n";
    EXPECT_THROW(read_curve(path), ValidationError);  // no hash
    std::ofstream(path) << "# config_hash=1\ny,c_plus\n1,x\n";
    EXPECT_THROW(read_curve(path), ValidationError);
    std::ofstream(path) << "# config_hash=1\ny,c_plus\n1\n";
    EXPECT_THROW(read_curve(path), ValidationError);
    EXPECT_THROW(read_curve(scratch("missing.csv")), ValidationError);
}

TEST(Curves, PolicyRoundTrip) {
    PolicyBoundaries p;
    p.log_phigrid = {-2.0, 0.0, 2.0};
    p.bplus = {-0.5, -0.7, -0.9};
    p.bminus = {0.9, 0.7, 0.5};
    const auto path = scratch("policy.csv");
    write_curve(path, policy_curve_phi(p, "ab"));
    const PolicyBoundaries q = policy_from_curve(read_curve(path));
    ASSERT_EQ(q.log_phigrid.size(), 3u);
    EXPECT_NEAR(q.log_phigrid[0], -2.0, 1e-11);
    EXPECT_EQ(q.log_phigrid[1], 0.0);
    EXPECT_EQ(q.bminus, p.bminus);
    const CurveFile a = policy_curve_pi(p, "ab");
    EXPECT_EQ(a.columns[0], "pi");
    EXPECT_EQ(a.data[0][1], 0.5);
    EXPECT_EQ(a.data[1][1], p.bplus[1]);
}
