#include "bvctl/boundary.hpp"
#include "bvctl/error.hpp"
#include "bvctl/io.hpp"
#include "bvctl/model.hpp"
#include "bvctl/onedim.hpp"
#include "bvctl/pde.hpp"
#include "bvctl/simulator.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace bvctl;

namespace {

using release = py::call_guard<py::gil_scoped_release>;

py::dict estimate(const Estimate& e) {
    py::dict d;
    d["mean"] = e.mean;
    d["se"] = e.se;
    return d;
}

}  // namespace

PYBIND11_MODULE(_bvctl, m) {
    m.attr("__version__") = tool_version();

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init<double, double, double, double, double, double>(), py::arg("mu0") = -1.0,
             py::arg("mu1") = 1.0, py::arg("eta") = 1.0, py::arg("rho") = 0.5, py::arg("kplus") = 1.0,
             py::arg("kminus") = 1.0)
        .def_property_readonly("mu0", &ModelParams::mu0)
        .def_property_readonly("mu1", &ModelParams::mu1)
        .def_property_readonly("eta", &ModelParams::eta)
        .def_property_readonly("rho", &ModelParams::rho)
        .def_property_readonly("kplus", &ModelParams::kplus)
        .def_property_readonly("kminus", &ModelParams::kminus)
        .def_property_readonly("gamma", &ModelParams::gamma)
        .def_property_readonly("tilt", &ModelParams::tilt)
        .def_property_readonly("ydrift", &ModelParams::ydrift);

    py::class_<CostSpec>(m, "CostSpec")
        .def_static("quadratic", &CostSpec::quadratic, py::arg("target") = 0.0)
        .def_static("asymmetric", &CostSpec::asymmetric, py::arg("holding"), py::arg("shortage"),
                    py::arg("target") = 0.0)
        .def_property_readonly("kind", &CostSpec::kind_name)
        .def_property_readonly("target", &CostSpec::target)
        .def("c", &CostSpec::c)
        .def("cprime", &CostSpec::cprime)
        .def("cprime_inv", &CostSpec::cprime_inv);

    m.def("belief_to_likelihood", &belief_to_likelihood);
    m.def("likelihood_to_belief", &likelihood_to_belief);
    m.def("to_parabolic", [](double x, double phi, const ModelParams& p) {
        const auto q = to_parabolic(x, phi, p);
        return py::make_tuple(q.x, q.y);
    });
    m.def("parabolic_to_likelihood", &parabolic_to_likelihood);
    m.def("weight_q", &weight_q);

    py::class_<OneDimSolution>(m, "OneDimSolution")
        .def_readonly("drift", &OneDimSolution::drift)
        .def_readonly("lower", &OneDimSolution::lower)
        .def_readonly("upper", &OneDimSolution::upper)
        .def_readonly("residual", &OneDimSolution::residual)
        .def_readonly("newton_converged", &OneDimSolution::newton_converged)
        .def("game_value", &OneDimSolution::game_value);
    m.def("solve_constant_drift", &solve_constant_drift, py::arg("drift"), py::arg("params"), py::arg("cost"));
    m.def("bounds_xstar", [](const ModelParams& p, const CostSpec& c) {
        const auto b = bounds_xstar(p, c);
        return py::make_tuple(b.xplus, b.xminus);
    });

    py::class_<BoundaryPair>(m, "BoundaryPair")
        .def_readonly("ygrid", &BoundaryPair::ygrid)
        .def_readonly("cplus", &BoundaryPair::cplus)
        .def_readonly("cminus", &BoundaryPair::cminus)
        .def_readonly("residual", &BoundaryPair::residual)
        .def_readonly("equation_residual", &BoundaryPair::equation_residual)
        .def_readonly("iterations", &BoundaryPair::iterations)
        .def_readonly("converged", &BoundaryPair::converged)
        .def_readonly("warnings", &BoundaryPair::warnings)
        .def("cplus_at", &BoundaryPair::cplus_at)
        .def("cminus_at", &BoundaryPair::cminus_at);

    m.def("uniform_grid", &uniform_grid);
    m.def(
        "solve_boundaries",
        [](const ModelParams& p, const CostSpec& c, std::vector<double> ygrid, double tol, int max_iter) {
            return solve_boundaries(p, c, std::move(ygrid), {tol, max_iter, 0.5});
        },
        py::arg("params"), py::arg("cost"), py::arg("ygrid"), py::arg("tol") = 1e-8, py::arg("max_iter") = 200,
        release());
    m.def("check_boundary_invariants", [](const BoundaryPair& c, const ModelParams& p, const CostSpec& cost) {
        return check_boundary_invariants(c, boundary_box(p, cost));
    });

    py::class_<PolicyBoundaries>(m, "PolicyBoundaries")
        .def_readonly("log_phigrid", &PolicyBoundaries::log_phigrid)
        .def_readonly("bplus", &PolicyBoundaries::bplus)
        .def_readonly("bminus", &PolicyBoundaries::bminus)
        .def_static("do_nothing", &PolicyBoundaries::do_nothing)
        .def("shifted", &PolicyBoundaries::shifted)
        .def("bplus_at", &PolicyBoundaries::bplus_at)
        .def("bminus_at", &PolicyBoundaries::bminus_at)
        .def("aplus", &PolicyBoundaries::aplus)
        .def("aminus", &PolicyBoundaries::aminus);
    m.def(
        "to_policy",
        [](const BoundaryPair& c, const ModelParams& p, int n) { return to_policy(c, p, default_log_phigrid(n)); },
        py::arg("boundaries"), py::arg("params"), py::arg("n") = 6001);

    py::class_<Grid2D>(m, "Grid2D")
        .def(py::init([](double x_lo, double x_hi, int nx, double y_lo, double y_hi, int ny) {
                 return Grid2D{x_lo, x_hi, nx, y_lo, y_hi, ny};
             }),
             py::arg("x_lo") = -3.0, py::arg("x_hi") = 3.0, py::arg("nx") = 601, py::arg("y_lo") = -20.0,
             py::arg("y_hi") = 20.0, py::arg("ny") = 401)
        .def_readonly("nx", &Grid2D::nx)
        .def_readonly("ny", &Grid2D::ny)
        .def_property_readonly("dx", &Grid2D::dx)
        .def_property_readonly("dy", &Grid2D::dy);

    py::class_<ValueField>(m, "ValueField")
        .def_readonly("grid", &ValueField::grid)
        .def_readonly("vhat", &ValueField::vhat)
        .def_readonly("converged", &ValueField::converged)
        .def_readonly("total_sweeps", &ValueField::total_sweeps)
        .def("at", &ValueField::at)
        .def("obstacle_violations", [](const ValueField& f, const ModelParams& p) { return obstacle_violations(f, p); });
    m.def(
        "solve_double_obstacle",
        [](const Grid2D& g, const ModelParams& p, const CostSpec& c, double tol, double omega, long max_sweeps) {
            return solve_double_obstacle(g, p, c, {tol, max_sweeps, omega});
        },
        py::arg("grid"), py::arg("params"), py::arg("cost"), py::arg("tol") = 1e-11, py::arg("omega") = 1.9,
        py::arg("max_sweeps") = 400000, release());

    py::class_<ExtractedBoundaries>(m, "ExtractedBoundaries")
        .def_readonly("pair", &ExtractedBoundaries::pair)
        .def_readonly("indeterminate_y", &ExtractedBoundaries::indeterminate_y);
    m.def("extract_boundaries", &extract_boundaries, py::arg("field"), py::arg("params"), py::arg("cost"),
          py::arg("eps_rel") = 1e-6);
    m.def("boundary_gap", &boundary_gap, py::arg("solved"), py::arg("extracted"), py::arg("fraction") = 0.8);
    m.def("smooth_fit_deviation", [](const ValueField& f, const ExtractedBoundaries& b, const ModelParams& p) {
        return smooth_fit_check(f, b, p).max_deviation;
    });

    py::enum_<SimMode>(m, "SimMode").value("true_measure", SimMode::true_measure).value("q_measure", SimMode::q_measure);
    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("dt", &SimConfig::dt)
        .def_readwrite("horizon", &SimConfig::horizon)
        .def_readwrite("npaths", &SimConfig::npaths)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("x0", &SimConfig::x0)
        .def_readwrite("pi0", &SimConfig::pi0)
        .def_readwrite("mode", &SimConfig::mode);

    m.def(
        "evaluate_policies",
        [](const ModelParams& p, const CostSpec& c, const std::vector<PolicyBoundaries>& policies,
           const SimConfig& cfg) {
            PolicyComparison cmp;
            {
                py::gil_scoped_release nogil;
                cmp = evaluate_policies(p, c, policies, cfg);
            }
            py::list out;
            for (std::size_t k = 0; k < cmp.policies.size(); ++k) {
                const auto& e = cmp.policies[k];
                py::dict d;
                d["total"] = estimate(e.total);
                d["running"] = e.running;
                d["up"] = e.up;
                d["down"] = e.down;
                d["tail_bound"] = e.tail_bound;
                d["diff_vs_first"] = estimate(cmp.diff_vs_first[k]);
                out.append(d);
            }
            return out;
        },
        py::arg("params"), py::arg("cost"), py::arg("policies"), py::arg("config"));
    m.def("do_nothing_cost", &do_nothing_cost, py::arg("params"), py::arg("cost"), py::arg("x0"), py::arg("pi0"));
    m.def(
        "martingale_suite",
        [](const ModelParams& p, double pi0, const std::vector<double>& horizons, long npaths, std::uint64_t seed) {
            MartingaleReport rep;
            {
                py::gil_scoped_release nogil;
                rep = martingale_suite(p, pi0, horizons, npaths, seed);
            }
            py::list rows;
            for (const auto& r : rep.rows) {
                py::dict d;
                d["horizon"] = r.horizon;
                d["pi_T"] = estimate(r.pi_T);
                d["pi_var"] = r.pi_var;
                d["phi_T"] = estimate(r.phi_T);
                rows.append(d);
            }
            return rows;
        },
        py::arg("params"), py::arg("pi0"), py::arg("horizons"), py::arg("npaths"), py::arg("seed"));

    py::class_<RunConfig>(m, "RunConfig")
        .def_readonly("model", &RunConfig::model)
        .def_readonly("cost", &RunConfig::cost)
        .def_readonly("sim", &RunConfig::sim)
        .def_readonly("output_dir", &RunConfig::output_dir)
        .def_property_readonly("pde_grid", [](const RunConfig& c) { return c.pde.grid; })
        .def("hash", &RunConfig::hash)
        .def("to_json", [](const RunConfig& c) { return c.to_json().dump(); });
    m.def("parse_config", &parse_config);
    m.def("load_config", &load_config);
}
