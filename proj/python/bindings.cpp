#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lwvm/cone.hpp"
#include "lwvm/initial_data.hpp"
#include "lwvm/kernels.hpp"
#include "lwvm/monitor.hpp"
#include "lwvm/parallel.hpp"
#include "lwvm/runner.hpp"
#include "lwvm/simulation.hpp"

namespace py = pybind11;
using namespace lwvm;

namespace {

using A3 = std::array<double, 3>;
using A4 = std::array<double, 4>;

Vec3 v3(const A3& a) { return Vec3{a}; }
Point4 p4(const A4& a) { return Point4{a}; }
A3 a3(const Vec3& v) { return v.c; }

SubluminalVelocity velocity(const A3& v) {
    if (norm(v3(v)) >= 1.0) throw py::value_error("velocity must satisfy |v| < 1");
    return SubluminalVelocity(v3(v));
}

py::dict cone_values_dict(const A3& v, const A3& omega) {
    const auto c = cone_values(velocity(v), v3(omega));
    py::dict d;
    d["a0"] = c.a0;
    d["a1"] = c.a1;
    d["b0"] = c.b0;
    d["b1"] = c.b1;
    d["b2"] = c.b2;
    return d;
}

} // namespace

PYBIND11_MODULE(_lwvm, m) {
    m.doc() = "Division-lemma kernels, cone quadrature, transport and field solver for relativistic Vlasov-Maxwell";
    m.attr("__version__") = toolkit_version();

    m.def("set_threads", &set_thread_count, py::arg("n"));
    m.def("threads", &thread_count);

    // kernels
    m.def("relativistic_velocity", [](const A3& xi) { return a3(relativistic_velocity(v3(xi)).value()); }, py::arg("xi"));
    m.def("cone_values", &cone_values_dict, py::arg("v"), py::arg("omega"),
          "a_i^0, a_i^1 and b_ij^0..2 at the cone point (1, omega)");
    m.def(
        "sphere_mean_zero",
        [](const A3& v, int i, int j, int n_theta, int n_phi) {
            return sphere_mean_zero(KernelSet3(velocity(v)), i, j, n_theta, n_phi);
        },
        py::arg("v"), py::arg("i"), py::arg("j"), py::arg("n_theta") = 32, py::arg("n_phi") = 64);

    py::class_<KernelCheckRecord>(m, "KernelCheckRecord")
        .def_readonly("kernel", &KernelCheckRecord::kernel)
        .def_property_readonly("v", [](const KernelCheckRecord& r) { return a3(r.v); })
        .def_readonly("check", &KernelCheckRecord::check)
        .def_readonly("residual", &KernelCheckRecord::residual)
        .def_readonly("tolerance", &KernelCheckRecord::tolerance)
        .def_property_readonly("passed", &KernelCheckRecord::passed);
    m.def("kernel_self_test", [](const A3& v, unsigned seed) { return kernel_self_test(v3(v), seed); }, py::arg("v"),
          py::arg("seed") = 1);

    // cone calculus
    py::class_<TestFunction>(m, "TestFunction")
        .def(py::init([](const A4& c, double r, int k, double a) { return TestFunction(p4(c), r, k, a); }),
             py::arg("center"), py::arg("radius"), py::arg("exponent") = 8, py::arg("amplitude") = 1.0)
        .def("__call__", [](const TestFunction& f, const A4& p) { return f.value(p4(p)); });

    py::class_<PairingReport>(m, "PairingReport")
        .def_readonly("check", &PairingReport::check)
        .def_readonly("lhs", &PairingReport::lhs)
        .def_readonly("rhs", &PairingReport::rhs)
        .def_readonly("residual", &PairingReport::residual)
        .def_readonly("scale", &PairingReport::scale)
        .def_property_readonly("relative", &PairingReport::relative);

    m.def(
        "division_identity_first",
        [](const A3& v, int i, const TestFunction& phi) { return division_identity_first(velocity(v), i, phi); },
        py::arg("v"), py::arg("i"), py::arg("phi"));
    m.def(
        "division_identity_second",
        [](const A3& v, int i, int j, const TestFunction& phi, double theta) {
            return division_identity_second(velocity(v), i, j, phi, theta);
        },
        py::arg("v"), py::arg("i"), py::arg("j"), py::arg("phi"), py::arg("theta") = 0.25);
    m.def(
        "vp_pair", [](const A3& v, int i, int j, const TestFunction& psi, double theta) { return vp_pair(velocity(v), i, j, psi, theta); },
        py::arg("v"), py::arg("i"), py::arg("j"), py::arg("psi"), py::arg("theta"));
    m.def(
        "delta_coefficients",
        [](const A3& v) {
            const auto d = extract_delta_coefficients(velocity(v));
            return py::make_tuple(d.c, d.spread);
        },
        py::arg("v"), "(c, spread) of the delta part of b_ij^2 Y");
    m.def(
        "residue",
        [](const std::function<double(const A4&)>& g, int dim, int order) {
            return residue([&](const Vec<4>& y) { return g(y.c); }, dim, order);
        },
        py::arg("g"), py::arg("dim"), py::arg("order") = 32);
    m.def(
        "cone_total_weight",
        [](double t, int time_order, int n_theta) { return ConeQuadrature(t, time_order, SphereRule(n_theta, 2 * n_theta)).total_weight(); },
        py::arg("t"), py::arg("time_order") = 8, py::arg("n_theta") = 8);

    // simulation
    py::class_<InitialData>(m, "InitialData")
        .def_readonly("name", &InitialData::name)
        .def("f", [](const InitialData& d, const A3& x, const A3& xi) { return d.f->value(v3(x), v3(xi)); })
        .def("charge", [](const InitialData& d, const A3& x) { return d.charge(v3(x)); })
        .def("e", [](const InitialData& d, const A3& x) { return a3(d.e(v3(x))); });
    m.def("make_initial_data", &make_initial_data, py::arg("name"), py::arg("params") = std::map<std::string, double>{});

    py::class_<SimulationConfig>(m, "SimulationConfig")
        .def(py::init<>())
        .def_readwrite("grid_n", &SimulationConfig::grid_n)
        .def_readwrite("half_width", &SimulationConfig::half_width)
        .def_readwrite("steps", &SimulationConfig::steps)
        .def_readwrite("tau", &SimulationConfig::tau)
        .def_readwrite("momentum_order", &SimulationConfig::momentum_order)
        .def_readwrite("corrector_iterations", &SimulationConfig::corrector_iterations)
        .def_readwrite("self_consistent", &SimulationConfig::self_consistent)
        .def_readwrite("ensemble_size", &SimulationConfig::ensemble_size)
        .def_readwrite("seed", &SimulationConfig::seed)
        .def_property_readonly("dt", &SimulationConfig::dt);

    py::class_<StepRecord>(m, "StepRecord")
        .def_readonly("t", &StepRecord::t)
        .def_readonly("div_b", &StepRecord::div_b)
        .def_readonly("gauge", &StepRecord::gauge)
        .def_readonly("div_e_minus_rho", &StepRecord::div_e_minus_rho)
        .def_readonly("div_e_estimate", &StepRecord::div_e_estimate)
        .def_readonly("rho_max", &StepRecord::rho_max)
        .def_readonly("eb_sup", &StepRecord::eb_sup)
        .def_readonly("support_radius", &StepRecord::support_radius)
        .def_readonly("f_sup", &StepRecord::f_sup)
        .def_readonly("max_principle_deviation", &StepRecord::max_principle_deviation);

    py::class_<Simulation>(m, "Simulation")
        .def(py::init<InitialData, SimulationConfig>(), py::arg("data"), py::arg("config"))
        .def("step", &Simulation::step, py::call_guard<py::gil_scoped_release>())
        .def("run", [](Simulation& s) {
            py::gil_scoped_release unlock;
            s.run();
        })
        .def_property_readonly("time", &Simulation::time)
        .def_property_readonly("finished", &Simulation::finished)
        .def_property_readonly("records", [](const Simulation& s) {
            return std::vector<StepRecord>(s.records().begin(), s.records().end());
        });

    // monitor
    py::class_<InequalityFit>(m, "InequalityFit")
        .def_readonly("name", &InequalityFit::name)
        .def_readonly("c", &InequalityFit::c)
        .def_readonly("c_early", &InequalityFit::c_early)
        .def_readonly("finite", &InequalityFit::finite)
        .def_readonly("margin", &InequalityFit::margin)
        .def_readonly("passed", &InequalityFit::pass);
    py::class_<GronwallReport>(m, "GronwallReport")
        .def_readonly("log_gronwall", &GronwallReport::log_gronwall)
        .def_readonly("bound_at_horizon", &GronwallReport::bound_at_horizon)
        .def_readonly("diverging", &GronwallReport::diverging);
    m.def(
        "log_gronwall_check",
        [](const std::vector<double>& t, const std::vector<double>& n, double tau) { return log_gronwall_check(t, n, tau); },
        py::arg("t"), py::arg("n"), py::arg("tau"));
    m.def("log_gronwall_bound", &log_gronwall_bound, py::arg("n0"), py::arg("c"), py::arg("t"));

    // runner
    py::enum_<RunMode>(m, "RunMode")
        .value("verify_kernels", RunMode::verify_kernels)
        .value("verify_identities", RunMode::verify_identities)
        .value("fields", RunMode::fields)
        .value("simulate", RunMode::simulate)
        .value("report", RunMode::report);
    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("mode", &RunConfig::mode)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("out", &RunConfig::out)
        .def_readwrite("sphere_order", &RunConfig::sphere_order)
        .def_readwrite("velocities", &RunConfig::velocities)
        .def_readwrite("profile", &RunConfig::profile)
        .def_readwrite("series", &RunConfig::series)
        .def("validate", &RunConfig::validate);
    py::class_<CheckResult>(m, "CheckResult")
        .def_readonly("name", &CheckResult::name)
        .def_readonly("value", &CheckResult::value)
        .def_readonly("tolerance", &CheckResult::tolerance)
        .def_readonly("passed", &CheckResult::pass);
    py::class_<RunManifest>(m, "RunManifest")
        .def_readonly("checks", &RunManifest::checks)
        .def_readonly("artifacts", &RunManifest::artifacts)
        .def_property_readonly("passed", &RunManifest::passed)
        .def_property_readonly("failed", &RunManifest::failed)
        .def("json", &manifest_json);
    m.def("load_config", &load_config, py::arg("path"));
    m.def(
        "parse_config",
        [](const std::string& text) {
            std::istringstream is(text);
            return parse_config(is, "<string>");
        },
        py::arg("text"));
    m.def("run", &run, py::arg("config"), py::call_guard<py::gil_scoped_release>());

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
}
