#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hkdvb/estimates.hpp"
#include "hkdvb/harness.hpp"
#include "hkdvb/integrator.hpp"
#include "hkdvb/model.hpp"
#include "hkdvb/noise.hpp"
#include "hkdvb/oracles.hpp"
#include "hkdvb/spectral.hpp"

namespace py = pybind11;
using namespace hkdvb;

namespace {

SpectralState state_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a,
                               double time = 0.0) {
    SpectralState s;
    s.coeffs.assign(a.data(), a.data() + a.size());
    s.time = time;
    return s;
}

py::array_t<double> to_array(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_hkdvb, m) {
    m.doc() = "spectral Galerkin laboratory for the stochastic hybrid KdV-Burgers equation";

    py::class_<Domain>(m, "Domain")
        .def(py::init<double, double>(), py::arg("x1"), py::arg("x2"))
        .def_readwrite("x1", &Domain::x1)
        .def_readwrite("x2", &Domain::x2)
        .def_property_readonly("length", &Domain::length);

    py::class_<Basis>(m, "Basis")
        .def(py::init<int, Domain>(), py::arg("m"), py::arg("domain"))
        .def_property_readonly("m", &Basis::truncation)
        .def_property_readonly("dim", &Basis::dim)
        .def_property_readonly("grid_size", &Basis::grid_size)
        .def_property_readonly("grid", [](const Basis& b) { return to_array(b.grid()); })
        .def_property_readonly("wavenumbers",
                               [](const Basis& b) { return to_array(b.wavenumbers()); });

    m.def("build_basis", &build_basis, py::arg("m"), py::arg("domain"));

    m.def(
        "to_physical",
        [](py::array_t<double> coeffs, const Basis& basis) {
            return to_array(to_physical(state_from_array(coeffs), basis).values);
        },
        py::arg("coeffs"), py::arg("basis"));
    m.def(
        "to_spectral",
        [](py::array_t<double> values, const Basis& basis) {
            Field f;
            f.values.assign(values.data(), values.data() + values.size());
            return to_array(to_spectral(f, basis).coeffs);
        },
        py::arg("values"), py::arg("basis"));
    m.def(
        "spectral_derivative",
        [](py::array_t<double> coeffs, int order, const Basis& basis) {
            return to_array(spectral_derivative(state_from_array(coeffs), order, basis).coeffs);
        },
        py::arg("coeffs"), py::arg("order"), py::arg("basis"));
    m.def(
        "sobolev_norm",
        [](py::array_t<double> coeffs, double s, const Basis& basis) {
            return sobolev_norm(state_from_array(coeffs), s, basis);
        },
        py::arg("coeffs"), py::arg("s"), py::arg("basis"));
    m.def(
        "local_sobolev_norm",
        [](py::array_t<double> values, double k, int s, const Basis& basis) {
            Field f;
            f.values.assign(values.data(), values.data() + values.size());
            return local_sobolev_norm(f, k, s, basis);
        },
        py::arg("values"), py::arg("k"), py::arg("s"), py::arg("basis"));
    m.def(
        "inner_product",
        [](py::array_t<double> f, py::array_t<double> g, const Basis& basis) {
            Field a, b;
            a.values.assign(f.data(), f.data() + f.size());
            b.values.assign(g.data(), g.data() + g.size());
            return inner_product(a, b, basis);
        },
        py::arg("f"), py::arg("g"), py::arg("basis"));

    py::class_<Coefficients>(m, "Coefficients")
        .def(py::init<>())
        .def_readwrite("A", &Coefficients::A)
        .def_readwrite("B", &Coefficients::B)
        .def_readwrite("C", &Coefficients::C)
        .def_readwrite("D", &Coefficients::D)
        .def_readwrite("epsilon", &Coefficients::epsilon);

    m.def("preset", [](const std::string& name) { return preset(name); }, py::arg("name"));
    m.def("theta_cutoff", &theta_cutoff, py::arg("xi"));

    py::class_<NoiseSpec>(m, "NoiseSpec")
        .def(py::init<>())
        .def_property(
            "kind", [](const NoiseSpec& s) { return to_string(s.kind); },
            [](NoiseSpec& s, const std::string& v) { s.kind = noise_kind_from_string(v); })
        .def_readwrite("kappa1", &NoiseSpec::kappa1)
        .def_readwrite("kappa2", &NoiseSpec::kappa2)
        .def_readwrite("decay_p", &NoiseSpec::decay_p)
        .def_readwrite("rank", &NoiseSpec::rank);

    py::class_<InitialData>(m, "InitialData")
        .def(py::init<>())
        .def_property(
            "kind", [](const InitialData& d) { return to_string(d.kind); },
            [](InitialData& d, const std::string& v) { d.kind = init_kind_from_string(v); })
        .def_readwrite("amplitude", &InitialData::amplitude)
        .def_readwrite("width", &InitialData::width)
        .def_readwrite("center", &InitialData::center)
        .def_readwrite("mode", &InitialData::mode)
        .def_readwrite("speed", &InitialData::speed)
        .def_readwrite("phase", &InitialData::phase)
        .def_readwrite("path", &InitialData::path);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("coeffs", &SimConfig::coeffs)
        .def_readwrite("domain", &SimConfig::domain)
        .def_readwrite("m", &SimConfig::m)
        .def_readwrite("dt", &SimConfig::dt)
        .def_readwrite("T", &SimConfig::T)
        .def_readwrite("save_stride", &SimConfig::save_stride)
        .def_readwrite("noise", &SimConfig::noise)
        .def_readwrite("lambda_x", &SimConfig::lambda_x)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("n_paths", &SimConfig::n_paths)
        .def_readwrite("enforce_ccond", &SimConfig::enforce_ccond)
        .def_readwrite("init", &SimConfig::init)
        .def_readwrite("k_interval", &SimConfig::k_interval)
        .def_readwrite("threads", &SimConfig::threads)
        .def_property(
            "scheme", [](const SimConfig& c) { return to_string(c.scheme); },
            [](SimConfig& c, const std::string& v) { c.scheme = scheme_from_string(v); })
        .def_readonly("grid_size", &SimConfig::grid_size)
        .def_readonly("noise_rank", &SimConfig::noise_rank)
        .def_readonly("k_effective", &SimConfig::k_effective)
        .def_readonly("warnings", &SimConfig::warnings);

    m.def("validate_config", &validate_config, py::arg("config"));
    m.def("default_config", &default_config);
    m.def("parse_config", &parse_config, py::arg("path"));
    m.def("dump_config", &dump_config, py::arg("config"));

    m.def(
        "galerkin_drift",
        [](py::array_t<double> coeffs, const SimConfig& cfg, const Basis& basis) {
            return to_array(galerkin_drift(state_from_array(coeffs), cfg, basis).coeffs);
        },
        py::arg("coeffs"), py::arg("config"), py::arg("basis"));
    m.def(
        "deterministic_rhs",
        [](py::array_t<double> coeffs, const SimConfig& cfg, const Basis& basis) {
            return to_array(deterministic_rhs(state_from_array(coeffs), cfg, basis).coeffs);
        },
        py::arg("coeffs"), py::arg("config"), py::arg("basis"));
    m.def(
        "initial_state",
        [](const SimConfig& cfg, const Basis& basis) {
            return to_array(initial_state(cfg, basis).coeffs);
        },
        py::arg("config"), py::arg("basis"));

    py::class_<NoiseOperator>(m, "NoiseOperator")
        .def(py::init<const NoiseSpec&, const Basis&>(), py::arg("spec"), py::arg("basis"))
        .def_property_readonly("rank", &NoiseOperator::rank)
        .def(
            "apply",
            [](const NoiseOperator& op, py::array_t<double> coeffs, py::array_t<double> dw,
               const Basis& basis) {
                std::vector<double> dwv(dw.data(), dw.data() + dw.size());
                return to_array(op.apply(state_from_array(coeffs), dwv, basis).coeffs);
            },
            py::arg("coeffs"), py::arg("dw"), py::arg("basis"))
        .def(
            "hs_norm",
            [](const NoiseOperator& op, py::array_t<double> coeffs, const Basis& basis) {
                return op.hs_norm(state_from_array(coeffs), basis);
            },
            py::arg("coeffs"), py::arg("basis"));

    m.def(
        "wiener_increments",
        [](std::uint64_t seed, std::uint64_t path, double dt, int n_steps, int rank) {
            IncrementStream s{seed, path, dt, n_steps, rank};
            const auto inc = wiener_increments(s);
            py::array_t<double> out({n_steps, rank});
            for (int i = 0; i < n_steps; ++i) {
                std::copy(inc[static_cast<size_t>(i)].begin(), inc[static_cast<size_t>(i)].end(),
                          out.mutable_data(i, 0));
            }
            return out;
        },
        py::arg("seed"), py::arg("path"), py::arg("dt"), py::arg("n_steps"), py::arg("rank"));

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("times", &Trajectory::times)
        .def_property_readonly("states",
                               [](const Trajectory& t) {
                                   std::vector<py::array_t<double>> out;
                                   out.reserve(t.states.size());
                                   for (const auto& s : t.states) out.push_back(to_array(s.coeffs));
                                   return out;
                               })
        .def_readonly("max_abs_values", &Trajectory::max_abs_values)
        .def_readonly("cutoff_activations", &Trajectory::cutoff_activations)
        .def_readonly("blew_up", &Trajectory::blew_up)
        .def_readonly("scheme", &Trajectory::scheme);

    m.def(
        "simulate_path",
        [](const SimConfig& cfg, std::uint64_t path_index, int save_stride) {
            PathOptions opt;
            opt.save_stride = save_stride;
            return simulate_path(cfg, path_index, opt);
        },
        py::arg("config"), py::arg("path_index") = 0, py::arg("save_stride") = 1);

    py::class_<FunctionalStats>(m, "FunctionalStats")
        .def_readonly("name", &FunctionalStats::name)
        .def_readonly("mean", &FunctionalStats::mean)
        .def_readonly("variance", &FunctionalStats::variance)
        .def_readonly("ci_half", &FunctionalStats::ci_half)
        .def_readonly("samples", &FunctionalStats::samples);

    py::class_<EnsembleStats>(m, "EnsembleStats")
        .def_readonly("n_paths", &EnsembleStats::n_paths)
        .def_readonly("n_blowups", &EnsembleStats::n_blowups)
        .def_readonly("lambda_violations", &EnsembleStats::lambda_violations)
        .def_readonly("functionals", &EnsembleStats::functionals);

    m.def(
        "run_ensemble", [](const SimConfig& cfg) { return run_ensemble(cfg); },
        py::arg("config"));

    py::class_<WeightFunction>(m, "WeightFunction")
        .def_property_readonly("poly_coeffs",
                               [](const WeightFunction& w) { return to_array(w.p.c); })
        .def_property_readonly("poly_origin", [](const WeightFunction& w) { return w.p.x0; })
        .def_readonly("delta", &WeightFunction::delta)
        .def_readonly("alpha_x", &WeightFunction::alpha_x)
        .def_readonly("gamma", &WeightFunction::gamma);

    m.def("construct_weight", &construct_weight, py::arg("domain"), py::arg("B"), py::arg("C"),
          py::arg("delta"), py::arg("gamma"));
    m.def(
        "verify_weight",
        [](const WeightFunction& w, const Domain& d, double B, double C) {
            const WeightReport rep = verify_weight(w, d, B, C);
            py::dict out;
            out["passed"] = rep.passed();
            out["min_slope"] = rep.min_slope;
            out["max_curvature_combo"] = rep.max_curvature_combo;
            out["p_at_x1"] = rep.p_at_x1;
            return out;
        },
        py::arg("weight"), py::arg("domain"), py::arg("B"), py::arg("C"));
    m.def(
        "energy_functional",
        [](py::array_t<double> coeffs, const WeightFunction& w, const Basis& basis) {
            return energy_functional(state_from_array(coeffs), w, basis);
        },
        py::arg("coeffs"), py::arg("weight"), py::arg("basis"));

    m.def(
        "exact_solution",
        [](const std::string& kind, const SolutionParams& params, double x, double t,
           const Coefficients& coeffs) {
            return exact_solution(solution_kind_from_string(kind), params, x, t, coeffs);
        },
        py::arg("kind"), py::arg("params"), py::arg("x"), py::arg("t"), py::arg("coeffs"));

    py::class_<SolutionParams>(m, "SolutionParams")
        .def(py::init<>())
        .def_readwrite("amplitude", &SolutionParams::amplitude)
        .def_readwrite("wavenumber", &SolutionParams::wavenumber)
        .def_readwrite("phase", &SolutionParams::phase)
        .def_readwrite("c", &SolutionParams::c)
        .def_readwrite("x0", &SolutionParams::x0);

    m.def(
        "run_command",
        [](const std::vector<std::string>& args) { return run_command(args); },
        py::arg("args"));

#ifdef VERSION_INFO
#define HKDVB_STR2(x) #x
#define HKDVB_STR(x) HKDVB_STR2(x)
    m.attr("__version__") = HKDVB_STR(VERSION_INFO);
#else
    m.attr("__version__") = "0.1.0";
#endif
}
