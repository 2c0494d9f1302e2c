#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bolab/cli.hpp"

namespace py = pybind11;
using namespace bolab;

namespace {

py::object from_json(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json to_json_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

template <class F>
auto translate(F f) {
  try {
    return f();
  } catch (const InadmissibleError& e) {
    throw py::value_error(e.what());
  } catch (const ConfigError& e) {
    throw py::value_error(e.what());
  }
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Benjamin-Ono Lax operator toolkit";

  py::class_<Geometry>(m, "Geometry")
      .def_property_readonly("kind", [](const Geometry& g) { return kind_name(g.kind); })
      .def_readonly("length", &Geometry::length)
      .def_readonly("n", &Geometry::n)
      .def("nodes", [](const Geometry& g) { return nodes(g); })
      .def("__repr__", [](const Geometry& g) { return to_json(g).dump(); });
  m.def("circle", &make_circle, py::arg("n"));
  m.def("box", &make_box, py::arg("length"), py::arg("n"));
  m.def("line", &make_line, py::arg("n"), py::arg("scale") = 1.0);

  py::class_<RealField>(m, "RealField")
      .def_readonly("geometry", &RealField::geom)
      .def_readonly("coeffs", &RealField::coeffs)
      .def("values", [](const RealField& f) { return grid_values(f); })
      .def("integral", [](const RealField& f) { return integral(f); })
      .def("l2_norm", [](const RealField& f) { return l2_norm(f); });
  m.def("field", [](const Geometry& g, const RVec& samples) {
    return translate([&] { return real_from_samples(g, samples); });
  });
  m.def(
      "initial",
      [](const Geometry& g, const std::string& d, std::uint64_t seed) {
        return translate([&] { return make_initial(g, d, seed); });
      },
      py::arg("geometry"), py::arg("descriptor"), py::arg("seed") = 0);

  m.def(
      "beta", [](const RealField& q, double k) { return translate([&] { return beta(q, k); }); },
      py::arg("q"), py::arg("kappa"));
  m.def(
      "beta_derivatives",
      [](const RealField& q, double k, int order) {
        return translate([&] { return beta_derivatives(q, k, order); });
      },
      py::arg("q"), py::arg("kappa"), py::arg("order") = 2);
  m.def("kappa_min", [](const RealField& q) { return admissibility(build_lax(q)).kappa_min; });
  m.def(
      "eigenvalues",
      [](const RealField& q, int k) {
        std::vector<double> out;
        for (const auto& e : eigen_spectrum(build_lax(q), k)) out.push_back(e.value);
        return out;
      },
      py::arg("q"), py::arg("count") = 4);
  m.def("hamiltonians", [](const RealField& q) {
    HamiltonianValue h = polynomial_hamiltonians(q);
    return py::dict(py::arg("P") = h.P, py::arg("H_BO") = h.H_BO, py::arg("H_2") = h.H_2,
                    py::arg("mean") = h.mean);
  });

  m.def(
      "evolve",
      [](const RealField& q, const std::string& flow, double kappa, double dt, double T, int stride,
         std::vector<double> kappas) {
        return translate([&] {
          FlowSpec s{flow_from_name(flow), kappa, {}, dt, T, stride, kappas};
          Trajectory tr = evolve(q, s);
          py::list mons;
          for (const auto& r : tr.monitors)
            mons.append(py::dict(py::arg("t") = r.t, py::arg("P") = r.P, py::arg("H_BO") = r.H_BO,
                                 py::arg("H_2") = r.H_2, py::arg("beta") = r.beta));
          return py::make_tuple(tr.q.back(), mons);
        });
      },
      py::arg("q"), py::arg("flow"), py::arg("kappa") = 0.0, py::arg("dt") = 1e-3, py::arg("T") = 1.0,
      py::arg("stride") = 100, py::arg("kappas") = std::vector<double>{});

  m.def(
      "explicit_formula",
      [](const RealField& q, const std::string& flow, double kappa, double t, cplx z) {
        return translate([&] {
          FlowSpec s{flow_from_name(flow), kappa, {}, 1e-3, t, 1, {}};
          return gerard_solve(q, phi_for_flow(s), t, z).value;
        });
      },
      py::arg("q"), py::arg("flow"), py::arg("kappa"), py::arg("t"), py::arg("z"));

  m.attr("suites") = kSuites;
  m.def(
      "verify",
      [](const std::string& suite, const py::dict& config) {
        return translate([&] {
          RunConfig c = config_from_json(to_json_py(config));
          return from_json(to_json(run_suite(suite, c)));
        });
      },
      py::arg("suite"), py::arg("config") = py::dict());
}
