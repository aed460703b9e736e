#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "netid/error.hpp"
#include "netid/indirect.hpp"
#include "netid/likelihood.hpp"
#include "netid/pipeline.hpp"

namespace py = pybind11;
using namespace netid;

namespace {

Dataset dataset_from_arrays(const ExperimentConfig& config, const Matrix& r, const Matrix& observed) {
  if (r.rows() != observed.rows()) throw Error(ErrorCode::kInvalidDimension, "r and observed differ in length");
  Dataset d;
  d.n = static_cast<std::size_t>(r.rows());
  d.r = r;
  d.observed = observed;
  for (const auto& id : config.topology.observed) d.observed_names.push_back(id.name());
  d.seed = config.seed;
  return d;
}

py::dict dataset_to_dict(const Dataset& d) {
  py::dict out;
  out["r"] = d.r;
  out["observed"] = d.observed;
  out["observed_names"] = d.observed_names;
  if (d.full_state) out["full_state"] = *d.full_state;
  if (d.disturbance) out["disturbance"] = *d.disturbance;
  return out;
}

py::object json_to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_netid, m) {
  m.doc() = "Maximum-likelihood identification of dynamic networks with missing data";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<ExperimentConfig>(m, "Config")
      .def_static("from_json", [](const std::string& text) { return parse_config(text, "config"); }, py::arg("text"))
      .def_static("experiment", &default_experiment_config, py::arg("observed") = std::vector<std::string>{"u3"})
      .def("to_json", [](const ExperimentConfig& c) { return config_to_json(c).dump(); })
      .def("truth", &ExperimentConfig::truth)
      .def_readwrite("n", &ExperimentConfig::n)
      .def_readwrite("ts", &ExperimentConfig::ts)
      .def_readwrite("lambda_true", &ExperimentConfig::lambda_true)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("n_starts", &ExperimentConfig::n_starts)
      .def_property(
          "max_iter", [](const ExperimentConfig& c) { return c.optimizer.max_iter; },
          [](ExperimentConfig& c, int v) { c.optimizer.max_iter = v; })
      .def_property_readonly("theta_size", [](const ExperimentConfig& c) { return c.topology.theta_size(); })
      .def_property_readonly("observed", [](const ExperimentConfig& c) {
        std::vector<std::string> names;
        for (const auto& id : c.topology.observed) names.push_back(id.name());
        return names;
      });

  m.def(
      "simulate",
      [](const ExperimentConfig& c, std::optional<std::uint64_t> seed) {
        return dataset_to_dict(generate_dataset(c.topology, c.truth(), c.n, c.lambda_true, seed.value_or(c.seed)));
      },
      py::arg("config"), py::arg("seed") = py::none(), "Simulate the configured network; returns a dict of arrays.");

  py::class_<LikelihoodWorkspace>(m, "Likelihood")
      .def(py::init([](const ExperimentConfig& c, const Matrix& r, const Matrix& observed) {
             LikelihoodOptions o;
             o.dof = c.dof;
             return LikelihoodWorkspace(c.topology, r, observed, o);
           }),
           py::arg("config"), py::arg("r"), py::arg("observed"))
      .def("cost", &LikelihoodWorkspace::concentrated_nll, py::arg("theta"))
      .def("gradient", &LikelihoodWorkspace::gradient, py::arg("theta"))
      .def("lambda_hat", &LikelihoodWorkspace::lambda_hat, py::arg("theta"));

  m.def(
      "estimate",
      [](const ExperimentConfig& c, const Matrix& r, const Matrix& observed, const std::string& method) {
        const auto data = dataset_from_arrays(c, r, observed);
        ExperimentConfig run = c;
        run.n = data.n;
        return json_to_python(results_to_json(run, estimate(run, data, parse_method(method))));
      },
      py::arg("config"), py::arg("r"), py::arg("observed"), py::arg("method") = "direct",
      "Run an estimation method; returns the results document as a dict.");

  m.def(
      "evaluate",
      [](const ExperimentConfig& c, const Vector& theta, std::uint64_t fresh_seed, const std::string& variant) {
        const auto models = unpack_theta(theta, c.topology);
        return json_to_python(to_json(evaluate_models(c, models, fresh_seed, parse_fit_variant(variant))));
      },
      py::arg("config"), py::arg("theta"), py::arg("fresh_seed"), py::arg("variant") = "standard");

  m.def(
      "indirect",
      [](const ExperimentConfig& c, const Matrix& r, const Matrix& observed) {
        return json_to_python(to_json(indirect_identify(c.topology, dataset_from_arrays(c, r, observed))));
      },
      py::arg("config"), py::arg("r"), py::arg("observed"));

  m.def(
      "zoh",
      [](const std::vector<double>& num, const std::vector<double>& den, double ts) {
        const auto d = zoh_discretize({Polynomial(num), Polynomial(den)}, ts);
        return py::make_tuple(d.a, d.b);
      },
      py::arg("num"), py::arg("den"), py::arg("ts"), "Returns (a_1..a_n, b_0..b_n).");

  m.def(
      "freq_response",
      [](const std::vector<double>& b, const std::vector<double>& a, const std::vector<double>& omegas, double ts) {
        const auto fr = freq_response(Polynomial(b), Polynomial(a), omegas, ts);
        return py::make_tuple(fr.magnitude_db, fr.phase_deg);
      },
      py::arg("b"), py::arg("a"), py::arg("omegas"), py::arg("ts"));

  m.def(
      "fit",
      [](const Vector& xhat, const Vector& xref, const std::string& variant) {
        return fit_metric(xhat, xref, parse_fit_variant(variant));
      },
      py::arg("xhat"), py::arg("xref"), py::arg("variant") = "standard");
}
