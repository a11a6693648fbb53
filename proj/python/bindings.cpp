#include "fedgia/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace fedgia;

namespace {

std::string trace_csv(const RunTrace& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

py::dict trace_columns(const RunTrace& trace) {
  const auto count = static_cast<Eigen::Index>(trace.rows.size());
  Eigen::VectorXd k(count), tau(count), cr(count), objective(count), error(count), lagrangian(count),
      elapsed(count);
  for (Eigen::Index j = 0; j < count; ++j) {
    const auto& row = trace.rows[static_cast<std::size_t>(j)];
    k[j] = static_cast<double>(row.k);
    tau[j] = static_cast<double>(row.tau);
    cr[j] = static_cast<double>(row.cr);
    objective[j] = row.objective;
    error[j] = row.error;
    lagrangian[j] = row.lagrangian;
    elapsed[j] = row.elapsed_s;
  }
  py::dict out;
  out["k"] = k;
  out["tau"] = tau;
  out["cr"] = cr;
  out["objective"] = objective;
  out["error"] = error;
  out["lagrangian"] = lagrangian;
  out["elapsed_s"] = elapsed;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the fedgia package";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::enum_<LossKind>(m, "LossKind")
      .value("LeastSquares", LossKind::LeastSquares)
      .value("LogisticL2", LossKind::LogisticL2)
      .value("LogisticNonconvex", LossKind::LogisticNonconvex);

  py::enum_<CurvatureVariant>(m, "CurvatureVariant")
      .value("Gram", CurvatureVariant::Gram)
      .value("Diagonal", CurvatureVariant::Diagonal);

  py::enum_<RunStatus>(m, "RunStatus")
      .value("Converged", RunStatus::Converged)
      .value("IterCap", RunStatus::IterCap)
      .value("Diverged", RunStatus::Diverged);

  py::class_<LossModel>(m, "LossModel")
      .def(py::init([](LossKind kind, std::optional<double> mu) {
             auto model = LossModel::with_defaults(kind);
             if (mu) model.mu = *mu;
             return model;
           }),
           py::arg("kind"), py::arg("mu") = py::none())
      .def_static("parse", [](std::string_view name) { return LossModel::with_defaults(parse_loss_kind(name)); })
      .def_readwrite("kind", &LossModel::kind)
      .def_readwrite("mu", &LossModel::mu)
      .def("__repr__", [](const LossModel& l) {
        return "LossModel(" + std::string(to_string(l.kind)) + ", mu=" + format_double(l.mu) + ")";
      });

  py::class_<ClientDataset>(m, "ClientDataset")
      .def(py::init<Mat, Vec>(), py::arg("features"), py::arg("labels"))
      .def_property_readonly("features", &ClientDataset::features)
      .def_property_readonly("labels", &ClientDataset::labels)
      .def_property_readonly("samples", &ClientDataset::samples)
      .def_property_readonly("dim", &ClientDataset::dim);

  py::class_<CurvatureBound>(m, "CurvatureBound")
      .def_readonly("variant", &CurvatureBound::variant)
      .def_readonly("scale", &CurvatureBound::scale)
      .def("dense", &CurvatureBound::dense, py::arg("n"))
      .def("norm", &CurvatureBound::norm);

  m.def("loss_value", &loss_value, py::arg("loss"), py::arg("client"), py::arg("x"));
  m.def("loss_gradient", &loss_gradient, py::arg("loss"), py::arg("client"), py::arg("x"));
  m.def("curvature_bound", &curvature_bound, py::arg("loss"), py::arg("client"), py::arg("variant"));
  m.def(
      "spectral_norm", [](const Mat& b) { return spectral_norm(b).value; }, py::arg("matrix"),
      "Largest eigenvalue of a symmetric PSD matrix.");

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init([](int m_, int n, int d_min, int d_max, std::uint64_t seed) {
             SyntheticSpec s{m_, n, d_min, d_max, seed};
             s.validate();
             return s;
           }),
           py::arg("m") = 128, py::arg("n") = 100, py::arg("d_min") = 50, py::arg("d_max") = 150,
           py::arg("seed") = 1)
      .def_readwrite("m", &SyntheticSpec::m)
      .def_readwrite("n", &SyntheticSpec::n)
      .def_readwrite("d_min", &SyntheticSpec::d_min)
      .def_readwrite("d_max", &SyntheticSpec::d_max)
      .def_readwrite("seed", &SyntheticSpec::seed);

  py::class_<FederatedProblem>(m, "FederatedProblem")
      .def(py::init<std::vector<ClientDataset>, LossModel>(), py::arg("clients"), py::arg("loss"))
      .def_property_readonly("m", &FederatedProblem::m)
      .def_property_readonly("n", &FederatedProblem::n)
      .def_property_readonly("loss", &FederatedProblem::loss)
      .def_property_readonly("total_samples", &FederatedProblem::total_samples)
      .def("client", &FederatedProblem::client, py::arg("i"), py::return_value_policy::reference_internal)
      .def("objective", &FederatedProblem::objective, py::arg("x"))
      .def("gradient", &FederatedProblem::gradient, py::arg("x"))
      .def("with_loss", &FederatedProblem::with_loss, py::arg("loss"))
      .def("fingerprint", [](const FederatedProblem& p) { return fingerprint(p); });

  m.def("generate_linear_noniid", &generate_linear_noniid, py::arg("spec"),
        py::arg("loss") = LossModel::least_squares());
  m.def("partition_dataset", &partition_dataset, py::arg("features"), py::arg("labels"), py::arg("m"),
        py::arg("seed"), py::arg("loss"));
  m.def(
      "load_dataset",
      [](const std::filesystem::path& path, std::string_view format, bool skip_header) {
        LoadOptions opts;
        opts.skip_header = skip_header;
        auto data = load_dataset(path, parse_data_format(format), opts);
        return py::make_tuple(data.features, data.labels);
      },
      py::arg("path"), py::arg("format") = "csv", py::arg("skip_header") = false,
      "Returns (features, labels).");

  py::class_<TraceRow>(m, "TraceRow")
      .def_readonly("k", &TraceRow::k)
      .def_readonly("tau", &TraceRow::tau)
      .def_readonly("cr", &TraceRow::cr)
      .def_readonly("objective", &TraceRow::objective)
      .def_readonly("error", &TraceRow::error)
      .def_readonly("lagrangian", &TraceRow::lagrangian)
      .def_readonly("elapsed_s", &TraceRow::elapsed_s);

  py::class_<RunTrace>(m, "RunTrace")
      .def_readonly("rows", &RunTrace::rows)
      .def_readonly("status", &RunTrace::status)
      .def_readonly("iterations", &RunTrace::iterations)
      .def_readonly("x", &RunTrace::x)
      .def_property_readonly("final", &RunTrace::final_row)
      .def("columns", &trace_columns, "Per-round columns as numpy arrays.")
      .def("to_csv", &trace_csv);

  m.def(
      "run",
      [](const FederatedProblem& problem, std::string_view algorithm, int k0, double alpha,
         std::optional<double> t, std::optional<double> tol, long max_iter, long max_cr,
         std::uint64_t seed, int workers) {
        RunSpec spec;
        spec.algorithm = parse_algorithm(algorithm);
        spec.k0 = k0;
        spec.alpha = alpha;
        spec.t = t;
        spec.tol = tol;
        spec.max_iter = max_iter;
        spec.max_cr = max_cr;
        spec.seed = seed;
        spec.workers = workers;
        py::gil_scoped_release release;
        return run_algorithm(problem, spec);
      },
      py::arg("problem"), py::arg("algorithm") = "fedgia-g", py::arg("k0") = 1, py::arg("alpha") = 1.0,
      py::arg("t") = py::none(), py::arg("tol") = py::none(), py::arg("max_iter") = 10000,
      py::arg("max_cr") = 0, py::arg("seed") = 1, py::arg("workers") = 1,
      "Train one algorithm with the per-loss default settings.");

  py::class_<SummaryRow>(m, "SummaryRow")
      .def_readonly("algorithm", &SummaryRow::algorithm)
      .def_readonly("k0", &SummaryRow::k0)
      .def_readonly("alpha", &SummaryRow::alpha)
      .def_readonly("trials", &SummaryRow::trials)
      .def_readonly("obj_mean", &SummaryRow::obj_mean)
      .def_readonly("cr_mean", &SummaryRow::cr_mean)
      .def_readonly("time_mean_s", &SummaryRow::time_mean_s)
      .def_readonly("err_mean", &SummaryRow::err_mean);

  m.def(
      "run_experiment",
      [](std::string_view config_text) {
        const auto config = parse_config(config_text);
        ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(config);
        }
        return py::make_tuple(result.summary, result.failures);
      },
      py::arg("config_text"), "Runs a key = value experiment config; returns (summary rows, failures).");

  m.def("default_tol", [](LossKind kind, long d, long n, int m_) { return default_settings(kind, d, n, m_).tol; },
        py::arg("kind"), py::arg("d"), py::arg("n"), py::arg("m"));
  m.def("default_t", [](LossKind kind, long d, long n, int m_) { return default_settings(kind, d, n, m_).t; },
        py::arg("kind"), py::arg("d"), py::arg("n"), py::arg("m"));
}
