#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <limits>
#include <optional>
#include <string>

#include "switchest/asymptotics.hpp"
#include "switchest/errors.hpp"
#include "switchest/input_state_filter.hpp"
#include "switchest/mode_inference.hpp"
#include "switchest/simlab/estimation.hpp"
#include "switchest/simlab/io.hpp"
#include "switchest/simlab/metrics.hpp"
#include "switchest/system_model.hpp"

namespace py = pybind11;
using namespace switchest;
using namespace switchest::simlab;

namespace {

// nlohmann::json round-trips through the Python json module.
py::object to_python(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

json from_python(const py::object& o) {
  const std::string text = py::module_::import("json").attr("dumps")(o).cast<std::string>();
  return json::parse(text);
}

RunConfig config_from(const py::object& cfg) {
  if (py::isinstance<py::str>(cfg)) return load_run_config(cfg.cast<std::string>());
  return run_config_from_json(from_python(cfg));
}

template <class Get>
Matrix stack(const Traces& t, Get get) {
  Eigen::Index width = 0;
  for (const auto& r : t.rows) width = std::max(width, get(r).size());
  Matrix out = Matrix::Constant(static_cast<Eigen::Index>(t.rows.size()), width,
                                std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const Vector& v = get(t.rows[k]);
    out.row(static_cast<Eigen::Index>(k)).head(v.size()) = v.transpose();
  }
  return out;
}

// Column arrays keyed by trace group; vectors missing at a step are NaN rows.
py::dict traces_to_dict(const Traces& t) {
  py::dict d;
  std::vector<long> k, true_mode, q_map, p_R;
  for (const auto& r : t.rows) {
    k.push_back(r.k);
    true_mode.push_back(r.true_mode);
    q_map.push_back(r.q_map);
    p_R.push_back(r.p_R);
  }
  d["k"] = k;
  d["true_mode"] = true_mode;
  d["q_map"] = q_map;
  d["p_R"] = p_R;
  d["x_true"] = stack(t, [](const TraceRow& r) -> const Vector& { return r.x_true; });
  d["d_true"] = stack(t, [](const TraceRow& r) -> const Vector& { return r.d_true; });
  d["y"] = stack(t, [](const TraceRow& r) -> const Vector& { return r.y; });
  d["mu"] = stack(t, [](const TraceRow& r) -> const Vector& { return r.mu; });
  d["x_hat"] = stack(t, [](const TraceRow& r) -> const Vector& { return r.x_hat; });
  d["d_hat_prev"] = stack(t, [](const TraceRow& r) -> const Vector& { return r.d_hat_prev; });
  d["Px_diag"] = stack(t, [](const TraceRow& r) -> const Vector& { return r.Px_diag; });
  d["nu_white"] = stack(t, [](const TraceRow& r) -> const Vector& { return r.nu_white; });
  d["loglike"] = stack(t, [](const TraceRow& r) -> const Vector& { return r.loglike; });
  d["mode_names"] = t.mode_names;
  return d;
}

}  // namespace

PYBIND11_MODULE(_switchest, m) {
  m.doc() = "Joint mode, unknown-input and state estimation for switched linear systems";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidModel>(m, "InvalidModel", base.ptr());
  py::register_exception<RankDeficient>(m, "RankDeficient", base.ptr());
  py::register_exception<NumericalBreakdown>(m, "NumericalBreakdown", base.ptr());
  py::register_exception<DegenerateInnovation>(m, "DegenerateInnovation", base.ptr());
  py::register_exception<DegenerateUpdate>(m, "DegenerateUpdate", base.ptr());
  py::register_exception<NoSteadyState>(m, "NoSteadyState", base.ptr());
  py::register_exception<Unstable>(m, "Unstable", base.ptr());
  py::register_exception<NoConvergence>(m, "NoConvergence", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<ContinuousModeModel>(m, "ContinuousModeModel")
      .def(py::init<>())
      .def_readwrite("A", &ContinuousModeModel::A)
      .def_readwrite("B", &ContinuousModeModel::B)
      .def_readwrite("G", &ContinuousModeModel::G)
      .def_readwrite("C", &ContinuousModeModel::C)
      .def_readwrite("D", &ContinuousModeModel::D)
      .def_readwrite("H", &ContinuousModeModel::H)
      .def_readwrite("Q", &ContinuousModeModel::Q)
      .def_readwrite("R", &ContinuousModeModel::R);

  py::class_<DiscreteModeModel>(m, "DiscreteModeModel")
      .def(py::init<>())
      .def(py::init([](Matrix A, Matrix B, Matrix G, Matrix C, Matrix D, Matrix H, Matrix Q, Matrix R) {
             DiscreteModeModel dm{std::move(A), std::move(B), std::move(G), std::move(C),
                                  std::move(D), std::move(H), std::move(Q), std::move(R)};
             validate(dm);
             return dm;
           }),
           py::arg("A"), py::arg("B"), py::arg("G"), py::arg("C"), py::arg("D"), py::arg("H"),
           py::arg("Q"), py::arg("R"))
      .def_readwrite("A", &DiscreteModeModel::A)
      .def_readwrite("B", &DiscreteModeModel::B)
      .def_readwrite("G", &DiscreteModeModel::G)
      .def_readwrite("C", &DiscreteModeModel::C)
      .def_readwrite("D", &DiscreteModeModel::D)
      .def_readwrite("H", &DiscreteModeModel::H)
      .def_readwrite("Q", &DiscreteModeModel::Q)
      .def_readwrite("R", &DiscreteModeModel::R)
      .def_property_readonly("n", &DiscreteModeModel::n)
      .def_property_readonly("p", &DiscreteModeModel::p)
      .def_property_readonly("l", &DiscreteModeModel::l);

  py::class_<DecomposedModeModel>(m, "DecomposedModeModel")
      .def_readonly("base", &DecomposedModeModel::base)
      .def_readonly("p_H", &DecomposedModeModel::p_H)
      .def_readonly("C1", &DecomposedModeModel::C1)
      .def_readonly("C2", &DecomposedModeModel::C2)
      .def_readonly("G1", &DecomposedModeModel::G1)
      .def_readonly("G2", &DecomposedModeModel::G2)
      .def_readonly("Sigma", &DecomposedModeModel::Sigma)
      .def_readonly("T1", &DecomposedModeModel::T1)
      .def_readonly("T2", &DecomposedModeModel::T2)
      .def_readonly("V1", &DecomposedModeModel::V1)
      .def_readonly("V2", &DecomposedModeModel::V2)
      .def_readonly("R1", &DecomposedModeModel::R1)
      .def_readonly("R2", &DecomposedModeModel::R2);

  py::class_<WellPosedness>(m, "WellPosedness")
      .def_readonly("required_rank", &WellPosedness::required_rank)
      .def_readonly("c2g2_rank", &WellPosedness::c2g2_rank)
      .def_readonly("detectable", &WellPosedness::detectable)
      .def_readonly("noise_cross_correlation", &WellPosedness::noise_cross_correlation)
      .def("ok", &WellPosedness::ok);

  m.def("discretize_zoh", &discretize_zoh, py::arg("model"), py::arg("dt"));
  m.def("decompose", &decompose, py::arg("model"));
  m.def("diagnose", &diagnose, py::arg("decomposed"));

  py::class_<FilterState>(m, "FilterState")
      .def_readonly("k", &FilterState::k)
      .def_readonly("x_hat", &FilterState::x_hat)
      .def_readonly("P_x", &FilterState::P_x)
      .def_readonly("d1_hat", &FilterState::d1_hat)
      .def_readonly("d_hat_prev", &FilterState::d_hat_prev)
      .def_readonly("P_d_prev", &FilterState::P_d_prev)
      .def_readonly("nu_bar", &FilterState::nu_bar)
      .def_readonly("R_star2", &FilterState::R_star2);

  m.def("filter_init", &init, py::arg("decomposed"), py::arg("x0_hat"), py::arg("P0"), py::arg("y0"),
        py::arg("u0"));
  m.def("filter_step",
        py::overload_cast<const FilterState&, const DecomposedModeModel&, const Vector&, const Vector&,
                          const Vector&>(&step),
        py::arg("state"), py::arg("decomposed"), py::arg("u_prev"), py::arg("u_now"), py::arg("y_now"));

  m.def(
      "log_likelihood",
      [](const Vector& nu_bar, const Matrix& R_star2) {
        const ModeLikelihood l = log_likelihood(nu_bar, R_star2);
        return py::make_tuple(l.value, l.rank);
      },
      py::arg("nu_bar"), py::arg("R_star2"), "Returns (log-likelihood, rank of R_star2).");
  m.def(
      "update_probabilities",
      [](const Vector& mu, const Vector& loglike) {
        return update_probabilities(ModeProbabilities(mu), loglike).mu;
      },
      py::arg("mu"), py::arg("loglike"));

  py::class_<SteadyGains>(m, "SteadyGains")
      .def_readonly("L", &SteadyGains::L)
      .def_readonly("M2", &SteadyGains::M2)
      .def_readonly("R_star2", &SteadyGains::R_star2)
      .def_readonly("P_x", &SteadyGains::P_x)
      .def_readonly("iterations", &SteadyGains::iterations);

  m.def("steady_state_gains", &steady_state_gains, py::arg("decomposed"), py::arg("tol") = 1e-12,
        py::arg("max_steps") = 200000);
  m.def("lyapunov_limit", py::overload_cast<const Matrix&, const Matrix&, double, long>(&lyapunov_limit),
        py::arg("A"), py::arg("WQWt"), py::arg("tol") = 1e-12, py::arg("max_iter") = 1000000);
  m.def("kl_divergence", py::overload_cast<const Matrix&, const Matrix&, const Matrix&>(&kl_divergence),
        py::arg("R_cross"), py::arg("R_star_q"), py::arg("R_star_true"));
  m.def(
      "kl_report",
      [](const DiscreteModeModel& truth, const std::vector<DiscreteModeModel>& candidates,
         std::optional<std::size_t> truth_index) {
        std::vector<DecomposedModeModel> decs;
        std::vector<std::string> names;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
          decs.push_back(decompose(candidates[i]));
          names.push_back(std::to_string(i));
        }
        return to_python(kl_report_to_json(kl_report(truth, decs, names, truth_index)));
      },
      py::arg("truth"), py::arg("candidates"), py::arg("truth_index") = py::none());

  m.def(
      "simulate_and_estimate",
      [](const py::object& cfg, std::optional<std::uint64_t> seed, std::optional<std::string> estimator) {
        RunConfig rc = config_from(cfg);
        if (seed) rc.scenario.seed = *seed;
        if (estimator) rc.estimator.kind = parse_estimator_kind(*estimator);
        Traces t;
        {
          py::gil_scoped_release release;
          t = run_estimator(rc.scenario, simulate(rc.scenario), rc.estimator);
        }
        py::dict out = traces_to_dict(t);
        out["metrics"] = to_python(metrics_to_json(metrics(t)));
        return out;
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("estimator") = py::none(),
      "Run one scenario. `config` is a path to a JSON file or an equivalent dict.");
  m.def(
      "expand_config", [](const py::object& cfg) { return to_python(run_config_to_json(config_from(cfg))); },
      py::arg("config"));
}
