#include "switchest/simlab/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "switchest/errors.hpp"

namespace switchest::simlab {

namespace {

Waveform waveform_from_json(const json& j) {
  if (j.is_number()) return Waveform{j.get<double>(), 0, 0, 0, 0};
  if (!j.is_object()) throw ConfigError("waveform must be a number or an object");
  Waveform w;
  w.offset = j.value("offset", 0.0);
  w.amplitude = j.value("amplitude", 0.0);
  w.frequency = j.value("frequency", 0.0);
  w.phase = j.value("phase", 0.0);
  w.slope = j.value("slope", 0.0);
  return w;
}

json waveform_to_json(const Waveform& w) {
  return {{"offset", w.offset},
          {"amplitude", w.amplitude},
          {"frequency", w.frequency},
          {"phase", w.phase},
          {"slope", w.slope}};
}

Signal signal_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("signal must be an array of waveforms");
  Signal s;
  for (const auto& w : j) s.push_back(waveform_from_json(w));
  return s;
}

json signal_to_json(const Signal& s) {
  json out = json::array();
  for (const auto& w : s) out.push_back(waveform_to_json(w));
  return out;
}

int mode_index(const json& j, const std::vector<std::string>& names) {
  if (j.is_number_integer()) return j.get<int>();
  if (j.is_string()) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == j.get<std::string>()) return static_cast<int>(i);
    }
    throw ConfigError("unknown mode name '" + j.get<std::string>() + "'");
  }
  throw ConfigError("mode must be an index or a name");
}

ModeSchedule schedule_from_json(const json& j, const std::vector<std::string>& names) {
  const std::string type = j.value("type", "explicit");
  if (type == "markov") {
    return ModeSchedule::markov(matrix_from_json(j.at("transition")),
                                mode_index(j.value("initial_mode", json(0)), names));
  }
  if (type != "explicit") throw ConfigError("schedule type must be 'explicit' or 'markov'");
  ModeSchedule s;
  s.switches.clear();
  for (const auto& sw : j.at("switches")) {
    if (!sw.is_array() || sw.size() != 2) throw ConfigError("switches are [step, mode] pairs");
    s.switches.emplace_back(sw[0].get<long>(), mode_index(sw[1], names));
  }
  return s;
}

json schedule_to_json(const ModeSchedule& s) {
  if (s.kind == ModeSchedule::Kind::Markov) {
    return {{"type", "markov"},
            {"transition", matrix_to_json(s.transition)},
            {"initial_mode", s.initial_mode}};
  }
  json sw = json::array();
  for (const auto& [step, mode] : s.switches) sw.push_back({step, mode});
  return {{"type", "explicit"}, {"switches", sw}};
}

template <class Model>
Model model_from_json(const json& j) {
  Model m;
  m.A = matrix_from_json(j.at("A"));
  const Eigen::Index n = m.A.rows();
  m.C = matrix_from_json(j.at("C"));
  const Eigen::Index l = m.C.rows();
  m.B = j.contains("B") ? matrix_from_json(j["B"]) : Matrix(n, 0);
  m.G = j.contains("G") ? matrix_from_json(j["G"]) : Matrix(n, 0);
  m.D = j.contains("D") ? matrix_from_json(j["D"]) : Matrix::Zero(l, m.B.cols());
  m.H = j.contains("H") ? matrix_from_json(j["H"]) : Matrix::Zero(l, m.G.cols());
  m.Q = matrix_from_json(j.at("Q"));
  m.R = matrix_from_json(j.at("R"));
  return m;
}

template <class Model>
json model_to_json(const Model& m, const std::string& name) {
  return {{"name", name},
          {"A", matrix_to_json(m.A)}, {"B", matrix_to_json(m.B)}, {"G", matrix_to_json(m.G)},
          {"C", matrix_to_json(m.C)}, {"D", matrix_to_json(m.D)}, {"H", matrix_to_json(m.H)},
          {"Q", matrix_to_json(m.Q)}, {"R", matrix_to_json(m.R)}};
}

IntersectionOptions intersection_options(const json& j) {
  IntersectionOptions o;
  if (j.is_null()) return o;
  o.horizon = j.value("horizon", o.horizon);
  o.switch_on = j.value("switch_on", o.switch_on);
  o.switch_off = j.value("switch_off", o.switch_off);
  o.kp = j.value("kp", o.kp);
  o.kd = j.value("kd", o.kd);
  o.dt = j.value("dt", o.dt);
  if (j.contains("d1")) o.d1 = waveform_from_json(j["d1"]);
  if (j.contains("d2")) o.d2 = waveform_from_json(j["d2"]);
  if (j.contains("u")) o.u = waveform_from_json(j["u"]);
  return o;
}

EstimatorConfig estimator_from_json(const json& j, const Scenario& s, bool preset) {
  EstimatorConfig cfg;
  cfg.kind = parse_estimator_kind(j.value("kind", "dynamic"));
  if (j.contains("transition")) {
    cfg.transition = matrix_from_json(j["transition"]);
  } else if (s.schedule.kind == ModeSchedule::Kind::Markov) {
    cfg.transition = s.schedule.transition;
  } else if (preset) {
    cfg.transition = intersection_transition();
  }
  if (j.contains("mu0")) cfg.mu0 = vector_from_json(j["mu0"]);
  cfg.static_cfg.prob_floor = j.value("prob_floor", cfg.static_cfg.prob_floor);
  cfg.static_cfg.reinit_threshold = j.value("reinit_threshold", cfg.static_cfg.reinit_threshold);
  cfg.exec = j.value("parallel", false) ? Execution::Parallel : Execution::Sequential;
  return cfg;
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  RunConfig rc;
  Scenario& s = rc.scenario;
  const bool preset = j.contains("preset");
  if (preset) {
    IntersectionOptions opts = intersection_options(j.value("intersection", json()));
    if (j.contains("seed")) opts.seed = j["seed"].get<std::uint64_t>();
    s = intersection_scenario(parse_intersection_variant(j["preset"].get<std::string>()), opts);
  } else {
    const std::string time = j.value("time", "discrete");
    if (time != "discrete" && time != "continuous") {
      throw ConfigError("time must be 'discrete' or 'continuous'");
    }
    s.dt = j.value("dt", 1.0);
    std::vector<DiscreteModeModel> modes;
    std::vector<std::string> names;
    const json& jm = j.at("modes");
    if (!jm.is_array() || jm.empty()) throw ConfigError("'modes' must be a non-empty array");
    for (std::size_t i = 0; i < jm.size(); ++i) {
      names.push_back(jm[i].value("name", std::to_string(i)));
      if (time == "continuous") {
        s.continuous.push_back(model_from_json<ContinuousModeModel>(jm[i]));
        modes.push_back(discretize_zoh(s.continuous.back(), s.dt));
      } else {
        modes.push_back(model_from_json<DiscreteModeModel>(jm[i]));
      }
    }
    s.system = SwitchedSystem(std::move(modes), std::move(names));
    const Eigen::Index n = s.system.n();
    s.x0 = Vector::Zero(n);
    s.P0 = Matrix::Identity(n, n);
    for (std::size_t q = 0; q < s.system.size(); ++q) {
      s.d.emplace_back(static_cast<std::size_t>(s.system.modes[q].p()), Waveform{});
    }
    s.u.assign(static_cast<std::size_t>(s.system.m()), Waveform{});
  }

  s.name = j.value("name", s.name);
  s.horizon = j.value("horizon", s.horizon);
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("schedule")) s.schedule = schedule_from_json(j["schedule"], s.system.names);
  if (j.contains("x0")) s.x0 = vector_from_json(j["x0"]);
  s.x0_hat = j.contains("x0_hat") ? vector_from_json(j["x0_hat"]) : (preset ? s.x0_hat : s.x0);
  if (j.contains("P0")) s.P0 = matrix_from_json(j["P0"]);
  s.sample_initial_state = j.value("sample_initial_state", s.sample_initial_state);
  if (j.contains("u")) s.u = signal_from_json(j["u"]);
  if (j.contains("d")) {
    s.d.clear();
    for (const auto& sig : j["d"]) s.d.push_back(signal_from_json(sig));
  }
  s.validate();
  rc.estimator = estimator_from_json(j.value("estimator", json::object()), s, preset);
  // constructing the estimator checks transition, mu0 and floor
  MultipleModelEstimator(ModelBank(s.system), rc.estimator);
  return rc;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::vector<std::string>& vector_groups() {
  static const std::vector<std::string> groups{
      "x_true", "d_true", "u", "y", "mu", "x_hat", "d_hat_prev", "Px_diag",
      "Pd_diag", "nu", "S_diag", "nu_white", "loglike"};
  return groups;
}

std::vector<Vector*> row_vectors(TraceRow& r) {
  return {&r.x_true, &r.d_true, &r.u, &r.y, &r.mu, &r.x_hat, &r.d_hat_prev,
          &r.Px_diag, &r.Pd_diag, &r.nu, &r.S_diag, &r.nu_white, &r.loglike};
}

std::vector<const Vector*> row_vectors(const TraceRow& r) {
  return {&r.x_true, &r.d_true, &r.u, &r.y, &r.mu, &r.x_hat, &r.d_hat_prev,
          &r.Px_diag, &r.Pd_diag, &r.nu, &r.S_diag, &r.nu_white, &r.loglike};
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Matrix matrix_from_json(const json& j) {
  try {
    if (j.is_object()) {
      const auto rows = j.at("rows").get<Eigen::Index>();
      const auto cols = j.at("cols").get<Eigen::Index>();
      const auto data = j.at("data").get<std::vector<double>>();
      if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw ConfigError("matrix data length does not match rows x cols");
      }
      Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
      }
      return m;
    }
    if (!j.is_array()) throw ConfigError("matrix must be nested rows or {rows, cols, data}");
    if (j.empty()) return Matrix(0, 0);
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto row = j[static_cast<std::size_t>(r)].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError("ragged matrix rows");
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
    }
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad matrix: ") + e.what());
  }
}

json matrix_to_json(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", json::array()}};
  }
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

Vector vector_from_json(const json& j) {
  try {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad vector: ") + e.what());
  }
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

EstimatorKind parse_estimator_kind(const std::string& name) {
  if (name == "static") return EstimatorKind::Static;
  if (name == "dynamic") return EstimatorKind::Dynamic;
  throw ConfigError("estimator must be 'static' or 'dynamic', got '" + name + "'");
}

std::string to_string(EstimatorKind k) { return k == EstimatorKind::Static ? "static" : "dynamic"; }

RunConfig run_config_from_json(const json& j) {
  try {
    return parse_run_config(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  } catch (const InvalidModel& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  }
}

json run_config_to_json(const RunConfig& rc) {
  const Scenario& s = rc.scenario;
  json j;
  j["name"] = s.name;
  j["dt"] = s.dt;
  j["modes"] = json::array();
  if (!s.continuous.empty()) {
    j["time"] = "continuous";
    for (std::size_t i = 0; i < s.continuous.size(); ++i) {
      j["modes"].push_back(model_to_json(s.continuous[i], s.system.names[i]));
    }
  } else {
    j["time"] = "discrete";
    for (std::size_t i = 0; i < s.system.size(); ++i) {
      j["modes"].push_back(model_to_json(s.system.modes[i], s.system.names[i]));
    }
  }
  j["horizon"] = s.horizon;
  j["schedule"] = schedule_to_json(s.schedule);
  j["x0"] = vector_to_json(s.x0);
  j["x0_hat"] = vector_to_json(s.x0_hat);
  j["P0"] = matrix_to_json(s.P0);
  j["sample_initial_state"] = s.sample_initial_state;
  j["u"] = signal_to_json(s.u);
  j["d"] = json::array();
  for (const auto& sig : s.d) j["d"].push_back(signal_to_json(sig));
  j["seed"] = s.seed;

  const EstimatorConfig& e = rc.estimator;
  json je;
  je["kind"] = to_string(e.kind);
  if (e.transition.size() > 0) je["transition"] = matrix_to_json(e.transition);
  if (e.mu0.size() > 0) je["mu0"] = vector_to_json(e.mu0);
  je["prob_floor"] = e.static_cfg.prob_floor;
  je["reinit_threshold"] = e.static_cfg.reinit_threshold;
  je["parallel"] = e.exec == Execution::Parallel;
  j["estimator"] = je;
  return j;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scenario file '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

namespace {

void write_csv(std::ostream& os, const std::vector<const Traces*>& runs,
               const std::vector<std::uint64_t>* seeds) {
  const auto& groups = vector_groups();
  std::vector<Eigen::Index> width(groups.size(), 0);
  for (const Traces* t : runs) {
    for (const auto& row : t->rows) {
      auto vecs = row_vectors(row);
      for (std::size_t g = 0; g < groups.size(); ++g) width[g] = std::max(width[g], vecs[g]->size());
    }
  }

  if (seeds) os << "seed,";
  os << "k,true_mode,q_map,p_R,breakdown_mask";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (Eigen::Index i = 0; i < width[g]; ++i) os << ',' << groups[g] << '_' << i;
  }
  os << '\n';
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const auto& row : runs[r]->rows) {
      if (seeds) os << (*seeds)[r] << ',';
      os << row.k << ',' << row.true_mode << ',' << row.q_map << ',' << row.p_R << ','
         << row.breakdown_mask;
      auto vecs = row_vectors(row);
      for (std::size_t g = 0; g < groups.size(); ++g) {
        for (Eigen::Index i = 0; i < width[g]; ++i) {
          os << ',';
          if (i < vecs[g]->size()) os << fmt_double((*vecs[g])(i));
        }
      }
      os << '\n';
    }
  }
}

}  // namespace

void write_traces_csv(std::ostream& os, const Traces& t) { write_csv(os, {&t}, nullptr); }

void write_batch_csv(std::ostream& os, const std::vector<std::uint64_t>& seeds,
                     const std::vector<Traces>& runs) {
  if (seeds.size() != runs.size()) throw InvalidModel("one seed per run expected");
  std::vector<const Traces*> ptrs;
  for (const auto& t : runs) ptrs.push_back(&t);
  write_csv(os, ptrs, &seeds);
}

void write_traces_csv(const std::string& path, const Traces& t) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_traces_csv(out, t);
}

Traces read_traces_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("empty traces file");
  const auto header = split(line);
  const auto& groups = vector_groups();
  std::map<std::string, std::size_t> group_index;
  for (std::size_t g = 0; g < groups.size(); ++g) group_index[groups[g]] = g;

  // column -> group (or -1 for the scalar leading columns)
  std::vector<long> col_group(header.size(), -1);
  for (std::size_t c = 5; c < header.size(); ++c) {
    const auto pos = header[c].rfind('_');
    const auto it = group_index.find(header[c].substr(0, pos));
    if (pos == std::string::npos || it == group_index.end()) {
      throw ConfigError("unknown traces column '" + header[c] + "'");
    }
    col_group[c] = static_cast<long>(it->second);
  }

  Traces t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw ConfigError("traces row has the wrong number of cells");
    TraceRow row;
    row.k = std::stol(cells[0]);
    row.true_mode = std::stoi(cells[1]);
    row.q_map = std::stoi(cells[2]);
    row.p_R = std::stoi(cells[3]);
    row.breakdown_mask = std::stoull(cells[4]);
    std::vector<std::vector<double>> values(groups.size());
    for (std::size_t c = 5; c < cells.size(); ++c) {
      if (cells[c].empty()) continue;
      values[static_cast<std::size_t>(col_group[c])].push_back(std::strtod(cells[c].c_str(), nullptr));
    }
    auto vecs = row_vectors(row);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      *vecs[g] = Eigen::Map<const Vector>(values[g].data(), static_cast<Eigen::Index>(values[g].size()));
    }
    t.rows.push_back(std::move(row));
  }
  if (!t.rows.empty()) {
    for (Eigen::Index j = 0; j < t.rows.front().mu.size(); ++j) t.mode_names.push_back(std::to_string(j));
  }
  return t;
}

Traces read_traces_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_traces_csv(in);
}

json metrics_to_json(const MetricsReport& m) {
  json j;
  j["state_rmse"] = vector_to_json(m.state_rmse);
  j["input_rmse"] = vector_to_json(m.input_rmse);
  j["mode_accuracy"] = m.mode_accuracy;
  j["mode_samples"] = m.mode_samples;
  j["mu_true"] = {{"mean", m.mu_true_mean},
                  {"min", m.mu_true_min},
                  {"final", m.mu_true_final},
                  {"first_step_above_0.95", m.first_confident_step}};
  if (m.whiteness_available) {
    const auto& w = m.whiteness;
    json lags = json::array();
    for (const auto& r : w.autocorr) lags.push_back(matrix_to_json(r));
    j["whiteness"] = {{"samples", w.samples},
                      {"dim", w.dim},
                      {"autocorrelation", lags},
                      {"max_abs_autocorrelation", w.max_abs_autocorr},
                      {"bound", w.bound},
                      {"fraction_within_bound", w.fraction_within_bound},
                      {"portmanteau", w.portmanteau},
                      {"dof", w.dof},
                      {"covariance_identity_error", w.cov_identity_error}};
  }
  j["mean_step_seconds"] = m.mean_step_seconds;
  return j;
}

json kl_report_to_json(const KLReport& r) {
  json j;
  j["true_rank"] = r.true_rank;
  j["modes"] = json::array();
  for (const auto& m : r.modes) {
    json jm = {{"name", m.name},
               {"spectral_radius", m.spectral_radius},
               {"ergodic", m.ergodic},
               {"rank", m.rank},
               {"divergence", m.divergence},
               {"divergence_unprefixed_noise_gain", m.divergence_literal},
               {"lyapunov_residual", m.lyapunov_residual}};
    if (!m.note.empty()) jm["note"] = m.note;
    j["modes"].push_back(jm);
  }
  if (r.closest_mode) j["closest_mode"] = *r.closest_mode;
  if (r.biased_closest) j["biased_closest"] = *r.biased_closest;
  j["static_prediction"] = {{"winner", r.static_prediction.winner},
                            {"margin", r.static_prediction.margin},
                            {"unique", r.static_prediction.unique}};
  if (r.dynamic_prediction) {
    j["dynamic_prediction"] = {{"winner", r.dynamic_prediction->winner},
                               {"margin", r.dynamic_prediction->margin},
                               {"unique", r.dynamic_prediction->unique}};
  }
  return j;
}

}  // namespace switchest::simlab
