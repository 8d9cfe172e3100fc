#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "switchest/asymptotics.hpp"
#include "switchest/errors.hpp"
#include "switchest/simlab/estimation.hpp"
#include "switchest/simlab/io.hpp"
#include "switchest/simlab/metrics.hpp"

namespace fs = std::filesystem;
using namespace switchest;
using namespace switchest::simlab;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kBreakdown = 3;

struct Options {
  std::string scenario;
  std::string estimator;
  std::optional<std::uint64_t> seed;
  long runs = 10;
  unsigned threads = 0;
  std::string out = ".";
};

RunConfig load(const Options& o) {
  RunConfig rc = load_run_config(o.scenario);
  if (o.seed) rc.scenario.seed = *o.seed;
  if (!o.estimator.empty()) rc.estimator.kind = parse_estimator_kind(o.estimator);
  return rc;
}

fs::path prepare_out(const Options& o) {
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + o.out + "': " + ec.message());
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

void echo_scenario(const fs::path& dir, const RunConfig& rc) {
  write_json(dir / "scenario.json", run_config_to_json(rc));
}

long breakdown_steps(const Traces& t) {
  return std::count_if(t.rows.begin(), t.rows.end(),
                       [](const TraceRow& r) { return r.breakdown_mask != 0; });
}

// Ground truth only; estimator columns stay empty and q_map is -1.
Traces truth_traces(const Scenario& s, const Trajectory& tr) {
  Traces t;
  t.mode_names = s.system.names;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    TraceRow r;
    r.k = static_cast<long>(k);
    r.true_mode = tr.modes[k];
    r.q_map = -1;
    r.x_true = tr.x[k];
    r.d_true = tr.d[k];
    r.u = tr.u[k];
    r.y = tr.y[k];
    t.rows.push_back(std::move(r));
  }
  return t;
}

int cmd_simulate(const Options& o) {
  const RunConfig rc = load(o);
  const fs::path dir = prepare_out(o);
  const Trajectory tr = simulate(rc.scenario);
  write_traces_csv((dir / "traces.csv").string(), truth_traces(rc.scenario, tr));
  json report;
  report["command"] = "simulate";
  report["scenario"] = rc.scenario.name;
  report["seed"] = rc.scenario.seed;
  report["steps"] = tr.size();
  write_json(dir / "report.json", report);
  echo_scenario(dir, rc);
  std::cout << "simulated " << tr.size() << " steps of '" << rc.scenario.name << "' -> " << dir.string()
            << '\n';
  return kOk;
}

int cmd_estimate(const Options& o) {
  const RunConfig rc = load(o);
  const fs::path dir = prepare_out(o);
  const Trajectory tr = simulate(rc.scenario);
  const Traces t = run_estimator(rc.scenario, tr, rc.estimator);
  write_traces_csv((dir / "traces.csv").string(), t);
  const MetricsReport m = metrics(t);
  json report;
  report["command"] = "estimate";
  report["scenario"] = rc.scenario.name;
  report["estimator"] = to_string(rc.estimator.kind);
  report["seed"] = rc.scenario.seed;
  report["modes"] = rc.scenario.system.names;
  report["breakdown_steps"] = breakdown_steps(t);
  report["metrics"] = metrics_to_json(m);
  write_json(dir / "report.json", report);
  echo_scenario(dir, rc);
  std::cout << "mode accuracy " << m.mode_accuracy << " over " << m.mode_samples << " steps, state RMSE "
            << m.state_rmse.transpose() << '\n';
  return kOk;
}

int cmd_analyze(const Options& o) {
  const RunConfig rc = load(o);
  const fs::path dir = prepare_out(o);
  const SwitchedSystem& sys = rc.scenario.system;
  std::vector<DecomposedModeModel> decs;
  for (const auto& m : sys.modes) decs.push_back(decompose(m));

  json reports = json::array();
  std::cout << "truth  candidate  D  rank  spectral_radius  ergodic\n";
  for (std::size_t i = 0; i < sys.size(); ++i) {
    const KLReport rep = kl_report(sys.modes[i], decs, sys.names, i);
    json jr = kl_report_to_json(rep);
    jr["truth"] = sys.names[i];
    reports.push_back(std::move(jr));
    for (std::size_t j = 0; j < rep.modes.size(); ++j) {
      const ModeAnalysis& a = rep.modes[j];
      std::cout << sys.names[i] << "  " << a.name << "  " << std::setprecision(6) << a.divergence << "  "
                << a.rank << "  " << a.spectral_radius << "  " << (a.ergodic ? "yes" : "no");
      if (!a.note.empty()) std::cout << "  (" << a.note << ")";
      std::cout << '\n';
    }
  }
  json report;
  report["command"] = "analyze";
  report["scenario"] = rc.scenario.name;
  report["kl"] = std::move(reports);
  write_json(dir / "report.json", report);
  echo_scenario(dir, rc);
  return kOk;
}

int cmd_mc(const Options& o) {
  if (o.runs < 1) throw ConfigError("--runs must be at least 1");
  const RunConfig rc = load(o);
  const fs::path dir = prepare_out(o);
  std::vector<std::uint64_t> seeds;
  for (long r = 0; r < o.runs; ++r) seeds.push_back(rc.scenario.seed + static_cast<std::uint64_t>(r));
  const unsigned threads = o.threads > 0 ? o.threads : std::max(1u, std::thread::hardware_concurrency());
  const std::vector<Traces> runs = monte_carlo(rc.scenario, rc.estimator, seeds, threads);

  std::ofstream csv(dir / "traces.csv");
  if (!csv) throw ConfigError("cannot write traces.csv");
  write_batch_csv(csv, seeds, runs);

  json per_run = json::array();
  double acc_sum = 0.0, acc_min = 1.0;
  long breakdowns = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const MetricsReport m = metrics(runs[r]);
    acc_sum += m.mode_accuracy;
    acc_min = std::min(acc_min, m.mode_accuracy);
    breakdowns += breakdown_steps(runs[r]);
    json jm = metrics_to_json(m);
    jm["seed"] = seeds[r];
    per_run.push_back(std::move(jm));
  }
  json report;
  report["command"] = "mc";
  report["scenario"] = rc.scenario.name;
  report["estimator"] = to_string(rc.estimator.kind);
  report["seeds"] = seeds;
  report["mode_accuracy_mean"] = acc_sum / static_cast<double>(runs.size());
  report["mode_accuracy_min"] = acc_min;
  report["breakdown_steps"] = breakdowns;
  report["runs"] = std::move(per_run);
  write_json(dir / "report.json", report);
  echo_scenario(dir, rc);
  std::cout << runs.size() << " runs, mean mode accuracy " << acc_sum / static_cast<double>(runs.size())
            << ", min " << acc_min << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mode, input and state estimation for switched linear systems"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Scenario JSON file")->required();
    sub->add_option("--seed", o.seed, "Override the scenario seed");
    sub->add_option("--out", o.out, "Output directory");
  };
  auto add_estimator = [&](CLI::App* sub) {
    sub->add_option("--estimator", o.estimator, "static or dynamic")
        ->check(CLI::IsMember({"static", "dynamic"}));
  };

  CLI::App* sim = app.add_subcommand("simulate", "Simulate ground truth and measurements");
  add_common(sim);
  CLI::App* est = app.add_subcommand("estimate", "Simulate and run the multiple-model estimator");
  add_common(est);
  add_estimator(est);
  CLI::App* ana = app.add_subcommand("analyze", "KL divergence and ergodicity report for the mode set");
  add_common(ana);
  CLI::App* mc = app.add_subcommand("mc", "Monte-Carlo batch over consecutive seeds");
  add_common(mc);
  add_estimator(mc);
  mc->add_option("--runs", o.runs, "Number of runs");
  mc->add_option("--threads", o.threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*sim) return cmd_simulate(o);
    if (*est) return cmd_estimate(o);
    if (*ana) return cmd_analyze(o);
    return cmd_mc(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidModel& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const RankDeficient& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "numerical breakdown: " << e.what() << '\n';
    return kBreakdown;
  }
}
