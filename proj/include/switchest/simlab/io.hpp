#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchest/asymptotics.hpp"
#include "switchest/mm_bank.hpp"
#include "switchest/simlab/estimation.hpp"
#include "switchest/simlab/metrics.hpp"
#include "switchest/simlab/scenario.hpp"

namespace switchest::simlab {

using json = nlohmann::json;

/// Matrices are read either as nested rows ([[1, 2], [3, 4]]) or as
/// {"rows": r, "cols": c, "data": [row-major values]}. Written as nested rows.
Matrix matrix_from_json(const json& j);
json matrix_to_json(const Matrix& m);
Vector vector_from_json(const json& j);
json vector_to_json(const Vector& v);

/// A scenario plus the estimator that runs on it.
struct RunConfig {
  Scenario scenario;
  EstimatorConfig estimator;
};

/// Parses a run configuration. A "preset" key selects an intersection
/// variant; other keys then adjust the preset. Throws ConfigError.
RunConfig run_config_from_json(const json& j);
/// Fully expanded form (preset matrices written out) that reloads to the same run.
json run_config_to_json(const RunConfig& rc);
RunConfig load_run_config(const std::string& path);

EstimatorKind parse_estimator_kind(const std::string& name);
std::string to_string(EstimatorKind k);

/// Column order: k, true_mode, q_map, p_R, breakdown_mask, then the vector
/// groups x_true, d_true, u, y, mu, x_hat, d_hat_prev, Px_diag, Pd_diag, nu,
/// S_diag, nu_white, loglike, each as <group>_<index>. Groups whose length
/// varies across rows are padded with empty cells. Numbers use 17
/// significant digits.
void write_traces_csv(std::ostream& os, const Traces& t);
void write_traces_csv(const std::string& path, const Traces& t);
/// Monte-Carlo batch: the runs stacked in seed order behind a leading "seed"
/// column, with one shared header.
void write_batch_csv(std::ostream& os, const std::vector<std::uint64_t>& seeds,
                     const std::vector<Traces>& runs);

Traces read_traces_csv(std::istream& is);
Traces read_traces_csv(const std::string& path);

json metrics_to_json(const MetricsReport& m);
json kl_report_to_json(const KLReport& r);

}  // namespace switchest::simlab
