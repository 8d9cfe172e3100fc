#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "switchest/mm_bank.hpp"
#include "switchest/simlab/scenario.hpp"

namespace switchest::simlab {

/// Everything recorded at one time step. Vectors that do not exist at a step
/// (the residual at k = 0, a rank-zero innovation) are left empty.
struct TraceRow {
  long k = 0;
  int true_mode = 0;
  int q_map = 0;
  Vector x_true;
  Vector d_true;
  Vector u;
  Vector y;
  Vector mu;
  Vector x_hat;
  /// d̂_{k-1} of the MAP mode, compared against d_true of row k-1
  Vector d_hat_prev;
  Vector Px_diag;
  Vector Pd_diag;
  int p_R = 0;
  /// Generalized innovation ν of the MAP mode, its covariance diagonal and S^{-1/2}ν.
  Vector nu;
  Vector S_diag;
  Vector nu_white;
  /// Per-mode log-likelihood; -inf for pruned or broken modes.
  Vector loglike;
  /// Bit j set when mode j broke down numerically at this step.
  std::uint64_t breakdown_mask = 0;
};

struct Traces {
  std::vector<std::string> mode_names;
  std::vector<TraceRow> rows;
  /// Wall-clock seconds per estimator update; kept out of CSV output.
  std::vector<double> step_seconds;
};

/// Drives the multiple-model estimator over a recorded trajectory.
Traces run_estimator(const Trajectory& truth, const ModelBank& bank, const EstimatorConfig& cfg,
                     const Vector& x0_hat, const Matrix& P0,
                     const std::vector<std::string>& names = {});

/// Same, with bank and prior taken from the scenario.
Traces run_estimator(const Scenario& s, const Trajectory& truth, const EstimatorConfig& cfg);

/// One simulate + estimate per seed, spread over `threads` workers. Result i
/// belongs to seeds[i] regardless of scheduling. The first failing run (by
/// index) has its exception rethrown.
std::vector<Traces> monte_carlo(const Scenario& s, const EstimatorConfig& cfg,
                                const std::vector<std::uint64_t>& seeds, unsigned threads = 1);

}  // namespace switchest::simlab
