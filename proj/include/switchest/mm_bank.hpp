#pragma once

#include <optional>
#include <vector>

#include "switchest/input_state_filter.hpp"
#include "switchest/mode_inference.hpp"
#include "switchest/system_model.hpp"

namespace switchest {

/// Row-stochastic Markov transition matrix, P(i, j) = P(q_k = j | q_{k-1} = i).
class TransitionMatrix {
 public:
  explicit TransitionMatrix(Matrix p);
  static TransitionMatrix identity(Eigen::Index modes);

  const Matrix& matrix() const { return p_; }
  Eigen::Index size() const { return p_.rows(); }

 private:
  Matrix p_;
};

/// Decomposed models of every mode plus their well-posedness verdicts.
/// Modes that fail check_well_posed stay in the bank but are never stepped
/// and always receive a -inf log-likelihood.
struct ModelBank {
  std::vector<DecomposedModeModel> models;
  std::vector<WellPosedness> diagnostics;

  ModelBank() = default;
  explicit ModelBank(const SwitchedSystem& sys);
  explicit ModelBank(std::vector<DecomposedModeModel> decs);

  std::size_t size() const { return models.size(); }
  bool well_posed(std::size_t j) const { return diagnostics[j].ok(); }
};

struct MixingResult {
  /// p^j = Σᵢ p_ij μᵢ
  Vector mu_pred;
  /// W(i, j) = μ^{i|j}; each column sums to 1
  Matrix W;
  /// p^j == 0; the corresponding column of W is uniform
  std::vector<bool> unreachable;
};

MixingResult mixing_weights(const ModeProbabilities& mu_prev, const TransitionMatrix& P);

struct MixedInitial {
  Vector x_hat;
  Matrix P_x;
  Vector d1_hat;
  Matrix P_d1;
};

/// Moment-matched mixing of x̂, Pˣ, d̂1 and P^{d1} with weights W(:, j).
/// d̂1 only mixes among modes whose d1 has the same dimension as mode j's;
/// those weights are renormalized over that subset.
std::vector<MixedInitial> mix_initial_conditions(const std::vector<FilterState>& bank,
                                                 const Matrix& W);

/// Outputs of the MAP mode.
struct FusedEstimate {
  Vector x_hat;
  Matrix P_x;
  /// d̂_{k-1} (the full input estimate lags the state by one step)
  Vector d_hat_prev;
  Matrix P_d_prev;
};

struct StepDiagnostics {
  Vector loglike;
  std::vector<int> ranks;
  std::vector<double> support_violation;
  std::vector<bool> breakdown;
  std::vector<bool> unreachable;
  std::vector<bool> reinitialized;
};

struct MMState {
  long k = 0;
  std::vector<FilterState> bank;
  ModeProbabilities mu;
  Eigen::Index q_map = 0;
  FusedEstimate fused;
  StepDiagnostics diag;
};

struct StaticMMConfig {
  double prob_floor = 1e-4;
  /// Modes whose probability falls below this are overwritten by the MAP
  /// mode's filter state. 0 disables reinitialization.
  double reinit_threshold = 0.0;
};

enum class Execution { Sequential, Parallel };

/// Builds the bank at k = 0 with a shared prior (x̂₀, P₀) and mode prior μ₀.
MMState mm_init(const ModelBank& bank, const Vector& x0_hat, const Matrix& P0,
                const Vector& y0, const Vector& u0, const ModeProbabilities& mu0);

/// Interacting multiple-model recursion: mix, filter per mode, Bayes update,
/// MAP output. Modes that break down numerically get -inf likelihood and are
/// reinitialized from the MAP mode.
MMState dynamic_step(const MMState& mm, const ModelBank& bank, const TransitionMatrix& P,
                     const Vector& u_prev, const Vector& u_now, const Vector& y_now,
                     Execution exec = Execution::Sequential);

/// Independent filters, Bayes update with the previous posterior as prior,
/// then probability floor and optional reinitialization.
MMState static_step(const MMState& mm, const ModelBank& bank, const StaticMMConfig& cfg,
                    const Vector& u_prev, const Vector& u_now, const Vector& y_now,
                    Execution exec = Execution::Sequential);

/// Raises every entry to at least `floor` and rescales the rest so the total
/// stays 1; entries that drop below the floor during rescaling are pinned too.
ModeProbabilities apply_floor(const ModeProbabilities& mu, double floor);

enum class EstimatorKind { Static, Dynamic };

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::Dynamic;
  /// Required for the dynamic estimator.
  Matrix transition;
  /// Empty means uniform.
  Vector mu0;
  StaticMMConfig static_cfg;
  Execution exec = Execution::Sequential;
};

/// Stateful wrapper that owns the bank, the configuration and the MMState.
class MultipleModelEstimator {
 public:
  MultipleModelEstimator(ModelBank bank, EstimatorConfig cfg);

  void initialize(const Vector& x0_hat, const Matrix& P0, const Vector& y0, const Vector& u0);
  const MMState& update(const Vector& u_prev, const Vector& u_now, const Vector& y_now);

  const MMState& state() const { return state_; }
  const ModelBank& bank() const { return bank_; }
  const EstimatorConfig& config() const { return cfg_; }

 private:
  ModelBank bank_;
  EstimatorConfig cfg_;
  std::optional<TransitionMatrix> transition_;
  MMState state_;
  bool initialized_ = false;
};

}  // namespace switchest
