#pragma once

#include <vector>

#include "switchest/linalg.hpp"
#include "switchest/simlab/estimation.hpp"

namespace switchest::simlab {

/// Sample autocorrelation of a vector sequence after mean removal.
struct WhitenessStats {
  long samples = 0;
  int dim = 0;
  int max_lag = 0;
  /// autocorr[τ-1](i, j) = Ĉ_τ(i, j) / sqrt(Ĉ_0(i, i) Ĉ_0(j, j))
  std::vector<Matrix> autocorr;
  double max_abs_autocorr = 0.0;
  /// 3/√N
  double bound = 0.0;
  /// Share of autocorrelation entries inside ±bound.
  double fraction_within_bound = 1.0;
  /// Multivariate portmanteau statistic N² Σ_τ tr(Ĉ_τᵀĈ_0⁻¹Ĉ_τĈ_0⁻¹)/(N-τ)
  double portmanteau = 0.0;
  int dof = 0;
  /// Sample covariance Ĉ_0 and its relative Frobenius distance from I.
  Matrix cov;
  double cov_identity_error = 0.0;
};

/// Throws InvalidModel when the sequence is shorter than max_lag + 2 or the
/// entries differ in length.
WhitenessStats whiteness(const std::vector<Vector>& seq, int max_lag = 5);

struct MetricsOptions {
  /// Steps after each true mode switch left out of the mode accuracy.
  long transient_window = 50;
  int max_lag = 5;
};

struct MetricsReport {
  /// Per-component RMSE of x̂_k over k >= 1.
  Vector state_rmse;
  /// Per-component RMSE of d̂_{k-1} against d_{k-1}, over rows whose
  /// input dimensions match.
  Vector input_rmse;
  double mode_accuracy = 0.0;
  long mode_samples = 0;
  /// Whiteness of S^{-1/2}ν over rows sharing the most common rank.
  WhitenessStats whiteness;
  bool whiteness_available = false;
  double mu_true_mean = 0.0;
  double mu_true_min = 0.0;
  double mu_true_final = 0.0;
  /// First step with μ_true > 0.95, or -1.
  long first_confident_step = -1;
  double mean_step_seconds = 0.0;
};

MetricsReport metrics(const Traces& traces, const MetricsOptions& opts = {});

/// RMSE of `est` against `truth`, per component.
Vector rmse(const std::vector<Vector>& est, const std::vector<Vector>& truth);

}  // namespace switchest::simlab
