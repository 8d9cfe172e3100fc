#pragma once

#include <optional>
#include <string>
#include <vector>

#include "switchest/linalg.hpp"
#include "switchest/system_model.hpp"

namespace switchest {

/// Steady-state gains of one mode-matched filter, obtained by iterating the
/// covariance recursion until L̃ and M2 stop moving.
struct SteadyGains {
  Matrix L;
  Matrix M1;
  Matrix M2;
  Matrix R_star2;
  Matrix P_x;
  long iterations = 0;
};

/// Throws NoSteadyState when the gains have not settled (relative change
/// below `tol`) after `max_steps` recursions.
SteadyGains steady_state_gains(const DecomposedModeModel& dec, double tol = 1e-12,
                               long max_steps = 200000);

/// Joint dynamics of [x_k; x̂^q_{k|k-1}] when model q filters data from the
/// true system with zero known and unknown inputs:
///   [x; x̂]_{k+1} = A_mismatch [x; x̂]_k + W_mismatch [w_k; v_k].
struct SteadyStatePair {
  Matrix A_mismatch;  // 2n x 2n
  Matrix W_mismatch;  // 2n x (n + l)
  /// Noise gain with the printed bracketing (no Â^q prefactor), diagnostics only.
  Matrix W_literal;
  Matrix Q_breve;     // blkdiag(Q*, R*)
  Matrix C_mismatch;  // [T2^q C*, -C2^q]
  Matrix Psi;         // filled by lyapunov_limit
  double spectral_radius = 0.0;
  SteadyGains gains;
};

SteadyStatePair mismatched_system(const DiscreteModeModel& truth,
                                  const DecomposedModeModel& q_model,
                                  const SteadyGains& gains);

/// Fixed point of Ψ = AΨAᵀ + WQ̆Wᵀ by plain iteration from Ψ = 0, stopping
/// when ‖ΔΨ‖∞ < tol·max(1, ‖Ψ‖∞). Throws Unstable when ρ(A) >= 1 and
/// NoConvergence when the budget runs out.
Matrix lyapunov_limit(const Matrix& A, const Matrix& WQWt, double tol = 1e-12,
                      long max_iter = 1000000);
Matrix lyapunov_limit(SteadyStatePair& pair, double tol = 1e-12, long max_iter = 1000000);

/// ‖AΨAᵀ + WQ̆Wᵀ - Ψ‖∞
double lyapunov_residual(const Matrix& A, const Matrix& WQWt, const Matrix& Psi);

/// Stationary covariance of model q's residual ν̄^q under the true system:
/// (I - C2 G2 M2)(C Ψ Cᵀ + T2 R* T2ᵀ)(I - C2 G2 M2)ᵀ.
Matrix mismatched_innovation_cov(const SteadyStatePair& pair, const DecomposedModeModel& q_model,
                                 const DiscreteModeModel& truth);

/// Same quantity with W_literal in place of W_mismatch.
Matrix mismatched_innovation_cov_literal(const SteadyStatePair& pair,
                                         const DecomposedModeModel& q_model,
                                         const DiscreteModeModel& truth);

/// Kullback-Leibler divergence of the stationary residual density of model q
/// from the true model's:
///   ½(p_q - p_*)ln2π + ½ln|R^q|₊ - ½ln|R^*|₊ + ½tr(R^{q|*}(R^q)⁺) - ½p_*
double kl_divergence(const Matrix& R_cross_q, const Matrix& R_star_q, const Matrix& R_star_true,
                     int p_R_q, int p_R_true);
double kl_divergence(const Matrix& R_cross_q, const Matrix& R_star_q, const Matrix& R_star_true);

enum class PredictorKind { Static, Dynamic };

struct WinnerPrediction {
  Eigen::Index winner = 0;
  double margin = 0.0;
  bool unique = false;
  Vector scores;
};

/// argmin D (static) or argmin D - ln μ⁻ (dynamic); `unique` when the
/// runner-up trails by more than 1e-9.
WinnerPrediction predict_winner(const Vector& D, PredictorKind kind,
                                const std::optional<Vector>& mu_pred = std::nullopt);

/// Predicted ratio of geometric-mean probabilities μ̄ʲ/μ̄ⁱ after k static steps
/// with constant divergences: (μ₀ʲ/μ₀ⁱ) exp(k (Dᵢ - Dⱼ)).
double mean_ratio_trace(double D_i, double D_j, double mu0_i, double mu0_j, long k);
/// Time-varying divergences: (μ₀ʲ/μ₀ⁱ) exp Σ_ℓ (Dᵢ,ℓ - Dⱼ,ℓ).
double mean_ratio_trace(const std::vector<double>& D_i, const std::vector<double>& D_j,
                        double mu0_i, double mu0_j);

/// Per-candidate analysis of a model set against a true model.
struct ModeAnalysis {
  std::string name;
  double spectral_radius = 0.0;
  bool ergodic = false;
  int rank = 0;
  /// NaN when the pair is not ergodic
  double divergence = 0.0;
  double divergence_literal = 0.0;
  double lyapunov_residual = 0.0;
  Matrix R_cross;
  Matrix R_star;
  std::string note;
};

struct KLReport {
  std::vector<ModeAnalysis> modes;
  Vector D;
  std::vector<int> ranks;
  int true_rank = 0;
  Matrix R_star_true;
  std::optional<Eigen::Index> closest_mode;
  std::optional<Eigen::Index> biased_closest;
  WinnerPrediction static_prediction;
  std::optional<WinnerPrediction> dynamic_prediction;
};

/// Divergence of every candidate from `truth`. When `truth_index` names a
/// candidate, that candidate is the true model itself and its residual
/// covariance is the matched steady state, so its divergence is exactly 0.
KLReport kl_report(const DiscreteModeModel& truth, const std::vector<DecomposedModeModel>& candidates,
                   const std::vector<std::string>& names,
                   std::optional<std::size_t> truth_index = std::nullopt,
                   const std::optional<Vector>& mu_pred = std::nullopt);

}  // namespace switchest
