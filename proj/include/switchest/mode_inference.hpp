#pragma once

#include <vector>

#include "switchest/linalg.hpp"

namespace switchest {

/// Posterior (or prior) probabilities over the modes; entries >= 0, sum to 1.
struct ModeProbabilities {
  Vector mu;

  ModeProbabilities() = default;
  explicit ModeProbabilities(Vector mu_in);

  static ModeProbabilities uniform(Eigen::Index modes);
  Eigen::Index size() const { return mu.size(); }
  /// argmax with lowest-index tie-break
  Eigen::Index map_mode() const;
};

/// Throws InvalidModel unless `mu` is a valid probability vector (sum within 1e-12).
void validate_simplex(const Vector& mu);

/// Product of eigenvalues above tolerance; 1 for the rank-zero case.
double pseudo_det(const Matrix& m);

struct ModeLikelihood {
  /// ln of the degenerate Gaussian density of ν̄ (finite, or -inf for pruned modes)
  double value = 0.0;
  /// rank of R̃*₂
  int rank = 0;
  /// ‖ν̄ - ΓᵀΓν̄‖: the part of the residual outside the support of R̃*₂
  double support_violation = 0.0;
};

/// ln L = -½ ν̄ᵀ(R̃*₂)⁺ν̄ - (p_R/2) ln 2π - ½ ln|R̃*₂|₊.
/// The quadratic form uses the pseudo-inverse, so any component of ν̄ outside
/// the range of R̃*₂ is silently projected away and reported separately.
ModeLikelihood log_likelihood(const Vector& nu_bar, const Matrix& R_star2);

/// Bayes update μʲ ∝ exp(llʲ) μ⁻ʲ carried out in log space.
/// Throws DegenerateUpdate when no mode keeps positive mass.
ModeProbabilities update_probabilities(const ModeProbabilities& prior,
                                       const Vector& loglike);

}  // namespace switchest
