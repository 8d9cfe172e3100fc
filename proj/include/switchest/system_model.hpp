#pragma once

#include <string>
#include <vector>

#include "switchest/linalg.hpp"

namespace switchest {

/// Continuous-time mode: ẋ = A x + B u + G d + w,  y = C x + D u + H d + v,
/// with w, v white noises of intensity Q and R.
struct ContinuousModeModel {
  Matrix A, B, G, C, D, H, Q, R;
};

/// Discrete-time mode:
///   x_{k+1} = A x_k + B u_k + G d_k + w_k,   w_k ~ N(0, Q)
///   y_k     = C x_k + D u_k + H d_k + v_k,   v_k ~ N(0, R)
struct DiscreteModeModel {
  Matrix A, B, G, C, D, H, Q, R;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return G.cols(); }
  Eigen::Index l() const { return C.rows(); }
};

/// Throws InvalidModel unless dimensions agree, all entries are finite,
/// Q is symmetric PSD and R is symmetric PD.
void validate(const ContinuousModeModel& cm);
void validate(const DiscreteModeModel& dm);

/// The mode after splitting y and d along the singular structure of H.
///
/// With H = U·diag(σ)·Wᵀ and p_H = rank(H):
///   z1 = T1 y = C1 x + D1 u + Σ d1 + v1
///   z2 = T2 y = C2 x + D2 u + v2
///   d  = V1 d1 + V2 d2
struct DecomposedModeModel {
  DiscreteModeModel base;
  int p_H = 0;
  Matrix C1, C2, D1, D2, G1, G2;
  Matrix Sigma, Sigma_inv;
  Matrix T1, T2;
  Matrix V1, V2;
  Matrix R1, R2;
  /// T1·R·T2ᵀ, ignored by the filter but reported by check_well_posed.
  Matrix R12;

  Eigen::Index n() const { return base.n(); }
  Eigen::Index m() const { return base.m(); }
  Eigen::Index p() const { return base.p(); }
  Eigen::Index l() const { return base.l(); }
  Eigen::Index p_d2() const { return base.p() - p_H; }
  Eigen::Index l_z2() const { return base.l() - p_H; }
};

/// Modes of a switched system. All share n, m and l; p may differ per mode.
struct SwitchedSystem {
  std::vector<DiscreteModeModel> modes;
  std::vector<std::string> names;

  SwitchedSystem() = default;
  explicit SwitchedSystem(std::vector<DiscreteModeModel> modes,
                          std::vector<std::string> names = {});

  std::size_t size() const { return modes.size(); }
  Eigen::Index n() const { return modes.front().n(); }
  Eigen::Index m() const { return modes.front().m(); }
  Eigen::Index l() const { return modes.front().l(); }
};

/// Zero-order-hold discretization.
///
/// A = e^{A_c Δt}; [B G] = ∫₀^Δt e^{A_c s} ds [B_c G_c]; C, D, H copied;
/// Q = ∫₀^Δt e^{A_c s} Q_c e^{A_cᵀ s} ds (Van Loan block exponential);
/// R = R_c / Δt, treating R_c as a continuous white-noise intensity.
DiscreteModeModel discretize_zoh(const ContinuousModeModel& cm, double dt);

/// SVD split of the output and unknown input. Singular values count toward
/// p_H when σᵢ > max(l, p)·σ₁·1e-12. Columns of V1 are sign-normalized so
/// that modes with the same input direction share d1 coordinates.
DecomposedModeModel decompose(const DiscreteModeModel& dm);

struct WellPosedness {
  /// p - p_H, the column count C2·G2 must reach.
  int required_rank = 0;
  int c2g2_rank = 0;
  bool c2g2_full_column_rank = true;
  /// Error dynamics after removing d1 (via Σ⁻¹) and d2 (via a left inverse of C2·G2)
  /// pass the PBH test against C2 on every eigenvalue with |λ| >= 1.
  bool detectable = true;
  /// max |T1·R·T2ᵀ|: correlation between v1 and v2 that the filter ignores.
  double noise_cross_correlation = 0.0;

  bool ok() const { return c2g2_full_column_rank; }
};

/// Diagnostics only; never throws.
WellPosedness diagnose(const DecomposedModeModel& dec);

/// Same report, but throws RankDeficient when C2·G2 lacks full column rank.
WellPosedness check_well_posed(const DecomposedModeModel& dec);

/// Numerical rank via SVD with the decompose() tolerance.
int numerical_rank(const Matrix& m);

}  // namespace switchest
