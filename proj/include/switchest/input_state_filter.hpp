#pragma once

#include "switchest/linalg.hpp"
#include "switchest/system_model.hpp"

namespace switchest {

/// Running estimates of one mode-matched input and state filter.
///
/// After step k the state holds x̂_{k|k}, d̂_{1,k} and the one-step-delayed
/// estimates d̂_{2,k-1} and d̂_{k-1}, together with the residual
/// ν̄_k = z2_k - C2 x̂*_{k|k} - D2 u_k and its covariance R̃*_{2,k}.
struct FilterState {
  long k = 0;
  Vector x_hat;
  Matrix P_x;
  Vector d1_hat;
  Matrix P_d1;

  Vector d2_hat_prev;
  Matrix P_d2_prev;
  Matrix P_d12_prev;
  Vector d_hat_prev;
  Matrix P_d_prev;

  Vector nu_bar;
  Matrix R_star2;

  /// Gains used in the last step, kept for steady-state analysis.
  Matrix L_gain;
  Matrix M2_gain;
};

/// Initialization from a prior (x̂₀, P₀) and the first measurement:
/// d̂_{1,0} = Σ⁻¹(z1_0 - C1 x̂₀ - D1 u₀), P^d_{1,0} = Σ⁻¹(C1 P₀ C1ᵀ + R1)Σ⁻ᵀ.
/// `y0` is the raw output; z1_0 = T1 y0.
FilterState init(const DecomposedModeModel& dec, const Vector& x0_hat,
                 const Matrix& P0, const Vector& y0, const Vector& u0);

/// One recursion of the minimum-variance unbiased input and state filter.
///
/// `prev` supplies the k-1 matrices (A, B, G1, G2, C1, R1, V, Σ⁻¹) and `curr`
/// the k matrices (T1, T2, C1, C2, D1, D2, R1, R2, Σ⁻¹). Throws
/// NumericalBreakdown when the d2 information matrix is singular or any
/// output is non-finite.
FilterState step(const FilterState& fs, const DecomposedModeModel& prev,
                 const DecomposedModeModel& curr, const Vector& u_prev,
                 const Vector& u_now, const Vector& y_now);

/// Time-invariant convenience overload.
FilterState step(const FilterState& fs, const DecomposedModeModel& dec,
                 const Vector& u_prev, const Vector& u_now, const Vector& y_now);

/// Γ̃ with orthonormal rows spanning the range of R̃*₂, and its row count.
struct GammaSelection {
  Matrix Gamma;
  int p_R = 0;
};

GammaSelection select_gamma(const Matrix& R_star2);

/// ν = Γ̃ ν̄ and S = Γ̃ R̃*₂ Γ̃ᵀ.
struct GenInnovation {
  Vector nu;
  Matrix S;
  Matrix Gamma;
  int p_R = 0;
};

/// Throws DegenerateInnovation when R̃*₂ has rank zero.
GenInnovation generalized_innovation(const FilterState& fs);
GenInnovation generalized_innovation(const Vector& nu_bar, const Matrix& R_star2);

}  // namespace switchest
