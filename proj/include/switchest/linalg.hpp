#pragma once

#include <Eigen/Dense>

namespace switchest {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative eigenvalue cutoff used for numerical rank of symmetric PSD matrices.
inline constexpr double kEigenRelTol = 1e-12;

/// (M + Mᵀ) / 2
Matrix symmetrize(const Matrix& m);

bool all_finite(const Matrix& m);

/// Range-space description of a symmetric PSD matrix.
///
/// `basis` holds one orthonormal eigenvector per row, restricted to eigenvalues
/// above max(rows) * λ_max * kEigenRelTol. Each row is sign-normalized so that
/// its largest-magnitude entry is positive; rows keep the solver's ascending
/// eigenvalue order.
struct SpectralSupport {
  Matrix basis;
  Vector eigenvalues;
  int rank = 0;
};

SpectralSupport spectral_support(const Matrix& sym_psd);

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix, built from its
/// spectral support (so it agrees with Γᵀ(ΓMΓᵀ)⁻¹Γ).
Matrix pinv_psd(const Matrix& sym_psd);

/// ln of the product of the supported eigenvalues (0 for rank zero).
double log_pdet(const Matrix& sym_psd);

/// Symmetric inverse square root of a symmetric positive definite matrix.
Matrix inv_sqrt_spd(const Matrix& spd);

/// Symmetric square root of a symmetric PSD matrix (negative round-off clipped).
Matrix sqrt_psd(const Matrix& sym_psd);

double spectral_radius(const Matrix& square);

double max_abs(const Matrix& m);

/// Flip the sign of `v` so that its largest-magnitude entry is positive.
/// Returns -1 if flipped, +1 otherwise.
double sign_normalize(Eigen::Ref<Vector> v);

}  // namespace switchest
