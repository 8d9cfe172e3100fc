#include "switchest/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

namespace switchest {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool all_finite(const Matrix& m) { return m.allFinite(); }

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double sign_normalize(Eigen::Ref<Vector> v) {
  if (v.size() == 0) return 1.0;
  Eigen::Index arg = 0;
  double best = -1.0;
  // first index wins ties so the choice is deterministic
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > best + 1e-14) {
      best = std::abs(v(i));
      arg = i;
    }
  }
  if (v(arg) < 0.0) {
    v = -v;
    return -1.0;
  }
  return 1.0;
}

SpectralSupport spectral_support(const Matrix& sym_psd) {
  SpectralSupport out;
  const auto n = sym_psd.rows();
  out.basis.resize(0, n);
  out.eigenvalues.resize(0);
  if (n == 0) return out;

  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym_psd));
  const Vector& lam = es.eigenvalues();
  const double lam_max = lam.cwiseAbs().maxCoeff();
  if (lam_max <= 0.0) return out;
  const double tol = static_cast<double>(n) * lam_max * kEigenRelTol;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lam(i) > tol) keep.push_back(i);
  }
  out.rank = static_cast<int>(keep.size());
  out.basis.resize(out.rank, n);
  out.eigenvalues.resize(out.rank);
  for (int r = 0; r < out.rank; ++r) {
    Vector v = es.eigenvectors().col(keep[r]);
    sign_normalize(v);
    out.basis.row(r) = v.transpose();
    out.eigenvalues(r) = lam(keep[r]);
  }
  return out;
}

Matrix pinv_psd(const Matrix& sym_psd) {
  const SpectralSupport s = spectral_support(sym_psd);
  return s.basis.transpose() * s.eigenvalues.cwiseInverse().asDiagonal() * s.basis;
}

double log_pdet(const Matrix& sym_psd) {
  const SpectralSupport s = spectral_support(sym_psd);
  return s.eigenvalues.array().log().sum();
}

Matrix inv_sqrt_spd(const Matrix& spd) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(spd));
  return es.operatorInverseSqrt();
}

Matrix sqrt_psd(const Matrix& sym_psd) {
  if (sym_psd.size() == 0) return sym_psd;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(sym_psd));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double spectral_radius(const Matrix& square) {
  if (square.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(square, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace switchest
