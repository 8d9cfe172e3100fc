#include "switchest/system_model.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "switchest/errors.hpp"

namespace switchest {

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                  const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << "matrix " << name << " is " << shape(m) << ", expected " << rows
       << "x" << cols;
    throw InvalidModel(os.str());
  }
}

void expect_covariance(const Matrix& m, bool definite, const char* name) {
  const double scale = std::max(1.0, max_abs(m));
  if (max_abs(m - m.transpose()) > 1e-12 * scale) {
    throw InvalidModel(std::string("matrix ") + name + " is not symmetric");
  }
  if (m.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (definite ? !(lo > 0.0) : lo < -1e-12 * scale) {
    throw InvalidModel(std::string("matrix ") + name +
                       (definite ? " is not positive definite"
                                 : " is not positive semidefinite"));
  }
}

template <typename Model>
void validate_impl(const Model& md) {
  const Eigen::Index n = md.A.rows();
  const Eigen::Index m = md.B.cols();
  const Eigen::Index p = md.G.cols();
  const Eigen::Index l = md.C.rows();
  if (n == 0) throw InvalidModel("state dimension must be positive");
  if (l == 0) throw InvalidModel("output dimension must be positive");
  expect_shape(md.A, n, n, "A");
  expect_shape(md.B, n, m, "B");
  expect_shape(md.G, n, p, "G");
  expect_shape(md.C, l, n, "C");
  expect_shape(md.D, l, m, "D");
  expect_shape(md.H, l, p, "H");
  expect_shape(md.Q, n, n, "Q");
  expect_shape(md.R, l, l, "R");
  for (const Matrix* mat : {&md.A, &md.B, &md.G, &md.C, &md.D, &md.H, &md.Q, &md.R}) {
    if (!all_finite(*mat)) throw InvalidModel("model has non-finite entries");
  }
  expect_covariance(md.Q, false, "Q");
  expect_covariance(md.R, true, "R");
}

double rank_tolerance(const Eigen::VectorXd& sv, Eigen::Index rows, Eigen::Index cols) {
  if (sv.size() == 0) return 0.0;
  return static_cast<double>(std::max(rows, cols)) * sv(0) * 1e-12;
}

}  // namespace

void validate(const ContinuousModeModel& cm) { validate_impl(cm); }
void validate(const DiscreteModeModel& dm) { validate_impl(dm); }

SwitchedSystem::SwitchedSystem(std::vector<DiscreteModeModel> modes_in,
                               std::vector<std::string> names_in)
    : modes(std::move(modes_in)), names(std::move(names_in)) {
  if (modes.empty()) throw InvalidModel("switched system needs at least one mode");
  for (const auto& md : modes) {
    validate(md);
    if (md.n() != modes.front().n() || md.m() != modes.front().m() ||
        md.l() != modes.front().l()) {
      throw InvalidModel("modes must share state, known-input and output dimensions");
    }
  }
  if (names.empty()) {
    for (std::size_t i = 0; i < modes.size(); ++i) names.push_back(std::to_string(i));
  }
  if (names.size() != modes.size()) throw InvalidModel("one name per mode required");
}

int numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  const double tol = rank_tolerance(sv, m.rows(), m.cols());
  return static_cast<int>((sv.array() > tol).count());
}

DiscreteModeModel discretize_zoh(const ContinuousModeModel& cm, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidModel("sample time must be positive");
  validate(cm);
  const Eigen::Index n = cm.A.rows();
  const Eigen::Index m = cm.B.cols();
  const Eigen::Index p = cm.G.cols();

  DiscreteModeModel dm;
  dm.A = (cm.A * dt).exp();

  // [A_c B_c G_c; 0 0 0] exponentiates to [A  Γ_B  Γ_G; 0 I 0]
  Matrix aug = Matrix::Zero(n + m + p, n + m + p);
  aug.topLeftCorner(n, n) = cm.A;
  aug.block(0, n, n, m) = cm.B;
  aug.block(0, n + m, n, p) = cm.G;
  const Matrix phi = (aug * dt).exp();
  dm.B = phi.block(0, n, n, m);
  dm.G = phi.block(0, n + m, n, p);

  // Van Loan: exp([-A Q; 0 Aᵀ] dt) = [· F12; 0 F22], Q_d = F22ᵀ F12
  Matrix vl = Matrix::Zero(2 * n, 2 * n);
  vl.topLeftCorner(n, n) = -cm.A;
  vl.topRightCorner(n, n) = cm.Q;
  vl.bottomRightCorner(n, n) = cm.A.transpose();
  const Matrix ev = (vl * dt).exp();
  dm.Q = symmetrize(ev.bottomRightCorner(n, n).transpose() * ev.topRightCorner(n, n));

  dm.C = cm.C;
  dm.D = cm.D;
  dm.H = cm.H;
  dm.R = cm.R / dt;

  for (const Matrix* mat : {&dm.A, &dm.B, &dm.G, &dm.Q, &dm.R}) {
    if (!all_finite(*mat)) throw InvalidModel("discretization produced non-finite entries");
  }
  return dm;
}

DecomposedModeModel decompose(const DiscreteModeModel& dm) {
  validate(dm);
  const Eigen::Index p = dm.p();
  const Eigen::Index l = dm.l();

  Matrix U = Matrix::Identity(l, l);
  Matrix W = Matrix::Identity(p, p);
  Vector sv = Vector::Zero(0);
  int p_H = 0;
  if (p > 0 && max_abs(dm.H) > 0.0) {
    Eigen::JacobiSVD<Matrix> svd(dm.H, Eigen::ComputeFullU | Eigen::ComputeFullV);
    sv = svd.singularValues();
    const double tol = rank_tolerance(sv, l, p);
    p_H = static_cast<int>((sv.array() > tol).count());
    U = svd.matrixU();
    W = svd.matrixV();
    for (int i = 0; i < p_H; ++i) {
      const double s = sign_normalize(W.col(i));
      U.col(i) *= s;
    }
    for (Eigen::Index i = p_H; i < l; ++i) {
      Vector col = U.col(i);
      sign_normalize(col);
      U.col(i) = col;
    }
    for (Eigen::Index i = p_H; i < p; ++i) {
      Vector col = W.col(i);
      sign_normalize(col);
      W.col(i) = col;
    }
  }

  DecomposedModeModel dec;
  dec.base = dm;
  dec.p_H = p_H;
  dec.T1 = U.leftCols(p_H).transpose();
  dec.T2 = U.rightCols(l - p_H).transpose();
  dec.V1 = W.leftCols(p_H);
  dec.V2 = W.rightCols(p - p_H);
  dec.Sigma = sv.head(p_H).asDiagonal();
  dec.Sigma_inv = sv.head(p_H).cwiseInverse().asDiagonal();
  dec.C1 = dec.T1 * dm.C;
  dec.C2 = dec.T2 * dm.C;
  dec.D1 = dec.T1 * dm.D;
  dec.D2 = dec.T2 * dm.D;
  dec.G1 = dm.G * dec.V1;
  dec.G2 = dm.G * dec.V2;
  dec.R1 = symmetrize(dec.T1 * dm.R * dec.T1.transpose());
  dec.R2 = symmetrize(dec.T2 * dm.R * dec.T2.transpose());
  dec.R12 = dec.T1 * dm.R * dec.T2.transpose();
  return dec;
}

namespace {

bool pbh_detectable(const Matrix& a, const Matrix& c) {
  const Eigen::Index n = a.rows();
  Eigen::EigenSolver<Matrix> es(a, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()(i);
    if (std::abs(lam) < 1.0 - 1e-12) continue;
    Eigen::MatrixXcd stacked(n + c.rows(), n);
    stacked.topRows(n) = lam * Eigen::MatrixXcd::Identity(n, n) - a.cast<std::complex<double>>();
    stacked.bottomRows(c.rows()) = c.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked);
    const Vector sv = svd.singularValues();
    const double scale = std::max(1.0, sv(0));
    if ((sv.array() > 1e-10 * scale).count() < n) return false;
  }
  return true;
}

}  // namespace

WellPosedness diagnose(const DecomposedModeModel& dec) {
  WellPosedness wp;
  wp.required_rank = static_cast<int>(dec.p_d2());
  const Matrix c2g2 = dec.C2 * dec.G2;
  wp.c2g2_rank = numerical_rank(c2g2);
  wp.c2g2_full_column_rank = wp.c2g2_rank == wp.required_rank;
  const Matrix a_hat = dec.base.A - dec.G1 * dec.Sigma_inv * dec.C1;
  if (wp.c2g2_full_column_rank && wp.required_rank > 0) {
    // error dynamics once d2 has been solved for: (I - G2 (C2G2)⁺ C2) Â, seen through C2 of the same projection
    const Matrix left_inv = c2g2.completeOrthogonalDecomposition().pseudoInverse();
    const Matrix proj = Matrix::Identity(dec.n(), dec.n()) - dec.G2 * left_inv * dec.C2;
    wp.detectable = pbh_detectable(proj * a_hat, dec.C2 * proj);
  } else {
    wp.detectable = pbh_detectable(a_hat, dec.C2);
  }
  wp.noise_cross_correlation = max_abs(dec.R12);
  return wp;
}

WellPosedness check_well_posed(const DecomposedModeModel& dec) {
  WellPosedness wp = diagnose(dec);
  if (!wp.c2g2_full_column_rank) {
    std::ostringstream os;
    os << "C2*G2 has rank " << wp.c2g2_rank << ", needs full column rank "
       << wp.required_rank;
    throw RankDeficient(os.str());
  }
  return wp;
}

}  // namespace switchest
