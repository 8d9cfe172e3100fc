#include "switchest/input_state_filter.hpp"

#include <Eigen/Cholesky>
#include <sstream>

#include "switchest/errors.hpp"

namespace switchest {

namespace {

void expect_size(const Vector& v, Eigen::Index n, const char* name) {
  if (v.size() != n) {
    std::ostringstream os;
    os << name << " has length " << v.size() << ", expected " << n;
    throw InvalidModel(os.str());
  }
}

void expect_square(const Matrix& m, Eigen::Index n, const char* name) {
  if (m.rows() != n || m.cols() != n) {
    std::ostringstream os;
    os << name << " is " << m.rows() << "x" << m.cols() << ", expected " << n << "x" << n;
    throw InvalidModel(os.str());
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!all_finite(m)) throw NumericalBreakdown(std::string("non-finite ") + what);
}

}  // namespace

FilterState init(const DecomposedModeModel& dec, const Vector& x0_hat,
                 const Matrix& P0, const Vector& y0, const Vector& u0) {
  expect_size(x0_hat, dec.n(), "x0_hat");
  expect_square(P0, dec.n(), "P0");
  expect_size(y0, dec.l(), "y0");
  expect_size(u0, dec.m(), "u0");
  if (max_abs(P0 - P0.transpose()) > 1e-12 * std::max(1.0, max_abs(P0))) {
    throw InvalidModel("P0 is not symmetric");
  }

  FilterState fs;
  fs.k = 0;
  fs.x_hat = x0_hat;
  fs.P_x = symmetrize(P0);
  const Vector z1 = dec.T1 * y0;
  fs.d1_hat = dec.Sigma_inv * (z1 - dec.C1 * x0_hat - dec.D1 * u0);
  fs.P_d1 = symmetrize(dec.Sigma_inv * (dec.C1 * fs.P_x * dec.C1.transpose() + dec.R1) *
                       dec.Sigma_inv.transpose());
  return fs;
}

FilterState step(const FilterState& fs, const DecomposedModeModel& prev,
                 const DecomposedModeModel& curr, const Vector& u_prev,
                 const Vector& u_now, const Vector& y_now) {
  const Eigen::Index n = prev.n();
  if (curr.n() != n) throw InvalidModel("state dimension changed between steps");
  if (curr.p_d2() != prev.p_d2()) throw InvalidModel("d2 dimension changed between steps");
  expect_size(fs.x_hat, n, "x_hat");
  expect_square(fs.P_x, n, "P_x");
  expect_size(fs.d1_hat, prev.p_H, "d1_hat");
  expect_square(fs.P_d1, prev.p_H, "P_d1");
  expect_size(u_prev, prev.m(), "u_prev");
  expect_size(u_now, curr.m(), "u_now");
  expect_size(y_now, curr.l(), "y_now");

  const Matrix& A = prev.base.A;
  const Matrix& M1_prev = prev.Sigma_inv;
  const Matrix& G1 = prev.G1;
  const Matrix& G2 = prev.G2;
  const Matrix& C2 = curr.C2;
  const Matrix& R2 = curr.R2;
  const Matrix I_n = Matrix::Identity(n, n);

  const Vector z1 = curr.T1 * y_now;
  const Vector z2 = curr.T2 * y_now;

  // Estimation of d2_{k-1} and d_{k-1}
  const Matrix A_hat = A - G1 * M1_prev * prev.C1;
  const Matrix Q_hat = G1 * M1_prev * prev.R1 * M1_prev.transpose() * G1.transpose() + prev.base.Q;
  const Matrix P_tilde = symmetrize(A_hat * fs.P_x * A_hat.transpose() + Q_hat);
  const Matrix R_tilde2 = symmetrize(C2 * P_tilde * C2.transpose() + R2);

  Eigen::LLT<Matrix> r_tilde_llt(R_tilde2);
  if (r_tilde_llt.info() != Eigen::Success) {
    throw NumericalBreakdown("innovation covariance R~2 is not positive definite");
  }
  const Matrix C2G2 = C2 * G2;
  const Matrix Rinv_C2G2 = r_tilde_llt.solve(C2G2);
  const Matrix info = symmetrize(C2G2.transpose() * Rinv_C2G2);
  Matrix P_d2 = Matrix::Zero(info.rows(), info.cols());
  if (info.size() > 0) {
    Eigen::LDLT<Matrix> info_ldlt(info);
    if (info_ldlt.info() != Eigen::Success || !info_ldlt.isPositive() ||
        info_ldlt.rcond() < 1e-14) {
      throw NumericalBreakdown("d2 information matrix is singular (C2*G2 lost rank)");
    }
    P_d2 = symmetrize(info_ldlt.solve(Matrix::Identity(info.rows(), info.cols())));
  }
  const Matrix M2 = P_d2 * Rinv_C2G2.transpose();

  const Vector x_pred = A * fs.x_hat + prev.base.B * u_prev + G1 * fs.d1_hat;
  const Vector d2_hat = M2 * (z2 - C2 * x_pred - curr.D2 * u_now);
  const Vector d_hat = prev.V1 * fs.d1_hat + prev.V2 * d2_hat;

  const Matrix M2T_row = C2.transpose() * M2.transpose();  // C2ᵀ M2ᵀ
  const Matrix P_d12 = M1_prev * prev.C1 * fs.P_x * A.transpose() * M2T_row -
                       fs.P_d1 * G1.transpose() * M2T_row;
  const Eigen::Index p1 = prev.p_H;
  const Eigen::Index p2 = prev.p_d2();
  Matrix blk(p1 + p2, p1 + p2);
  blk.topLeftCorner(p1, p1) = fs.P_d1;
  blk.topRightCorner(p1, p2) = P_d12;
  blk.bottomLeftCorner(p2, p1) = P_d12.transpose();
  blk.bottomRightCorner(p2, p2) = P_d2;
  Matrix V(prev.p(), p1 + p2);
  V << prev.V1, prev.V2;
  const Matrix P_d = symmetrize(V * blk * V.transpose());

  // Time update
  const Vector x_star = x_pred + G2 * d2_hat;
  const Matrix GM2 = G2 * M2;
  const Matrix I_GMC = I_n - GM2 * C2;
  const Matrix P_star =
      symmetrize(GM2 * R2 * GM2.transpose() + I_GMC * P_tilde * I_GMC.transpose());
  const Matrix R_star2 = symmetrize(C2 * P_star * C2.transpose() + R2 - C2 * GM2 * R2 -
                                    R2 * GM2.transpose() * C2.transpose());

  // Measurement update
  const Matrix L = (P_star * C2.transpose() - GM2 * R2) * pinv_psd(R_star2);
  const Vector nu_bar = z2 - C2 * x_star - curr.D2 * u_now;
  const Vector x_new = x_star + L * nu_bar;
  const Matrix I_LC = I_n - L * C2;
  const Matrix P_x = symmetrize(I_LC * GM2 * R2 * L.transpose() +
                                L * R2 * GM2.transpose() * I_LC.transpose() +
                                I_LC * P_star * I_LC.transpose() + L * R2 * L.transpose());

  // Estimation of d1_k
  const Matrix& M1 = curr.Sigma_inv;
  const Matrix R_tilde1 = curr.C1 * P_x * curr.C1.transpose() + curr.R1;
  const Matrix P_d1 = symmetrize(M1 * R_tilde1 * M1.transpose());
  const Vector d1_hat = M1 * (z1 - curr.C1 * x_new - curr.D1 * u_now);

  FilterState out;
  out.k = fs.k + 1;
  out.x_hat = x_new;
  out.P_x = P_x;
  out.d1_hat = d1_hat;
  out.P_d1 = P_d1;
  out.d2_hat_prev = d2_hat;
  out.P_d2_prev = P_d2;
  out.P_d12_prev = P_d12;
  out.d_hat_prev = d_hat;
  out.P_d_prev = P_d;
  out.nu_bar = nu_bar;
  out.R_star2 = R_star2;
  out.L_gain = L;
  out.M2_gain = M2;

  require_finite(out.x_hat, "state estimate");
  require_finite(out.P_x, "state covariance");
  require_finite(out.d1_hat, "d1 estimate");
  require_finite(out.d_hat_prev, "input estimate");
  require_finite(out.P_d_prev, "input covariance");
  require_finite(out.R_star2, "residual covariance");
  return out;
}

FilterState step(const FilterState& fs, const DecomposedModeModel& dec,
                 const Vector& u_prev, const Vector& u_now, const Vector& y_now) {
  return step(fs, dec, dec, u_prev, u_now, y_now);
}

GammaSelection select_gamma(const Matrix& R_star2) {
  const SpectralSupport s = spectral_support(R_star2);
  return {s.basis, s.rank};
}

GenInnovation generalized_innovation(const Vector& nu_bar, const Matrix& R_star2) {
  if (nu_bar.size() != R_star2.rows() || R_star2.rows() != R_star2.cols()) {
    throw InvalidModel("residual and covariance dimensions disagree");
  }
  const GammaSelection g = select_gamma(R_star2);
  if (g.p_R == 0) {
    throw DegenerateInnovation("residual covariance has rank zero");
  }
  GenInnovation gi;
  gi.Gamma = g.Gamma;
  gi.p_R = g.p_R;
  gi.nu = g.Gamma * nu_bar;
  gi.S = symmetrize(g.Gamma * R_star2 * g.Gamma.transpose());
  return gi;
}

GenInnovation generalized_innovation(const FilterState& fs) {
  if (fs.k < 1) throw DegenerateInnovation("no residual before the first filter step");
  return generalized_innovation(fs.nu_bar, fs.R_star2);
}

}  // namespace switchest
