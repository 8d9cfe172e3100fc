#include "switchest/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "switchest/errors.hpp"
#include "switchest/input_state_filter.hpp"

namespace switchest {

namespace {

double rel_change(const Matrix& a, const Matrix& b) {
  if (a.size() == 0) return 0.0;
  return max_abs(a - b) / std::max(1.0, max_abs(b));
}

Matrix block_diag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

// Â = A - G1 Σ⁻¹ C1
Matrix a_hat(const DecomposedModeModel& q) {
  return q.base.A - q.G1 * q.Sigma_inv * q.C1;
}

// K_y = L̃(I - C2 G2 M2) + G2 M2: maps z2 into x̂_{k|k}
Matrix output_gain(const DecomposedModeModel& q, const SteadyGains& g) {
  const Eigen::Index lz = q.l_z2();
  const Matrix G2M2 = q.G2 * g.M2;
  return g.L * (Matrix::Identity(lz, lz) - q.C2 * G2M2) + G2M2;
}

Matrix residual_cov(const SteadyStatePair& pair, const Matrix& Psi, const DecomposedModeModel& q,
                    const DiscreteModeModel& truth) {
  const Eigen::Index lz = q.l_z2();
  const Matrix E = Matrix::Identity(lz, lz) - q.C2 * q.G2 * pair.gains.M2;
  const Matrix inner = pair.C_mismatch * Psi * pair.C_mismatch.transpose() +
                       q.T2 * truth.R * q.T2.transpose();
  return symmetrize(E * inner * E.transpose());
}

}  // namespace

SteadyGains steady_state_gains(const DecomposedModeModel& dec, double tol, long max_steps) {
  const Eigen::Index n = dec.n();
  const Vector u = Vector::Zero(dec.m());
  const Vector y = Vector::Zero(dec.l());
  FilterState fs = init(dec, Vector::Zero(n), Matrix::Identity(n, n), y, u);

  SteadyGains out;
  out.M1 = dec.Sigma_inv;
  Matrix L_prev, M2_prev, R_prev;
  for (long k = 1; k <= max_steps; ++k) {
    fs = step(fs, dec, u, u, y);
    if (k > 2 && rel_change(fs.L_gain, L_prev) < tol && rel_change(fs.M2_gain, M2_prev) < tol &&
        rel_change(fs.R_star2, R_prev) < tol) {
      out.L = fs.L_gain;
      out.M2 = fs.M2_gain;
      out.R_star2 = fs.R_star2;
      out.P_x = fs.P_x;
      out.iterations = k;
      return out;
    }
    L_prev = fs.L_gain;
    M2_prev = fs.M2_gain;
    R_prev = fs.R_star2;
  }
  throw NoSteadyState("filter gains did not settle within " + std::to_string(max_steps) +
                      " steps");
}

SteadyStatePair mismatched_system(const DiscreteModeModel& truth, const DecomposedModeModel& q,
                                  const SteadyGains& gains) {
  const Eigen::Index n = truth.n();
  const Eigen::Index l = truth.l();
  if (q.n() != n || q.l() != l) throw InvalidModel("true and candidate models differ in n or l");

  SteadyStatePair pair;
  pair.gains = gains;

  const Eigen::Index lz = q.l_z2();
  const Matrix Ah = a_hat(q);
  const Matrix Ky = output_gain(q, gains);
  const Matrix G2M2 = q.G2 * gains.M2;
  const Matrix In = Matrix::Identity(n, n);
  const Matrix G1M1T1 = q.G1 * gains.M1 * q.T1;

  const Matrix y_gain = Ah * Ky * q.T2 + G1M1T1;  // x̂_{k+1|k} per unit y_k
  const Matrix y_gain_literal = Ky * q.T2 + G1M1T1;

  pair.A_mismatch = Matrix::Zero(2 * n, 2 * n);
  pair.A_mismatch.topLeftCorner(n, n) = truth.A;
  pair.A_mismatch.bottomLeftCorner(n, n) = y_gain * truth.C;
  pair.A_mismatch.bottomRightCorner(n, n) = Ah * (In - gains.L * q.C2) * (In - G2M2 * q.C2);

  pair.W_mismatch = Matrix::Zero(2 * n, n + l);
  pair.W_mismatch.topLeftCorner(n, n) = In;
  pair.W_mismatch.bottomRightCorner(n, l) = y_gain;
  pair.W_literal = pair.W_mismatch;
  pair.W_literal.bottomRightCorner(n, l) = y_gain_literal;

  pair.Q_breve = block_diag(truth.Q, truth.R);
  pair.C_mismatch = Matrix(lz, 2 * n);
  pair.C_mismatch << q.T2 * truth.C, -q.C2;
  pair.spectral_radius = spectral_radius(pair.A_mismatch);
  return pair;
}

Matrix lyapunov_limit(const Matrix& A, const Matrix& WQWt, double tol, long max_iter) {
  if (A.rows() != A.cols() || WQWt.rows() != A.rows() || WQWt.cols() != A.cols()) {
    throw InvalidModel("Lyapunov operands must be square and of equal size");
  }
  const double rho = spectral_radius(A);
  if (!(rho < 1.0)) throw Unstable("spectral radius " + std::to_string(rho) + " >= 1");

  Matrix Psi = Matrix::Zero(A.rows(), A.cols());
  for (long it = 0; it < max_iter; ++it) {
    Matrix next = symmetrize(A * Psi * A.transpose() + WQWt);
    const double delta = max_abs(next - Psi);
    Psi = std::move(next);
    if (delta < tol * std::max(1.0, max_abs(Psi))) return Psi;
  }
  throw NoConvergence("Lyapunov iteration exceeded " + std::to_string(max_iter) + " iterations");
}

Matrix lyapunov_limit(SteadyStatePair& pair, double tol, long max_iter) {
  const Matrix WQWt = pair.W_mismatch * pair.Q_breve * pair.W_mismatch.transpose();
  pair.Psi = lyapunov_limit(pair.A_mismatch, WQWt, tol, max_iter);
  return pair.Psi;
}

double lyapunov_residual(const Matrix& A, const Matrix& WQWt, const Matrix& Psi) {
  return max_abs(A * Psi * A.transpose() + WQWt - Psi);
}

Matrix mismatched_innovation_cov(const SteadyStatePair& pair, const DecomposedModeModel& q_model,
                                 const DiscreteModeModel& truth) {
  if (pair.Psi.size() == 0) throw InvalidModel("lyapunov_limit has not been evaluated");
  return residual_cov(pair, pair.Psi, q_model, truth);
}

Matrix mismatched_innovation_cov_literal(const SteadyStatePair& pair,
                                         const DecomposedModeModel& q_model,
                                         const DiscreteModeModel& truth) {
  const Matrix WQWt = pair.W_literal * pair.Q_breve * pair.W_literal.transpose();
  const Matrix Psi = lyapunov_limit(pair.A_mismatch, WQWt);
  return residual_cov(pair, Psi, q_model, truth);
}

double kl_divergence(const Matrix& R_cross_q, const Matrix& R_star_q, const Matrix& R_star_true,
                     int p_R_q, int p_R_true) {
  // identical arguments make every term cancel
  if (p_R_q == p_R_true && R_cross_q == R_star_q && R_star_q == R_star_true) return 0.0;
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const double trace = (R_cross_q * pinv_psd(R_star_q)).trace();
  return 0.5 * (p_R_q - p_R_true) * log2pi + 0.5 * log_pdet(R_star_q) -
         0.5 * log_pdet(R_star_true) + 0.5 * trace - 0.5 * p_R_true;
}

double kl_divergence(const Matrix& R_cross_q, const Matrix& R_star_q, const Matrix& R_star_true) {
  return kl_divergence(R_cross_q, R_star_q, R_star_true, spectral_support(R_star_q).rank,
                       spectral_support(R_star_true).rank);
}

WinnerPrediction predict_winner(const Vector& D, PredictorKind kind,
                                const std::optional<Vector>& mu_pred) {
  if (D.size() == 0) throw InvalidModel("no divergences to compare");
  WinnerPrediction out;
  out.scores = D;
  if (kind == PredictorKind::Dynamic) {
    if (!mu_pred || mu_pred->size() != D.size()) {
      throw InvalidModel("dynamic prediction needs one predicted probability per mode");
    }
    for (Eigen::Index j = 0; j < D.size(); ++j) out.scores(j) -= std::log((*mu_pred)(j));
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto score = [&](Eigen::Index j) {
    const double s = out.scores(j);
    return std::isnan(s) ? kInf : s;
  };
  out.winner = 0;
  for (Eigen::Index j = 1; j < D.size(); ++j) {
    if (score(j) < score(out.winner)) out.winner = j;
  }
  double runner_up = kInf;
  for (Eigen::Index j = 0; j < D.size(); ++j) {
    if (j != out.winner) runner_up = std::min(runner_up, score(j));
  }
  out.margin = runner_up - score(out.winner);
  out.unique = std::isfinite(score(out.winner)) && out.margin > 1e-9;
  return out;
}

double mean_ratio_trace(double D_i, double D_j, double mu0_i, double mu0_j, long k) {
  if (k < 0) throw InvalidModel("k must be non-negative");
  return (mu0_j / mu0_i) * std::exp(static_cast<double>(k) * (D_i - D_j));
}

double mean_ratio_trace(const std::vector<double>& D_i, const std::vector<double>& D_j,
                        double mu0_i, double mu0_j) {
  if (D_i.size() != D_j.size()) throw InvalidModel("divergence sequences differ in length");
  double acc = 0.0;
  for (std::size_t t = 0; t < D_i.size(); ++t) acc += D_i[t] - D_j[t];
  return (mu0_j / mu0_i) * std::exp(acc);
}

KLReport kl_report(const DiscreteModeModel& truth, const std::vector<DecomposedModeModel>& candidates,
                   const std::vector<std::string>& names, std::optional<std::size_t> truth_index,
                   const std::optional<Vector>& mu_pred) {
  if (candidates.empty()) throw InvalidModel("no candidate models");
  if (truth_index && *truth_index >= candidates.size()) {
    throw InvalidModel("true mode index out of range");
  }
  const auto count = static_cast<Eigen::Index>(candidates.size());
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

  KLReport rep;
  const SteadyGains true_gains =
      steady_state_gains(truth_index ? candidates[*truth_index] : decompose(truth));
  rep.R_star_true = true_gains.R_star2;
  rep.true_rank = spectral_support(rep.R_star_true).rank;
  rep.D = Vector::Constant(count, kNaN);

  for (Eigen::Index j = 0; j < count; ++j) {
    const auto& q = candidates[static_cast<std::size_t>(j)];
    ModeAnalysis ma;
    ma.name = static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                         : std::to_string(j);
    ma.divergence = kNaN;
    ma.divergence_literal = kNaN;
    try {
      const SteadyGains g =
          (truth_index && *truth_index == static_cast<std::size_t>(j)) ? true_gains
                                                                      : steady_state_gains(q);
      ma.R_star = g.R_star2;
      ma.rank = spectral_support(g.R_star2).rank;
      SteadyStatePair pair = mismatched_system(truth, q, g);
      ma.spectral_radius = pair.spectral_radius;
      ma.ergodic = pair.spectral_radius < 1.0;
      if (truth_index && *truth_index == static_cast<std::size_t>(j)) {
        ma.R_cross = g.R_star2;
        ma.divergence = 0.0;
        ma.divergence_literal = 0.0;
        if (ma.ergodic) {
          lyapunov_limit(pair);
          ma.lyapunov_residual = lyapunov_residual(
              pair.A_mismatch, pair.W_mismatch * pair.Q_breve * pair.W_mismatch.transpose(),
              pair.Psi);
        }
      } else if (ma.ergodic) {
        lyapunov_limit(pair);
        ma.lyapunov_residual = lyapunov_residual(
            pair.A_mismatch, pair.W_mismatch * pair.Q_breve * pair.W_mismatch.transpose(),
            pair.Psi);
        ma.R_cross = mismatched_innovation_cov(pair, q, truth);
        ma.divergence = kl_divergence(ma.R_cross, g.R_star2, rep.R_star_true, ma.rank,
                                      rep.true_rank);
        ma.divergence_literal =
            kl_divergence(mismatched_innovation_cov_literal(pair, q, truth), g.R_star2,
                          rep.R_star_true, ma.rank, rep.true_rank);
      } else {
        ma.note = "mismatched system not stable";
      }
    } catch (const Error& e) {
      ma.ergodic = false;
      ma.note = e.what();
    }
    rep.D(j) = ma.divergence;
    rep.ranks.push_back(ma.rank);
    rep.modes.push_back(std::move(ma));
  }

  rep.static_prediction = predict_winner(rep.D, PredictorKind::Static);
  if (std::isfinite(rep.static_prediction.scores(rep.static_prediction.winner))) {
    rep.closest_mode = rep.static_prediction.winner;
  }
  if (mu_pred) {
    rep.dynamic_prediction = predict_winner(rep.D, PredictorKind::Dynamic, mu_pred);
    if (std::isfinite(rep.dynamic_prediction->scores(rep.dynamic_prediction->winner))) {
      rep.biased_closest = rep.dynamic_prediction->winner;
    }
  }
  return rep;
}

}  // namespace switchest
