#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "switchest/asymptotics.hpp"
#include "switchest/errors.hpp"
#include "switchest/input_state_filter.hpp"
#include "switchest/simlab/scenario.hpp"

using namespace switchest;

namespace {

DiscreteModeModel stable_model(oracle::Rng& rng, int n, int l, int p, int p_H, double radius = 0.8) {
  for (;;) {
    DiscreteModeModel dm = oracle::random_model(rng, n, 1, p, p_H, l, radius);
    // the filter is exact only when v1 and v2 are uncorrelated, so drop T1 R T2ᵀ
    const DecomposedModeModel raw = decompose(dm);
    dm.R = raw.T1.transpose() * raw.R1 * raw.T1 + raw.T2.transpose() * raw.R2 * raw.T2;
    dm.R = symmetrize(dm.R);
    const WellPosedness wp = diagnose(decompose(dm));
    if (wp.ok() && wp.detectable) return dm;
  }
}

Matrix residual_cov(const DiscreteModeModel& truth, const DecomposedModeModel& q) {
  const SteadyGains g = steady_state_gains(q);
  SteadyStatePair pair = mismatched_system(truth, q, g);
  lyapunov_limit(pair);
  return mismatched_innovation_cov(pair, q, truth);
}

}  // namespace

TEST(Kl, ScalarExample) {
  const double D = kl_divergence(Matrix::Ones(1, 1), 2.0 * Matrix::Ones(1, 1), Matrix::Ones(1, 1), 1, 1);
  EXPECT_NEAR(D, 0.5 * std::log(2.0) + 0.25 - 0.5, 1e-15);
  EXPECT_NEAR(D, 0.09657, 1e-5);
}

TEST(Kl, ScalarExampleMatchesMonteCarlo) {
  // E[ln f*(ν) - ln f^q(ν)] for ν ~ N(0, 1), f^q = N(0, 2)
  oracle::Rng rng(1);
  double acc = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const Vector v = Vector::Constant(1, rng.normal());
    acc += oracle::mvn_logpdf(v, Matrix::Ones(1, 1)) - oracle::mvn_logpdf(v, 2.0 * Matrix::Ones(1, 1));
  }
  EXPECT_NEAR(acc / N, kl_divergence(Matrix::Ones(1, 1), 2.0 * Matrix::Ones(1, 1), Matrix::Ones(1, 1)), 5e-3);
}

TEST(Kl, RankDifferenceShiftsByHalfLogTwoPi) {
  const Matrix Rc = Matrix::Ones(1, 1), Rq = 2.0 * Matrix::Ones(1, 1), Rt = Matrix::Ones(1, 1);
  const double base = kl_divergence(Rc, Rq, Rt, 1, 1);
  EXPECT_NEAR(kl_divergence(Rc, Rq, Rt, 2, 1) - base, 0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
}

TEST(Kl, IdenticalArgumentsGiveExactZero) {
  oracle::Rng rng(2);
  const Matrix R = rng.spd(3);
  EXPECT_EQ(kl_divergence(R, R, R), 0.0);
}

TEST(Lyapunov, Examples) {
  EXPECT_NEAR(lyapunov_limit(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1))(0, 0), 4.0 / 3.0, 1e-11);
  oracle::Rng rng(3);
  const Matrix WQW = rng.spd(3);
  EXPECT_LT((lyapunov_limit(Matrix::Zero(3, 3), WQW) - WQW).norm(), 1e-15);
  EXPECT_THROW(lyapunov_limit(Matrix::Identity(2, 2), WQW.topLeftCorner(2, 2)), Unstable);
  EXPECT_THROW(lyapunov_limit(Matrix{{0.0, -1.0}, {1.0, 0.0}}, Matrix::Identity(2, 2)), Unstable);
  EXPECT_THROW(lyapunov_limit(Matrix::Constant(1, 1, 0.999), Matrix::Ones(1, 1), 1e-12, 10), NoConvergence);
}

TEST(Lyapunov, ResidualProperty) {
  oracle::Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Matrix A = rng.with_radius(4, rng.uniform(0.1, 0.95));
    const Matrix WQW = rng.spd(4);
    const Matrix Psi = lyapunov_limit(A, WQW);
    EXPECT_LT(lyapunov_residual(A, WQW, Psi), 1e-8);
    EXPECT_LT((Psi - Psi.transpose()).norm(), 1e-12);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(Psi).eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(SteadyState, MatchesLongFilterRun) {
  oracle::Rng rng(5);
  const DiscreteModeModel dm = stable_model(rng, 3, 3, 2, 1);
  const DecomposedModeModel dec = decompose(dm);
  const SteadyGains g = steady_state_gains(dec);
  FilterState fs = init(dec, Vector::Zero(3), Matrix::Identity(3, 3), Vector::Zero(3), Vector::Zero(1));
  for (int k = 0; k < 3000; ++k) fs = step(fs, dec, Vector::Zero(1), Vector::Zero(1), Vector::Zero(3));
  EXPECT_LT((g.R_star2 - fs.R_star2).norm(), 1e-9 * fs.R_star2.norm());
  EXPECT_LT((g.L - fs.L_gain).norm(), 1e-9 * std::max(1.0, fs.L_gain.norm()));
}

TEST(SteadyState, KalmanCaseIsBlockTriangular) {
  oracle::Rng rng(6);
  const DiscreteModeModel dm = stable_model(rng, 3, 2, 0, 0, 0.9);
  const DecomposedModeModel dec = decompose(dm);
  const SteadyStatePair pair = mismatched_system(dm, dec, steady_state_gains(dec));
  EXPECT_EQ(pair.A_mismatch.topRightCorner(3, 3).norm(), 0.0);
  const double rho_a = spectral_radius(dm.A);
  const Matrix L = pair.gains.L;
  const double rho_f = spectral_radius((Matrix::Identity(3, 3) - L * dec.C2) * dm.A);
  EXPECT_NEAR(pair.spectral_radius, std::max(rho_a, rho_f), 1e-10);
  EXPECT_LT(pair.spectral_radius, 1.0);
}

TEST(SteadyState, ZeroDynamicsGiveZeroMatrix) {
  DiscreteModeModel dm;
  dm.A = Matrix::Zero(2, 2);
  dm.B = Matrix::Zero(2, 1);
  dm.G = Matrix(2, 0);
  dm.C = Matrix::Identity(2, 2);
  dm.D = Matrix::Zero(2, 1);
  dm.H = Matrix(2, 0);
  dm.Q = Matrix::Identity(2, 2);
  dm.R = Matrix::Identity(2, 2);
  const DecomposedModeModel dec = decompose(dm);
  SteadyGains g;
  g.L = Matrix::Zero(2, 2);
  g.M1 = Matrix(0, 0);
  g.M2 = Matrix(0, 2);
  g.R_star2 = Matrix::Identity(2, 2);
  const SteadyStatePair pair = mismatched_system(dm, dec, g);
  EXPECT_EQ(pair.A_mismatch.norm(), 0.0);
}

TEST(SteadyState, MatchedResidualCovarianceEqualsFilterCovariance) {
  oracle::Rng rng(7);
  for (int t = 0; t < 10; ++t) {
    const int n = rng.integer(2, 4), l = rng.integer(2, 4);
    const int p = rng.integer(0, std::min(n, l) - 1), p_H = rng.integer(0, p);
    const DiscreteModeModel dm = stable_model(rng, n, l, p, p_H);
    const DecomposedModeModel dec = decompose(dm);
    const Matrix R = residual_cov(dm, dec);
    const Matrix Rs = steady_state_gains(dec).R_star2;
    EXPECT_LT((R - Rs).norm(), 1e-6 * std::max(1.0, Rs.norm())) << "trial " << t;
  }
}

TEST(SteadyState, NoFeedthroughZeroPsiGivesMeasurementNoise) {
  // Ψ = 0 and C2 G2 M2 = 0: the residual covariance is the projected R
  DiscreteModeModel dm;
  dm.A = Matrix::Zero(1, 1);
  dm.B = Matrix::Zero(1, 1);
  dm.G = Matrix(1, 0);
  dm.C = Matrix::Zero(1, 1);
  dm.D = Matrix::Zero(1, 1);
  dm.H = Matrix(1, 0);
  dm.Q = Matrix::Zero(1, 1);
  dm.R = 0.7 * Matrix::Ones(1, 1);
  const DecomposedModeModel dec = decompose(dm);
  EXPECT_NEAR(residual_cov(dm, dec)(0, 0), 0.7, 1e-15);
}

TEST(SteadyState, MismatchedCovarianceMatchesSimulation) {
  oracle::Rng rng(8);
  const DiscreteModeModel truth = stable_model(rng, 3, 3, 1, 1, 0.7);
  DiscreteModeModel other = truth;
  other.A *= 0.6;
  other.H *= 1.5;
  const DecomposedModeModel q = decompose(other);
  ASSERT_TRUE(diagnose(q).ok());
  const Matrix R = residual_cov(truth, q);

  const Matrix sq_Q = Eigen::LLT<Matrix>(truth.Q).matrixL();
  const Matrix sq_R = Eigen::LLT<Matrix>(truth.R).matrixL();
  Vector x = Vector::Zero(3);
  Vector y = sq_R * rng.gaussian(3);
  FilterState fs = init(q, Vector::Zero(3), Matrix::Identity(3, 3), y, Vector::Zero(1));
  const int N = 40000, burn = 500;
  Matrix acc = Matrix::Zero(R.rows(), R.cols());
  for (int k = 1; k <= N + burn; ++k) {
    x = truth.A * x + sq_Q * rng.gaussian(3);
    y = truth.C * x + sq_R * rng.gaussian(3);
    fs = step(fs, q, Vector::Zero(1), Vector::Zero(1), y);
    if (k > burn) acc += fs.nu_bar * fs.nu_bar.transpose();
  }
  acc /= N;
  EXPECT_LT((acc - R).norm() / R.norm(), 0.05);
}

TEST(Predictor, Examples) {
  const WinnerPrediction s = predict_winner(Vector{{0.5, 0.1, 0.3}}, PredictorKind::Static);
  EXPECT_EQ(s.winner, 1);
  EXPECT_NEAR(s.margin, 0.2, 1e-15);
  EXPECT_TRUE(s.unique);

  const WinnerPrediction d = predict_winner(Vector{{0.2, 0.3}}, PredictorKind::Dynamic, Vector{{0.9, 0.1}});
  EXPECT_EQ(d.winner, 0);
  EXPECT_NEAR(d.scores(0), 0.305, 1e-3);
  EXPECT_NEAR(d.scores(1), 2.603, 1e-3);

  const WinnerPrediction tie = predict_winner(Vector{{0.1, 0.1}}, PredictorKind::Static);
  EXPECT_EQ(tie.winner, 0);
  EXPECT_FALSE(tie.unique);

  const WinnerPrediction nan = predict_winner(Vector{{NAN, 0.4}}, PredictorKind::Static);
  EXPECT_EQ(nan.winner, 1);
  EXPECT_THROW(predict_winner(Vector{{0.1}}, PredictorKind::Dynamic), InvalidModel);
}

TEST(Predictor, MeanRatio) {
  EXPECT_NEAR(mean_ratio_trace(0.3, 0.3, 0.2, 0.8, 50), 4.0, 1e-15);
  EXPECT_NEAR(mean_ratio_trace(0.1, 0.0, 0.5, 0.5, 10), std::numbers::e, 1e-12);
  EXPECT_NEAR(mean_ratio_trace(std::vector<double>(10, 0.1), std::vector<double>(10, 0.0), 0.5, 0.5),
              std::numbers::e, 1e-12);
  // truth as i (D_i = 0) and any D_j >= 0: the ratio never grows
  double prev = mean_ratio_trace(0.0, 0.2, 0.5, 0.5, 0);
  for (long k = 1; k < 20; ++k) {
    const double r = mean_ratio_trace(0.0, 0.2, 0.5, 0.5, k);
    EXPECT_LE(r, prev);
    prev = r;
  }
}

TEST(Report, TruthInSetIsClosest) {
  oracle::Rng rng(9);
  const DiscreteModeModel truth = stable_model(rng, 3, 3, 1, 1, 0.7);
  DiscreteModeModel a = truth, b = truth;
  a.A *= 0.5;
  b.Q *= 4.0;
  const KLReport r = kl_report(truth, {decompose(a), decompose(truth), decompose(b)}, {"a", "t", "b"}, 1);
  EXPECT_EQ(r.D(1), 0.0);
  EXPECT_GE(r.D.minCoeff(), -1e-10);
  ASSERT_TRUE(r.closest_mode.has_value());
  EXPECT_EQ(*r.closest_mode, 1);
  EXPECT_EQ(r.static_prediction.winner, 1);
  for (const ModeAnalysis& m : r.modes) EXPECT_LT(m.lyapunov_residual, 1e-8);
}

TEST(Report, LargerFeedthroughCanUndercutTruth) {
  // with d = 0, halving the d1 gain shrinks the residual below the truth's own R*
  oracle::Rng rng(9);
  const DiscreteModeModel truth = stable_model(rng, 3, 3, 1, 1, 0.7);
  DiscreteModeModel b = truth;
  b.H *= 2.0;
  const DecomposedModeModel qb = decompose(b);
  const Matrix Rt = steady_state_gains(decompose(truth)).R_star2;
  const Matrix Rb = steady_state_gains(qb).R_star2;
  const Matrix Rc = residual_cov(truth, qb);
  EXPECT_LT(max_abs(Rc - Rb), 1e-6 * max_abs(Rb));
  const double D = kl_divergence(Rc, Rb, Rt);
  EXPECT_NEAR(D, 0.5 * (log_pdet(Rb) - log_pdet(Rt)), 1e-6);
  EXPECT_LT(D, 0.0);
}

TEST(Report, IntersectionPairIsRecorded) {
  const auto cont = simlab::intersection_modes();
  const DiscreteModeModel I = discretize_zoh(cont[0], 0.01);
  const DiscreteModeModel M = discretize_zoh(cont[1], 0.01);
  const DecomposedModeModel qM = decompose(M);
  const SteadyStatePair pair = mismatched_system(I, qM, steady_state_gains(qM));
  EXPECT_EQ(pair.A_mismatch.rows(), 8);
  EXPECT_TRUE(std::isfinite(pair.spectral_radius));
  EXPECT_GT(pair.spectral_radius, 0.0);
}
