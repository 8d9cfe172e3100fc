#include "switchest/simlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "switchest/errors.hpp"

namespace switchest::simlab {

Vector rmse(const std::vector<Vector>& est, const std::vector<Vector>& truth) {
  if (est.size() != truth.size()) throw InvalidModel("rmse: sequences differ in length");
  if (est.empty()) return {};
  Vector acc = Vector::Zero(est.front().size());
  for (std::size_t k = 0; k < est.size(); ++k) {
    if (est[k].size() != acc.size() || truth[k].size() != acc.size()) {
      throw InvalidModel("rmse: entries differ in length");
    }
    acc += (est[k] - truth[k]).cwiseAbs2();
  }
  return (acc / static_cast<double>(est.size())).cwiseSqrt();
}

WhitenessStats whiteness(const std::vector<Vector>& seq, int max_lag) {
  if (max_lag < 1) throw InvalidModel("max_lag must be positive");
  if (static_cast<long>(seq.size()) < max_lag + 2) throw InvalidModel("sequence too short");
  const Eigen::Index d = seq.front().size();
  const auto N = static_cast<long>(seq.size());

  Vector mean = Vector::Zero(d);
  for (const auto& e : seq) {
    if (e.size() != d) throw InvalidModel("whiteness: entries differ in length");
    mean += e;
  }
  mean /= static_cast<double>(N);

  auto lag_cov = [&](int tau) {
    Matrix c = Matrix::Zero(d, d);
    for (long k = tau; k < N; ++k) {
      c += (seq[static_cast<std::size_t>(k)] - mean) *
           (seq[static_cast<std::size_t>(k - tau)] - mean).transpose();
    }
    return Matrix(c / static_cast<double>(N));
  };

  WhitenessStats ws;
  ws.samples = N;
  ws.dim = static_cast<int>(d);
  ws.max_lag = max_lag;
  ws.bound = 3.0 / std::sqrt(static_cast<double>(N));
  ws.cov = lag_cov(0);
  ws.cov_identity_error = (ws.cov - Matrix::Identity(d, d)).norm() / std::sqrt(static_cast<double>(d));

  const Vector scale = ws.cov.diagonal().cwiseSqrt().cwiseInverse();
  const Matrix c0_inv = ws.cov.inverse();
  long inside = 0;
  long total = 0;
  for (int tau = 1; tau <= max_lag; ++tau) {
    const Matrix c = lag_cov(tau);
    Matrix r = scale.asDiagonal() * c * scale.asDiagonal();
    ws.max_abs_autocorr = std::max(ws.max_abs_autocorr, r.cwiseAbs().maxCoeff());
    inside += (r.array().abs() <= ws.bound).count();
    total += r.size();
    ws.portmanteau += (c.transpose() * c0_inv * c * c0_inv).trace() / static_cast<double>(N - tau);
    ws.autocorr.push_back(std::move(r));
  }
  ws.portmanteau *= static_cast<double>(N) * static_cast<double>(N);
  ws.dof = max_lag * static_cast<int>(d * d);
  ws.fraction_within_bound = static_cast<double>(inside) / static_cast<double>(total);
  return ws;
}

MetricsReport metrics(const Traces& traces, const MetricsOptions& opts) {
  MetricsReport rep;
  const auto& rows = traces.rows;
  if (rows.empty()) return rep;

  std::vector<Vector> x_est, x_true, d_est, d_true;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    x_est.push_back(rows[k].x_hat);
    x_true.push_back(rows[k].x_true);
    const Vector& dh = rows[k].d_hat_prev;
    const Vector& dt = rows[k - 1].d_true;
    if (dh.size() > 0 && dh.size() == dt.size() &&
        (d_est.empty() || d_est.front().size() == dh.size())) {
      d_est.push_back(dh);
      d_true.push_back(dt);
    }
  }
  rep.state_rmse = rmse(x_est, x_true);
  rep.input_rmse = rmse(d_est, d_true);

  long last_switch = -opts.transient_window - 1;
  long hits = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const long step = static_cast<long>(k);
    if (k > 0 && rows[k].true_mode != rows[k - 1].true_mode) last_switch = step;
    if (step - last_switch < opts.transient_window) continue;
    ++rep.mode_samples;
    if (rows[k].q_map == rows[k].true_mode) ++hits;
  }
  rep.mode_accuracy =
      rep.mode_samples > 0 ? static_cast<double>(hits) / static_cast<double>(rep.mode_samples) : 0.0;

  std::map<int, long> rank_count;
  for (const auto& r : rows) {
    if (r.p_R > 0) ++rank_count[r.p_R];
  }
  if (!rank_count.empty()) {
    const int rank = std::max_element(rank_count.begin(), rank_count.end(),
                                      [](const auto& a, const auto& b) { return a.second < b.second; })
                         ->first;
    std::vector<Vector> seq;
    for (const auto& r : rows) {
      if (r.p_R == rank) seq.push_back(r.nu_white);
    }
    if (static_cast<long>(seq.size()) >= opts.max_lag + 2) {
      rep.whiteness = whiteness(seq, opts.max_lag);
      rep.whiteness_available = true;
    }
  }

  double sum = 0.0;
  rep.mu_true_min = 1.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double mt = rows[k].mu(rows[k].true_mode);
    sum += mt;
    rep.mu_true_min = std::min(rep.mu_true_min, mt);
    if (rep.first_confident_step < 0 && mt > 0.95) rep.first_confident_step = static_cast<long>(k);
  }
  rep.mu_true_mean = sum / static_cast<double>(rows.size());
  rep.mu_true_final = rows.back().mu(rows.back().true_mode);

  if (!traces.step_seconds.empty()) {
    double t = 0.0;
    for (double s : traces.step_seconds) t += s;
    rep.mean_step_seconds = t / static_cast<double>(traces.step_seconds.size());
  }
  return rep;
}

}  // namespace switchest::simlab
