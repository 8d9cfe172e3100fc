#include "switchest/simlab/estimation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

#include "switchest/errors.hpp"

namespace switchest::simlab {

namespace {

TraceRow make_row(const Trajectory& truth, std::size_t k, const MMState& mm) {
  TraceRow row;
  row.k = static_cast<long>(k);
  row.true_mode = truth.modes[k];
  row.q_map = static_cast<int>(mm.q_map);
  row.x_true = truth.x[k];
  row.d_true = truth.d[k];
  row.u = truth.u[k];
  row.y = truth.y[k];
  row.mu = mm.mu.mu;
  row.x_hat = mm.fused.x_hat;
  row.d_hat_prev = mm.fused.d_hat_prev;
  row.Px_diag = mm.fused.P_x.diagonal();
  if (mm.fused.P_d_prev.size() > 0) row.Pd_diag = mm.fused.P_d_prev.diagonal();

  if (k > 0) {
    row.loglike = mm.diag.loglike;
    for (std::size_t j = 0; j < mm.diag.breakdown.size(); ++j) {
      if (mm.diag.breakdown[j]) row.breakdown_mask |= (std::uint64_t{1} << j);
    }
    const FilterState& fs = mm.bank[static_cast<std::size_t>(mm.q_map)];
    if (fs.R_star2.size() > 0 && select_gamma(fs.R_star2).p_R > 0) {
      const GenInnovation gi = generalized_innovation(fs.nu_bar, fs.R_star2);
      row.p_R = gi.p_R;
      row.nu = gi.nu;
      row.S_diag = gi.S.diagonal();
      row.nu_white = inv_sqrt_spd(gi.S) * gi.nu;
    }
  }
  return row;
}

}  // namespace

Traces run_estimator(const Trajectory& truth, const ModelBank& bank, const EstimatorConfig& cfg,
                     const Vector& x0_hat, const Matrix& P0,
                     const std::vector<std::string>& names) {
  if (truth.size() == 0) throw ConfigError("empty trajectory");
  MultipleModelEstimator est(bank, cfg);

  Traces out;
  out.mode_names = names;
  for (std::size_t j = out.mode_names.size(); j < bank.size(); ++j) {
    out.mode_names.push_back(std::to_string(j));
  }
  out.rows.reserve(truth.size());
  out.step_seconds.reserve(truth.size());

  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  est.initialize(x0_hat, P0, truth.y[0], truth.u[0]);
  out.step_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
  out.rows.push_back(make_row(truth, 0, est.state()));

  for (std::size_t k = 1; k < truth.size(); ++k) {
    t0 = clock::now();
    const MMState& mm = est.update(truth.u[k - 1], truth.u[k], truth.y[k]);
    out.step_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    out.rows.push_back(make_row(truth, k, mm));
  }
  return out;
}

Traces run_estimator(const Scenario& s, const Trajectory& truth, const EstimatorConfig& cfg) {
  return run_estimator(truth, ModelBank(s.system), cfg, s.x0_hat, s.P0, s.system.names);
}

std::vector<Traces> monte_carlo(const Scenario& s, const EstimatorConfig& cfg,
                                const std::vector<std::uint64_t>& seeds, unsigned threads) {
  s.validate();
  const ModelBank bank(s.system);
  std::vector<Traces> results(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        const Trajectory truth = simulate(s, seeds[i]);
        results[i] = run_estimator(truth, bank, cfg, s.x0_hat, s.P0, s.system.names);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const unsigned count = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(seeds.size())));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace switchest::simlab
