#include "switchest/mm_bank.hpp"

#include <cmath>
#include <future>
#include <limits>

#include "switchest/errors.hpp"

namespace switchest {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ModeResult {
  FilterState state;
  ModeLikelihood ll{kNegInf, 0, 0.0};
  bool breakdown = false;
};

ModeResult run_mode(const FilterState& start, const ModelBank& bank, std::size_t j,
                    const Vector& u_prev, const Vector& u_now, const Vector& y_now) {
  ModeResult r;
  if (!bank.well_posed(j)) {
    r.state = start;
    return r;
  }
  try {
    r.state = step(start, bank.models[j], u_prev, u_now, y_now);
    r.ll = log_likelihood(r.state.nu_bar, r.state.R_star2);
  } catch (const NumericalBreakdown&) {
    r.state = start;
    r.ll = {kNegInf, 0, 0.0};
    r.breakdown = true;
  }
  return r;
}

// Per-mode filtering; the parallel path only fans out independent work, so
// its results match the sequential path bit for bit.
std::vector<ModeResult> run_bank(const std::vector<FilterState>& starts, const ModelBank& bank,
                                 const Vector& u_prev, const Vector& u_now,
                                 const Vector& y_now, Execution exec) {
  const std::size_t count = bank.size();
  std::vector<ModeResult> out(count);
  if (exec == Execution::Sequential || count == 1) {
    for (std::size_t j = 0; j < count; ++j) {
      out[j] = run_mode(starts[j], bank, j, u_prev, u_now, y_now);
    }
    return out;
  }
  std::vector<std::future<ModeResult>> tasks;
  tasks.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    tasks.push_back(std::async(std::launch::async, [&, j] {
      return run_mode(starts[j], bank, j, u_prev, u_now, y_now);
    }));
  }
  for (std::size_t j = 0; j < count; ++j) out[j] = tasks[j].get();
  return out;
}

FusedEstimate fuse(const FilterState& fs) {
  return {fs.x_hat, fs.P_x, fs.d_hat_prev, fs.P_d_prev};
}

// Copy the MAP mode's estimates into mode j. d1 carries over only when the
// dimensions agree; otherwise mode j keeps its own.
void reinitialize_from(FilterState& target, const FilterState& source) {
  target.x_hat = source.x_hat;
  target.P_x = source.P_x;
  if (target.d1_hat.size() == source.d1_hat.size()) {
    target.d1_hat = source.d1_hat;
    target.P_d1 = source.P_d1;
  }
}

void check_inputs(const MMState& mm, const ModelBank& bank) {
  if (mm.bank.size() != bank.size() || mm.mu.size() != static_cast<Eigen::Index>(bank.size())) {
    throw InvalidModel("estimator state does not match the model bank");
  }
}

}  // namespace

TransitionMatrix::TransitionMatrix(Matrix p) : p_(std::move(p)) {
  if (p_.rows() == 0 || p_.rows() != p_.cols()) {
    throw InvalidModel("transition matrix must be square and non-empty");
  }
  if (!p_.allFinite() || (p_.array() < 0.0).any() || (p_.array() > 1.0).any()) {
    throw InvalidModel("transition probabilities must lie in [0, 1]");
  }
  for (Eigen::Index i = 0; i < p_.rows(); ++i) {
    if (std::abs(p_.row(i).sum() - 1.0) > 1e-12) {
      throw InvalidModel("transition matrix rows must sum to 1");
    }
  }
}

TransitionMatrix TransitionMatrix::identity(Eigen::Index modes) {
  return TransitionMatrix(Matrix::Identity(modes, modes));
}

ModelBank::ModelBank(const SwitchedSystem& sys) {
  for (const auto& md : sys.modes) models.push_back(decompose(md));
  for (const auto& dec : models) diagnostics.push_back(diagnose(dec));
}

ModelBank::ModelBank(std::vector<DecomposedModeModel> decs) : models(std::move(decs)) {
  if (models.empty()) throw InvalidModel("model bank needs at least one mode");
  for (const auto& dec : models) {
    if (dec.n() != models.front().n() || dec.m() != models.front().m() ||
        dec.l() != models.front().l()) {
      throw InvalidModel("modes must share state, known-input and output dimensions");
    }
    diagnostics.push_back(diagnose(dec));
  }
}

MixingResult mixing_weights(const ModeProbabilities& mu_prev, const TransitionMatrix& P) {
  const Eigen::Index count = P.size();
  if (mu_prev.size() != count) throw InvalidModel("probability vector size mismatch");
  const Matrix& p = P.matrix();

  MixingResult out;
  out.mu_pred = Vector::Zero(count);
  out.W = Matrix::Zero(count, count);
  out.unreachable.assign(static_cast<std::size_t>(count), false);
  for (Eigen::Index j = 0; j < count; ++j) {
    double pj = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) pj += p(i, j) * mu_prev.mu(i);
    out.mu_pred(j) = pj;
    if (pj > 0.0) {
      for (Eigen::Index i = 0; i < count; ++i) out.W(i, j) = p(i, j) * mu_prev.mu(i) / pj;
    } else {
      out.W.col(j).setConstant(1.0 / static_cast<double>(count));
      out.unreachable[static_cast<std::size_t>(j)] = true;
    }
  }
  out.mu_pred /= out.mu_pred.sum();
  return out;
}

std::vector<MixedInitial> mix_initial_conditions(const std::vector<FilterState>& bank,
                                                 const Matrix& W) {
  const std::size_t count = bank.size();
  if (W.rows() != static_cast<Eigen::Index>(count) || W.cols() != W.rows()) {
    throw InvalidModel("mixing matrix does not match the bank size");
  }
  const Eigen::Index n = bank.front().x_hat.size();
  std::vector<MixedInitial> out(count);
  for (std::size_t j = 0; j < count; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    MixedInitial& mix = out[j];

    mix.x_hat = Vector::Zero(n);
    for (std::size_t i = 0; i < count; ++i) {
      mix.x_hat += W(static_cast<Eigen::Index>(i), jj) * bank[i].x_hat;
    }
    mix.P_x = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < count; ++i) {
      const Vector dx = bank[i].x_hat - mix.x_hat;
      mix.P_x += W(static_cast<Eigen::Index>(i), jj) * (dx * dx.transpose() + bank[i].P_x);
    }
    mix.P_x = symmetrize(mix.P_x);

    const Eigen::Index p1 = bank[j].d1_hat.size();
    double mass = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      if (bank[i].d1_hat.size() == p1) mass += W(static_cast<Eigen::Index>(i), jj);
    }
    if (!(mass > 0.0)) {
      mix.d1_hat = bank[j].d1_hat;
      mix.P_d1 = bank[j].P_d1;
      continue;
    }
    mix.d1_hat = Vector::Zero(p1);
    for (std::size_t i = 0; i < count; ++i) {
      if (bank[i].d1_hat.size() != p1) continue;
      mix.d1_hat += (W(static_cast<Eigen::Index>(i), jj) / mass) * bank[i].d1_hat;
    }
    mix.P_d1 = Matrix::Zero(p1, p1);
    for (std::size_t i = 0; i < count; ++i) {
      if (bank[i].d1_hat.size() != p1) continue;
      const Vector dd = bank[i].d1_hat - mix.d1_hat;
      mix.P_d1 += (W(static_cast<Eigen::Index>(i), jj) / mass) * (dd * dd.transpose() + bank[i].P_d1);
    }
    mix.P_d1 = symmetrize(mix.P_d1);
  }
  return out;
}

ModeProbabilities apply_floor(const ModeProbabilities& mu, double floor) {
  const Eigen::Index count = mu.size();
  if (floor < 0.0 || floor * static_cast<double>(count) >= 1.0) {
    throw InvalidModel("probability floor must satisfy 0 <= floor < 1/N");
  }
  if (floor == 0.0) return mu;
  std::vector<bool> pinned(static_cast<std::size_t>(count), false);
  Vector out = mu.mu;
  for (;;) {
    bool changed = false;
    for (Eigen::Index j = 0; j < count; ++j) {
      if (!pinned[static_cast<std::size_t>(j)] && out(j) < floor) {
        pinned[static_cast<std::size_t>(j)] = true;
        changed = true;
      }
    }
    if (!changed) break;
    double free_mass = 1.0;
    double free_sum = 0.0;
    for (Eigen::Index j = 0; j < count; ++j) {
      if (pinned[static_cast<std::size_t>(j)]) {
        free_mass -= floor;
      } else {
        free_sum += mu.mu(j);
      }
    }
    for (Eigen::Index j = 0; j < count; ++j) {
      out(j) = pinned[static_cast<std::size_t>(j)] ? floor : mu.mu(j) * free_mass / free_sum;
    }
  }
  ModeProbabilities res;
  res.mu = out;
  return res;
}

MMState mm_init(const ModelBank& bank, const Vector& x0_hat, const Matrix& P0,
                const Vector& y0, const Vector& u0, const ModeProbabilities& mu0) {
  if (mu0.size() != static_cast<Eigen::Index>(bank.size())) {
    throw InvalidModel("initial mode probabilities must have one entry per mode");
  }
  validate_simplex(mu0.mu);
  MMState mm;
  mm.k = 0;
  mm.mu = mu0;
  for (const auto& dec : bank.models) mm.bank.push_back(init(dec, x0_hat, P0, y0, u0));
  mm.q_map = mu0.map_mode();
  mm.fused = fuse(mm.bank[static_cast<std::size_t>(mm.q_map)]);
  const auto count = bank.size();
  mm.diag.loglike = Vector::Zero(static_cast<Eigen::Index>(count));
  mm.diag.ranks.assign(count, 0);
  mm.diag.support_violation.assign(count, 0.0);
  mm.diag.breakdown.assign(count, false);
  mm.diag.unreachable.assign(count, false);
  mm.diag.reinitialized.assign(count, false);
  return mm;
}

MMState dynamic_step(const MMState& mm, const ModelBank& bank, const TransitionMatrix& P,
                     const Vector& u_prev, const Vector& u_now, const Vector& y_now,
                     Execution exec) {
  check_inputs(mm, bank);
  if (P.size() != static_cast<Eigen::Index>(bank.size())) {
    throw InvalidModel("transition matrix does not match the model bank");
  }
  const std::size_t count = bank.size();

  const MixingResult mix = mixing_weights(mm.mu, P);
  const std::vector<MixedInitial> mixed = mix_initial_conditions(mm.bank, mix.W);
  std::vector<FilterState> starts = mm.bank;
  for (std::size_t j = 0; j < count; ++j) {
    starts[j].x_hat = mixed[j].x_hat;
    starts[j].P_x = mixed[j].P_x;
    starts[j].d1_hat = mixed[j].d1_hat;
    starts[j].P_d1 = mixed[j].P_d1;
  }

  std::vector<ModeResult> results = run_bank(starts, bank, u_prev, u_now, y_now, exec);

  MMState out;
  out.k = mm.k + 1;
  out.diag.loglike.resize(static_cast<Eigen::Index>(count));
  for (std::size_t j = 0; j < count; ++j) {
    out.bank.push_back(std::move(results[j].state));
    out.diag.loglike(static_cast<Eigen::Index>(j)) = results[j].ll.value;
    out.diag.ranks.push_back(results[j].ll.rank);
    out.diag.support_violation.push_back(results[j].ll.support_violation);
    out.diag.breakdown.push_back(results[j].breakdown);
  }
  out.diag.unreachable = mix.unreachable;

  ModeProbabilities prior;
  prior.mu = mix.mu_pred;
  out.mu = update_probabilities(prior, out.diag.loglike);
  out.q_map = out.mu.map_mode();

  out.diag.reinitialized.assign(count, false);
  const FilterState map_state = out.bank[static_cast<std::size_t>(out.q_map)];
  for (std::size_t j = 0; j < count; ++j) {
    if (out.diag.breakdown[j]) {
      reinitialize_from(out.bank[j], map_state);
      out.diag.reinitialized[j] = true;
    }
  }
  out.fused = fuse(out.bank[static_cast<std::size_t>(out.q_map)]);
  return out;
}

MMState static_step(const MMState& mm, const ModelBank& bank, const StaticMMConfig& cfg,
                    const Vector& u_prev, const Vector& u_now, const Vector& y_now,
                    Execution exec) {
  check_inputs(mm, bank);
  const std::size_t count = bank.size();

  std::vector<ModeResult> results = run_bank(mm.bank, bank, u_prev, u_now, y_now, exec);

  MMState out;
  out.k = mm.k + 1;
  out.diag.loglike.resize(static_cast<Eigen::Index>(count));
  for (std::size_t j = 0; j < count; ++j) {
    out.bank.push_back(std::move(results[j].state));
    out.diag.loglike(static_cast<Eigen::Index>(j)) = results[j].ll.value;
    out.diag.ranks.push_back(results[j].ll.rank);
    out.diag.support_violation.push_back(results[j].ll.support_violation);
    out.diag.breakdown.push_back(results[j].breakdown);
  }
  out.diag.unreachable.assign(count, false);

  out.mu = apply_floor(update_probabilities(mm.mu, out.diag.loglike), cfg.prob_floor);
  out.q_map = out.mu.map_mode();

  out.diag.reinitialized.assign(count, false);
  const FilterState map_state = out.bank[static_cast<std::size_t>(out.q_map)];
  for (std::size_t j = 0; j < count; ++j) {
    if (static_cast<Eigen::Index>(j) == out.q_map) continue;
    if (out.diag.breakdown[j] || out.mu.mu(static_cast<Eigen::Index>(j)) < cfg.reinit_threshold) {
      reinitialize_from(out.bank[j], map_state);
      out.diag.reinitialized[j] = true;
    }
  }
  out.fused = fuse(out.bank[static_cast<std::size_t>(out.q_map)]);
  return out;
}

MultipleModelEstimator::MultipleModelEstimator(ModelBank bank, EstimatorConfig cfg)
    : bank_(std::move(bank)), cfg_(std::move(cfg)) {
  const auto count = static_cast<Eigen::Index>(bank_.size());
  if (count == 0) throw InvalidModel("model bank needs at least one mode");
  if (cfg_.mu0.size() == 0) cfg_.mu0 = ModeProbabilities::uniform(count).mu;
  if (cfg_.mu0.size() != count) throw InvalidModel("mu0 must have one entry per mode");
  validate_simplex(cfg_.mu0);
  if (cfg_.kind == EstimatorKind::Dynamic) {
    if (cfg_.transition.size() == 0) throw InvalidModel("dynamic estimator needs a transition matrix");
    transition_.emplace(cfg_.transition);
    if (transition_->size() != count) throw InvalidModel("transition matrix size mismatch");
  } else {
    const double floor = cfg_.static_cfg.prob_floor;
    if (floor < 0.0 || floor * static_cast<double>(count) >= 1.0) {
      throw InvalidModel("probability floor must satisfy 0 <= floor < 1/N");
    }
  }
}

void MultipleModelEstimator::initialize(const Vector& x0_hat, const Matrix& P0,
                                        const Vector& y0, const Vector& u0) {
  ModeProbabilities mu0;
  mu0.mu = cfg_.mu0;
  state_ = mm_init(bank_, x0_hat, P0, y0, u0, mu0);
  initialized_ = true;
}

const MMState& MultipleModelEstimator::update(const Vector& u_prev, const Vector& u_now,
                                              const Vector& y_now) {
  if (!initialized_) throw InvalidModel("estimator used before initialize()");
  if (cfg_.kind == EstimatorKind::Dynamic) {
    state_ = dynamic_step(state_, bank_, *transition_, u_prev, u_now, y_now, cfg_.exec);
  } else {
    state_ = static_step(state_, bank_, cfg_.static_cfg, u_prev, u_now, y_now, cfg_.exec);
  }
  return state_;
}

}  // namespace switchest
