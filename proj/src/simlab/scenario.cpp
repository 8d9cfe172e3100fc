#include "switchest/simlab/scenario.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "switchest/errors.hpp"

namespace switchest::simlab {

double Waveform::operator()(double t) const {
  return offset + slope * t + amplitude * std::sin(2.0 * std::numbers::pi * frequency * t + phase);
}

Vector evaluate(const Signal& s, double t) {
  Vector out(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) out(static_cast<Eigen::Index>(i)) = s[i](t);
  return out;
}

ModeSchedule ModeSchedule::constant(int mode) {
  ModeSchedule s;
  s.switches = {{0, mode}};
  return s;
}

ModeSchedule ModeSchedule::markov(Matrix transition, int initial_mode) {
  ModeSchedule s;
  s.kind = Kind::Markov;
  s.transition = std::move(transition);
  s.initial_mode = initial_mode;
  s.switches.clear();
  return s;
}

std::vector<int> realize(const ModeSchedule& s, long horizon, std::uint64_t seed,
                         std::size_t modes) {
  if (horizon < 0) throw ConfigError("horizon must be non-negative");
  const auto count = static_cast<int>(modes);
  std::vector<int> q(static_cast<std::size_t>(horizon) + 1);

  if (s.kind == ModeSchedule::Kind::Explicit) {
    if (s.switches.empty() || s.switches.front().first != 0) {
      throw ConfigError("mode schedule must start at step 0");
    }
    std::size_t next = 0;
    int current = 0;
    for (long k = 0; k <= horizon; ++k) {
      while (next < s.switches.size() && s.switches[next].first <= k) {
        current = s.switches[next].second;
        ++next;
      }
      if (current < 0 || current >= count) throw ConfigError("schedule names an unknown mode");
      q[static_cast<std::size_t>(k)] = current;
    }
    for (std::size_t i = 1; i < s.switches.size(); ++i) {
      if (s.switches[i].first <= s.switches[i - 1].first) {
        throw ConfigError("schedule steps must increase");
      }
    }
    return q;
  }

  if (s.transition.rows() != count || s.transition.cols() != count) {
    throw ConfigError("Markov schedule transition matrix must be modes x modes");
  }
  if (s.initial_mode < 0 || s.initial_mode >= count) throw ConfigError("bad initial mode");
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  q[0] = s.initial_mode;
  for (std::size_t k = 1; k < q.size(); ++k) {
    const double r = uni(rng);
    double acc = 0.0;
    int nxt = count - 1;
    for (int j = 0; j < count; ++j) {
      acc += s.transition(q[k - 1], j);
      if (r < acc) {
        nxt = j;
        break;
      }
    }
    q[k] = nxt;
  }
  return q;
}

void Scenario::validate() const {
  if (system.size() == 0) throw ConfigError("scenario has no modes");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (horizon < 0) throw ConfigError("horizon must be non-negative");
  const Eigen::Index n = system.n();
  if (x0.size() != n || x0_hat.size() != n) throw ConfigError("x0 and x0_hat must have n entries");
  if (P0.rows() != n || P0.cols() != n) throw ConfigError("P0 must be n x n");
  if (static_cast<Eigen::Index>(u.size()) != system.m()) {
    throw ConfigError("u signal needs one waveform per known input");
  }
  if (d.size() != system.size()) throw ConfigError("one unknown-input signal per mode required");
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (static_cast<Eigen::Index>(d[j].size()) != system.modes[j].p()) {
      throw ConfigError("unknown-input signal of mode " + std::to_string(j) +
                        " has the wrong width");
    }
  }
  if (schedule.kind == ModeSchedule::Kind::Markov) {
    if (schedule.transition.rows() != static_cast<Eigen::Index>(system.size()) ||
        schedule.transition.cols() != static_cast<Eigen::Index>(system.size())) {
      throw ConfigError("Markov schedule transition matrix must be modes x modes");
    }
  }
}

Trajectory simulate(const Scenario& s) { return simulate(s, s.seed); }

Trajectory simulate(const Scenario& s, std::uint64_t seed) {
  s.validate();
  const Eigen::Index n = s.system.n();
  const Eigen::Index l = s.system.l();
  const std::size_t steps = static_cast<std::size_t>(s.horizon) + 1;

  std::vector<Matrix> w_factor, v_factor;
  for (const auto& mode : s.system.modes) {
    w_factor.push_back(sqrt_psd(mode.Q));
    v_factor.push_back(sqrt_psd(mode.R));
  }

  Trajectory t;
  t.modes = realize(s.schedule, s.horizon, seed, s.system.size());
  t.x.resize(steps);
  t.u.resize(steps);
  t.d.resize(steps);
  t.w.resize(steps);
  t.v.resize(steps);
  t.y.resize(steps);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](Eigen::Index size) {
    Vector e(size);
    for (Eigen::Index i = 0; i < size; ++i) e(i) = gauss(rng);
    return e;
  };

  t.x[0] = s.sample_initial_state ? Vector(s.x0_hat + sqrt_psd(s.P0) * draw(n)) : s.x0;
  for (std::size_t k = 0; k < steps; ++k) {
    const auto q = static_cast<std::size_t>(t.modes[k]);
    const auto& mode = s.system.modes[q];
    const double time = static_cast<double>(k) * s.dt;
    // draw both noises every step so the stream does not depend on the schedule
    const Vector ew = draw(n);
    const Vector ev = draw(l);
    t.u[k] = evaluate(s.u, time);
    t.d[k] = evaluate(s.d[q], time);
    t.w[k] = w_factor[q] * ew;
    t.v[k] = v_factor[q] * ev;
    t.y[k] = mode.C * t.x[k] + mode.D * t.u[k] + mode.H * t.d[k] + t.v[k];
    if (k + 1 < steps) {
      t.x[k + 1] = mode.A * t.x[k] + mode.B * t.u[k] + mode.G * t.d[k] + t.w[k];
    }
  }
  return t;
}

Vector measurement(const Scenario& s, const Trajectory& t, std::size_t k) {
  const auto& mode = s.system.modes[static_cast<std::size_t>(t.modes[k])];
  return mode.C * t.x[k] + mode.D * t.u[k] + mode.H * t.d[k] + t.v[k];
}

IntersectionVariant parse_intersection_variant(const std::string& name) {
  if (name == "stay-I") return IntersectionVariant::StayI;
  if (name == "I-M-I") return IntersectionVariant::IMI;
  if (name == "I-C-I") return IntersectionVariant::ICI;
  throw ConfigError("unknown intersection variant '" + name + "' (stay-I, I-M-I, I-C-I)");
}

std::string to_string(IntersectionVariant v) {
  switch (v) {
    case IntersectionVariant::StayI: return "stay-I";
    case IntersectionVariant::IMI: return "I-M-I";
    case IntersectionVariant::ICI: return "I-C-I";
  }
  return "stay-I";
}

std::vector<ContinuousModeModel> intersection_modes(double kp, double kd) {
  ContinuousModeModel inattentive;
  inattentive.A = Matrix{{0, 1, 0, 0}, {0, -0.1, 0, 0}, {0, 0, 0, 1}, {0, 0, 0, -0.1}};
  inattentive.B = Matrix{{0}, {0}, {0}, {1}};
  inattentive.G = Matrix{{0, 0}, {1, 0}, {0, 0}, {0, 0}};
  inattentive.C = Matrix{{1, 0, 0, 0}, {0, 1, 0, -1}, {0, 0, 1, 0}, {0, 0, 0, 1}};
  inattentive.D = Matrix::Zero(4, 1);
  inattentive.H = Matrix{{0, 0}, {0, 0}, {0, 0.1}, {0, 1}};
  Vector q_diag(4), r_diag(4);
  q_diag << 0, 1.6, 0, 0.9;
  r_diag << 1, 0.16, 0.9, 2.5;
  inattentive.Q = 1e-4 * Matrix(q_diag.asDiagonal());
  inattentive.R = 1e-4 * Matrix(r_diag.asDiagonal());

  ContinuousModeModel malicious = inattentive;
  malicious.A.row(1) << -kp, -0.1 - kd, kp, kd;
  malicious.H = Matrix{{0, 0}, {0, 0}, {0, 0}, {0, -1}};

  ContinuousModeModel cautious = inattentive;
  cautious.A.row(1) << -kp, -0.1 - kd, 0, 0;
  cautious.H = Matrix{{0, 0}, {0, -1}, {0, 0}, {0, 1}};

  return {inattentive, malicious, cautious};
}

Matrix intersection_transition() {
  return Matrix{{0.7, 0.15, 0.15}, {0.399, 0.6, 0.001}, {0.399, 0.001, 0.6}};
}

Scenario intersection_scenario(IntersectionVariant variant, const IntersectionOptions& opts) {
  if (!(opts.switch_on > 0 && opts.switch_on < opts.switch_off)) {
    throw ConfigError("intersection switches must satisfy 0 < on < off");
  }
  Scenario s;
  s.name = "intersection " + to_string(variant);
  s.continuous = intersection_modes(opts.kp, opts.kd);
  s.dt = opts.dt;
  std::vector<DiscreteModeModel> discrete;
  for (const auto& cm : s.continuous) discrete.push_back(discretize_zoh(cm, opts.dt));
  s.system = SwitchedSystem(std::move(discrete), {"I", "M", "C"});
  s.horizon = opts.horizon;
  switch (variant) {
    case IntersectionVariant::StayI: s.schedule = ModeSchedule::constant(0); break;
    case IntersectionVariant::IMI: s.schedule.switches = {{0, 0}, {opts.switch_on, 1}, {opts.switch_off, 0}}; break;
    case IntersectionVariant::ICI: s.schedule.switches = {{0, 0}, {opts.switch_on, 2}, {opts.switch_off, 0}}; break;
  }
  s.x0 = Vector{{-1.0, 1.0, 0.0, 1.0}};
  s.x0_hat = s.x0;
  s.P0 = 1e-2 * Matrix::Identity(4, 4);
  s.u = {opts.u};
  // feedback of M and C lives in their A matrices, so their d1 is zero
  const Waveform zero{};
  s.d = {{opts.d1, opts.d2}, {zero, opts.d2}, {zero, opts.d2}};
  s.seed = opts.seed;
  return s;
}

}  // namespace switchest::simlab
