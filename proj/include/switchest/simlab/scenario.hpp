#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "switchest/linalg.hpp"
#include "switchest/system_model.hpp"

namespace switchest::simlab {

/// offset + slope·t + amplitude·sin(2π·frequency·t + phase)
struct Waveform {
  double offset = 0.0;
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;
  double slope = 0.0;

  double operator()(double t) const;
};

/// One waveform per vector component.
using Signal = std::vector<Waveform>;

Vector evaluate(const Signal& s, double t);

struct ModeSchedule {
  enum class Kind { Explicit, Markov };
  Kind kind = Kind::Explicit;
  /// (first step, mode) pairs in increasing step order; the first must start at 0
  std::vector<std::pair<long, int>> switches{{0, 0}};
  Matrix transition;
  int initial_mode = 0;

  static ModeSchedule constant(int mode);
  static ModeSchedule markov(Matrix transition, int initial_mode);
};

/// Mode sequence q_0..q_K. Markov chains draw from their own generator seeded
/// from `seed`, so they do not disturb the noise stream.
std::vector<int> realize(const ModeSchedule& s, long horizon, std::uint64_t seed,
                         std::size_t modes);

struct Scenario {
  std::string name = "scenario";
  SwitchedSystem system;
  /// Continuous-time source of `system` (empty when the modes were given in discrete time).
  std::vector<ContinuousModeModel> continuous;
  /// Sampling period; also the time unit for waveforms (1 for discrete-only scenarios).
  double dt = 1.0;
  long horizon = 100;
  ModeSchedule schedule;
  Vector x0;
  Vector x0_hat;
  Matrix P0;
  /// Draw the true x0 from N(x0_hat, P0) instead of using `x0`.
  bool sample_initial_state = false;
  Signal u;
  /// Per-mode unknown-input waveform (size p of that mode).
  std::vector<Signal> d;
  std::uint64_t seed = 1;

  /// Throws ConfigError on inconsistent dimensions.
  void validate() const;
};

/// Ground truth for steps 0..K. `w[k]` drives x_{k+1}; `v[k]` enters y_k.
struct Trajectory {
  std::vector<int> modes;
  std::vector<Vector> x, u, d, w, v, y;

  std::size_t size() const { return modes.size(); }
};

/// Simulates with the scenario's own seed.
Trajectory simulate(const Scenario& s);
Trajectory simulate(const Scenario& s, std::uint64_t seed);

/// y_k recomputed from the stored x_k, u_k, d_k and v_k.
Vector measurement(const Scenario& s, const Trajectory& t, std::size_t k);

enum class IntersectionVariant { StayI, IMI, ICI };

IntersectionVariant parse_intersection_variant(const std::string& name);
std::string to_string(IntersectionVariant v);

struct IntersectionOptions {
  long horizon = 900;
  long switch_on = 300;
  long switch_off = 600;
  double kp = 2.0;
  double kd = 4.0;
  double dt = 0.01;
  /// Acceleration input of the inattentive driver.
  Waveform d1{0.5, 0.5, 0.2, 0.0, 0.0};
  /// Velocity-sensor bias.
  Waveform d2{1.0, 8.0, 1.0, 0.0, 0.2};
  /// Known acceleration of the other vehicle.
  Waveform u{0.0, 0.3, 0.1, 0.0, 0.0};
  std::uint64_t seed = 1;
};

/// Inattentive (I), Malicious (M) and Cautious (C) driver models in
/// continuous time, in that order.
std::vector<ContinuousModeModel> intersection_modes(double kp = 2.0, double kd = 4.0);
Matrix intersection_transition();

Scenario intersection_scenario(IntersectionVariant variant, const IntersectionOptions& opts = {});

}  // namespace switchest::simlab
