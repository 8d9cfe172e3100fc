#pragma once

#include <stdexcept>
#include <string>

namespace switchest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model: inconsistent dimensions, non-finite entries, bad covariances.
class InvalidModel : public Error {
 public:
  using Error::Error;
};

/// C2*G2 lacks full column rank; the filter cannot estimate d2 without delay.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// A runtime inversion failed or a recursion produced non-finite values.
class NumericalBreakdown : public Error {
 public:
  using Error::Error;
};

/// The residual covariance has rank zero, so there is no stochastic content.
class DegenerateInnovation : public Error {
 public:
  using Error::Error;
};

/// Every posterior mode probability collapsed to zero.
class DegenerateUpdate : public Error {
 public:
  using Error::Error;
};

/// Filter gains did not settle within the iteration budget.
class NoSteadyState : public Error {
 public:
  using Error::Error;
};

/// Spectral radius >= 1 where a stable matrix is required.
class Unstable : public Error {
 public:
  using Error::Error;
};

/// Fixed-point iteration exceeded its budget.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// Bad user configuration (files, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace switchest
