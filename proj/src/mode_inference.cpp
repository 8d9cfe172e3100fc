#include "switchest/mode_inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "switchest/errors.hpp"

namespace switchest {

void validate_simplex(const Vector& mu) {
  if (mu.size() == 0) throw InvalidModel("empty probability vector");
  if (!mu.allFinite() || (mu.array() < 0.0).any()) {
    throw InvalidModel("probabilities must be finite and non-negative");
  }
  if (std::abs(mu.sum() - 1.0) > 1e-12) throw InvalidModel("probabilities must sum to 1");
}

ModeProbabilities::ModeProbabilities(Vector mu_in) : mu(std::move(mu_in)) {
  validate_simplex(mu);
}

ModeProbabilities ModeProbabilities::uniform(Eigen::Index modes) {
  return ModeProbabilities(Vector::Constant(modes, 1.0 / static_cast<double>(modes)));
}

Eigen::Index ModeProbabilities::map_mode() const {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < mu.size(); ++j) {
    if (mu(j) > mu(best)) best = j;
  }
  return best;
}

double pseudo_det(const Matrix& m) { return std::exp(log_pdet(m)); }

ModeLikelihood log_likelihood(const Vector& nu_bar, const Matrix& R_star2) {
  if (nu_bar.size() != R_star2.rows() || R_star2.rows() != R_star2.cols()) {
    throw InvalidModel("residual and covariance dimensions disagree");
  }
  const SpectralSupport s = spectral_support(R_star2);
  const Vector coords = s.basis * nu_bar;
  ModeLikelihood out;
  out.rank = s.rank;
  out.support_violation = (nu_bar - s.basis.transpose() * coords).norm();
  const double quad = coords.cwiseAbs2().cwiseQuotient(s.eigenvalues).sum();
  const double log_det = s.eigenvalues.array().log().sum();
  out.value = -0.5 * quad - 0.5 * s.rank * std::log(2.0 * std::numbers::pi) - 0.5 * log_det;
  return out;
}

ModeProbabilities update_probabilities(const ModeProbabilities& prior,
                                       const Vector& loglike) {
  const Eigen::Index count = prior.size();
  if (loglike.size() != count) throw InvalidModel("one log-likelihood per mode required");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Vector terms(count);
  double top = kNegInf;
  for (Eigen::Index j = 0; j < count; ++j) {
    const double ll = loglike(j);
    if (std::isnan(ll) || ll == std::numeric_limits<double>::infinity()) {
      throw InvalidModel("log-likelihoods must be finite or -inf");
    }
    terms(j) = (prior.mu(j) > 0.0 && ll != kNegInf) ? ll + std::log(prior.mu(j)) : kNegInf;
    top = std::max(top, terms(j));
  }
  if (top == kNegInf) throw DegenerateUpdate("all posterior mode probabilities are zero");

  Vector post(count);
  for (Eigen::Index j = 0; j < count; ++j) {
    post(j) = terms(j) == kNegInf ? 0.0 : std::exp(terms(j) - top);
  }
  post /= post.sum();
  // second pass pulls the sum back within an ulp or two of 1
  post /= post.sum();
  ModeProbabilities out;
  out.mu = post;
  return out;
}

}  // namespace switchest
