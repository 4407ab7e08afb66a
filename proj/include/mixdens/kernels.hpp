#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixdens/random.hpp"

namespace mixdens {

enum class Family { Gaussian, Poisson, Gamma, Binomial };
enum class Support { RealLine, PositiveReal, UnitInterval };

/// Known conditional density f(y | theta) of the latent mixture model.
///
///   Gaussian  y ~ N(theta, 1)                    theta in R
///   Poisson   y ~ Poisson(theta)                 theta >= 0
///   Gamma     y ~ Gamma(shape 10, rate theta)    theta >= 0
///   Binomial  y ~ Binomial(10, theta)            theta in [0, 1]
class KernelModel {
 public:
  static constexpr double kGammaShape = 10.0;
  static constexpr unsigned kBinomialTrials = 10;

  explicit KernelModel(Family family);

  static KernelModel from_name(std::string_view name);
  std::string_view name() const;

  Family family() const { return family_; }
  Support support() const { return support_; }

  bool in_support(double theta) const;
  bool valid_observation(double y) const;
  bool is_discrete() const { return family_ == Family::Poisson || family_ == Family::Binomial; }

  /// log f(y | theta). Throws std::domain_error on theta outside the support
  /// or an invalid y. Boundary thetas return the limiting value (possibly -inf).
  double log_density(double y, double theta) const;
  /// d/dtheta log f(y | theta) for interior theta.
  double score(double y, double theta) const;

  double sample(double theta, Rng& rng) const;

  /// Maps an unconstrained real onto the support: identity, softplus, logistic.
  double to_support(double x) const;
  double to_support_derivative(double x) const;
  double from_support(double theta) const;

  /// Per-observation maximum likelihood theta, clipped into the support interior.
  double observation_mle(double y) const;

  friend bool operator==(const KernelModel& a, const KernelModel& b) { return a.family_ == b.family_; }

 private:
  Family family_;
  Support support_;
};

/// Responses y_1..y_n.
struct Observations {
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
};

/// Throws std::domain_error when n == 0 or any y_i is invalid for the family.
void validate(const Observations& obs, const KernelModel& kernel);

/// Distinct response values with the observation -> value map. Every
/// likelihood in the library factors through this: sum_i w_i g(y_i) is
/// evaluated as sum_u (sum_{i in u} w_i) g(value_u).
struct CollapsedObservations {
  std::vector<double> values;        // sorted, distinct
  std::vector<std::size_t> group;    // group[i] = index into values
  std::vector<double> counts;        // multiplicity of each value

  std::size_t size() const { return values.size(); }
  std::size_t observations() const { return group.size(); }

  /// Aggregate per-observation weights into per-value weights, in i order.
  void aggregate(std::span<const double> w, std::span<double> out) const;
};

CollapsedObservations collapse(const Observations& obs);

namespace detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// All four families are exponential families with sufficient statistic y.
/// With theta = to_support(x):
///
///   log f(y | theta) = c(y) + y * p(x) + q(x)
///
/// The generator and the Monte Carlo likelihoods work in x, so they only need
/// p, q and their x-derivatives; everything stays finite for finite x.
struct NaturalTerms {
  double p = 0.0;
  double q = 0.0;
  double dp = 0.0;
  double dq = 0.0;
};

NaturalTerms natural_terms(Family family, double x);

/// c(y) in the decomposition above.
double log_base_measure(Family family, double y);

}  // namespace mixdens
