#include "mixdens/kernels.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mixdens {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool is_integer(double y) { return std::isfinite(y) && std::floor(y) == y; }

double log_choose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

KernelModel::KernelModel(Family family) : family_(family) {
  switch (family) {
    case Family::Gaussian:
      support_ = Support::RealLine;
      break;
    case Family::Poisson:
    case Family::Gamma:
      support_ = Support::PositiveReal;
      break;
    case Family::Binomial:
      support_ = Support::UnitInterval;
      break;
  }
}

KernelModel KernelModel::from_name(std::string_view name) {
  if (name == "gaussian") return KernelModel(Family::Gaussian);
  if (name == "poisson") return KernelModel(Family::Poisson);
  if (name == "gamma") return KernelModel(Family::Gamma);
  if (name == "binomial") return KernelModel(Family::Binomial);
  throw std::invalid_argument("unknown kernel family: " + std::string(name));
}

std::string_view KernelModel::name() const {
  switch (family_) {
    case Family::Gaussian:
      return "gaussian";
    case Family::Poisson:
      return "poisson";
    case Family::Gamma:
      return "gamma";
    case Family::Binomial:
      break;
  }
  return "binomial";
}

bool KernelModel::in_support(double theta) const {
  switch (support_) {
    case Support::RealLine:
      return std::isfinite(theta);
    case Support::PositiveReal:
      return std::isfinite(theta) && theta >= 0.0;
    case Support::UnitInterval:
      break;
  }
  return theta >= 0.0 && theta <= 1.0;
}

bool KernelModel::valid_observation(double y) const {
  switch (family_) {
    case Family::Gaussian:
      return std::isfinite(y);
    case Family::Poisson:
      return is_integer(y) && y >= 0.0;
    case Family::Gamma:
      return std::isfinite(y) && y > 0.0;
    case Family::Binomial:
      break;
  }
  return is_integer(y) && y >= 0.0 && y <= kBinomialTrials;
}

double KernelModel::log_density(double y, double theta) const {
  if (!in_support(theta)) {
    throw std::domain_error("theta=" + std::to_string(theta) + " outside the " + std::string(name()) +
                            " parameter support");
  }
  if (!valid_observation(y)) {
    throw std::domain_error("y=" + std::to_string(y) + " invalid for the " + std::string(name()) + " kernel");
  }
  switch (family_) {
    case Family::Gaussian: {
      const double d = y - theta;
      return -0.5 * d * d - kHalfLog2Pi;
    }
    case Family::Poisson:
      if (theta == 0.0) return y == 0.0 ? 0.0 : kNegInf;
      return y * std::log(theta) - theta - std::lgamma(y + 1.0);
    case Family::Gamma:
      if (theta == 0.0) return kNegInf;
      return kGammaShape * std::log(theta) + (kGammaShape - 1.0) * std::log(y) - theta * y -
             std::lgamma(kGammaShape);
    case Family::Binomial:
      break;
  }
  const double n = kBinomialTrials;
  if (theta == 0.0) return y == 0.0 ? 0.0 : kNegInf;
  if (theta == 1.0) return y == n ? 0.0 : kNegInf;
  return log_choose(n, y) + y * std::log(theta) + (n - y) * std::log1p(-theta);
}

double KernelModel::score(double y, double theta) const {
  switch (family_) {
    case Family::Gaussian:
      return y - theta;
    case Family::Poisson:
      return y / theta - 1.0;
    case Family::Gamma:
      return kGammaShape / theta - y;
    case Family::Binomial:
      break;
  }
  return y / theta - (kBinomialTrials - y) / (1.0 - theta);
}

double KernelModel::sample(double theta, Rng& rng) const {
  if (!in_support(theta)) {
    throw std::domain_error("theta=" + std::to_string(theta) + " outside the " + std::string(name()) +
                            " parameter support");
  }
  switch (family_) {
    case Family::Gaussian:
      return rng.normal(theta, 1.0);
    case Family::Poisson:
      return static_cast<double>(rng.poisson(theta));
    case Family::Gamma:
      if (theta == 0.0) throw std::domain_error("gamma kernel needs a positive rate");
      return rng.gamma(kGammaShape) / theta;
    case Family::Binomial:
      break;
  }
  return static_cast<double>(rng.binomial(kBinomialTrials, theta));
}

double KernelModel::to_support(double x) const {
  switch (support_) {
    case Support::RealLine:
      return x;
    case Support::PositiveReal:
      return detail::softplus(x);
    case Support::UnitInterval:
      break;
  }
  return detail::sigmoid(x);
}

double KernelModel::to_support_derivative(double x) const {
  switch (support_) {
    case Support::RealLine:
      return 1.0;
    case Support::PositiveReal:
      return detail::sigmoid(x);
    case Support::UnitInterval:
      break;
  }
  const double s = detail::sigmoid(x);
  return s * (1.0 - s);
}

double KernelModel::from_support(double theta) const {
  switch (support_) {
    case Support::RealLine:
      return theta;
    case Support::PositiveReal:
      if (!(theta > 0.0)) throw std::domain_error("softplus inverse needs theta > 0");
      return theta + std::log(-std::expm1(-theta));
    case Support::UnitInterval:
      break;
  }
  if (!(theta > 0.0 && theta < 1.0)) throw std::domain_error("logit needs theta in (0, 1)");
  return std::log(theta) - std::log1p(-theta);
}

double KernelModel::observation_mle(double y) const {
  switch (family_) {
    case Family::Gaussian:
      return y;
    case Family::Poisson:
      return std::max(y, 1e-3);
    case Family::Gamma:
      return kGammaShape / y;
    case Family::Binomial:
      break;
  }
  return std::clamp(y / kBinomialTrials, 1e-3, 1.0 - 1e-3);
}

void validate(const Observations& obs, const KernelModel& kernel) {
  if (obs.y.empty()) throw std::domain_error("need at least one observation");
  for (std::size_t i = 0; i < obs.y.size(); ++i) {
    if (!kernel.valid_observation(obs.y[i])) {
      throw std::domain_error("observation " + std::to_string(i) + " (y=" + std::to_string(obs.y[i]) +
                              ") invalid for the " + std::string(kernel.name()) + " kernel");
    }
  }
}

void CollapsedObservations::aggregate(std::span<const double> w, std::span<double> out) const {
  if (w.size() != group.size() || out.size() != values.size()) {
    throw std::invalid_argument("weight vector length does not match the observations");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) out[group[i]] += w[i];
}

CollapsedObservations collapse(const Observations& obs) {
  CollapsedObservations c;
  c.values = obs.y;
  std::sort(c.values.begin(), c.values.end());
  c.values.erase(std::unique(c.values.begin(), c.values.end()), c.values.end());
  c.group.resize(obs.y.size());
  c.counts.assign(c.values.size(), 0.0);
  for (std::size_t i = 0; i < obs.y.size(); ++i) {
    const auto it = std::lower_bound(c.values.begin(), c.values.end(), obs.y[i]);
    c.group[i] = static_cast<std::size_t>(it - c.values.begin());
    c.counts[c.group[i]] += 1.0;
  }
  return c;
}

NaturalTerms natural_terms(Family family, double x) {
  NaturalTerms t;
  switch (family) {
    case Family::Gaussian:
      t.p = x;
      t.q = -0.5 * x * x;
      t.dp = 1.0;
      t.dq = -x;
      break;
    case Family::Poisson:
    case Family::Gamma: {
      const double theta = detail::softplus(x);
      const double sig = detail::sigmoid(x);
      double log_theta, ratio;
      if (x < -30.0) {
        // softplus(x) = e^x (1 - e^x / 2 + ...)
        const double e = std::exp(x);
        log_theta = x - 0.5 * e;
        ratio = 1.0 / ((1.0 - 0.5 * e) * (1.0 + e));
      } else {
        log_theta = std::log(theta);
        ratio = sig / theta;
      }
      if (family == Family::Poisson) {
        t.p = log_theta;
        t.q = -theta;
        t.dp = ratio;
        t.dq = -sig;
      } else {
        t.p = -theta;
        t.q = KernelModel::kGammaShape * log_theta;
        t.dp = -sig;
        t.dq = KernelModel::kGammaShape * ratio;
      }
      break;
    }
    case Family::Binomial: {
      const double n = KernelModel::kBinomialTrials;
      t.p = x;
      t.q = -n * detail::softplus(x);
      t.dp = 1.0;
      t.dq = -n * detail::sigmoid(x);
      break;
    }
  }
  return t;
}

double log_base_measure(Family family, double y) {
  switch (family) {
    case Family::Gaussian:
      return -0.5 * y * y - kHalfLog2Pi;
    case Family::Poisson:
      return -std::lgamma(y + 1.0);
    case Family::Gamma:
      return (KernelModel::kGammaShape - 1.0) * std::log(y) - std::lgamma(KernelModel::kGammaShape);
    case Family::Binomial:
      break;
  }
  return log_choose(KernelModel::kBinomialTrials, y);
}

}  // namespace mixdens
