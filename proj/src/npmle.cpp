#include "mixdens/npmle.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>

namespace mixdens {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void normalize(std::span<double> p) {
  double s = 0.0;
  for (double v : p) s += v;
  for (double& v : p) v /= s;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, std::fabs(a[j] - b[j]));
  return d;
}

double scale_offset(const ops::LikelihoodMatrix& lik, std::span<const double> weights) {
  double s = 0.0;
  for (std::size_t u = 0; u < weights.size(); ++u) {
    if (weights[u] != 0.0) s += weights[u] * lik.log_scale[u];
  }
  return s;
}

}  // namespace

SupportGrid equispaced_grid(double lo, double hi, std::size_t count) {
  if (count < 2) throw std::invalid_argument("grid needs at least two points");
  if (!(hi > lo)) throw std::invalid_argument("grid range is empty");
  SupportGrid g;
  g.points.resize(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t j = 0; j < count; ++j) g.points[j] = lo + step * static_cast<double>(j);
  g.points.back() = hi;
  return g;
}

SupportGrid default_grid(const Observations& obs, const KernelModel& kernel, std::size_t count) {
  validate(obs, kernel);
  const auto [ymin_it, ymax_it] = std::minmax_element(obs.y.begin(), obs.y.end());
  const double ymin = *ymin_it;
  const double ymax = *ymax_it;
  double lo = 0.0, hi = 1.0;
  switch (kernel.family()) {
    case Family::Gaussian:
      lo = ymin - 1.0;
      hi = ymax + 1.0;
      break;
    case Family::Poisson:
      lo = std::max(1e-3, ymin - 3.0 * std::sqrt(ymin));
      hi = std::max(ymax + 3.0 * std::sqrt(ymax), 1.0);
      break;
    case Family::Gamma:
      lo = std::max(1e-3, KernelModel::kGammaShape / ymax);
      hi = KernelModel::kGammaShape / ymin;
      break;
    case Family::Binomial:
      lo = 1e-3;
      hi = 1.0 - 1e-3;
      break;
  }
  if (!(hi > lo)) hi = lo + 1.0;
  return equispaced_grid(lo, hi, count);
}

double DiscreteMixingDistribution::mean() const {
  double m = 0.0;
  for (std::size_t j = 0; j < atoms.size(); ++j) m += weights[j] * atoms[j];
  return m;
}

double DiscreteMixingDistribution::cdf(double t) const {
  double c = 0.0;
  for (std::size_t j = 0; j < atoms.size() && atoms[j] <= t; ++j) c += weights[j];
  return std::min(c, 1.0);
}

void DiscreteMixingDistribution::validate() const {
  if (atoms.empty()) throw std::invalid_argument("mixing distribution has no atoms");
  if (atoms.size() != weights.size()) throw std::invalid_argument("atoms and weights differ in length");
  double s = 0.0;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    if (!(weights[j] >= 0.0)) throw std::invalid_argument("negative mixing weight");
    if (j > 0 && !(atoms[j] > atoms[j - 1])) throw std::invalid_argument("atoms must increase strictly");
    s += weights[j];
  }
  if (std::fabs(s - 1.0) > 1e-10) throw std::invalid_argument("mixing weights do not sum to one");
}

GridLikelihood::GridLikelihood(const Observations& obs, const KernelModel& kernel, SupportGrid grid)
    : kernel_(kernel), grid_(std::move(grid)) {
  validate(obs, kernel);
  if (grid_.size() < 1) throw std::invalid_argument("empty support grid");
  data_ = collapse(obs);
  matrix_ = ops::likelihood_matrix(kernel_, data_.values, grid_.points);
}

std::vector<double> GridLikelihood::aggregate(std::span<const double> w) const {
  std::vector<double> out(data_.size());
  data_.aggregate(w, out);
  return out;
}

double GridLikelihood::loglik(std::span<const double> value_weights, std::span<const double> pi) const {
  std::vector<double> marginal(data_.size());
  return ops::mixture_loglik(matrix_, value_weights, pi, marginal) + scale_offset(matrix_, value_weights);
}

NpmleFit GridLikelihood::fit(std::span<const double> value_weights, const NpmleOptions& options,
                             std::span<const double> start) const {
  const std::size_t m = grid_.size();
  const std::size_t nu = data_.size();
  if (value_weights.size() != nu) throw std::invalid_argument("weight vector length does not match the data");
  if (!(options.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  double total = 0.0;
  for (std::size_t u = 0; u < nu; ++u) {
    if (!(value_weights[u] >= 0.0) || !std::isfinite(value_weights[u])) {
      throw std::invalid_argument("bootstrap weights must be finite and nonnegative");
    }
    if (value_weights[u] > 0.0 && matrix_.log_scale[u] == kNegInf) {
      throw FitError("support grid does not cover observation y=" + std::to_string(data_.values[u]) +
                     ": all likelihood columns are zero");
    }
    total += value_weights[u];
  }
  if (!(total > 0.0)) throw std::invalid_argument("bootstrap weights are all zero");

  std::vector<double> pi(m, 1.0 / static_cast<double>(m));
  if (!start.empty()) {
    if (start.size() != m) throw std::invalid_argument("warm start has the wrong length");
    std::copy(start.begin(), start.end(), pi.begin());
    normalize(pi);
  }

  NpmleFit out;
  std::vector<double> p1(m), p2(m), p3(m), extrap(m), marginal(nu);
  std::size_t evals = 0;
  auto em = [&](std::span<const double> in, std::span<double> next) {
    ++evals;
    const double ll = ops::em_step(matrix_, value_weights, in, next, marginal);
    normalize(next);
    return ll;
  };
  auto ll_of = [&](std::span<const double> p) { return ops::mixture_loglik(matrix_, value_weights, p, marginal); };

  double ll_current = ll_of(pi);
  if (options.record_trace) out.trace.push_back(ll_current + scale_offset(matrix_, value_weights));

  std::size_t rounds = 0;
  while (evals < options.max_iter) {
    double ll_next;
    if (!options.accelerate) {
      em(pi, p1);
      ll_next = ll_of(p1);
      std::swap(p3, p1);
    } else {
      em(pi, p1);
      const double ll_p1 = em(p1, p2);
      double rr = 0.0, vv = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double r = p1[j] - pi[j];
        const double v = p2[j] - 2.0 * p1[j] + pi[j];
        rr += r * r;
        vv += v * v;
      }
      double alpha = vv > 0.0 ? -std::sqrt(rr / vv) : -1.0;
      alpha = std::min(alpha, -1.0);
      // Shorten the step until the extrapolated point stays on the simplex.
      for (;;) {
        if (alpha == -1.0) {
          std::copy(p2.begin(), p2.end(), extrap.begin());
          break;
        }
        bool nonneg = true;
        for (std::size_t j = 0; j < m; ++j) {
          const double r = p1[j] - pi[j];
          const double v = p2[j] - 2.0 * p1[j] + pi[j];
          extrap[j] = pi[j] - 2.0 * alpha * r + alpha * alpha * v;
          if (extrap[j] < 0.0) nonneg = false;
        }
        if (nonneg) break;
        alpha = std::min((alpha - 1.0) / 2.0, -1.0);
        if (alpha > -1.0 - 1e-3) alpha = -1.0;
      }
      normalize(extrap);
      em(extrap, p3);
      ll_next = ll_of(p3);
      if (!(ll_next >= ll_p1)) {
        // Extrapolation overshot: fall back to the plain double EM step.
        std::copy(p2.begin(), p2.end(), p3.begin());
        ll_next = ll_of(p3);
      }
    }
    assert(ll_next >= ll_current - 1e-9 * std::max(1.0, std::fabs(ll_current)));
    const double delta = max_abs_diff(p3, pi);
    std::swap(pi, p3);
    ll_current = ll_next;
    if (options.record_trace) out.trace.push_back(ll_current + scale_offset(matrix_, value_weights));
    if (delta < options.tol) {
      out.converged = true;
      break;
    }
    if (++rounds % 8 == 0 && options.gap > 0.0) {
      ll_of(pi);
      ops::reweight(matrix_, value_weights, marginal, p1);
      if (*std::max_element(p1.begin(), p1.end()) / total <= 1.0 + options.gap) {
        out.converged = true;
        break;
      }
    }
  }
  out.iterations = evals;
  out.grid_weights = pi;

  // Prune, then certify on the grid.
  std::vector<double> pruned(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    if (pi[j] >= options.prune) {
      out.dist.atoms.push_back(grid_.points[j]);
      out.dist.weights.push_back(pi[j]);
      pruned[j] = pi[j];
    }
  }
  if (out.dist.atoms.empty()) {
    const auto best = static_cast<std::size_t>(std::max_element(pi.begin(), pi.end()) - pi.begin());
    out.dist.atoms.push_back(grid_.points[best]);
    out.dist.weights.push_back(1.0);
    pruned[best] = 1.0;
  }
  normalize(out.dist.weights);
  normalize(pruned);
  out.loglik = ops::mixture_loglik(matrix_, value_weights, pruned, marginal) + scale_offset(matrix_, value_weights);
  std::vector<double> grad(m);
  ops::reweight(matrix_, value_weights, marginal, grad);
  out.optimality = *std::max_element(grad.begin(), grad.end()) / total;
  if (!std::isfinite(out.loglik)) throw FitError("NPMLE log-likelihood is not finite");
  return out;
}

NpmleFit fit_weighted_npmle(const Observations& obs, std::span<const double> w, const KernelModel& kernel,
                            const SupportGrid& grid, const NpmleOptions& options) {
  if (w.size() != obs.size()) throw std::invalid_argument("need one weight per observation");
  const GridLikelihood lik(obs, kernel, grid);
  return lik.fit(lik.aggregate(w), options);
}

NpmleFit fit_npmle(const Observations& obs, const KernelModel& kernel, const SupportGrid& grid,
                   const NpmleOptions& options) {
  const std::vector<double> ones(obs.size(), 1.0);
  return fit_weighted_npmle(obs, ones, kernel, grid, options);
}

double marginal_log_likelihood(const Observations& obs, std::span<const double> w, const KernelModel& kernel,
                               const DiscreteMixingDistribution& d) {
  if (w.size() != obs.size()) throw std::invalid_argument("need one weight per observation");
  d.validate();
  std::vector<double> terms(d.size());
  double total = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    double top = kNegInf;
    for (std::size_t j = 0; j < d.size(); ++j) {
      terms[j] = d.weights[j] > 0.0 ? std::log(d.weights[j]) + kernel.log_density(obs.y[i], d.atoms[j]) : kNegInf;
      top = std::max(top, terms[j]);
    }
    if (w[i] == 0.0) continue;
    if (top == kNegInf) return kNegInf;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - top);
    total += w[i] * (top + std::log(s));
  }
  return total;
}

double optimality_measure(const Observations& obs, std::span<const double> w, const KernelModel& kernel,
                          const DiscreteMixingDistribution& d, const SupportGrid& grid) {
  if (w.size() != obs.size()) throw std::invalid_argument("need one weight per observation");
  d.validate();
  const CollapsedObservations data = collapse(obs);
  std::vector<double> weights(data.size());
  data.aggregate(w, weights);
  // Atoms and grid share one row scaling.
  std::vector<double> points = d.atoms;
  points.insert(points.end(), grid.points.begin(), grid.points.end());
  const ops::LikelihoodMatrix lik = ops::likelihood_matrix(kernel, data.values, points);
  std::vector<double> pi(points.size(), 0.0);
  std::copy(d.weights.begin(), d.weights.end(), pi.begin());
  std::vector<double> marginal(data.size());
  ops::mixture_loglik(lik, weights, pi, marginal);
  std::vector<double> grad(points.size());
  ops::reweight(lik, weights, marginal, grad);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  return *std::max_element(grad.begin() + static_cast<std::ptrdiff_t>(d.size()), grad.end()) / total;
}

nlohmann::json to_json(const DiscreteMixingDistribution& d) {
  return nlohmann::json{{"atoms", d.atoms}, {"weights", d.weights}};
}

nlohmann::json to_json(const NpmleFit& fit) {
  nlohmann::json j = to_json(fit.dist);
  j["loglik"] = fit.loglik;
  j["optimality"] = fit.optimality;
  return j;
}

DiscreteMixingDistribution distribution_from_json(const nlohmann::json& j) {
  DiscreteMixingDistribution d;
  d.atoms = j.at("atoms").get<std::vector<double>>();
  d.weights = j.at("weights").get<std::vector<double>>();
  d.validate();
  return d;
}

}  // namespace mixdens
