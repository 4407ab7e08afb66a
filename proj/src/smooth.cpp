#include "mixdens/smooth.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

#include "mixdens/quadrature.hpp"
#include "mixdens/random.hpp"

namespace mixdens {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::optional<double> lower_edge(Support s) {
  if (s == Support::RealLine) return std::nullopt;
  return 0.0;
}

std::optional<double> upper_edge(Support s) {
  if (s == Support::UnitInterval) return 1.0;
  return std::nullopt;
}

}  // namespace

std::string SmoothedDensity::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "theta,density\n";
  for (std::size_t g = 0; g < grid.size(); ++g) os << grid[g] << ',' << density[g] << '\n';
  return os.str();
}

SmoothedDensity kernel_smooth(const DiscreteMixingDistribution& d, double bandwidth, std::span<const double> grid,
                              Support support) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (grid.size() < 2) throw std::invalid_argument("smoothing grid needs at least two points");
  SmoothedDensity out;
  out.grid.assign(grid.begin(), grid.end());
  out.density.assign(grid.size(), 0.0);
  out.bandwidth = bandwidth;
  ops::gaussian_mixture_on_grid(d.atoms, d.weights, grid, bandwidth, lower_edge(support), upper_edge(support),
                                out.density);
  out.raw_mass = trapezoid(out.grid, out.density);
  if (out.raw_mass > 0.0) {
    for (double& v : out.density) v /= out.raw_mass;
  }
  return out;
}

std::vector<double> smoothing_grid(const SupportGrid& fit_grid, double bandwidth, Support support,
                                   std::size_t count) {
  double lo = fit_grid.points.front() - 4.0 * bandwidth;
  double hi = fit_grid.points.back() + 4.0 * bandwidth;
  if (auto e = lower_edge(support)) lo = std::max(lo, *e);
  if (auto e = upper_edge(support)) hi = std::min(hi, *e);
  // At least four points per bandwidth so narrow kernels are resolved.
  const auto resolved = static_cast<std::size_t>(std::ceil(4.0 * (hi - lo) / bandwidth)) + 1;
  return linspace(lo, hi, std::clamp(std::max(count, resolved), std::size_t{2}, std::size_t{20000}));
}

std::vector<double> default_bandwidths() { return linspace(0.1, 10.0, 25); }

BandwidthSelection loocv_bandwidth(const Observations& obs, const KernelModel& kernel, const SupportGrid& grid,
                                   const BandwidthOptions& options) {
  if (options.candidates.empty()) throw std::invalid_argument("no candidate bandwidths");
  for (double h : options.candidates) {
    if (!(h > 0.0)) throw std::invalid_argument("candidate bandwidths must be positive");
  }
  if (obs.size() < 2) throw std::invalid_argument("cross-validation needs at least two observations");

  BandwidthSelection sel;
  sel.candidates = options.candidates;
  if (options.candidates.size() == 1) {
    sel.bandwidth = options.candidates.front();
    sel.scores.assign(1, 0.0);
    return sel;
  }

  const GridLikelihood lik(obs, kernel, grid);
  const CollapsedObservations& data = lik.data();
  const std::size_t nu = data.size();
  const std::size_t n = obs.size();

  // held[f][u]: observations with value u left out in set f.
  std::vector<std::vector<double>> held;
  if (n <= options.exact_limit) {
    // Leaving out any one of the tied observations gives the same refit, so
    // one set per distinct value, scored with its multiplicity.
    for (std::size_t u = 0; u < nu; ++u) {
      std::vector<double> h(nu, 0.0);
      h[u] = 1.0;
      held.push_back(std::move(h));
    }
    sel.folds = n;
  } else {
    const std::size_t k = n / 10;
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = Rng(options.seed).substream(Stream::Folds);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    held.assign(k, std::vector<double>(nu, 0.0));
    for (std::size_t i = 0; i < n; ++i) held[i % k][data.group[perm[i]]] += 1.0;
    sel.folds = k;
    sel.approximate = true;
  }
  const std::size_t sets = held.size();
  // Exact mode scores each distinct-value set once per tied observation.
  std::vector<double> multiplicity(sets, 1.0);
  if (!sel.approximate) {
    for (std::size_t u = 0; u < nu; ++u) multiplicity[u] = data.counts[u];
  }

  std::vector<double> full(nu);
  for (std::size_t u = 0; u < nu; ++u) full[u] = data.counts[u];
  const NpmleFit base = lik.fit(full, options.npmle);
  std::vector<double> start(grid.size());
  for (std::size_t j = 0; j < start.size(); ++j) {
    start[j] = 0.9 * base.grid_weights[j] + 0.1 / static_cast<double>(start.size());
  }

  std::vector<DiscreteMixingDistribution> refits(sets);
  std::vector<std::exception_ptr> errors(sets);
  const auto set_count = static_cast<std::ptrdiff_t>(sets);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t fi = 0; fi < set_count; ++fi) {
    const auto f = static_cast<std::size_t>(fi);
    try {
      std::vector<double> w(nu);
      for (std::size_t u = 0; u < nu; ++u) w[u] = full[u] - held[f][u];
      refits[f] = lik.fit(w, options.npmle, start).dist;
    } catch (...) {
      errors[f] = std::current_exception();
    }
  }
  for (std::size_t f = 0; f < sets; ++f) {
    if (errors[f]) std::rethrow_exception(errors[f]);
  }

  const std::size_t nc = options.candidates.size();
  sel.scores.assign(nc, 0.0);
  const auto cand_count = static_cast<std::ptrdiff_t>(nc);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ci = 0; ci < cand_count; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    const double h = options.candidates[c];
    const std::vector<double> tgrid = smoothing_grid(grid, h, kernel.support());
    const std::vector<double> tw = trapezoid_weights(tgrid);
    // Quadrature-weighted likelihood rows for the distinct values.
    Eigen::MatrixXd quad(static_cast<Eigen::Index>(tgrid.size()), static_cast<Eigen::Index>(nu));
    for (std::size_t u = 0; u < nu; ++u) {
      for (std::size_t g = 0; g < tgrid.size(); ++g) {
        quad(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(u)) =
            tw[g] * std::exp(kernel.log_density(data.values[u], tgrid[g]));
      }
    }
    double score = 0.0;
    for (std::size_t f = 0; f < sets && score != kNegInf; ++f) {
      const SmoothedDensity s = kernel_smooth(refits[f], h, tgrid, kernel.support());
      const Eigen::Map<const Eigen::VectorXd> dens(s.density.data(), static_cast<Eigen::Index>(s.density.size()));
      for (std::size_t u = 0; u < nu; ++u) {
        if (held[f][u] == 0.0) continue;
        const double pred = quad.col(static_cast<Eigen::Index>(u)).dot(dens);
        score += multiplicity[f] * held[f][u] * (pred > 0.0 ? std::log(pred) : kNegInf);
      }
    }
    sel.scores[c] = score;
  }

  std::size_t best = nc;
  for (std::size_t c = 0; c < nc; ++c) {
    if (sel.scores[c] == kNegInf || std::isnan(sel.scores[c])) continue;
    if (best == nc || sel.scores[c] > sel.scores[best] ||
        (sel.scores[c] == sel.scores[best] && options.candidates[c] < options.candidates[best])) {
      best = c;
    }
  }
  if (best == nc) throw FitError("every candidate bandwidth gives zero held-out likelihood");
  sel.bandwidth = options.candidates[best];
  return sel;
}

}  // namespace mixdens
