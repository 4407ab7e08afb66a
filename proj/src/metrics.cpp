#include "mixdens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mixdens/ops.hpp"
#include "mixdens/quadrature.hpp"

namespace mixdens {

namespace {

double empirical_cdf(const std::vector<double>& sorted, double t) {
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

double DensityOnGrid::at(double t) const {
  if (grid.empty() || t < grid.front() || t > grid.back()) return 0.0;
  const auto it = std::lower_bound(grid.begin(), grid.end(), t);
  const auto i = static_cast<std::size_t>(it - grid.begin());
  if (i == 0) return values.front();
  const double x0 = grid[i - 1], x1 = grid[i];
  const double a = x1 > x0 ? (t - x0) / (x1 - x0) : 1.0;
  return values[i - 1] + a * (values[i] - values[i - 1]);
}

double DensityOnGrid::integral() const { return trapezoid(grid, values); }

double wasserstein1(const Cdf& f, const Cdf& g, double lo, double hi, std::size_t points) {
  if (!(hi > lo)) throw std::invalid_argument("W1 range must have hi > lo");
  const std::vector<double> x = linspace(lo, hi, points);
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = std::fabs(f(x[i]) - g(x[i]));
  return trapezoid(x, d);
}

double wasserstein1(std::span<const double> samples, const Cdf& g, double lo, double hi, std::size_t points) {
  if (samples.empty()) throw std::invalid_argument("W1 needs at least one sample");
  const std::vector<double> s = sorted_copy(samples);
  return wasserstein1([&](double t) { return empirical_cdf(s, t); }, g, std::min(lo, s.front()),
                      std::max(hi, s.back()), points);
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("W1 needs nonempty samples");
  const std::vector<double> sa = sorted_copy(a), sb = sorted_copy(b);
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double prev = std::min(sa.front(), sb.front());
  double acc = 0.0;
  while (i < sa.size() || j < sb.size()) {
    const double next = (j == sb.size() || (i < sa.size() && sa[i] <= sb[j])) ? sa[i] : sb[j];
    acc += std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - prev);
    while (i < sa.size() && sa[i] == next) ++i;
    while (j < sb.size() && sb[j] == next) ++j;
    prev = next;
  }
  return acc;
}

double ise(const DensityOnGrid& p, const DensityOnGrid& q) {
  if (p.grid.size() != p.values.size() || q.grid.size() != q.values.size()) {
    throw std::invalid_argument("density grid and values differ in length");
  }
  std::vector<double> d(p.grid.size());
  const bool same = p.grid == q.grid;
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    const double qv = same ? q.values[i] : q.at(p.grid[i]);
    d[i] = (p.values[i] - qv) * (p.values[i] - qv);
  }
  return trapezoid(p.grid, d);
}

double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("bandwidth rule needs at least two samples");
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const std::vector<double> s = sorted_copy(samples);
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

DensityOnGrid kde_density(std::span<const double> samples, std::span<const double> grid, const KdeOptions& options) {
  if (samples.size() < 2) throw std::invalid_argument("KDE needs at least two samples");
  if (grid.size() < 2) throw std::invalid_argument("KDE grid needs at least two points");
  double h = options.bandwidth ? *options.bandwidth : silverman_bandwidth(samples);
  if (!(h > 0.0)) {
    if (options.bandwidth) throw std::invalid_argument("bandwidth must be positive");
    // Identical samples: narrowest kernel the grid still resolves.
    h = 2.0 * (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  }
  const std::vector<double> centers = sorted_copy(samples);
  const std::vector<double> w(centers.size(), 1.0 / static_cast<double>(centers.size()));
  std::optional<double> lower, upper;
  if (options.support != Support::RealLine) lower = 0.0;
  if (options.support == Support::UnitInterval) upper = 1.0;
  DensityOnGrid out;
  out.grid.assign(grid.begin(), grid.end());
  out.values.assign(grid.size(), 0.0);
  ops::gaussian_mixture_on_grid(centers, w, grid, h, lower, upper, out.values);
  const double mass = out.integral();
  if (mass > 0.0) {
    for (double& v : out.values) v /= mass;
    out.normalized = true;
  }
  return out;
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds == 0 || n < folds) throw std::invalid_argument("need n >= K >= 1 for K-fold splitting");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = Rng(seed).substream(Stream::Folds);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = i % folds;
  return fold;
}

double held_out_score(const Observations& test, const KernelModel& kernel, std::span<const double> draws) {
  if (draws.empty()) throw std::invalid_argument("no draws to score");
  const double log_b = std::log(static_cast<double>(draws.size()));
  std::vector<double> v(draws.size());
  double score = 0.0;
  for (double y : test.y) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < draws.size(); ++b) {
      v[b] = kernel.log_density(y, draws[b]);
      top = std::max(top, v[b]);
    }
    if (!std::isfinite(top)) return std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - top);
    score -= top + std::log(sum) - log_b;
  }
  return score;
}

LpsResult lps_from_folds(const Observations& obs, const KernelModel& kernel, const DrawFitter& fitter,
                         std::span<const std::size_t> assignment, std::size_t folds, std::uint64_t seed,
                         std::span<const std::size_t> order) {
  if (assignment.size() != obs.size()) throw std::invalid_argument("fold assignment length mismatch");
  std::vector<std::size_t> visit(folds);
  if (order.empty()) {
    std::iota(visit.begin(), visit.end(), std::size_t{0});
  } else {
    visit.assign(order.begin(), order.end());
  }
  LpsResult out;
  out.assignment.assign(assignment.begin(), assignment.end());
  out.fold_scores.assign(folds, 0.0);
  const Rng root(seed);
  for (std::size_t k : visit) {
    if (k >= folds) throw std::invalid_argument("fold index out of range");
    Observations train, test;
    for (std::size_t i = 0; i < obs.size(); ++i) (assignment[i] == k ? test : train).y.push_back(obs.y[i]);
    if (train.y.empty() || test.y.empty()) throw std::invalid_argument("empty fold");
    std::vector<double> draws;
    try {
      draws = fitter(train, root.substream(Stream::Folds, k).seed());
    } catch (const std::exception& e) {
      throw std::runtime_error("fold " + std::to_string(k) + " refit failed: " + e.what());
    }
    out.fold_scores[k] = held_out_score(test, kernel, draws);
  }
  double total = 0.0;
  for (double s : out.fold_scores) total += s;
  out.lps = total / static_cast<double>(folds);
  return out;
}

LpsResult lps_kfold(const Observations& obs, const KernelModel& kernel, const DrawFitter& fitter, std::size_t folds,
                    std::uint64_t seed) {
  const auto assignment = fold_assignment(obs.size(), folds, seed);
  return lps_from_folds(obs, kernel, fitter, assignment, folds, seed);
}

}  // namespace mixdens
