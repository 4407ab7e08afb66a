#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixdens/kernels.hpp"
#include "mixdens/random.hpp"

namespace mixdens {

struct DensityOnGrid {
  std::vector<double> grid;
  std::vector<double> values;
  bool normalized = false;

  /// Linear interpolation; zero outside the grid.
  double at(double t) const;
  double integral() const;
};

using Cdf = std::function<double(double)>;

/// Trapezoid integral of |F - G| over [lo, hi] at `points` equispaced nodes.
double wasserstein1(const Cdf& f, const Cdf& g, double lo, double hi, std::size_t points = 10000);

/// Empirical CDF of `samples` against a CDF, on the union of the sample range
/// and [lo, hi].
double wasserstein1(std::span<const double> samples, const Cdf& g, double lo, double hi,
                    std::size_t points = 10000);

/// Exact W1 between two empirical distributions (integral of |F_n - G_m|).
double wasserstein1(std::span<const double> a, std::span<const double> b);

/// Trapezoid integral of (p - q)^2 on p's grid, with q interpolated onto it
/// when the grids differ.
double ise(const DensityOnGrid& p, const DensityOnGrid& q);

struct KdeOptions {
  std::optional<double> bandwidth;  // Silverman's rule when unset
  Support support = Support::RealLine;
};

double silverman_bandwidth(std::span<const double> samples);

/// Gaussian KDE on `grid`, reflected at the edges of a bounded support and
/// normalized to unit trapezoid integral.
DensityOnGrid kde_density(std::span<const double> samples, std::span<const double> grid,
                          const KdeOptions& options = {});

/// Fits an estimator on a training subset and returns B theta draws.
using DrawFitter = std::function<std::vector<double>(const Observations& train, std::uint64_t seed)>;

struct LpsResult {
  double lps = 0.0;
  std::vector<double> fold_scores;  // sum over held-out i of -log mean_b f(y_i | theta_b)
  std::vector<std::size_t> assignment;
};

/// Seeded random fold assignment with sizes differing by at most one.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

/// LPS = K^-1 sum_k sum_{i in fold k} -log[ B^-1 sum_b f(y_i | theta_b^(-k)) ].
/// Fold k is fitted with seed substream (Folds, k).
LpsResult lps_kfold(const Observations& obs, const KernelModel& kernel, const DrawFitter& fitter,
                    std::size_t folds, std::uint64_t seed);

/// Same score for a given assignment, with folds visited in `order`.
LpsResult lps_from_folds(const Observations& obs, const KernelModel& kernel, const DrawFitter& fitter,
                         std::span<const std::size_t> assignment, std::size_t folds, std::uint64_t seed,
                         std::span<const std::size_t> order = {});

/// -sum_i log[ B^-1 sum_b f(y_i | theta_b) ] over `test`.
double held_out_score(const Observations& test, const KernelModel& kernel, std::span<const double> draws);

}  // namespace mixdens
