#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixdens/kernels.hpp"
#include "mixdens/ops.hpp"

namespace mixdens {

/// Solver failure (grid does not cover the data, non-finite objective, ...).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strictly increasing candidate atoms inside the kernel support.
struct SupportGrid {
  std::vector<double> points;

  std::size_t size() const { return points.size(); }
};

SupportGrid equispaced_grid(double lo, double hi, std::size_t count);

/// Equispaced grid over a data-driven range:
///   RealLine      [min y - 1, max y + 1]
///   PositiveReal  [max(1e-3, lo), hi] from the per-observation moment inversion
///                 (Poisson: [min y - 3 sqrt(min y), max y + 3 sqrt(max y)],
///                  Gamma: [shape / max y, shape / min y])
///   UnitInterval  [1e-3, 1 - 1e-3]
SupportGrid default_grid(const Observations& obs, const KernelModel& kernel, std::size_t count = 400);

/// Atoms with probability weights; the discrete NPMLE solution.
struct DiscreteMixingDistribution {
  std::vector<double> atoms;
  std::vector<double> weights;

  std::size_t size() const { return atoms.size(); }
  double mean() const;
  double cdf(double t) const;
  /// Throws std::invalid_argument unless atoms increase strictly and weights
  /// are a probability vector (sum within 1e-10).
  void validate() const;
};

struct NpmleOptions {
  double tol = 1e-8;          // stop when max |pi_new - pi_old| < tol
  double gap = 1e-4;          // or when the optimality measure on the grid is <= 1 + gap
  std::size_t max_iter = 5000;  // EM map evaluations
  double prune = 1e-8;        // drop atoms below this weight after convergence
  bool accelerate = true;     // SQUAREM extrapolation between EM steps
  bool record_trace = false;
};

struct NpmleFit {
  DiscreteMixingDistribution dist;
  std::vector<double> grid_weights;  // unpruned weights on the grid
  double loglik = 0.0;               // weighted marginal log-likelihood
  double optimality = 0.0;
  std::size_t iterations = 0;        // EM map evaluations
  bool converged = false;
  std::vector<double> trace;         // log-likelihood after every accepted update
};

/// Likelihood of the collapsed data on a grid, reusable across weight vectors.
class GridLikelihood {
 public:
  GridLikelihood(const Observations& obs, const KernelModel& kernel, SupportGrid grid);

  const KernelModel& kernel() const { return kernel_; }
  const SupportGrid& grid() const { return grid_; }
  const CollapsedObservations& data() const { return data_; }
  const ops::LikelihoodMatrix& matrix() const { return matrix_; }

  /// Per-value weights from per-observation weights.
  std::vector<double> aggregate(std::span<const double> w) const;

  /// Fit on aggregated weights, optionally warm-started from `start` (grid weights).
  NpmleFit fit(std::span<const double> value_weights, const NpmleOptions& options,
               std::span<const double> start = {}) const;

  /// sum_u W_u log sum_j pi_j f(value_u | grid_j), true (unscaled) units.
  double loglik(std::span<const double> value_weights, std::span<const double> pi) const;

 private:
  KernelModel kernel_;
  SupportGrid grid_;
  CollapsedObservations data_;
  ops::LikelihoodMatrix matrix_;
};

/// Weighted NPMLE by EM on a fixed grid. `w` has one nonnegative entry per
/// observation; only its direction matters.
NpmleFit fit_weighted_npmle(const Observations& obs, std::span<const double> w, const KernelModel& kernel,
                            const SupportGrid& grid, const NpmleOptions& options = {});

/// fit_weighted_npmle with w = 1.
NpmleFit fit_npmle(const Observations& obs, const KernelModel& kernel, const SupportGrid& grid,
                   const NpmleOptions& options = {});

/// sum_i w_i log sum_j weight_j f(y_i | atom_j), via log-sum-exp. -inf when an
/// inner sum vanishes.
double marginal_log_likelihood(const Observations& obs, std::span<const double> w, const KernelModel& kernel,
                               const DiscreteMixingDistribution& d);

/// sup over grid points t of (sum_i w_i f(y_i | t) / fhat(y_i)) / sum_i w_i, where
/// fhat is the marginal under d. Equals 1 at the exact NPMLE on that grid.
double optimality_measure(const Observations& obs, std::span<const double> w, const KernelModel& kernel,
                          const DiscreteMixingDistribution& d, const SupportGrid& grid);

nlohmann::json to_json(const NpmleFit& fit);
nlohmann::json to_json(const DiscreteMixingDistribution& d);
DiscreteMixingDistribution distribution_from_json(const nlohmann::json& j);

}  // namespace mixdens
