#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixdens/npmle.hpp"

namespace mixdens {

struct SmoothedDensity {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  double raw_mass = 0.0;  // trapezoid integral before renormalization

  std::string to_csv() const;
};

/// Gaussian convolution of the atoms of `d`, renormalized over `grid`. For a
/// bounded support the kernel mass crossing a boundary is reflected back.
SmoothedDensity kernel_smooth(const DiscreteMixingDistribution& d, double bandwidth, std::span<const double> grid,
                              Support support = Support::RealLine);

/// Evaluation grid for smoothing atoms of a fit on `fit_grid`: the fit range
/// padded by 4 bandwidths and clipped to the support.
std::vector<double> smoothing_grid(const SupportGrid& fit_grid, double bandwidth, Support support,
                                   std::size_t count = 1000);

/// 25 points from 0.1 to 10.
std::vector<double> default_bandwidths();

struct BandwidthOptions {
  std::vector<double> candidates = default_bandwidths();
  /// Exact leave-one-out up to this n; above it, folds of about 10 observations.
  std::size_t exact_limit = 500;
  std::uint64_t seed = 0;
  NpmleOptions npmle;
};

struct BandwidthSelection {
  double bandwidth = 0.0;
  std::vector<double> candidates;
  std::vector<double> scores;  // held-out predictive log-likelihood per candidate
  std::size_t folds = 0;
  bool approximate = false;    // true when folds replaced single left-out points
};

/// Cross-validated bandwidth for the smoothed NPMLE. Each held-out set is
/// refit by NPMLE on `grid` without it, smoothed, and scored by
/// sum_i log integral f(y_i | t) smoothed(t) dt. Ties go to the smaller bandwidth.
BandwidthSelection loocv_bandwidth(const Observations& obs, const KernelModel& kernel, const SupportGrid& grid,
                                   const BandwidthOptions& options = {});

}  // namespace mixdens
