#pragma once

// Runs one estimator end to end and scores it against a simulation model.
// Shared by the CLI and the acceptance suite.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixdens/bootstrap.hpp"
#include "mixdens/data.hpp"
#include "mixdens/gbnpmle.hpp"
#include "mixdens/metrics.hpp"
#include "mixdens/npmle.hpp"
#include "mixdens/smooth.hpp"

namespace mixdens {

enum class Method { Npmle, Boot, Smooth, Gb };

Method method_from_name(std::string_view name);  // npmle, boot, smooth, gb
std::string_view name(Method m);

struct MethodConfig {
  std::size_t grid_size = 400;
  NpmleOptions npmle;
  BootstrapOptions boot;                 // replicates = B; one pooled draw per replicate
  std::optional<double> bandwidth;       // fixed bandwidth instead of cross-validation
  BandwidthOptions cv{.npmle = {.gap = 1e-3}};
  TrainConfig train = TrainConfig::desk();
  Deadline deadline;
};

struct MethodResult {
  Method method = Method::Npmle;
  SupportGrid grid;
  std::optional<NpmleFit> npmle;
  std::optional<NpmleEnsemble> ensemble;
  std::optional<BandwidthSelection> selection;
  std::optional<SmoothedDensity> smoothed;
  std::optional<GbFit> gb;
  std::vector<double> draws;  // boot and gb
  double seconds = 0.0;
};

MethodResult run_method(Method method, const Observations& obs, const KernelModel& kernel, const MethodConfig& cfg,
                        std::uint64_t seed);

struct Scores {
  double w1 = 0.0;
  std::optional<double> ise;  // absent for the discrete NPMLE
};

/// W1 and ISE against the true prior of `model` on its evaluation range.
Scores score(const MethodResult& result, SimModel model);

/// Sample-based estimate scored against the truth: empirical-CDF W1, KDE ISE.
Scores score_draws(std::span<const double> draws, SimModel model);

/// CDF of a smoothed density by cumulative trapezoid, linear in between, 0/1 outside.
Cdf smoothed_cdf(const SmoothedDensity& s);

/// B theta draws from `method` fitted to `train`, for LPS.
DrawFitter draw_fitter(Method method, const KernelModel& kernel, MethodConfig cfg, std::size_t draws);

}  // namespace mixdens
