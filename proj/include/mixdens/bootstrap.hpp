#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixdens/npmle.hpp"
#include "mixdens/random.hpp"

namespace mixdens {

enum class WeightScheme {
  DirichletTimesN,  // n * Dirichlet(1, ..., 1): weighted likelihood bootstrap
  Multinomial,      // counts of n uniform draws: nonparametric bootstrap
};

WeightScheme weight_scheme_from_name(std::string_view name);
std::string_view name(WeightScheme scheme);

/// Length-n weight vector summing to n.
std::vector<double> sample_weights(WeightScheme scheme, std::size_t n, Rng& rng);

/// Thrown when a cooperative deadline passes mid-computation.
class Timeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;
using Deadline = std::optional<Clock::time_point>;

inline void check_deadline(const Deadline& deadline, const char* what) {
  if (deadline && Clock::now() > *deadline) throw Timeout(std::string(what) + " exceeded its time limit");
}

/// B weighted NPMLE fits, one per bootstrap weight vector.
struct NpmleEnsemble {
  std::vector<DiscreteMixingDistribution> replicates;
  std::vector<double> logliks;
  std::vector<double> optimality;
  WeightScheme scheme = WeightScheme::DirichletTimesN;
  std::uint64_t seed = 0;

  std::size_t size() const { return replicates.size(); }
};

struct BootstrapOptions {
  WeightScheme scheme = WeightScheme::Multinomial;
  std::size_t replicates = 100;
  /// Replicates stop at the certificate level (optimality <= 1.001).
  NpmleOptions npmle{.gap = 1e-3};
  /// Overrides the sampled weights for every replicate (testing and degenerate runs).
  std::optional<std::vector<double>> fixed_weights;
  Deadline deadline;
};

/// Weights for all replicates are drawn first, in order, from the Weights
/// substream of `seed`; the fits then run in parallel. Output is identical for
/// any worker count.
NpmleEnsemble bootstrap_npmle(const Observations& obs, const KernelModel& kernel, const SupportGrid& grid,
                              std::uint64_t seed, const BootstrapOptions& options);

/// per_replicate atoms drawn by weight from every replicate, concatenated in
/// replicate order.
std::vector<double> pooled_draws(const NpmleEnsemble& ensemble, std::size_t per_replicate, Rng& rng);

/// One JSON object per line: {"replicate", "atoms", "weights", "loglik"}.
std::string to_json_lines(const NpmleEnsemble& ensemble);
NpmleEnsemble ensemble_from_json_lines(std::string_view text);

}  // namespace mixdens
