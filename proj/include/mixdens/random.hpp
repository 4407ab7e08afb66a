#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace mixdens {

/// Named substreams. Every random quantity in a run is drawn from a stream
/// derived from the single user seed, so two methods given the same seed see
/// the same simulated data and the same bootstrap weights.
enum class Stream : std::uint64_t {
  Data = 1,
  Prior,
  Weights,
  Noise,
  Gamma,
  Folds,
  Generate,
  Init,
  Pool,
  Stage2,
};

/// splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t x);

/// mt19937_64 with hand-written distributions. The standard library's
/// distribution objects are implementation-defined, so they are not used:
/// draws here are identical on every platform for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Independent generator keyed on (seed, id); does not consume state.
  Rng substream(std::uint64_t id) const;
  Rng substream(Stream s) const { return substream(static_cast<std::uint64_t>(s)); }
  Rng substream(Stream s, std::uint64_t index) const;

  std::uint64_t next() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential();
  /// Gamma with unit rate (Marsaglia-Tsang).
  double gamma(double shape);
  double beta(double a, double b);
  std::uint64_t poisson(double mean);
  std::uint64_t binomial(unsigned trials, double p);
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  /// Index drawn with probability proportional to `weights`.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mixdens
