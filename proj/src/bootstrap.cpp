#include "mixdens/bootstrap.hpp"

#include <atomic>
#include <exception>
#include <sstream>

#include <omp.h>

namespace mixdens {

WeightScheme weight_scheme_from_name(std::string_view name) {
  if (name == "dirichlet") return WeightScheme::DirichletTimesN;
  if (name == "multinomial") return WeightScheme::Multinomial;
  throw std::invalid_argument("unknown bootstrap scheme: " + std::string(name));
}

std::string_view name(WeightScheme scheme) {
  return scheme == WeightScheme::DirichletTimesN ? "dirichlet" : "multinomial";
}

std::vector<double> sample_weights(WeightScheme scheme, std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("need n >= 1 for bootstrap weights");
  std::vector<double> w(n, 0.0);
  if (scheme == WeightScheme::Multinomial) {
    for (std::size_t draw = 0; draw < n; ++draw) w[rng.below(n)] += 1.0;
    return w;
  }
  double total = 0.0;
  for (double& v : w) {
    v = rng.exponential();
    total += v;
  }
  const double scale = static_cast<double>(n) / total;
  for (double& v : w) v *= scale;
  return w;
}

NpmleEnsemble bootstrap_npmle(const Observations& obs, const KernelModel& kernel, const SupportGrid& grid,
                              std::uint64_t seed, const BootstrapOptions& options) {
  if (options.replicates == 0) throw std::invalid_argument("need at least one bootstrap replicate");
  const GridLikelihood lik(obs, kernel, grid);
  const std::size_t b_count = options.replicates;

  // Weights first, sequentially, on one stream.
  Rng rng = Rng(seed).substream(Stream::Weights);
  std::vector<std::vector<double>> value_weights(b_count);
  for (std::size_t b = 0; b < b_count; ++b) {
    if (options.fixed_weights) {
      value_weights[b] = lik.aggregate(*options.fixed_weights);
    } else {
      value_weights[b] = lik.aggregate(sample_weights(options.scheme, obs.size(), rng));
    }
  }

  NpmleEnsemble out;
  out.scheme = options.scheme;
  out.seed = seed;
  out.replicates.resize(b_count);
  out.logliks.resize(b_count);
  out.optimality.resize(b_count);

  std::vector<std::exception_ptr> errors(b_count);
  std::atomic<bool> stop{false};
  const auto count = static_cast<std::ptrdiff_t>(b_count);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t bi = 0; bi < count; ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    if (stop.load()) continue;
    try {
      check_deadline(options.deadline, "bootstrap NPMLE");
      NpmleFit fit = lik.fit(value_weights[b], options.npmle);
      out.replicates[b] = std::move(fit.dist);
      out.logliks[b] = fit.loglik;
      out.optimality[b] = fit.optimality;
    } catch (...) {
      errors[b] = std::current_exception();
      stop.store(true);
    }
  }
  for (std::size_t b = 0; b < b_count; ++b) {
    if (!errors[b]) continue;
    try {
      std::rethrow_exception(errors[b]);
    } catch (const Timeout&) {
      throw;
    } catch (const std::exception& e) {
      throw FitError("bootstrap replicate " + std::to_string(b) + ": " + e.what());
    }
  }
  return out;
}

std::vector<double> pooled_draws(const NpmleEnsemble& ensemble, std::size_t per_replicate, Rng& rng) {
  if (per_replicate == 0) throw std::invalid_argument("per_replicate must be at least 1");
  std::vector<double> draws;
  draws.reserve(ensemble.size() * per_replicate);
  for (const auto& d : ensemble.replicates) {
    for (std::size_t k = 0; k < per_replicate; ++k) draws.push_back(d.atoms[rng.categorical(d.weights)]);
  }
  return draws;
}

std::string to_json_lines(const NpmleEnsemble& ensemble) {
  std::ostringstream os;
  for (std::size_t b = 0; b < ensemble.size(); ++b) {
    nlohmann::json j = to_json(ensemble.replicates[b]);
    j["replicate"] = b;
    j["loglik"] = ensemble.logliks[b];
    os << j.dump() << '\n';
  }
  return os.str();
}

NpmleEnsemble ensemble_from_json_lines(std::string_view text) {
  NpmleEnsemble e;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    e.replicates.push_back(distribution_from_json(j));
    e.logliks.push_back(j.value("loglik", 0.0));
    e.optimality.push_back(0.0);
  }
  return e;
}

}  // namespace mixdens
