#include "mixdens/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <memory>

#include "mixdens/quadrature.hpp"

namespace mixdens {

Method method_from_name(std::string_view name) {
  if (name == "npmle") return Method::Npmle;
  if (name == "boot") return Method::Boot;
  if (name == "smooth") return Method::Smooth;
  if (name == "gb") return Method::Gb;
  throw std::invalid_argument("unknown method: " + std::string(name));
}

std::string_view name(Method m) {
  switch (m) {
    case Method::Npmle:
      return "npmle";
    case Method::Boot:
      return "boot";
    case Method::Smooth:
      return "smooth";
    case Method::Gb:
      break;
  }
  return "gb";
}

MethodResult run_method(Method method, const Observations& obs, const KernelModel& kernel, const MethodConfig& cfg,
                        std::uint64_t seed) {
  const auto t0 = Clock::now();
  MethodResult r;
  r.method = method;
  r.grid = default_grid(obs, kernel, cfg.grid_size);
  switch (method) {
    case Method::Npmle:
      r.npmle = fit_npmle(obs, kernel, r.grid, cfg.npmle);
      break;
    case Method::Boot: {
      BootstrapOptions bo = cfg.boot;
      bo.deadline = cfg.deadline;
      r.ensemble = bootstrap_npmle(obs, kernel, r.grid, seed, bo);
      Rng pool = Rng(seed).substream(Stream::Pool);
      r.draws = pooled_draws(*r.ensemble, 1, pool);
      break;
    }
    case Method::Smooth: {
      r.npmle = fit_npmle(obs, kernel, r.grid, cfg.npmle);
      double h = 0.0;
      if (cfg.bandwidth) {
        h = *cfg.bandwidth;
      } else {
        BandwidthOptions bw = cfg.cv;
        bw.seed = seed;
        r.selection = loocv_bandwidth(obs, kernel, r.grid, bw);
        h = r.selection->bandwidth;
      }
      r.smoothed = kernel_smooth(r.npmle->dist, h, smoothing_grid(r.grid, h, kernel.support()), kernel.support());
      break;
    }
    case Method::Gb: {
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      r.gb = fit_gb_npmle(obs, kernel, tc, cfg.deadline);
      r.draws = r.gb->ensemble.draws;
      break;
    }
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

Cdf smoothed_cdf(const SmoothedDensity& s) {
  auto cum = std::make_shared<std::vector<double>>(s.grid.size(), 0.0);
  for (std::size_t i = 1; i < s.grid.size(); ++i) {
    (*cum)[i] = (*cum)[i - 1] + 0.5 * (s.grid[i] - s.grid[i - 1]) * (s.density[i] + s.density[i - 1]);
  }
  const double total = cum->back();
  if (total > 0.0) {
    for (double& c : *cum) c /= total;
  }
  DensityOnGrid interp{s.grid, *cum, false};
  return [interp](double t) {
    if (t <= interp.grid.front()) return 0.0;
    if (t >= interp.grid.back()) return 1.0;
    return interp.at(t);
  };
}

Scores score_draws(std::span<const double> draws, SimModel model) {
  const EvalRange range = eval_range(model);
  const auto truth = [model](double t) { return true_prior_cdf(model, t); };
  Scores s;
  s.w1 = wasserstein1(draws, truth, range.lo, range.hi);
  const std::vector<double> grid = eval_grid(model);
  const DensityOnGrid kde = kde_density(draws, grid, {.support = model_kernel(model).support()});
  s.ise = ise(true_prior_density(model, grid), kde);
  return s;
}

Scores score(const MethodResult& r, SimModel model) {
  const EvalRange range = eval_range(model);
  const auto truth = [model](double t) { return true_prior_cdf(model, t); };
  switch (r.method) {
    case Method::Npmle: {
      const DiscreteMixingDistribution& d = r.npmle->dist;
      const double lo = std::min(range.lo, d.atoms.front()), hi = std::max(range.hi, d.atoms.back());
      return {wasserstein1([&d](double t) { return d.cdf(t); }, truth, lo, hi), std::nullopt};
    }
    case Method::Smooth: {
      const SmoothedDensity& sm = *r.smoothed;
      const double lo = std::min(range.lo, sm.grid.front()), hi = std::max(range.hi, sm.grid.back());
      Scores s;
      s.w1 = wasserstein1(smoothed_cdf(sm), truth, lo, hi);
      const std::vector<double> grid = eval_grid(model);
      s.ise = ise(true_prior_density(model, grid), DensityOnGrid{sm.grid, sm.density, true});
      return s;
    }
    case Method::Boot:
    case Method::Gb:
      break;
  }
  return score_draws(r.draws, model);
}

DrawFitter draw_fitter(Method method, const KernelModel& kernel, MethodConfig cfg, std::size_t draws) {
  switch (method) {
    case Method::Boot:
      cfg.boot.replicates = draws;
      break;
    case Method::Gb:
      cfg.train.generate = draws;
      break;
    case Method::Npmle:
    case Method::Smooth:
      throw std::invalid_argument("LPS needs a sampling method (boot or gb)");
  }
  return [method, kernel, cfg](const Observations& train, std::uint64_t seed) {
    return run_method(method, train, kernel, cfg, seed).draws;
  };
}

}  // namespace mixdens
