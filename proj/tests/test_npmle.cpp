#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mixdens/data.hpp"
#include "mixdens/npmle.hpp"
#include "oracles.hpp"

using namespace mixdens;

namespace {

std::vector<std::vector<double>> dense_likelihood(const Observations& obs, const KernelModel& k,
                                                  const SupportGrid& g) {
  std::vector<std::vector<double>> L(obs.size(), std::vector<double>(g.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) L[i][j] = std::exp(k.log_density(obs.y[i], g.points[j]));
  }
  return L;
}

}  // namespace

TEST_CASE("weighted EM matches projected gradient on a small instance") {
  const KernelModel k(Family::Gaussian);
  const Observations obs{{-2.0, -0.5, 0.3, 1.1, 2.4}};
  const std::vector<double> w{0.7, 1.6, 0.4, 1.3, 1.0};
  const SupportGrid grid = equispaced_grid(-3.0, 3.4, 21);
  NpmleOptions opt;
  opt.tol = 1e-14;
  opt.gap = 0.0;
  opt.max_iter = 200000;
  opt.prune = 0.0;
  const NpmleFit fit = fit_weighted_npmle(obs, w, k, grid, opt);
  const auto L = dense_likelihood(obs, k, grid);
  const auto ref = oracle::projected_gradient_npmle(L, w);
  for (std::size_t j = 0; j < grid.size(); ++j) CHECK(std::fabs(fit.grid_weights[j] - ref[j]) < 1e-4);
  CHECK(std::fabs(fit.loglik - oracle::loglik(L, w, ref)) < 1e-6);
}

TEST_CASE("fit certifies itself and is consistent with the free functions") {
  const Simulation sim = simulate(SimModel::PMM, 300, 4);
  const KernelModel k(Family::Poisson);
  const SupportGrid grid = default_grid(sim.obs, k);
  const NpmleFit fit = fit_npmle(sim.obs, k, grid);
  fit.dist.validate();
  CHECK(fit.converged);
  CHECK(fit.optimality <= 1.001);
  CHECK(fit.optimality >= 1.0 - 1e-9);
  const std::vector<double> ones(sim.obs.size(), 1.0);
  CHECK(marginal_log_likelihood(sim.obs, ones, k, fit.dist) == doctest::Approx(fit.loglik).epsilon(1e-10));
  CHECK(optimality_measure(sim.obs, ones, k, fit.dist, grid) == doctest::Approx(fit.optimality).epsilon(1e-8));
}

TEST_CASE("EM log-likelihood trace never decreases") {
  const Simulation sim = simulate(SimModel::GMM, 200, 2);
  const KernelModel k(Family::Gaussian);
  for (bool acc : {false, true}) {
    NpmleOptions opt;
    opt.accelerate = acc;
    opt.record_trace = true;
    opt.max_iter = 500;
    const NpmleFit fit = fit_npmle(sim.obs, k, default_grid(sim.obs, k, 100), opt);
    for (std::size_t t = 1; t < fit.trace.size(); ++t) CHECK(fit.trace[t] >= fit.trace[t - 1] - 1e-9);
  }
}

TEST_CASE("weights only matter up to scale") {
  const Simulation sim = simulate(SimModel::BBM, 100, 3);
  const KernelModel k(Family::Binomial);
  const SupportGrid grid = default_grid(sim.obs, k, 50);
  // A power of two scales exactly, so the iterates must match bit for bit.
  std::vector<double> w(100, 1.0), w4(100, 4.0), w3(100, 3.0);
  const NpmleFit a = fit_weighted_npmle(sim.obs, w, k, grid), b = fit_weighted_npmle(sim.obs, w4, k, grid);
  CHECK(a.grid_weights == b.grid_weights);
  CHECK(b.loglik == 4.0 * a.loglik);
  // Other factors agree up to the optimality gap of the stopping rule.
  const NpmleFit c = fit_weighted_npmle(sim.obs, w3, k, grid);
  CHECK(std::fabs(c.loglik - 3.0 * a.loglik) < 3.0 * 100 * 1e-4);
}

TEST_CASE("single observation puts the mass at the grid MLE") {
  const KernelModel k(Family::Gaussian);
  NpmleOptions opt;
  opt.gap = 0.0;
  opt.tol = 1e-13;
  opt.max_iter = 200000;
  const NpmleFit fit = fit_npmle(Observations{{0.26}}, k, equispaced_grid(-1.0, 1.0, 21), opt);
  const auto top = std::max_element(fit.dist.weights.begin(), fit.dist.weights.end()) - fit.dist.weights.begin();
  CHECK(fit.dist.atoms[static_cast<std::size_t>(top)] == doctest::Approx(0.3));
  CHECK(fit.dist.weights[static_cast<std::size_t>(top)] > 0.9);
  // The default stopping rule already certifies near-optimality.
  const NpmleFit quick = fit_npmle(Observations{{0.26}}, k, equispaced_grid(-1.0, 1.0, 21));
  CHECK(quick.optimality <= 1.0 + 1e-4);
}

TEST_CASE("default grids stay in the support and cover the data") {
  for (SimModel m : all_sim_models()) {
    const Simulation sim = simulate(m, 500, 1);
    const KernelModel k = model_kernel(m);
    const SupportGrid g = default_grid(sim.obs, k);
    CHECK(g.size() == 400);
    for (double t : g.points) CHECK(k.in_support(t));
    CHECK(std::is_sorted(g.points.begin(), g.points.end()));
  }
}

TEST_CASE("errors") {
  const KernelModel k(Family::Poisson);
  const Observations obs{{0, 1, 40}};
  // A grid far below y = 40 leaves that row without likelihood.
  CHECK_THROWS_AS(fit_npmle(obs, k, SupportGrid{{0.0}}), FitError);
  CHECK_THROWS_AS(fit_weighted_npmle(obs, std::vector<double>{0, 0, 0}, k, equispaced_grid(0.1, 50, 10)),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_weighted_npmle(obs, std::vector<double>{1, -1, 1}, k, equispaced_grid(0.1, 50, 10)),
                  std::invalid_argument);
  CHECK_THROWS_AS(equispaced_grid(1.0, 0.0, 5), std::invalid_argument);
  DiscreteMixingDistribution bad{{1.0, 0.5}, {0.5, 0.5}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("json round trip") {
  const DiscreteMixingDistribution d{{0.1, 0.25, 3.0}, {0.2, 0.3, 0.5}};
  const DiscreteMixingDistribution e = distribution_from_json(to_json(d));
  CHECK(e.atoms == d.atoms);
  CHECK(e.weights == d.weights);
  CHECK(d.mean() == doctest::Approx(0.02 + 0.075 + 1.5));
  CHECK(d.cdf(0.2) == doctest::Approx(0.2));
  CHECK(d.cdf(5.0) == doctest::Approx(1.0));
}
