#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mixdens/data.hpp"
#include "mixdens/quadrature.hpp"
#include "mixdens/smooth.hpp"

using namespace mixdens;

namespace {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

TEST_CASE("one atom gives the normal density") {
  const auto grid = linspace(-8.0, 8.0, 1601);
  const SmoothedDensity s = kernel_smooth({{0.0}, {1.0}}, 1.0, grid);
  for (std::size_t g = 0; g < grid.size(); g += 37) {
    CHECK(s.density[g] * s.raw_mass == doctest::Approx(normal_pdf(grid[g])).epsilon(1e-6));
  }
  CHECK(s.raw_mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("two atoms match the direct mixture") {
  const auto grid = linspace(-10.0, 10.0, 2001);
  const SmoothedDensity s = kernel_smooth({{-3.0, 3.0}, {0.5, 0.5}}, 1.0, grid);
  for (std::size_t g = 0; g < grid.size(); g += 51) {
    const double ref = 0.5 * normal_pdf(grid[g] + 3.0) + 0.5 * normal_pdf(grid[g] - 3.0);
    CHECK(s.density[g] * s.raw_mass == doctest::Approx(ref).epsilon(1e-6));
  }
}

TEST_CASE("small bandwidth concentrates at the atoms") {
  const auto grid = linspace(-1.0, 1.0, 20001);
  const double a = kernel_smooth({{0.0}, {1.0}}, 0.05, grid).density[10000];
  const double b = kernel_smooth({{0.0}, {1.0}}, 0.01, grid).density[10000];
  CHECK(b / a == doctest::Approx(5.0).epsilon(1e-3));
}

TEST_CASE("normalization, reflection and mean") {
  Rng rng(4);
  for (Support sup : {Support::RealLine, Support::PositiveReal, Support::UnitInterval}) {
    for (int rep = 0; rep < 5; ++rep) {
      DiscreteMixingDistribution d;
      double total = 0.0;
      for (int j = 0; j < 6; ++j) {
        const double t = sup == Support::UnitInterval ? rng.uniform() : sup == Support::PositiveReal ? 5.0 * rng.uniform() : 8.0 * rng.uniform() - 4.0;
        d.atoms.push_back(t);
        d.weights.push_back(rng.uniform());
        total += d.weights.back();
      }
      std::sort(d.atoms.begin(), d.atoms.end());
      for (double& w : d.weights) w /= total;
      // One mirror image per edge: on [0, 1] that is exact only while h is small.
      const double h = sup == Support::UnitInterval ? 0.02 + 0.2 * rng.uniform() : 0.05 + rng.uniform();
      const SupportGrid fit{{d.atoms.front(), d.atoms.back()}};
      const auto grid = smoothing_grid(fit, h, sup, 4000);
      const SmoothedDensity s = kernel_smooth(d, h, grid, sup);
      CHECK(trapezoid(s.grid, s.density) == doctest::Approx(1.0).epsilon(1e-3));
      for (double v : s.density) CHECK(v >= 0.0);
      if (sup == Support::RealLine) {
        std::vector<double> td(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) td[g] = grid[g] * s.density[g];
        CHECK(std::fabs(trapezoid(grid, td) - d.mean()) <= 2.0 * h * h);
      } else {
        // Reflection keeps the mass inside the support, so little is lost.
        CHECK(s.raw_mass > 0.99);
      }
    }
  }
}

TEST_CASE("bandwidth selection") {
  const Simulation sim = simulate(SimModel::GMM, 120, 8);
  const KernelModel k(Family::Gaussian);
  const SupportGrid grid = default_grid(sim.obs, k, 100);
  BandwidthOptions one;
  one.candidates = {0.7};
  CHECK(loocv_bandwidth(sim.obs, k, grid, one).bandwidth == 0.7);

  const BandwidthSelection sel = loocv_bandwidth(sim.obs, k, grid);
  CHECK(sel.bandwidth >= 0.1);
  CHECK(sel.bandwidth <= 10.0);
  CHECK(std::find(sel.candidates.begin(), sel.candidates.end(), sel.bandwidth) != sel.candidates.end());
  CHECK_FALSE(sel.approximate);
  CHECK(sel.folds == 120);
  for (std::size_t c = 0; c < sel.scores.size(); ++c) {
    if (sel.candidates[c] != sel.bandwidth) CHECK(sel.scores[c] <= *std::max_element(sel.scores.begin(), sel.scores.end()));
  }

  BandwidthOptions ties;
  ties.candidates = {0.5, 0.5};
  CHECK(loocv_bandwidth(sim.obs, k, grid, ties).bandwidth == 0.5);
  BandwidthOptions none;
  none.candidates.clear();
  CHECK_THROWS_AS(loocv_bandwidth(sim.obs, k, grid, none), std::invalid_argument);
}

TEST_CASE("fold approximation above the exact limit") {
  const Simulation sim = simulate(SimModel::PMM, 200, 8);
  const KernelModel k(Family::Poisson);
  BandwidthOptions bo;
  bo.exact_limit = 100;
  bo.candidates = {0.2, 1.0, 3.0};
  const BandwidthSelection sel = loocv_bandwidth(sim.obs, k, default_grid(sim.obs, k, 100), bo);
  CHECK(sel.approximate);
  CHECK(sel.folds == 20);
}

TEST_CASE("exact leave-one-out agrees with dropping observations one at a time") {
  const Observations obs{{0, 1, 1, 2, 4, 4, 4, 7}};
  const KernelModel k(Family::Poisson);
  const SupportGrid grid = equispaced_grid(0.05, 10.0, 40);
  BandwidthOptions bo;
  bo.candidates = {0.8, 2.0};
  bo.npmle.gap = 0.0;
  bo.npmle.tol = 1e-12;
  bo.npmle.max_iter = 100000;
  const BandwidthSelection sel = loocv_bandwidth(obs, k, grid, bo);
  for (std::size_t c = 0; c < 2; ++c) {
    const double h = bo.candidates[c];
    const auto tgrid = smoothing_grid(grid, h, k.support());
    const auto tw = trapezoid_weights(tgrid);
    double ref = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      Observations rest;
      for (std::size_t j = 0; j < obs.size(); ++j) {
        if (j != i) rest.y.push_back(obs.y[j]);
      }
      const NpmleFit f = fit_npmle(rest, k, grid, bo.npmle);
      const SmoothedDensity s = kernel_smooth(f.dist, h, tgrid, k.support());
      double pred = 0.0;
      for (std::size_t g = 0; g < tgrid.size(); ++g) pred += tw[g] * std::exp(k.log_density(obs.y[i], tgrid[g])) * s.density[g];
      ref += std::log(pred);
    }
    CHECK(sel.scores[c] == doctest::Approx(ref).epsilon(1e-6));
  }
}
