#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mixdens/data.hpp"
#include "mixdens/quadrature.hpp"

using namespace mixdens;

TEST_CASE("simulated priors have the right means") {
  const std::size_t n = 100000;
  const std::vector<std::pair<SimModel, double>> means{{SimModel::GMM, 0.0},
                                                       {SimModel::GMMtri, 0.0},
                                                       {SimModel::GaMM, 10.0 / 15.0},
                                                       {SimModel::PMM, 3.0},
                                                       {SimModel::BBM, 0.6}};
  for (const auto& [m, mu] : means) {
    const Simulation s = simulate(m, n, 1);
    double t = 0.0, y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      t += s.theta[i] / static_cast<double>(n);
      y += s.obs.y[i] / static_cast<double>(n);
    }
    CHECK(t == doctest::Approx(mu).epsilon(0.02).scale(1.0));
    // E[y] under each kernel: theta for Gaussian/Poisson, 10 * theta for Binomial, 10 / theta for Gamma.
    if (m == SimModel::BBM) CHECK(y == doctest::Approx(6.0).epsilon(0.01));
    if (m == SimModel::PMM) CHECK(y == doctest::Approx(3.0).epsilon(0.01));
    if (m == SimModel::GMM) CHECK(std::fabs(y) < 0.05);
  }
}

TEST_CASE("simulated theta follows the true CDF") {
  for (SimModel m : all_sim_models()) {
    Simulation s = simulate(m, 20000, 2);
    std::sort(s.theta.begin(), s.theta.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < s.theta.size(); ++i) {
      const double f = true_prior_cdf(m, s.theta[i]);
      ks = std::max({ks, std::fabs(f - static_cast<double>(i) / 20000.0), std::fabs(f - static_cast<double>(i + 1) / 20000.0)});
    }
    CHECK(ks < 0.012);  // 1% critical value at n = 20000 is 0.0115
  }
}

TEST_CASE("true densities integrate to one over the evaluation range") {
  for (SimModel m : all_sim_models()) {
    const auto g = eval_grid(m, 20001);
    const DensityOnGrid d = true_prior_density(m, g);
    CHECK(trapezoid(d.grid, d.values) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(true_prior_cdf(m, eval_range(m).hi) - true_prior_cdf(m, eval_range(m).lo) > 0.999);
  }
  CHECK(true_prior_pdf(SimModel::BBM, 0.5) == doctest::Approx(12.0 * 0.25 * 0.5));
  CHECK(true_prior_pdf(SimModel::PMM, -1.0) == 0.0);
}

TEST_CASE("simulation is reproducible") {
  CHECK(simulate(SimModel::PMM, 100, 4).obs.y == simulate(SimModel::PMM, 100, 4).obs.y);
  CHECK_FALSE(simulate(SimModel::PMM, 100, 4).obs.y == simulate(SimModel::PMM, 100, 5).obs.y);
  CHECK_THROWS_AS(simulate(SimModel::PMM, 0, 1), std::invalid_argument);
}

TEST_CASE("model names") {
  for (SimModel m : all_sim_models()) CHECK(sim_model_from_name(name(m)) == m);
  CHECK(sim_model_from_name("gmmtri") == SimModel::GMMtri);
  CHECK_THROWS_AS(sim_model_from_name("nope"), std::invalid_argument);
}

TEST_CASE("count files") {
  CHECK(parse_counts("y\n1\n2\n\n3\n").y == std::vector<double>{1, 2, 3});
  CHECK(parse_counts("y,freq\n0,2\n5,1\n").y == std::vector<double>{0, 0, 5});
  CHECK(parse_counts("y,freq\n0,0\n5,1\n").y == std::vector<double>{5});
  CHECK_THROWS_WITH(parse_counts("y\n1\nx\n"), doctest::Contains("row 3"));
  CHECK_THROWS_WITH(parse_counts("y\n-1\n"), doctest::Contains("negative"));
  CHECK_THROWS_WITH(parse_counts("y\n1.5\n"), doctest::Contains("integer"));
  CHECK_THROWS_WITH(parse_counts("count\n1\n"), doctest::Contains("header"));
  CHECK_THROWS(parse_counts(""));
  CHECK_THROWS(parse_counts("y\n"));
  CHECK_THROWS(parse_counts("y,freq\n3\n"));

  const auto path = std::filesystem::temp_directory_path() / "mixdens_counts.csv";
  {
    std::ofstream out(path);
    out << "y\n4\nbad\n";
  }
  CHECK_THROWS_WITH(load_counts(path), doctest::Contains("mixdens_counts.csv"));
  std::filesystem::remove(path);
  CHECK_THROWS(load_counts("/nonexistent/file.csv"));
}

TEST_CASE("vendored datasets") {
  const CountDataset m = load_dataset("mortality");
  CHECK(m.n() == 1096);
  const CountDataset t = load_dataset("thailand");
  CHECK(t.n() == 602);
  for (double y : t.y) CHECK(y >= 0.0);
}
