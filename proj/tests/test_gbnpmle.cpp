#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mixdens/data.hpp"
#include "mixdens/gbnpmle.hpp"

using namespace mixdens;

namespace {

TrainConfig tiny(std::uint64_t seed = 1) {
  TrainConfig c;
  c.l = 5;
  c.epochs = 20;
  c.generate = 300;
  c.s_w = 4;
  c.s_z = 4;
  c.s_gamma = 10;
  c.hidden = 12;
  c.layers = 2;
  c.learning_rate = 1e-2;
  c.stage2_pairs = 20;
  c.stage2_max_iter = 30;
  c.seed = seed;
  return c;
}

// Network whose outputs are the final biases, whatever the input.
GeneratorNetwork constant_net(std::size_t n, Family f, const std::vector<double>& raw) {
  GeneratorNetwork net({n, 1, 1, 3, raw.size()}, KernelModel(f));
  auto& p = net.parameters();
  for (std::size_t k = 0; k < raw.size(); ++k) p(p.size() - static_cast<Eigen::Index>(raw.size() - k)) = raw[k];
  return net;
}

}  // namespace

TEST_CASE("zero epochs leave the initialization untouched") {
  const Observations obs{{0, 1, 3, 2}};
  const KernelModel k(Family::Poisson);
  TrainConfig c = tiny();
  c.epochs = 0;
  TrainingTrace trace;
  const GeneratorNetwork net = stage1_train(obs, k, c, trace);
  CHECK(net.parameters() == initial_network(obs, k, c).parameters());
  CHECK(trace.stage1_loss.empty());
  CHECK(trace.stage1_csv() == "epoch,loss\n");
}

TEST_CASE("Stage I lowers the loss on average") {
  const Simulation sim = simulate(SimModel::GMM, 60, 3);
  const KernelModel k(Family::Gaussian);
  TrainConfig c = tiny();
  c.epochs = 150;
  TrainingTrace trace;
  stage1_train(sim.obs, k, c, trace);
  REQUIRE(trace.stage1_loss.size() == 150);
  double first = 0.0, last = 0.0;
  for (std::size_t e = 0; e < 20; ++e) {
    first += trace.stage1_loss[e];
    last += trace.stage1_loss[130 + e];
  }
  CHECK(last < first);
}

TEST_CASE("stratified candidate counts") {
  TrainConfig c = tiny();
  c.l = 4;
  c.s_gamma = 10;
  const MonteCarloBatch b = stage1_batch(7, c, 0);
  CHECK(b.weights.rows() == 7);
  CHECK(b.weights.cols() == 4);
  CHECK(b.noise.cols() == 16);
  CHECK((b.counts.array() == 3.0).all());
  for (Eigen::Index s = 0; s < 4; ++s) CHECK(b.weights.col(s).sum() == doctest::Approx(7.0));
  CHECK(stage1_batch(7, c, 0).weights == b.weights);
  CHECK_FALSE(stage1_batch(7, c, 1).weights == b.weights);
}

TEST_CASE("one candidate gives tau = 1") {
  const Observations obs{{1, 2}};
  const KernelModel k(Family::Poisson);
  TrainConfig c = tiny();
  c.l = 1;
  TrainingTrace trace;
  const auto tau = stage2_mcem(obs, k, constant_net(2, Family::Poisson, {0.3}), c, trace);
  REQUIRE(tau.size() == 1);
  CHECK(tau[0] == 1.0);
  CHECK(trace.stage2_loglik.size() == 1);
}

TEST_CASE("identical candidates keep tau where it started") {
  Eigen::MatrixXd e(3, 4);
  e.col(0) << -1.0, -2.0, -0.5;
  for (int k = 1; k < 4; ++k) e.col(k) = e.col(0);
  const std::vector<double> counts{2, 1, 4};
  for (const std::vector<double>& tau : {std::vector<double>{0.25, 0.25, 0.25, 0.25}, std::vector<double>{0.1, 0.2, 0.3, 0.4}}) {
    std::vector<double> next(4);
    mcem_step(e, counts, tau, next);
    for (int k = 0; k < 4; ++k) CHECK(next[k] == doctest::Approx(tau[k]).epsilon(1e-14));
  }
  TrainingTrace trace;
  const auto tau = stage2_mcem(Observations{{0.3, 1.0}}, KernelModel(Family::Gaussian),
                               constant_net(2, Family::Gaussian, {0.5, 0.5, 0.5}), tiny(), trace);
  for (double t : tau) CHECK(t == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("MCEM on a fixed likelihood converges to the direct EM solution") {
  // Two candidates, four observation values; direct EM in long double as reference.
  Eigen::MatrixXd le(4, 2);
  le << -0.2, -1.9, -0.7, -0.9, -2.5, -0.1, -1.2, -1.1;
  const std::vector<double> counts{3, 1, 2, 5};
  std::vector<double> tau{0.5, 0.5}, next(2);
  double ll = 0.0;
  for (int it = 0; it < 5000; ++it) {
    ll = mcem_step(le, counts, tau, next);
    tau = next;
  }
  long double r0 = 0.5L;
  for (int it = 0; it < 5000; ++it) {
    long double acc = 0.0L, tot = 0.0L;
    for (int u = 0; u < 4; ++u) {
      const long double a = r0 * std::exp(static_cast<long double>(le(u, 0)));
      const long double b = (1.0L - r0) * std::exp(static_cast<long double>(le(u, 1)));
      acc += counts[u] * a / (a + b);
      tot += counts[u];
    }
    r0 = acc / tot;
  }
  CHECK(std::fabs(tau[0] - static_cast<double>(r0)) < 1e-10);
  long double ref = 0.0L;
  for (int u = 0; u < 4; ++u) {
    ref += counts[u] * std::log(r0 * std::exp(static_cast<long double>(le(u, 0))) +
                                (1.0L - r0) * std::exp(static_cast<long double>(le(u, 1))));
  }
  CHECK(ll == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
}

TEST_CASE("MCEM underflow is an error") {
  Eigen::MatrixXd le = Eigen::MatrixXd::Constant(2, 2, -std::numeric_limits<double>::infinity());
  le(0, 0) = -1.0;
  std::vector<double> tau{0.5, 0.5}, next(2), counts{1, 1};
  CHECK_THROWS_AS(mcem_step(le, counts, tau, next), FitError);
}

TEST_CASE("generation follows tau") {
  const GeneratorNetwork net = constant_net(3, Family::Gaussian, {-1.0, 2.0, 7.0});
  const auto one = generate(net, std::vector<double>{0.0, 1.0, 0.0}, 500, 4);
  for (double d : one.draws) CHECK(d == 2.0);

  const std::size_t B = 20000;
  const auto mix = generate(net, std::vector<double>{0.3, 0.7, 0.0}, B, 5);
  double a = 0.0;
  for (double d : mix.draws) {
    CHECK((d == -1.0 || d == 2.0));
    a += d == -1.0 ? 1.0 : 0.0;
  }
  const double p = a / static_cast<double>(B);
  CHECK(std::fabs(p - 0.3) < 4.0 * std::sqrt(0.3 * 0.7 / static_cast<double>(B)));

  CHECK_THROWS_AS(generate(net, std::vector<double>{0.5, 0.5}, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate(net, std::vector<double>{0.5, 0.6, -0.1}, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate(net, std::vector<double>{0.5, 0.4, 0.0}, 10, 1), std::invalid_argument);
  CHECK(mix.to_csv().rfind("theta\n", 0) == 0);
}

TEST_CASE("fits are deterministic across thread counts") {
  const Simulation sim = simulate(SimModel::BBM, 40, 2);
  const KernelModel k(Family::Binomial);
  ops::set_threads(1);
  const GbFit a = fit_gb_npmle(sim.obs, k, tiny(9));
  ops::set_threads(4);
  const GbFit b = fit_gb_npmle(sim.obs, k, tiny(9));
  ops::set_threads(0);
  CHECK(a.net.parameters() == b.net.parameters());
  CHECK(a.tau == b.tau);
  CHECK(a.ensemble.draws == b.ensemble.draws);
  CHECK(a.trace.stage2_csv() == b.trace.stage2_csv());
  const GbFit c = fit_gb_npmle(sim.obs, k, tiny(10));
  CHECK_FALSE(c.ensemble.draws == a.ensemble.draws);
  for (double t : a.ensemble.draws) {
    CHECK(t > 0.0);
    CHECK(t < 1.0);
  }
  double total = 0.0;
  for (double t : a.tau) total += t;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("degenerate data") {
  // Every observation identical: the fit must still run and produce finite draws.
  const Observations obs{std::vector<double>(30, 3.0)};
  const GbFit f = fit_gb_npmle(obs, KernelModel(Family::Poisson), tiny());
  for (double t : f.ensemble.draws) CHECK(std::isfinite(t));
  double mean = 0.0;
  for (double t : f.ensemble.draws) mean += t / static_cast<double>(f.ensemble.size());
  CHECK(mean == doctest::Approx(3.0).epsilon(0.5));

  CHECK_THROWS_AS(fit_gb_npmle(Observations{{-1.0, 2.0}}, KernelModel(Family::Poisson), tiny()), std::domain_error);
  TrainConfig bad = tiny();
  bad.s_w = 0;
  CHECK_THROWS_AS(fit_gb_npmle(obs, KernelModel(Family::Poisson), bad), std::invalid_argument);
}

TEST_CASE("deadline aborts training") {
  const Observations obs{{1, 2, 3}};
  TrainConfig c = tiny();
  c.epochs = 100000;
  CHECK_THROWS_AS(fit_gb_npmle(obs, KernelModel(Family::Poisson), c, Clock::now()), Timeout);
}
