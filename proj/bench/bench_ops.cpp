// Serial reference against the OpenMP kernels. The second argument of each
// parallel benchmark is the thread count.

#include <benchmark/benchmark.h>

#include "mixdens/data.hpp"
#include "mixdens/nnet.hpp"
#include "mixdens/npmle.hpp"
#include "mixdens/ops.hpp"

using namespace mixdens;

namespace {

struct EmSetup {
  CollapsedObservations data;
  SupportGrid grid;
  std::vector<double> w, pi, next, marginal;

  explicit EmSetup(std::size_t n) {
    const Simulation sim = simulate(SimModel::GMM, n, 1);
    data = collapse(sim.obs);
    grid = default_grid(sim.obs, KernelModel(Family::Gaussian), 400);
    w = data.counts;
    pi.assign(grid.size(), 1.0 / static_cast<double>(grid.size()));
    next.resize(grid.size());
    marginal.resize(data.size());
  }
};

void BM_likelihood_serial(benchmark::State& st) {
  EmSetup s(static_cast<std::size_t>(st.range(0)));
  const KernelModel k(Family::Gaussian);
  for (auto _ : st) benchmark::DoNotOptimize(ops::serial::likelihood_matrix(k, s.data.values, s.grid.points));
}

void BM_likelihood_omp(benchmark::State& st) {
  EmSetup s(static_cast<std::size_t>(st.range(0)));
  const KernelModel k(Family::Gaussian);
  ops::set_threads(static_cast<int>(st.range(1)));
  for (auto _ : st) benchmark::DoNotOptimize(ops::likelihood_matrix(k, s.data.values, s.grid.points));
  ops::set_threads(0);
}

void BM_em_step_serial(benchmark::State& st) {
  EmSetup s(static_cast<std::size_t>(st.range(0)));
  const auto lik = ops::serial::likelihood_matrix(KernelModel(Family::Gaussian), s.data.values, s.grid.points);
  for (auto _ : st) benchmark::DoNotOptimize(ops::serial::em_step(lik, s.w, s.pi, s.next, s.marginal));
}

void BM_em_step_omp(benchmark::State& st) {
  EmSetup s(static_cast<std::size_t>(st.range(0)));
  const auto lik = ops::likelihood_matrix(KernelModel(Family::Gaussian), s.data.values, s.grid.points);
  ops::set_threads(static_cast<int>(st.range(1)));
  for (auto _ : st) benchmark::DoNotOptimize(ops::em_step(lik, s.w, s.pi, s.next, s.marginal));
  ops::set_threads(0);
}

// One Stage I loss and gradient at the desk batch size.
struct LossSetup {
  GeneratorNetwork net;
  LikelihoodData data;
  MonteCarloBatch batch;

  LossSetup()
      : net({1000, 1, 2, 500, 100}, KernelModel(Family::Gaussian)),
        data(LikelihoodData::from(simulate(SimModel::GMM, 1000, 1).obs, KernelModel(Family::Gaussian))) {
    const Simulation sim = simulate(SimModel::GMM, 1000, 1);
    Rng rng(1);
    net.initialize(sim.obs, rng);
    batch.weights.resize(1000, 10);
    for (Eigen::Index s = 0; s < 10; ++s) {
      for (Eigen::Index i = 0; i < 1000; ++i) batch.weights(i, s) = rng.exponential();
    }
    batch.noise_per_weight = 10;
    batch.noise.resize(1, 100);
    for (Eigen::Index c = 0; c < 100; ++c) batch.noise(0, c) = rng.uniform();
    batch.counts = Eigen::MatrixXd::Ones(100, 10);
  }
};

void BM_loss_serial(benchmark::State& st) {
  LossSetup s;
  for (auto _ : st) benchmark::DoNotOptimize(loss_and_grad(s.net, s.batch, s.data, true));
}

void BM_loss_omp(benchmark::State& st) {
  LossSetup s;
  ops::set_threads(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(loss_and_grad(s.net, s.batch, s.data));
  ops::set_threads(0);
}

void thread_counts(benchmark::internal::Benchmark* b) {
  for (long n : {1000, 10000}) {
    for (long t = 1; t <= ops::max_threads(); t *= 2) b->Args({n, t});
  }
}

}  // namespace

BENCHMARK(BM_likelihood_serial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_likelihood_omp)->Apply(thread_counts)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_em_step_serial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_em_step_omp)->Apply(thread_counts)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_loss_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_loss_omp)->DenseRange(1, 4, 1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
