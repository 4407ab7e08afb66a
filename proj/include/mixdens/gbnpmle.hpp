#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mixdens/bootstrap.hpp"
#include "mixdens/nnet.hpp"

namespace mixdens {

/// Bootstrap draws of theta, one per generated replicate.
struct DrawEnsemble {
  std::vector<double> draws;
  std::uint64_t seed = 0;

  std::size_t size() const { return draws.size(); }
  std::string to_csv() const;
};

struct TrainingTrace {
  std::vector<double> stage1_loss;     // per epoch; NaN for skipped epochs
  std::vector<double> stage2_loglik;   // Monte Carlo log-likelihood of tau after each iteration
  std::vector<double> stage2_se;       // its delta-method standard error
  std::vector<double> stage2_min_delta;
  std::vector<double> stage2_max_delta;
  double stage1_seconds = 0.0;
  double stage2_seconds = 0.0;
  double generate_seconds = 0.0;

  std::string stage1_csv() const;  // epoch,loss
  std::string stage2_csv() const;  // iter,loglik,se,min_delta,max_delta
};

/// Stage I gave up after repeated non-finite losses.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, TrainingTrace trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  TrainingTrace trace;
};

/// The Stage I batch for epoch `epoch`: S_w Dirichlet weight vectors, S_z
/// uniform noise draws per vector and stratified candidate indices (each of
/// the l indices ceil(S_gamma / l) times).
MonteCarloBatch stage1_batch(std::size_t n, const TrainConfig& cfg, std::uint64_t epoch);

/// Initialized network for the data; the starting point of Stage I.
GeneratorNetwork initial_network(const Observations& obs, const KernelModel& kernel, const TrainConfig& cfg);

/// T Adam steps on the Stage I objective with tau fixed at 1/l. Throws
/// TrainingError after 10 consecutive non-finite losses.
GeneratorNetwork stage1_train(const Observations& obs, const KernelModel& kernel, const TrainConfig& cfg,
                              TrainingTrace& trace, const Deadline& deadline = {});

/// One EM update of tau on a fixed Monte Carlo likelihood:
///   tau_k <- (1/N) sum_u c_u tau_k E_uk / sum_k' tau_k' E_uk',  E_uk = exp(log_expect(u, k)).
/// Returns the log-likelihood sum_u c_u log sum_k tau_next_k E_uk.
double mcem_step(const Eigen::MatrixXd& log_expect, std::span<const double> counts, std::span<const double> tau,
                 std::span<double> tau_next);

/// Monte Carlo EM for tau; one shared batch of (w, z) pairs per iteration.
/// Stops once min_k |tau_k - tau_k'| < cfg.tol, or after cfg.stage2_max_iter iterations.
std::vector<double> stage2_mcem(const Observations& obs, const KernelModel& kernel, const GeneratorNetwork& net,
                                const TrainConfig& cfg, TrainingTrace& trace);

/// B draws: fresh Dirichlet w, fresh z, candidate index from tau. Draw b
/// uses its own random substream, so the output does not depend on threads.
DrawEnsemble generate(const GeneratorNetwork& net, std::span<const double> tau, std::size_t count,
                      std::uint64_t seed);

struct GbFit {
  GeneratorNetwork net;
  std::vector<double> tau;
  DrawEnsemble ensemble;
  TrainingTrace trace;
};

GbFit fit_gb_npmle(const Observations& obs, const KernelModel& kernel, const TrainConfig& cfg,
                   const Deadline& deadline = {});

}  // namespace mixdens
