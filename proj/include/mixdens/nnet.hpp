#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mixdens/kernels.hpp"
#include "mixdens/ops.hpp"
#include "mixdens/random.hpp"

namespace mixdens {

struct NetworkShape {
  std::size_t weight_dim = 1;  // n
  std::size_t noise_dim = 1;   // q
  std::size_t layers = 2;      // hidden layers L >= 1
  std::size_t hidden = 500;    // width h
  std::size_t outputs = 100;   // candidates l

  bool operator==(const NetworkShape&) const = default;
};

/// Activations kept by a batched forward pass for the backward pass.
struct ForwardCache {
  Eigen::MatrixXd w_in;                 // standardized weights, n x S_w
  Eigen::MatrixXd z_in;                 // standardized noise, q x S
  std::vector<Eigen::MatrixXd> hidden;  // tanh outputs per hidden layer, h x S
  std::size_t noise_per_weight = 1;
};

/// Fully connected tanh network G(w, z) -> R^l. The last layer is linear and
/// its outputs pass through the kernel's support transform.
///
/// Inputs are standardized before the first layer: w -> (w - 1) / sqrt((n - 1) / (n + 1)),
/// the mean and sd of an n * Dirichlet(1, ..., 1) coordinate, and
/// z -> (z - 1/2) * sqrt(12), the mean and sd of Unif(0, 1).
class GeneratorNetwork {
 public:
  GeneratorNetwork(NetworkShape shape, KernelModel kernel);

  const NetworkShape& shape() const { return shape_; }
  const KernelModel& kernel() const { return kernel_; }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  double weight_scale() const { return w_scale_; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, with the w and
  /// z input blocks scaled by their own fan-in. Final-layer biases are set so
  /// that candidate k starts at the ((k + 1/2) / l)-quantile of the
  /// per-observation MLEs, spreading candidates over the data range.
  void initialize(const Observations& obs, Rng& rng);

  /// Unconstrained outputs for a batch: column s * noise_per_weight + j uses
  /// weight column s and noise column s * noise_per_weight + j.
  Eigen::MatrixXd forward_raw(const Eigen::MatrixXd& w, const Eigen::MatrixXd& z, std::size_t noise_per_weight,
                              ForwardCache* cache = nullptr) const;

  /// Gradient of sum(dx .* x) with respect to the parameters, for x from the
  /// forward pass that filled `cache`.
  Eigen::VectorXd backward(const ForwardCache& cache, const Eigen::MatrixXd& dx) const;

  /// Candidate vector in the kernel support for one (w, z).
  std::vector<double> forward(std::span<const double> w, std::span<const double> z) const;

  void save(const std::filesystem::path& path) const;
  static GeneratorNetwork load(const std::filesystem::path& path);
  nlohmann::json header() const;

 private:
  struct Layer {
    Eigen::Index in, out, w_offset, b_offset;
  };
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t i) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t i) const;

  NetworkShape shape_;
  KernelModel kernel_;
  std::vector<Layer> layers_;
  Eigen::VectorXd params_;
  double w_scale_ = 1.0;
};

/// Collapsed observations with the per-value log base measure, ready for the
/// Monte Carlo likelihood.
struct LikelihoodData {
  Family family = Family::Gaussian;
  CollapsedObservations data;
  std::vector<double> base;

  static LikelihoodData from(const Observations& obs, const KernelModel& kernel);
  std::size_t observations() const { return data.observations(); }
};

/// One Monte Carlo batch: S_w weight vectors, S_z noise draws per weight
/// vector and the candidate counts c_ks (how often index k is drawn for weight s).
struct MonteCarloBatch {
  Eigen::MatrixXd weights;  // n x S_w
  Eigen::MatrixXd noise;    // q x (S_w * S_z)
  std::size_t noise_per_weight = 1;
  Eigen::MatrixXd counts;   // l x S_w
};

struct LossResult {
  double loss = 0.0;
  Eigen::VectorXd grad;
  /// Set when the loss is not finite: first offending observation and weight draw.
  std::optional<ops::NonFinite> failure;
};

/// loss = -(1/S_w) sum_s sum_i w_is log[ (1/C_s) sum_{z, k} c_ks f(y_i | G(w_s, z)_k) ]
/// and its exact gradient.
LossResult loss_and_grad(const GeneratorNetwork& net, const MonteCarloBatch& batch, const LikelihoodData& data,
                         bool serial = false);

struct AdamState {
  std::size_t step = 0;
  Eigen::VectorXd m, v;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t size = 0, double lr = 1e-4)
      : m(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
        v(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size))),
        learning_rate(lr) {}
};

/// Bias-corrected Adam update of `params` in place.
void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grad);

struct TrainConfig {
  std::size_t l = 100;
  double tol = 1e-3;
  std::size_t epochs = 2000;      // T
  std::size_t generate = 1000;    // B
  std::size_t s_w = 100;
  std::size_t s_z = 100;
  std::size_t s_gamma = 100;
  std::size_t noise_dim = 1;      // q
  std::size_t layers = 2;         // L
  std::size_t hidden = 500;       // h
  double learning_rate = 1e-4;
  std::size_t stage2_pairs = 100; // (w, z) pairs per MCEM iteration
  std::size_t stage2_max_iter = 200;
  std::uint64_t seed = 0;

  /// Settings sized for a single CPU core; see README.
  static TrainConfig desk();
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Fields missing from `j` keep the values in `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

}  // namespace mixdens
