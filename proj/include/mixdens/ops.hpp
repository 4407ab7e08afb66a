#pragma once

// Data-parallel kernels behind the estimators.
//
// Every function here has a twin in mixdens::ops::serial. The two run the
// same per-element arithmetic in the same order; the OpenMP version only
// distributes independent outputs across threads. Results are therefore
// bit-identical for any thread count, which the unit tests assert and
// bench/ measures.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mixdens/kernels.hpp"

namespace mixdens::ops {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// f(value_u | point_j) divided by its row maximum, stored in both layouts:
/// rows for the marginal, columns for the EM reweighting.
struct LikelihoodMatrix {
  RowMatrix by_row;
  Eigen::MatrixXd by_col;
  std::vector<double> log_scale;  // log max_j f(value_u | point_j)

  std::size_t rows() const { return static_cast<std::size_t>(by_row.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(by_row.cols()); }
};

/// A row whose maximum is -inf has log_scale -inf and an all-zero row.
LikelihoodMatrix likelihood_matrix(const KernelModel& kernel, std::span<const double> values,
                                   std::span<const double> points);

/// marginal_u = sum_j pi_j L_uj. Returns sum_u W_u log marginal_u, in the
/// scaled units of L (add sum_u W_u log_scale_u for the true value).
double mixture_loglik(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> pi,
                      std::span<double> marginal);

/// out_j = sum_u W_u L_uj / marginal_u.
void reweight(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> marginal,
              std::span<double> out);

/// One EM map evaluation pi -> pi_next. Returns the scaled log-likelihood at pi.
double em_step(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> pi,
               std::span<double> pi_next, std::span<double> marginal);

/// Failure location inside a Monte Carlo likelihood.
struct NonFinite {
  std::size_t observation;  // index into the collapsed values
  std::size_t draw;         // weight-draw (or batch) index
};

/// Per-draw terms of the Monte Carlo objective
///
///   loss_s = -sum_u W_us log[ (1/C_s) sum_{z, k} c_ks f(y_u | x_{k, (s, z)}) ]
///
/// `x` holds the unconstrained generator outputs, one column per (s, z) pair
/// with the pairs of draw s contiguous; `counts` holds the candidate counts c_ks.
/// Writes d loss_s / d x into `dx` (same shape as x).
std::optional<NonFinite> mc_loss(Family family, std::span<const double> base, std::span<const double> values,
                                 const Eigen::MatrixXd& weights, const Eigen::MatrixXd& x,
                                 std::size_t noise_per_weight, const Eigen::MatrixXd& counts, Eigen::MatrixXd& dx,
                                 std::span<double> loss);

/// log_expect(u, k) = log[(1/S) sum_s f(y_u | to_support(x(k, s)))] for an l x S output batch.
Eigen::MatrixXd mc_log_expectations(Family family, std::span<const double> base, std::span<const double> values,
                                    const Eigen::MatrixXd& x);

/// out_g = sum_c weight_c phi((grid_g - center_c) / h) / h, with mirror images of
/// each center about `lower`/`upper` when given. `centers` must be sorted.
void gaussian_mixture_on_grid(std::span<const double> centers, std::span<const double> weights,
                              std::span<const double> grid, double bandwidth, std::optional<double> lower,
                              std::optional<double> upper, std::span<double> out);

namespace serial {

LikelihoodMatrix likelihood_matrix(const KernelModel& kernel, std::span<const double> values,
                                   std::span<const double> points);
double mixture_loglik(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> pi,
                      std::span<double> marginal);
void reweight(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> marginal,
              std::span<double> out);
double em_step(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> pi,
               std::span<double> pi_next, std::span<double> marginal);
std::optional<NonFinite> mc_loss(Family family, std::span<const double> base, std::span<const double> values,
                                 const Eigen::MatrixXd& weights, const Eigen::MatrixXd& x,
                                 std::size_t noise_per_weight, const Eigen::MatrixXd& counts, Eigen::MatrixXd& dx,
                                 std::span<double> loss);
Eigen::MatrixXd mc_log_expectations(Family family, std::span<const double> base, std::span<const double> values,
                                    const Eigen::MatrixXd& x);
void gaussian_mixture_on_grid(std::span<const double> centers, std::span<const double> weights,
                              std::span<const double> grid, double bandwidth, std::optional<double> lower,
                              std::optional<double> upper, std::span<double> out);

}  // namespace serial

/// Worker count used by the OpenMP kernels. 0 restores the runtime default.
void set_threads(int threads);
int max_threads();

}  // namespace mixdens::ops
