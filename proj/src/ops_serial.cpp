#include "ops_body.hpp"

namespace mixdens::ops::serial {

LikelihoodMatrix likelihood_matrix(const KernelModel& kernel, std::span<const double> values,
                                   std::span<const double> points) {
  body::check_likelihood_inputs(kernel, values, points);
  LikelihoodMatrix lik = body::allocate(values.size(), points.size());
  for (std::size_t u = 0; u < values.size(); ++u) body::likelihood_row(kernel, values, points, u, lik);
  lik.by_col = lik.by_row;
  return lik;
}

double mixture_loglik(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> pi,
                      std::span<double> marginal) {
  const Eigen::Map<const Eigen::VectorXd> p(pi.data(), static_cast<Eigen::Index>(pi.size()));
  std::vector<double> terms(lik.rows());
  for (std::size_t u = 0; u < lik.rows(); ++u) terms[u] = body::loglik_term(lik, weights, p, u, marginal);
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

void reweight(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> marginal,
              std::span<double> out) {
  const Eigen::VectorXd r = body::ratios(weights, marginal);
  for (std::size_t j = 0; j < lik.cols(); ++j) out[j] = body::reweight_entry(lik, r, j);
}

double em_step(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> pi,
               std::span<double> pi_next, std::span<double> marginal) {
  const double ll = serial::mixture_loglik(lik, weights, pi, marginal);
  serial::reweight(lik, weights, marginal, pi_next);
  double total = 0.0;
  for (double w : weights) total += w;
  for (std::size_t j = 0; j < pi.size(); ++j) pi_next[j] = pi[j] * pi_next[j] / total;
  return ll;
}

std::optional<NonFinite> mc_loss(Family family, std::span<const double> base, std::span<const double> values,
                                 const Eigen::MatrixXd& weights, const Eigen::MatrixXd& x,
                                 std::size_t noise_per_weight, const Eigen::MatrixXd& counts, Eigen::MatrixXd& dx,
                                 std::span<double> loss) {
  dx.resize(x.rows(), x.cols());
  for (std::size_t s = 0; s < loss.size(); ++s) {
    if (auto bad = body::mc_loss_draw(family, base, values, weights, x, noise_per_weight, counts, dx, loss, s)) {
      return bad;
    }
  }
  return std::nullopt;
}

Eigen::MatrixXd mc_log_expectations(Family family, std::span<const double> base, std::span<const double> values,
                                    const Eigen::MatrixXd& x) {
  const body::NaturalBatch nb = body::natural_batch(family, x);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(values.size()), x.rows());
  for (std::size_t u = 0; u < values.size(); ++u) body::mc_expect_row(nb, base, values, u, out);
  return out;
}

void gaussian_mixture_on_grid(std::span<const double> centers, std::span<const double> weights,
                              std::span<const double> grid, double bandwidth, std::optional<double> lower,
                              std::optional<double> upper, std::span<double> out) {
  body::check_mixture_inputs(centers, weights, grid, bandwidth, out);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out[g] = body::mixture_point(centers, weights, grid[g], bandwidth, lower, upper);
  }
}

}  // namespace mixdens::ops::serial
