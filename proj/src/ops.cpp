#include "ops_body.hpp"

#include <omp.h>

namespace mixdens::ops {

namespace {
int default_threads = 0;
}

void set_threads(int threads) {
  if (default_threads == 0) default_threads = omp_get_max_threads();
  omp_set_num_threads(threads > 0 ? threads : default_threads);
}

int max_threads() { return omp_get_max_threads(); }

LikelihoodMatrix likelihood_matrix(const KernelModel& kernel, std::span<const double> values,
                                   std::span<const double> points) {
  body::check_likelihood_inputs(kernel, values, points);
  LikelihoodMatrix lik = body::allocate(values.size(), points.size());
  const auto n = static_cast<std::ptrdiff_t>(values.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t u = 0; u < n; ++u) {
    body::likelihood_row(kernel, values, points, static_cast<std::size_t>(u), lik);
  }
  lik.by_col = lik.by_row;
  return lik;
}

double mixture_loglik(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> pi,
                      std::span<double> marginal) {
  const Eigen::Map<const Eigen::VectorXd> p(pi.data(), static_cast<Eigen::Index>(pi.size()));
  std::vector<double> terms(lik.rows());
  const auto n = static_cast<std::ptrdiff_t>(lik.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t u = 0; u < n; ++u) {
    terms[static_cast<std::size_t>(u)] = body::loglik_term(lik, weights, p, static_cast<std::size_t>(u), marginal);
  }
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

void reweight(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> marginal,
              std::span<double> out) {
  const Eigen::VectorXd r = body::ratios(weights, marginal);
  const auto m = static_cast<std::ptrdiff_t>(lik.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < m; ++j) {
    out[static_cast<std::size_t>(j)] = body::reweight_entry(lik, r, static_cast<std::size_t>(j));
  }
}

double em_step(const LikelihoodMatrix& lik, std::span<const double> weights, std::span<const double> pi,
               std::span<double> pi_next, std::span<double> marginal) {
  const double ll = mixture_loglik(lik, weights, pi, marginal);
  reweight(lik, weights, marginal, pi_next);
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
  std::vector<std::optional<NonFinite>> failures(loss.size());
  const auto draws = static_cast<std::ptrdiff_t>(loss.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < draws; ++s) {
    failures[static_cast<std::size_t>(s)] = body::mc_loss_draw(family, base, values, weights, x, noise_per_weight,
                                                               counts, dx, loss, static_cast<std::size_t>(s));
  }
  for (const auto& f : failures) {
    if (f) return f;
  }
  return std::nullopt;
}

Eigen::MatrixXd mc_log_expectations(Family family, std::span<const double> base, std::span<const double> values,
                                    const Eigen::MatrixXd& x) {
  const body::NaturalBatch nb = body::natural_batch(family, x);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(values.size()), x.rows());
  const auto n = static_cast<std::ptrdiff_t>(values.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t u = 0; u < n; ++u) body::mc_expect_row(nb, base, values, static_cast<std::size_t>(u), out);
  return out;
}

void gaussian_mixture_on_grid(std::span<const double> centers, std::span<const double> weights,
                              std::span<const double> grid, double bandwidth, std::optional<double> lower,
                              std::optional<double> upper, std::span<double> out) {
  body::check_mixture_inputs(centers, weights, grid, bandwidth, out);
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t g = 0; g < n; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    out[gi] = body::mixture_point(centers, weights, grid[gi], bandwidth, lower, upper);
  }
}

}  // namespace mixdens::ops
