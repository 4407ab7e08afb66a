#pragma once

// Per-output bodies shared by the OpenMP kernels (ops.cpp) and their serial
// reference (ops_serial.cpp). Each body computes exactly one independent
// output, so both drivers produce the same bits.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mixdens/ops.hpp"

namespace mixdens::ops::body {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline void check_likelihood_inputs(const KernelModel& kernel, std::span<const double> values,
                                    std::span<const double> points) {
  if (points.empty()) throw std::invalid_argument("likelihood matrix needs at least one support point");
  for (double y : values) {
    if (!kernel.valid_observation(y)) throw std::domain_error("invalid observation in likelihood matrix");
  }
  for (double t : points) {
    if (!kernel.in_support(t)) throw std::domain_error("support point outside the kernel support");
  }
}

inline LikelihoodMatrix allocate(std::size_t rows, std::size_t cols) {
  LikelihoodMatrix lik;
  lik.by_row.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  lik.log_scale.assign(rows, 0.0);
  return lik;
}

inline void likelihood_row(const KernelModel& kernel, std::span<const double> values,
                           std::span<const double> points, std::size_t u, LikelihoodMatrix& lik) {
  auto row = lik.by_row.row(static_cast<Eigen::Index>(u));
  double top = kNegInf;
  for (std::size_t j = 0; j < points.size(); ++j) {
    const double v = kernel.log_density(values[u], points[j]);
    row(static_cast<Eigen::Index>(j)) = v;
    top = std::max(top, v);
  }
  lik.log_scale[u] = top;
  if (top == kNegInf) {
    row.setZero();
    return;
  }
  for (Eigen::Index j = 0; j < row.size(); ++j) row(j) = std::exp(row(j) - top);
}

inline double loglik_term(const LikelihoodMatrix& lik, std::span<const double> weights,
                          const Eigen::Map<const Eigen::VectorXd>& pi, std::size_t u, std::span<double> marginal) {
  const double m = lik.by_row.row(static_cast<Eigen::Index>(u)).dot(pi);
  marginal[u] = m;
  if (weights[u] == 0.0) return 0.0;
  return weights[u] * std::log(m);
}

inline double reweight_entry(const LikelihoodMatrix& lik, const Eigen::VectorXd& ratio, std::size_t j) {
  return lik.by_col.col(static_cast<Eigen::Index>(j)).dot(ratio);
}

inline Eigen::VectorXd ratios(std::span<const double> weights, std::span<const double> marginal) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(weights.size()));
  for (std::size_t u = 0; u < weights.size(); ++u) {
    r(static_cast<Eigen::Index>(u)) = weights[u] == 0.0 ? 0.0 : weights[u] / marginal[u];
  }
  return r;
}

/// Loss and x-gradient for weight draw s.
inline std::optional<NonFinite> mc_loss_draw(Family family, std::span<const double> base,
                                             std::span<const double> values, const Eigen::MatrixXd& weights,
                                             const Eigen::MatrixXd& x, std::size_t noise_per_weight,
                                             const Eigen::MatrixXd& counts, Eigen::MatrixXd& dx,
                                             std::span<double> loss, std::size_t s) {
  const Eigen::Index l = x.rows();
  const Eigen::Index nz = static_cast<Eigen::Index>(noise_per_weight);
  const Eigen::Index first = static_cast<Eigen::Index>(s) * nz;
  const auto sidx = static_cast<Eigen::Index>(s);

  std::vector<Eigen::Index> active;
  double total_count = 0.0;
  for (Eigen::Index k = 0; k < l; ++k) {
    if (counts(k, sidx) > 0.0) {
      active.push_back(k);
      total_count += counts(k, sidx);
    }
  }
  const Eigen::Index na = static_cast<Eigen::Index>(active.size());
  const Eigen::Index terms = na * nz;
  Eigen::ArrayXd p(terms), q(terms), dp(terms), dq(terms);
  for (Eigen::Index j = 0; j < nz; ++j) {
    for (Eigen::Index a = 0; a < na; ++a) {
      const Eigen::Index t = j * na + a;
      const NaturalTerms nt = natural_terms(family, x(active[static_cast<std::size_t>(a)], first + j));
      p(t) = nt.p;
      q(t) = nt.q + std::log(counts(active[static_cast<std::size_t>(a)], sidx));
      dp(t) = nt.dp;
      dq(t) = nt.dq;
    }
  }
  const double log_c = std::log(static_cast<double>(nz) * total_count);

  Eigen::ArrayXd vals(terms), e(terms), acc = Eigen::ArrayXd::Zero(terms);
  double sum = 0.0;
  for (std::size_t u = 0; u < values.size(); ++u) {
    const double wu = weights(static_cast<Eigen::Index>(u), sidx);
    if (wu == 0.0) continue;
    const double y = values[u];
    vals = y * p + q;
    const double top = vals.maxCoeff();
    if (!std::isfinite(top)) return NonFinite{u, s};
    e = (vals - top).exp();
    const double total = e.sum();
    const double lse = base[u] + top + std::log(total);
    if (!std::isfinite(lse)) return NonFinite{u, s};
    sum -= wu * (lse - log_c);
    acc += (-wu / total) * e * (y * dp + dq);
  }
  loss[s] = sum;

  for (Eigen::Index j = 0; j < nz; ++j) {
    dx.col(first + j).setZero();
    for (Eigen::Index a = 0; a < na; ++a) dx(active[static_cast<std::size_t>(a)], first + j) = acc(j * na + a);
  }
  return std::nullopt;
}

struct NaturalBatch {
  Eigen::MatrixXd p, q;  // S x l: column k holds candidate k across the batch
};

inline NaturalBatch natural_batch(Family family, const Eigen::MatrixXd& x) {
  NaturalBatch nb;
  nb.p.resize(x.cols(), x.rows());
  nb.q.resize(x.cols(), x.rows());
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    for (Eigen::Index s = 0; s < x.cols(); ++s) {
      const NaturalTerms nt = natural_terms(family, x(k, s));
      nb.p(s, k) = nt.p;
      nb.q(s, k) = nt.q;
    }
  }
  return nb;
}

inline void mc_expect_row(const NaturalBatch& nb, std::span<const double> base, std::span<const double> values,
                          std::size_t u, Eigen::MatrixXd& out) {
  const double log_s = std::log(static_cast<double>(nb.p.rows()));
  const double y = values[u];
  Eigen::ArrayXd vals(nb.p.rows());
  for (Eigen::Index k = 0; k < nb.p.cols(); ++k) {
    vals = y * nb.p.col(k).array() + nb.q.col(k).array();
    const double top = vals.maxCoeff();
    out(static_cast<Eigen::Index>(u), k) = base[u] + top + std::log((vals - top).exp().sum()) - log_s;
  }
}

inline constexpr double kWindow = 8.5;

inline double phi(double d) { return std::exp(-0.5 * d * d) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2); }

/// Sum of weight_c phi((t - image_c) / h) for all centers with |image_c - t| <= kWindow h,
/// where image_c = mirror + sign * c.
inline double window_sum(std::span<const double> centers, std::span<const double> weights, double t, double h,
                         double mirror, double sign) {
  // image in [t - r, t + r]  <=>  c in [lo, hi]
  const double r = kWindow * h;
  double lo, hi;
  if (sign > 0.0) {
    lo = t - r - mirror;
    hi = t + r - mirror;
  } else {
    lo = mirror - t - r;
    hi = mirror - t + r;
  }
  const auto first = std::lower_bound(centers.begin(), centers.end(), lo);
  const auto last = std::upper_bound(first, centers.end(), hi);
  double acc = 0.0;
  for (auto it = first; it != last; ++it) {
    const std::size_t c = static_cast<std::size_t>(it - centers.begin());
    acc += weights[c] * phi((t - (mirror + sign * *it)) / h);
  }
  return acc;
}

inline double mixture_point(std::span<const double> centers, std::span<const double> weights, double t, double h,
                            std::optional<double> lower, std::optional<double> upper) {
  double acc = window_sum(centers, weights, t, h, 0.0, 1.0);
  if (lower) acc += window_sum(centers, weights, t, h, 2.0 * *lower, -1.0);
  if (upper) acc += window_sum(centers, weights, t, h, 2.0 * *upper, -1.0);
  return acc / h;
}

inline void check_mixture_inputs(std::span<const double> centers, std::span<const double> weights,
                                 std::span<const double> grid, double bandwidth, std::span<double> out) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (centers.size() != weights.size()) throw std::invalid_argument("centers and weights differ in length");
  if (grid.size() != out.size()) throw std::invalid_argument("grid and output differ in length");
  if (!std::is_sorted(centers.begin(), centers.end())) throw std::invalid_argument("centers must be sorted");
}

}  // namespace mixdens::ops::body
