#include "mixdens/gbnpmle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "mixdens/npmle.hpp"

namespace mixdens {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxBadEpochs = 10;
constexpr std::size_t kGenerateChunk = 256;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void fill_dirichlet(Eigen::MatrixXd& w, Eigen::Index col, Rng& rng) {
  const auto v = sample_weights(WeightScheme::DirichletTimesN, static_cast<std::size_t>(w.rows()), rng);
  for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, col) = v[static_cast<std::size_t>(i)];
}

NetworkShape shape_for(std::size_t n, const TrainConfig& cfg) {
  return {n, cfg.noise_dim, cfg.layers, cfg.hidden, cfg.l};
}

// Standard error of sum_u c_u log mean_s m_us by the delta method, where
// log_m holds log m_us (n_u x S).
double delta_se(const Eigen::MatrixXd& log_m, std::span<const double> counts) {
  const Eigen::Index S = log_m.cols();
  if (S < 2) return 0.0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(S);
  for (Eigen::Index u = 0; u < log_m.rows(); ++u) {
    const double top = log_m.row(u).maxCoeff();
    const double mean = (log_m.row(u).array() - top).exp().mean();
    for (Eigen::Index s = 0; s < S; ++s) {
      g(s) += counts[static_cast<std::size_t>(u)] * std::exp(log_m(u, s) - top) / mean;
    }
  }
  const double centre = g.mean();
  const double var = (g.array() - centre).square().sum() / static_cast<double>(S - 1);
  return std::sqrt(var / static_cast<double>(S));
}

}  // namespace

std::string DrawEnsemble::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "theta\n";
  for (double t : draws) os << t << '\n';
  return os.str();
}

std::string TrainingTrace::stage1_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss\n";
  for (std::size_t e = 0; e < stage1_loss.size(); ++e) os << e << ',' << stage1_loss[e] << '\n';
  return os.str();
}

std::string TrainingTrace::stage2_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "iter,loglik,se,min_delta,max_delta\n";
  for (std::size_t t = 0; t < stage2_loglik.size(); ++t) {
    os << t << ',' << stage2_loglik[t] << ',' << stage2_se[t] << ',' << stage2_min_delta[t] << ','
       << stage2_max_delta[t] << '\n';
  }
  return os.str();
}

MonteCarloBatch stage1_batch(std::size_t n, const TrainConfig& cfg, std::uint64_t epoch) {
  const Rng root(cfg.seed);
  Rng wr = root.substream(Stream::Weights, epoch);
  Rng zr = root.substream(Stream::Noise, epoch);
  MonteCarloBatch b;
  const auto sw = static_cast<Eigen::Index>(cfg.s_w);
  b.weights.resize(static_cast<Eigen::Index>(n), sw);
  for (Eigen::Index s = 0; s < sw; ++s) fill_dirichlet(b.weights, s, wr);
  b.noise_per_weight = cfg.s_z;
  b.noise.resize(static_cast<Eigen::Index>(cfg.noise_dim), sw * static_cast<Eigen::Index>(cfg.s_z));
  for (Eigen::Index c = 0; c < b.noise.cols(); ++c) {
    for (Eigen::Index r = 0; r < b.noise.rows(); ++r) b.noise(r, c) = zr.uniform();
  }
  const double per_index = std::ceil(static_cast<double>(cfg.s_gamma) / static_cast<double>(cfg.l));
  b.counts = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(cfg.l), sw, per_index);
  return b;
}

GeneratorNetwork initial_network(const Observations& obs, const KernelModel& kernel, const TrainConfig& cfg) {
  cfg.validate();
  validate(obs, kernel);
  GeneratorNetwork net(shape_for(obs.size(), cfg), kernel);
  Rng rng = Rng(cfg.seed).substream(Stream::Init);
  net.initialize(obs, rng);
  return net;
}

GeneratorNetwork stage1_train(const Observations& obs, const KernelModel& kernel, const TrainConfig& cfg,
                              TrainingTrace& trace, const Deadline& deadline) {
  const auto t0 = Clock::now();
  GeneratorNetwork net = initial_network(obs, kernel, cfg);
  const LikelihoodData data = LikelihoodData::from(obs, kernel);
  AdamState adam(net.parameter_count(), cfg.learning_rate);
  std::size_t bad = 0;
  trace.stage1_loss.clear();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    check_deadline(deadline, "GB-NPMLE training");
    const MonteCarloBatch batch = stage1_batch(obs.size(), cfg, epoch);
    const LossResult r = loss_and_grad(net, batch, data);
    trace.stage1_loss.push_back(r.loss);
    if (r.failure || !std::isfinite(r.loss) || !r.grad.allFinite()) {
      if (++bad >= kMaxBadEpochs) {
        trace.stage1_seconds = seconds_since(t0);
        std::ostringstream msg;
        msg << "Stage I loss not finite for " << kMaxBadEpochs << " consecutive epochs (epoch " << epoch;
        if (r.failure) msg << ", observation " << r.failure->observation << ", weight draw " << r.failure->draw;
        msg << ")";
        throw TrainingError(msg.str(), trace);
      }
      continue;
    }
    bad = 0;
    adam_step(net.parameters(), adam, r.grad);
  }
  trace.stage1_seconds = seconds_since(t0);
  return net;
}

double mcem_step(const Eigen::MatrixXd& log_expect, std::span<const double> counts, std::span<const double> tau,
                 std::span<double> tau_next) {
  const Eigen::Index nu = log_expect.rows();
  const Eigen::Index l = log_expect.cols();
  std::vector<double> log_tau(static_cast<std::size_t>(l));
  for (Eigen::Index k = 0; k < l; ++k) {
    const double t = tau[static_cast<std::size_t>(k)];
    log_tau[static_cast<std::size_t>(k)] = t > 0.0 ? std::log(t) : kNegInf;
  }
  std::vector<double> acc(static_cast<std::size_t>(l), 0.0);
  Eigen::ArrayXd v(l);
  double total = 0.0;
  for (Eigen::Index u = 0; u < nu; ++u) {
    const double c = counts[static_cast<std::size_t>(u)];
    if (c == 0.0) continue;
    for (Eigen::Index k = 0; k < l; ++k) v(k) = log_tau[static_cast<std::size_t>(k)] + log_expect(u, k);
    const double top = v.maxCoeff();
    if (!std::isfinite(top)) {
      throw FitError("Stage II denominator underflows: no candidate explains observation value " +
                     std::to_string(u));
    }
    const Eigen::ArrayXd e = (v - top).exp();
    const double sum = e.sum();
    for (Eigen::Index k = 0; k < l; ++k) acc[static_cast<std::size_t>(k)] += c * e(k) / sum;
    total += c;
  }
  double norm = 0.0;
  for (Eigen::Index k = 0; k < l; ++k) {
    tau_next[static_cast<std::size_t>(k)] = acc[static_cast<std::size_t>(k)] / total;
    norm += tau_next[static_cast<std::size_t>(k)];
  }
  for (double& t : tau_next) t /= norm;

  double ll = 0.0;
  for (Eigen::Index u = 0; u < nu; ++u) {
    const double c = counts[static_cast<std::size_t>(u)];
    if (c == 0.0) continue;
    double top = kNegInf;
    for (Eigen::Index k = 0; k < l; ++k) {
      const double t = tau_next[static_cast<std::size_t>(k)];
      v(k) = t > 0.0 ? std::log(t) + log_expect(u, k) : kNegInf;
      top = std::max(top, v(k));
    }
    ll += c * (top + std::log((v - top).exp().sum()));
  }
  return ll;
}

std::vector<double> stage2_mcem(const Observations& obs, const KernelModel& kernel, const GeneratorNetwork& net,
                                const TrainConfig& cfg, TrainingTrace& trace) {
  cfg.validate();
  const auto t0 = Clock::now();
  const std::size_t l = net.shape().outputs;
  const LikelihoodData data = LikelihoodData::from(obs, kernel);
  std::vector<double> counts(data.data.counts.begin(), data.data.counts.end());
  std::vector<double> tau(l, 1.0 / static_cast<double>(l)), next(l);
  const Rng root(cfg.seed);
  const auto S = static_cast<Eigen::Index>(cfg.stage2_pairs);
  const auto n = static_cast<Eigen::Index>(obs.size());
  const auto q = static_cast<Eigen::Index>(net.shape().noise_dim);
  trace.stage2_loglik.clear();
  trace.stage2_se.clear();
  trace.stage2_min_delta.clear();
  trace.stage2_max_delta.clear();

  for (std::size_t it = 0; it < cfg.stage2_max_iter; ++it) {
    Rng rng = root.substream(Stream::Stage2, it);
    Eigen::MatrixXd w(n, S), z(q, S);
    for (Eigen::Index s = 0; s < S; ++s) fill_dirichlet(w, s, rng);
    for (Eigen::Index s = 0; s < S; ++s) {
      for (Eigen::Index r = 0; r < q; ++r) z(r, s) = rng.uniform();
    }
    const Eigen::MatrixXd x = net.forward_raw(w, z, 1);
    const Eigen::MatrixXd log_expect = ops::mc_log_expectations(data.family, data.base, data.data.values, x);
    const double ll = mcem_step(log_expect, counts, tau, next);

    // log m_us = log sum_k tau_k f(y_u | x_ks) for the standard error.
    Eigen::MatrixXd log_m(static_cast<Eigen::Index>(data.data.size()), S);
    std::vector<NaturalTerms> nt(static_cast<std::size_t>(x.size()));
    for (Eigen::Index s = 0; s < S; ++s) {
      for (Eigen::Index k = 0; k < x.rows(); ++k) nt[static_cast<std::size_t>(s * x.rows() + k)] = natural_terms(data.family, x(k, s));
    }
    const auto nu = static_cast<std::ptrdiff_t>(data.data.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ui = 0; ui < nu; ++ui) {
      const auto u = static_cast<std::size_t>(ui);
      const double y = data.data.values[u];
      Eigen::ArrayXd v(x.rows());
      for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index k = 0; k < x.rows(); ++k) {
          const double t = next[static_cast<std::size_t>(k)];
          const NaturalTerms& a = nt[static_cast<std::size_t>(s * x.rows() + k)];
          v(k) = t > 0.0 ? std::log(t) + y * a.p + a.q : kNegInf;
        }
        const double top = v.maxCoeff();
        log_m(ui, s) = data.base[u] + top + std::log((v - top).exp().sum());
      }
    }
    double min_delta = std::numeric_limits<double>::infinity(), max_delta = 0.0;
    for (std::size_t k = 0; k < l; ++k) {
      const double d = std::fabs(next[k] - tau[k]);
      min_delta = std::min(min_delta, d);
      max_delta = std::max(max_delta, d);
    }
    tau.swap(next);
    trace.stage2_loglik.push_back(ll);
    trace.stage2_se.push_back(delta_se(log_m, counts));
    trace.stage2_min_delta.push_back(min_delta);
    trace.stage2_max_delta.push_back(max_delta);
    if (min_delta < cfg.tol) break;
  }
  trace.stage2_seconds = seconds_since(t0);
  return tau;
}

DrawEnsemble generate(const GeneratorNetwork& net, std::span<const double> tau, std::size_t count,
                      std::uint64_t seed) {
  if (tau.size() != net.shape().outputs) throw std::invalid_argument("tau length does not match the network");
  double total = 0.0;
  for (double t : tau) {
    if (!(t >= 0.0)) throw std::invalid_argument("tau entries must be nonnegative");
    total += t;
  }
  if (std::fabs(total - 1.0) > 1e-8) throw std::invalid_argument("tau must sum to 1");

  DrawEnsemble out;
  out.seed = seed;
  out.draws.resize(count);
  const Rng root(seed);
  const auto n = static_cast<Eigen::Index>(net.shape().weight_dim);
  const auto q = static_cast<Eigen::Index>(net.shape().noise_dim);
  const std::size_t chunks = (count + kGenerateChunk - 1) / kGenerateChunk;
  const auto chunk_count = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ci = 0; ci < chunk_count; ++ci) {
    const std::size_t first = static_cast<std::size_t>(ci) * kGenerateChunk;
    const std::size_t size = std::min(kGenerateChunk, count - first);
    const auto cols = static_cast<Eigen::Index>(size);
    Eigen::MatrixXd w(n, cols), z(q, cols);
    std::vector<std::size_t> pick(size);
    for (std::size_t j = 0; j < size; ++j) {
      Rng rng = root.substream(Stream::Generate, first + j);
      const auto jj = static_cast<Eigen::Index>(j);
      fill_dirichlet(w, jj, rng);
      for (Eigen::Index r = 0; r < q; ++r) z(r, jj) = rng.uniform();
      pick[j] = rng.categorical(tau);
    }
    const Eigen::MatrixXd x = net.forward_raw(w, z, 1);
    for (std::size_t j = 0; j < size; ++j) {
      out.draws[first + j] = net.kernel().to_support(x(static_cast<Eigen::Index>(pick[j]), static_cast<Eigen::Index>(j)));
    }
  }
  return out;
}

GbFit fit_gb_npmle(const Observations& obs, const KernelModel& kernel, const TrainConfig& cfg,
                   const Deadline& deadline) {
  TrainingTrace trace;
  GeneratorNetwork net = stage1_train(obs, kernel, cfg, trace, deadline);
  check_deadline(deadline, "GB-NPMLE Stage II");
  std::vector<double> tau = stage2_mcem(obs, kernel, net, cfg, trace);
  const auto t0 = Clock::now();
  DrawEnsemble ens = generate(net, tau, cfg.generate, Rng(cfg.seed).substream(Stream::Generate).seed());
  trace.generate_seconds = seconds_since(t0);
  return {std::move(net), std::move(tau), std::move(ens), std::move(trace)};
}

}  // namespace mixdens
