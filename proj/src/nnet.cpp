#include "mixdens/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mixdens {

namespace {

constexpr char kMagic[8] = {'M', 'X', 'D', 'G', 'E', 'N', '0', '1'};

double z_center(double z) { return (z - 0.5) * std::sqrt(12.0); }

}  // namespace

GeneratorNetwork::GeneratorNetwork(NetworkShape shape, KernelModel kernel) : shape_(shape), kernel_(kernel) {
  if (shape_.weight_dim == 0 || shape_.noise_dim == 0 || shape_.layers == 0 || shape_.hidden == 0 ||
      shape_.outputs == 0) {
    throw std::invalid_argument("network dimensions must be positive");
  }
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i <= shape_.layers; ++i) {
    Layer layer;
    layer.in = static_cast<Eigen::Index>(i == 0 ? shape_.weight_dim + shape_.noise_dim : shape_.hidden);
    layer.out = static_cast<Eigen::Index>(i == shape_.layers ? shape_.outputs : shape_.hidden);
    layer.w_offset = offset;
    offset += layer.in * layer.out;
    layer.b_offset = offset;
    offset += layer.out;
    layers_.push_back(layer);
  }
  params_ = Eigen::VectorXd::Zero(offset);
  const double n = static_cast<double>(shape_.weight_dim);
  w_scale_ = shape_.weight_dim > 1 ? std::sqrt((n - 1.0) / (n + 1.0)) : 1.0;
}

Eigen::Map<const Eigen::MatrixXd> GeneratorNetwork::weight(std::size_t i) const {
  const Layer& L = layers_[i];
  return {params_.data() + L.w_offset, L.out, L.in};
}

Eigen::Map<const Eigen::VectorXd> GeneratorNetwork::bias(std::size_t i) const {
  const Layer& L = layers_[i];
  return {params_.data() + L.b_offset, L.out};
}

void GeneratorNetwork::initialize(const Observations& obs, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(shape_.weight_dim);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& L = layers_[i];
    for (Eigen::Index c = 0; c < L.in; ++c) {
      double fan = static_cast<double>(L.in);
      if (i == 0) fan = static_cast<double>(c < n ? shape_.weight_dim : shape_.noise_dim);
      const double a = 1.0 / std::sqrt(fan);
      for (Eigen::Index r = 0; r < L.out; ++r) params_(L.w_offset + c * L.out + r) = a * (2.0 * rng.uniform() - 1.0);
    }
    const double a = 1.0 / std::sqrt(static_cast<double>(L.in));
    for (Eigen::Index r = 0; r < L.out; ++r) params_(L.b_offset + r) = a * (2.0 * rng.uniform() - 1.0);
  }
  if (obs.size() == 0) return;
  std::vector<double> mle;
  mle.reserve(obs.size());
  for (double y : obs.y) mle.push_back(kernel_.observation_mle(y));
  std::sort(mle.begin(), mle.end());
  const Layer& last = layers_.back();
  for (Eigen::Index k = 0; k < last.out; ++k) {
    const double level = (static_cast<double>(k) + 0.5) / static_cast<double>(last.out);
    const double pos = level * static_cast<double>(mle.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, mle.size() - 1);
    const double theta = mle[lo] + (pos - static_cast<double>(lo)) * (mle[hi] - mle[lo]);
    params_(last.b_offset + k) = kernel_.from_support(theta);
  }
}

Eigen::MatrixXd GeneratorNetwork::forward_raw(const Eigen::MatrixXd& w, const Eigen::MatrixXd& z,
                                              std::size_t noise_per_weight, ForwardCache* cache) const {
  const auto n = static_cast<Eigen::Index>(shape_.weight_dim);
  const auto q = static_cast<Eigen::Index>(shape_.noise_dim);
  const auto nz = static_cast<Eigen::Index>(noise_per_weight);
  if (w.rows() != n || z.rows() != q || nz == 0 || z.cols() != w.cols() * nz) {
    throw std::invalid_argument("generator input dimensions do not match the network");
  }
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.noise_per_weight = noise_per_weight;
  c.w_in = (w.array() - 1.0) / w_scale_;
  c.z_in = z.unaryExpr(&z_center);
  c.hidden.resize(shape_.layers);

  const auto W0 = weight(0);
  // The weight-vector part of the first layer is shared by all noise draws.
  const Eigen::MatrixXd a = W0.leftCols(n) * c.w_in;
  Eigen::MatrixXd pre = W0.rightCols(q) * c.z_in;
  for (Eigen::Index s = 0; s < w.cols(); ++s) {
    pre.middleCols(s * nz, nz).colwise() += a.col(s) + bias(0);
  }
  c.hidden[0] = pre.array().tanh().matrix();
  for (std::size_t i = 1; i < shape_.layers; ++i) {
    pre.noalias() = weight(i) * c.hidden[i - 1];
    pre.colwise() += bias(i);
    c.hidden[i] = pre.array().tanh().matrix();
  }
  Eigen::MatrixXd x = weight(shape_.layers) * c.hidden.back();
  x.colwise() += bias(shape_.layers);
  return x;
}

Eigen::VectorXd GeneratorNetwork::backward(const ForwardCache& c, const Eigen::MatrixXd& dx) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  auto gw = [&](std::size_t i) {
    const Layer& L = layers_[i];
    return Eigen::Map<Eigen::MatrixXd>(grad.data() + L.w_offset, L.out, L.in);
  };
  auto gb = [&](std::size_t i) {
    const Layer& L = layers_[i];
    return Eigen::Map<Eigen::VectorXd>(grad.data() + L.b_offset, L.out);
  };

  const std::size_t top = shape_.layers;
  gw(top).noalias() = dx * c.hidden.back().transpose();
  gb(top) = dx.rowwise().sum();
  Eigen::MatrixXd d = (weight(top).transpose() * dx).cwiseProduct((1.0 - c.hidden.back().array().square()).matrix());
  for (std::size_t i = top - 1; i >= 1; --i) {
    gw(i).noalias() = d * c.hidden[i - 1].transpose();
    gb(i) = d.rowwise().sum();
    d = (weight(i).transpose() * d).cwiseProduct((1.0 - c.hidden[i - 1].array().square()).matrix());
  }
  const auto n = static_cast<Eigen::Index>(shape_.weight_dim);
  const auto q = static_cast<Eigen::Index>(shape_.noise_dim);
  const auto nz = static_cast<Eigen::Index>(c.noise_per_weight);
  gb(0) = d.rowwise().sum();
  auto g0 = gw(0);
  g0.rightCols(q).noalias() = d * c.z_in.transpose();
  Eigen::MatrixXd per_weight(d.rows(), c.w_in.cols());
  for (Eigen::Index s = 0; s < c.w_in.cols(); ++s) per_weight.col(s) = d.middleCols(s * nz, nz).rowwise().sum();
  g0.leftCols(n).noalias() = per_weight * c.w_in.transpose();
  return grad;
}

std::vector<double> GeneratorNetwork::forward(std::span<const double> w, std::span<const double> z) const {
  const Eigen::MatrixXd wm = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  const Eigen::MatrixXd zm = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  const Eigen::MatrixXd x = forward_raw(wm, zm, 1);
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index k = 0; k < x.rows(); ++k) out[static_cast<std::size_t>(k)] = kernel_.to_support(x(k, 0));
  return out;
}

nlohmann::json GeneratorNetwork::header() const {
  return {{"format", 1},
          {"family", std::string(kernel_.name())},
          {"weight_dim", shape_.weight_dim},
          {"noise_dim", shape_.noise_dim},
          {"layers", shape_.layers},
          {"hidden", shape_.hidden},
          {"outputs", shape_.outputs},
          {"activation", "tanh"},
          {"w_center", 1.0},
          {"w_scale", w_scale_},
          {"z_center", 0.5},
          {"z_scale", 1.0 / std::sqrt(12.0)},
          {"parameters", parameter_count()}};
}

void GeneratorNetwork::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const std::string head = header().dump();
  const std::uint64_t len = head.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(params_.size())));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

GeneratorNetwork GeneratorNetwork::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  char magic[sizeof kMagic];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || len > (1u << 20)) {
    throw std::runtime_error("not a generator checkpoint: " + path.string());
  }
  std::string head(len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(len));
  const auto j = nlohmann::json::parse(head);
  NetworkShape shape{j.at("weight_dim"), j.at("noise_dim"), j.at("layers"), j.at("hidden"), j.at("outputs")};
  GeneratorNetwork net(shape, KernelModel::from_name(j.at("family").get<std::string>()));
  if (j.at("parameters").get<std::size_t>() != net.parameter_count()) {
    throw std::runtime_error("checkpoint parameter count does not match its shape");
  }
  in.read(reinterpret_cast<char*>(net.params_.data()),
          static_cast<std::streamsize>(sizeof(double) * net.parameter_count()));
  if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
  return net;
}

LikelihoodData LikelihoodData::from(const Observations& obs, const KernelModel& kernel) {
  validate(obs, kernel);
  LikelihoodData d;
  d.family = kernel.family();
  d.data = collapse(obs);
  d.base.reserve(d.data.size());
  for (double y : d.data.values) d.base.push_back(log_base_measure(kernel.family(), y));
  return d;
}

LossResult loss_and_grad(const GeneratorNetwork& net, const MonteCarloBatch& batch, const LikelihoodData& data,
                         bool serial) {
  if (batch.weights.cols() == 0) throw std::invalid_argument("empty Monte Carlo batch");
  if (static_cast<std::size_t>(batch.weights.rows()) != data.observations()) {
    throw std::invalid_argument("batch weight vectors do not match the number of observations");
  }
  const Eigen::Index sw = batch.weights.cols();
  ForwardCache cache;
  const Eigen::MatrixXd x = net.forward_raw(batch.weights, batch.noise, batch.noise_per_weight, &cache);

  const auto nu = static_cast<Eigen::Index>(data.data.size());
  Eigen::MatrixXd agg(nu, sw);
  for (Eigen::Index s = 0; s < sw; ++s) {
    data.data.aggregate(std::span<const double>(batch.weights.col(s).data(), batch.weights.rows()),
                        std::span<double>(agg.col(s).data(), static_cast<std::size_t>(nu)));
  }

  Eigen::MatrixXd dx;
  std::vector<double> loss(static_cast<std::size_t>(sw));
  const auto failure = serial ? ops::serial::mc_loss(data.family, data.base, data.data.values, agg, x,
                                                     batch.noise_per_weight, batch.counts, dx, loss)
                              : ops::mc_loss(data.family, data.base, data.data.values, agg, x,
                                             batch.noise_per_weight, batch.counts, dx, loss);
  LossResult out;
  if (failure) {
    // Report an original observation index rather than the collapsed one.
    ops::NonFinite where = *failure;
    const auto& g = data.data.group;
    where.observation = static_cast<std::size_t>(std::find(g.begin(), g.end(), failure->observation) - g.begin());
    out.failure = where;
    out.loss = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double total = 0.0;
  for (double v : loss) total += v;
  const double inv = 1.0 / static_cast<double>(sw);
  out.loss = total * inv;
  dx *= inv;
  out.grad = net.backward(cache, dx);
  return out;
}

void adam_step(Eigen::VectorXd& params, AdamState& state, const Eigen::VectorXd& grad) {
  if (grad.size() != params.size()) throw std::invalid_argument("gradient and parameters differ in size");
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.array() -= state.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.s_w = 10;
  c.s_z = 10;
  c.epochs = 1000;
  c.learning_rate = 1e-3;
  return c;
}

void TrainConfig::validate() const {
  if (l == 0 || s_w == 0 || s_z == 0 || s_gamma == 0 || noise_dim == 0 || layers == 0 || hidden == 0 ||
      generate == 0 || stage2_pairs == 0 || stage2_max_iter == 0) {
    throw std::invalid_argument("training counts must be positive");
  }
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"l", c.l},
          {"tol", c.tol},
          {"epochs", c.epochs},
          {"generate", c.generate},
          {"s_w", c.s_w},
          {"s_z", c.s_z},
          {"s_gamma", c.s_gamma},
          {"noise_dim", c.noise_dim},
          {"layers", c.layers},
          {"hidden", c.hidden},
          {"learning_rate", c.learning_rate},
          {"stage2_pairs", c.stage2_pairs},
          {"stage2_max_iter", c.stage2_max_iter},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  take("l", c.l);
  take("tol", c.tol);
  take("epochs", c.epochs);
  take("generate", c.generate);
  take("s_w", c.s_w);
  take("s_z", c.s_z);
  take("s_gamma", c.s_gamma);
  take("noise_dim", c.noise_dim);
  take("layers", c.layers);
  take("hidden", c.hidden);
  take("learning_rate", c.learning_rate);
  take("stage2_pairs", c.stage2_pairs);
  take("stage2_max_iter", c.stage2_max_iter);
  take("seed", c.seed);
  return c;
}

}  // namespace mixdens
