#include "mixdens/data.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include "mixdens/quadrature.hpp"

namespace mixdens {

namespace {

namespace bm = boost::math;

struct Component {
  double weight, mean, sd;
};

// Normal mixtures; the second argument of N(., .) is a variance.
std::vector<Component> normal_components(SimModel m) {
  if (m == SimModel::GMM) return {{0.5, -3.0, std::sqrt(2.0)}, {0.5, 3.0, 1.0}};
  return {{0.2, -4.0, std::sqrt(0.5)}, {0.6, 0.0, 1.0}, {0.2, 4.0, std::sqrt(0.5)}};
}

bool is_normal_mixture(SimModel m) { return m == SimModel::GMM || m == SimModel::GMMtri; }

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

double parse_count(const std::string& field, std::size_t row) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size() || field.empty()) {
    throw std::runtime_error("row " + std::to_string(row) + ": not a number: '" + field + "'");
  }
  if (v < 0.0) throw std::runtime_error("row " + std::to_string(row) + ": negative count");
  if (v != std::floor(v)) throw std::runtime_error("row " + std::to_string(row) + ": count is not an integer");
  return v;
}

}  // namespace

SimModel sim_model_from_name(std::string_view name) {
  if (name == "gmm") return SimModel::GMM;
  if (name == "gamm") return SimModel::GaMM;
  if (name == "pmm") return SimModel::PMM;
  if (name == "gmm-tri" || name == "gmmtri") return SimModel::GMMtri;
  if (name == "bbm") return SimModel::BBM;
  throw std::invalid_argument("unknown model: " + std::string(name));
}

std::string_view name(SimModel m) {
  switch (m) {
    case SimModel::GMM:
      return "gmm";
    case SimModel::GaMM:
      return "gamm";
    case SimModel::PMM:
      return "pmm";
    case SimModel::GMMtri:
      return "gmm-tri";
    case SimModel::BBM:
      break;
  }
  return "bbm";
}

std::vector<SimModel> all_sim_models() {
  return {SimModel::GMM, SimModel::GaMM, SimModel::PMM, SimModel::GMMtri, SimModel::BBM};
}

KernelModel model_kernel(SimModel m) {
  switch (m) {
    case SimModel::GMM:
    case SimModel::GMMtri:
      return KernelModel(Family::Gaussian);
    case SimModel::GaMM:
      return KernelModel(Family::Gamma);
    case SimModel::PMM:
      return KernelModel(Family::Poisson);
    case SimModel::BBM:
      break;
  }
  return KernelModel(Family::Binomial);
}

EvalRange eval_range(SimModel m) {
  switch (m) {
    case SimModel::GMM:
      return {-10.0, 8.0};
    case SimModel::GMMtri:
      return {-7.5, 7.5};
    case SimModel::PMM:
      return {0.0, 16.0};
    case SimModel::GaMM:
    case SimModel::BBM:
      break;
  }
  return {0.0, 1.0};
}

std::vector<double> eval_grid(SimModel m, std::size_t points) {
  const EvalRange r = eval_range(m);
  return linspace(r.lo, r.hi, points);
}

Simulation simulate(SimModel m, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("need n >= 1");
  const Rng root(seed);
  Rng prior = root.substream(Stream::Prior);
  Rng noise = root.substream(Stream::Data);
  const KernelModel kernel = model_kernel(m);
  Simulation sim;
  sim.theta.resize(n);
  sim.obs.y.resize(n);
  const auto comps = is_normal_mixture(m) ? normal_components(m) : std::vector<Component>{};
  std::vector<double> mix;
  for (const auto& c : comps) mix.push_back(c.weight);
  for (std::size_t i = 0; i < n; ++i) {
    double t = 0.0;
    switch (m) {
      case SimModel::GMM:
      case SimModel::GMMtri: {
        const auto& c = comps[prior.categorical(mix)];
        t = prior.normal(c.mean, c.sd);
        break;
      }
      case SimModel::GaMM:
        t = prior.beta(10.0, 5.0);
        break;
      case SimModel::PMM:
        t = prior.gamma(3.0);
        break;
      case SimModel::BBM:
        t = prior.beta(3.0, 2.0);
        break;
    }
    sim.theta[i] = t;
    sim.obs.y[i] = kernel.sample(t, noise);
  }
  return sim;
}

double true_prior_pdf(SimModel m, double t) {
  switch (m) {
    case SimModel::GMM:
    case SimModel::GMMtri: {
      double acc = 0.0;
      for (const auto& c : normal_components(m)) acc += c.weight * bm::pdf(bm::normal(c.mean, c.sd), t);
      return acc;
    }
    case SimModel::GaMM:
      return t <= 0.0 || t >= 1.0 ? 0.0 : bm::pdf(bm::beta_distribution<>(10.0, 5.0), t);
    case SimModel::PMM:
      return t <= 0.0 ? 0.0 : bm::pdf(bm::gamma_distribution<>(3.0, 1.0), t);
    case SimModel::BBM:
      break;
  }
  return t <= 0.0 || t >= 1.0 ? 0.0 : bm::pdf(bm::beta_distribution<>(3.0, 2.0), t);
}

double true_prior_cdf(SimModel m, double t) {
  switch (m) {
    case SimModel::GMM:
    case SimModel::GMMtri: {
      double acc = 0.0;
      for (const auto& c : normal_components(m)) acc += c.weight * bm::cdf(bm::normal(c.mean, c.sd), t);
      return acc;
    }
    case SimModel::GaMM:
      return t <= 0.0 ? 0.0 : t >= 1.0 ? 1.0 : bm::cdf(bm::beta_distribution<>(10.0, 5.0), t);
    case SimModel::PMM:
      return t <= 0.0 ? 0.0 : bm::cdf(bm::gamma_distribution<>(3.0, 1.0), t);
    case SimModel::BBM:
      break;
  }
  return t <= 0.0 ? 0.0 : t >= 1.0 ? 1.0 : bm::cdf(bm::beta_distribution<>(3.0, 2.0), t);
}

DensityOnGrid true_prior_density(SimModel m, std::span<const double> grid) {
  DensityOnGrid d;
  d.grid.assign(grid.begin(), grid.end());
  for (double t : grid) d.values.push_back(true_prior_pdf(m, t));
  d.normalized = true;
  return d;
}

std::vector<double> true_prior_cdf(SimModel m, std::span<const double> grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back(true_prior_cdf(m, t));
  return out;
}

CountDataset parse_counts(std::string_view text, std::string name) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file");
  const std::string header = trim(line);
  bool freq = false;
  if (header == "y,freq") {
    freq = true;
  } else if (header != "y") {
    throw std::runtime_error("row 1: expected header 'y' or 'y,freq', got '" + header + "'");
  }
  CountDataset ds;
  ds.name = std::move(name);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    if (!freq) {
      ds.y.push_back(parse_count(line, row));
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("row " + std::to_string(row) + ": expected y,freq");
    const double y = parse_count(trim(line.substr(0, comma)), row);
    const double f = parse_count(trim(line.substr(comma + 1)), row);
    ds.y.insert(ds.y.end(), static_cast<std::size_t>(f), y);
  }
  if (ds.y.empty()) throw std::runtime_error("dataset has no observations");
  return ds;
}

CountDataset load_counts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_counts(buf.str(), path.stem().string());
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("MIXDENS_DATA_DIR"); env && *env) return env;
  return MIXDENS_DATA_DIR;
}

CountDataset load_dataset(std::string_view name_or_path) {
  if (name_or_path == "mortality" || name_or_path == "thailand" || name_or_path == "norberg") {
    const auto path = data_dir() / (std::string(name_or_path) + ".csv");
    if (!std::filesystem::exists(path)) {
      throw std::runtime_error("dataset '" + std::string(name_or_path) + "' is not vendored (expected " +
                               path.string() + "); see data/README.md");
    }
    return load_counts(path);
  }
  return load_counts(std::filesystem::path(name_or_path));
}

}  // namespace mixdens
