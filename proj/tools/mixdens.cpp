// mixdens: simulate, fit, evaluate and benchmark mixing-density estimators.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mixdens/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mixdens;

namespace {

constexpr const char* kVersion = "1.0.0";

std::vector<std::string> g_argv;

std::string fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string column_csv(const char* header, const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  os << header << '\n';
  for (double x : v) os << x << '\n';
  return os.str();
}

/// First column of a CSV with a header row.
std::vector<double> read_column(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(std::stod(line.substr(0, line.find(','))));
  }
  return out;
}

struct Common {
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = ".";
  bool timing = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Seed for all random substreams")->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads (default: $MIXDENS_THREADS, else all cores)");
  app->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
  app->add_flag("--timing", c.timing, "Include wall-clock seconds in metric records");
}

void apply_threads(const Common& c) {
  int t = c.threads;
  if (t <= 0) {
    if (const char* env = std::getenv("MIXDENS_THREADS"); env && *env) t = std::atoi(env);
  }
  ops::set_threads(t > 0 ? t : 0);
}

class Manifest {
 public:
  Manifest(std::string command, const Common& c) {
    j_["command"] = std::move(command);
    j_["argv"] = g_argv;
    j_["seed"] = c.seed;
    j_["version"] = kVersion;
    j_["threads"] = ops::max_threads();
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
    j_["wall_clock"] = json::object();
  }
  json& config() { return j_["config"]; }
  json& operator[](const char* key) { return j_[key]; }
  void input(const fs::path& p) { j_["inputs"].push_back({{"path", p.string()}, {"fnv1a", fnv1a(read_file(p))}}); }
  void output(const fs::path& p) { j_["outputs"].push_back(p.filename().string()); }
  void phase(const std::string& name, double seconds) { j_["wall_clock"][name] = seconds; }
  void write(const fs::path& dir) { write_file(dir / "manifest.json", dump(j_)); }

 private:
  json j_;
};

fs::path prepare(const Common& c) {
  fs::path dir(c.out_dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::size_t> parse_sizes(const std::string& list, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  if (out.empty()) throw CLI::ValidationError(std::string(what) + " list is empty");
  return out;
}

std::vector<std::string> parse_names(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw CLI::ValidationError("method list is empty");
  return out;
}

// ---------------------------------------------------------------- estimator flags

struct FitFlags {
  std::size_t grid = 400;
  double tol = 1e-3;  // Stage II tolerance
  double npmle_tol = 1e-8;
  std::size_t boot_b = 100;
  std::string boot_scheme = "multinomial";
  double bandwidth = 0.0;
  bool bandwidth_cv = false;
  std::string preset = "desk";
  std::size_t epochs = 0, l = 0, layers = 0, hidden = 0, s_w = 0, s_z = 0, generate = 0;
  double lr = 0.0;
  bool epochs_set = false;
};

void add_fit_flags(CLI::App* app, FitFlags& f) {
  app->add_option("--grid", f.grid, "NPMLE support grid size")->capture_default_str();
  app->add_option("--npmle-tol", f.npmle_tol, "EM tolerance on grid weights")->capture_default_str();
  app->add_option("--boot-B", f.boot_b, "Bootstrap replicates")->capture_default_str();
  app->add_option("--boot-scheme", f.boot_scheme, "dirichlet or multinomial")
      ->check(CLI::IsMember({"dirichlet", "multinomial"}))
      ->capture_default_str();
  app->add_option("--bandwidth", f.bandwidth, "Fixed smoothing bandwidth");
  app->add_flag("--bandwidth-cv", f.bandwidth_cv, "Cross-validate the bandwidth (default when --bandwidth is unset)");
  app->add_option("--preset", f.preset, "GB training preset: desk or full")
      ->check(CLI::IsMember({"desk", "full"}))
      ->capture_default_str();
  app->add_option("--epochs", f.epochs, "Stage I epochs T")->each([&f](const std::string&) { f.epochs_set = true; });
  app->add_option("--l", f.l, "Candidates per forward pass");
  app->add_option("--tol", f.tol, "Stage II stopping tolerance")->capture_default_str();
  app->add_option("--layers", f.layers, "Hidden layers L");
  app->add_option("--hidden", f.hidden, "Hidden width h");
  app->add_option("--lr", f.lr, "Adam learning rate");
  app->add_option("--s-w", f.s_w, "Weight vectors per batch");
  app->add_option("--s-z", f.s_z, "Noise draws per weight vector");
  app->add_option("--generate", f.generate, "Draws generated after training (B)");
}

MethodConfig method_config(const FitFlags& f) {
  MethodConfig c;
  c.grid_size = f.grid;
  c.npmle.tol = f.npmle_tol;
  c.boot.replicates = f.boot_b;
  c.boot.scheme = weight_scheme_from_name(f.boot_scheme);
  if (f.bandwidth > 0.0 && !f.bandwidth_cv) c.bandwidth = f.bandwidth;
  c.train = f.preset == "full" ? TrainConfig{} : TrainConfig::desk();
  c.train.tol = f.tol;
  if (f.epochs_set) c.train.epochs = f.epochs;
  if (f.l) c.train.l = c.train.s_gamma = f.l;
  if (f.layers) c.train.layers = f.layers;
  if (f.hidden) c.train.hidden = f.hidden;
  if (f.lr > 0.0) c.train.learning_rate = f.lr;
  if (f.s_w) c.train.s_w = f.s_w;
  if (f.s_z) c.train.s_z = f.s_z;
  if (f.generate) c.train.generate = f.generate;
  return c;
}

json config_json(const MethodConfig& c) {
  return {{"grid", c.grid_size},
          {"npmle_tol", c.npmle.tol},
          {"npmle_gap", c.npmle.gap},
          {"boot_B", c.boot.replicates},
          {"boot_scheme", std::string(name(c.boot.scheme))},
          {"boot_gap", c.boot.npmle.gap},
          {"bandwidth", c.bandwidth ? json(*c.bandwidth) : json("cv")},
          {"train", to_json(c.train)}};
}

// ---------------------------------------------------------------- data source

struct DataFlags {
  std::string model;
  std::string data;
  std::string family;
  std::size_t n = 1000;
};

void add_data_flags(CLI::App* app, DataFlags& d) {
  app->add_option("--model", d.model, "Simulation model: gmm, gamm, pmm, gmm-tri, bbm");
  app->add_option("--n", d.n, "Sample size for simulated data")->capture_default_str();
  app->add_option("--data", d.data, "Count dataset name (mortality, thailand, norberg) or CSV path");
  app->add_option("--family", d.family, "Kernel for --data (default poisson)");
}

struct Loaded {
  Observations obs;
  KernelModel kernel{Family::Gaussian};
  std::optional<SimModel> model;
  std::string source;
};

Loaded load_data(const DataFlags& d, std::uint64_t seed, Manifest& m) {
  Loaded out;
  if (!d.data.empty()) {
    const CountDataset ds = load_dataset(d.data);
    out.obs = ds.observations();
    out.kernel = KernelModel::from_name(d.family.empty() ? "poisson" : d.family);
    out.source = ds.name;
    const fs::path p = fs::exists(d.data) ? fs::path(d.data) : data_dir() / (d.data + ".csv");
    m.input(p);
    if (!d.model.empty()) out.model = sim_model_from_name(d.model);
  } else {
    if (d.model.empty()) throw CLI::ValidationError("either --model or --data is required");
    out.model = sim_model_from_name(d.model);
    out.obs = simulate(*out.model, d.n, seed).obs;
    out.kernel = model_kernel(*out.model);
    out.source = "simulated";
  }
  m["data"] = {{"source", out.source},
               {"model", out.model ? json(std::string(name(*out.model))) : json(nullptr)},
               {"family", std::string(out.kernel.name())},
               {"n", out.obs.size()}};
  return out;
}

// ---------------------------------------------------------------- commands

int cmd_simulate(const Common& c, const DataFlags& d) {
  if (d.model.empty()) throw CLI::ValidationError("--model is required");
  const fs::path dir = prepare(c);
  Manifest m("simulate", c);
  const SimModel model = sim_model_from_name(d.model);
  const auto t0 = Clock::now();
  const Simulation sim = simulate(model, d.n, c.seed);
  m.phase("simulate", std::chrono::duration<double>(Clock::now() - t0).count());
  write_file(dir / "y.csv", column_csv("y", sim.obs.y));
  write_file(dir / "theta.csv", column_csv("theta", sim.theta));
  m.config() = {{"model", d.model}, {"n", d.n}};
  m.output(dir / "y.csv");
  m.output(dir / "theta.csv");
  m.write(dir);
  return 0;
}

int cmd_fit(const Common& c, const DataFlags& d, const FitFlags& f, const std::string& method_name) {
  const fs::path dir = prepare(c);
  Manifest m("fit", c);
  const Method method = method_from_name(method_name);
  const Loaded data = load_data(d, c.seed, m);
  const MethodConfig cfg = method_config(f);
  m.config() = config_json(cfg);
  m["method"] = method_name;

  const MethodResult r = run_method(method, data.obs, data.kernel, cfg, c.seed);
  m.phase("fit", r.seconds);
  auto out = [&](const std::string& file, const std::string& text) {
    write_file(dir / file, text);
    m.output(dir / file);
  };
  switch (method) {
    case Method::Npmle:
      out("npmle.json", dump(to_json(*r.npmle)));
      std::cerr << "optimality " << r.npmle->optimality << ", loglik " << r.npmle->loglik << '\n';
      break;
    case Method::Boot:
      out("ensemble.jsonl", to_json_lines(*r.ensemble));
      out("draws.csv", column_csv("theta", r.draws));
      break;
    case Method::Smooth:
      out("npmle.json", dump(to_json(*r.npmle)));
      out("smoothed.csv", r.smoothed->to_csv());
      if (r.selection) {
        out("bandwidth.json", dump({{"bandwidth", r.selection->bandwidth},
                                    {"candidates", r.selection->candidates},
                                    {"scores", r.selection->scores},
                                    {"folds", r.selection->folds},
                                    {"approximate", r.selection->approximate}}));
      }
      break;
    case Method::Gb: {
      r.gb->net.save(dir / "model.bin");
      m.output(dir / "model.bin");
      out("tau.json", dump({{"tau", r.gb->tau}}));
      out("draws.csv", r.gb->ensemble.to_csv());
      out("trace_stage1.csv", r.gb->trace.stage1_csv());
      out("trace_stage2.csv", r.gb->trace.stage2_csv());
      m.phase("stage1", r.gb->trace.stage1_seconds);
      m.phase("stage2", r.gb->trace.stage2_seconds);
      m.phase("generate", r.gb->trace.generate_seconds);
      break;
    }
  }
  m.write(dir);
  return 0;
}

// Rebuilds a MethodResult from a fit directory.
MethodResult load_fit(const fs::path& dir, const json& manifest) {
  MethodResult r;
  r.method = method_from_name(manifest.at("method").get<std::string>());
  switch (r.method) {
    case Method::Npmle: {
      NpmleFit fit;
      fit.dist = distribution_from_json(json::parse(read_file(dir / "npmle.json")));
      r.npmle = fit;
      break;
    }
    case Method::Smooth: {
      std::istringstream in(read_file(dir / "smoothed.csv"));
      std::string line;
      std::getline(in, line);
      SmoothedDensity s;
      while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        s.grid.push_back(std::stod(line.substr(0, comma)));
        s.density.push_back(std::stod(line.substr(comma + 1)));
      }
      r.smoothed = s;
      break;
    }
    case Method::Boot:
    case Method::Gb:
      r.draws = read_column(dir / "draws.csv");
      break;
  }
  if (manifest.contains("wall_clock") && manifest["wall_clock"].contains("fit")) {
    r.seconds = manifest["wall_clock"]["fit"].get<double>();
  }
  return r;
}

struct Record {
  std::string method, model;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  Scores scores;
  double seconds = 0.0;
};

json record_json(const Record& r, bool timing) {
  json j = {{"method", r.method},
            {"model", r.model},
            {"n", r.n},
            {"seed", r.seed},
            {"W1", r.scores.w1},
            {"ISE", r.scores.ise ? json(*r.scores.ise) : json(nullptr)},
            {"LPS", nullptr}};
  if (timing) j["time_sec"] = r.seconds;
  return j;
}

std::string table_csv(const std::vector<Record>& records) {
  std::map<std::pair<std::string, std::string>, std::vector<const Record*>> groups;
  for (const auto& r : records) groups[{r.model, r.method}].push_back(&r);
  std::ostringstream os;
  os.precision(6);
  os << "model,method,replicates,W1_mean,W1_sd,ISE_mean,ISE_sd\n";
  for (const auto& [key, rs] : groups) {
    auto stats = [&](auto get) {
      double s = 0.0, ss = 0.0;
      std::size_t k = 0;
      for (const Record* r : rs) {
        const auto v = get(*r);
        if (!v) continue;
        s += *v;
        ss += *v * *v;
        ++k;
      }
      if (k == 0) return std::pair<std::string, std::string>{"", ""};
      const double mean = s / static_cast<double>(k);
      const double var = k > 1 ? std::max(0.0, (ss - static_cast<double>(k) * mean * mean) / static_cast<double>(k - 1)) : 0.0;
      std::ostringstream a, b;
      a.precision(6);
      b.precision(6);
      a << mean;
      b << std::sqrt(var);
      return std::pair<std::string, std::string>{a.str(), b.str()};
    };
    const auto w = stats([](const Record& r) { return std::optional<double>(r.scores.w1); });
    const auto i = stats([](const Record& r) { return r.scores.ise; });
    os << key.first << ',' << key.second << ',' << rs.size() << ',' << w.first << ',' << w.second << ',' << i.first
       << ',' << i.second << '\n';
  }
  return os.str();
}

int cmd_eval(const Common& c, const std::vector<std::string>& fit_dirs, const std::string& model_flag, bool truth) {
  const fs::path dir = prepare(c);
  Manifest m("eval", c);
  std::vector<Record> records;
  if (truth) {
    if (model_flag.empty()) throw CLI::ValidationError("--truth needs --model");
    const SimModel model = sim_model_from_name(model_flag);
    const EvalRange range = eval_range(model);
    const auto cdf = [model](double t) { return true_prior_cdf(model, t); };
    const auto grid = eval_grid(model);
    const DensityOnGrid dens = true_prior_density(model, grid);
    Record r{"truth", model_flag, 0, c.seed, {wasserstein1(cdf, cdf, range.lo, range.hi), ise(dens, dens)}, 0.0};
    records.push_back(r);
  }
  for (const auto& fd : fit_dirs) {
    const fs::path fdir(fd);
    const json fm = json::parse(read_file(fdir / "manifest.json"));
    // The fit's artifacts, not its manifest: the manifest carries wall-clock times.
    for (const auto& out : fm.value("outputs", json::array())) m.input(fdir / out.get<std::string>());
    std::string model_name = model_flag;
    if (model_name.empty() && fm.contains("data") && fm["data"]["model"].is_string()) {
      model_name = fm["data"]["model"].get<std::string>();
    }
    if (model_name.empty()) throw CLI::ValidationError(fd + ": no simulation model to evaluate against");
    const SimModel model = sim_model_from_name(model_name);
    const MethodResult r = load_fit(fdir, fm);
    Record rec{fm.at("method").get<std::string>(), model_name, fm["data"].value("n", std::size_t{0}),
               fm.value("seed", std::uint64_t{0}), score(r, model), r.seconds};
    records.push_back(rec);
  }
  if (records.empty()) throw CLI::ValidationError("nothing to evaluate: give --fit-dir or --truth");
  json arr = json::array();
  for (const auto& r : records) arr.push_back(record_json(r, c.timing));
  write_file(dir / "metrics.json", dump(arr));
  write_file(dir / "table.csv", table_csv(records));
  m.output(dir / "metrics.json");
  m.output(dir / "table.csv");
  m.write(dir);
  return 0;
}

int cmd_lps(const Common& c, const std::string& dataset, const std::string& method_name, std::size_t folds,
            std::size_t draws, const std::string& family, const FitFlags& f) {
  const fs::path dir = prepare(c);
  Manifest m("lps", c);
  const CountDataset ds = load_dataset(dataset);
  m.input(fs::exists(dataset) ? fs::path(dataset) : data_dir() / (dataset + ".csv"));
  const KernelModel kernel = KernelModel::from_name(family);
  MethodConfig cfg = method_config(f);
  cfg.boot.scheme = WeightScheme::Multinomial;
  const Method method = method_from_name(method_name);
  m.config() = config_json(cfg);
  const auto t0 = Clock::now();
  const LpsResult r = lps_kfold(ds.observations(), kernel, draw_fitter(method, kernel, cfg, draws), folds, c.seed);
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  m.phase("lps", secs);
  json j = {{"dataset", ds.name}, {"method", method_name}, {"n", ds.n()},      {"K", folds},
            {"B", draws},         {"seed", c.seed},        {"LPS", r.lps},     {"fold_scores", r.fold_scores}};
  if (c.timing) j["time_sec"] = secs;
  write_file(dir / "lps.json", dump(j));
  m.output(dir / "lps.json");
  m.write(dir);
  std::cout << "LPS " << r.lps << '\n';
  return 0;
}

int cmd_bench(const Common& c, const std::string& model_name, const std::string& n_list, const std::string& methods,
              const std::string& b_list, double timeout, const FitFlags& f) {
  const fs::path dir = prepare(c);
  Manifest m("bench", c);
  const SimModel model = sim_model_from_name(model_name);
  const auto ns = parse_sizes(n_list, "n");
  const auto bs = parse_sizes(b_list, "B");
  const auto names = parse_names(methods);
  std::ostringstream csv;
  csv.precision(6);
  csv << "model,method,n,B,seconds,log_seconds,status\n";
  for (std::size_t n : ns) {
    const Simulation sim = simulate(model, n, c.seed);
    for (const auto& mn : names) {
      const Method method = method_from_name(mn);
      for (std::size_t b : bs) {
        MethodConfig cfg = method_config(f);
        cfg.boot.replicates = b;
        cfg.train.generate = b;
        if (timeout > 0.0) {
          cfg.deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout));
        }
        std::string status = "ok";
        double secs = 0.0;
        const auto t0 = Clock::now();
        try {
          run_method(method, sim.obs, model_kernel(model), cfg, c.seed);
        } catch (const Timeout&) {
          status = "timeout";
        } catch (const std::exception& e) {
          status = std::string("error: ") + e.what();
          for (char& ch : status) {
            if (ch == ',' || ch == '\n') ch = ';';
          }
        }
        secs = std::chrono::duration<double>(Clock::now() - t0).count();
        csv << model_name << ',' << mn << ',' << n << ',' << b << ',' << secs << ',' << std::log(secs) << ','
            << status << '\n';
        std::cerr << mn << " n=" << n << " B=" << b << ": " << secs << " s (" << status << ")\n";
      }
    }
  }
  write_file(dir / "timing.csv", csv.str());
  m.config() = {{"model", model_name}, {"n", ns}, {"B", bs}, {"methods", names}, {"timeout", timeout}};
  m.output(dir / "timing.csv");
  m.write(dir);
  return 0;
}

int cmd_sweep(const Common& c, const std::string& model_name, const std::string& layer_list,
              const std::string& hidden_list, std::size_t n, std::size_t replicates, const FitFlags& f) {
  const fs::path dir = prepare(c);
  Manifest m("sweep", c);
  const SimModel model = sim_model_from_name(model_name);
  const auto layers = parse_sizes(layer_list, "layer");
  const auto hidden = parse_sizes(hidden_list, "hidden");
  if (replicates == 0) throw CLI::ValidationError("--replicates must be positive");
  std::vector<Record> records;
  std::ostringstream csv;
  csv.precision(6);
  csv << "layers,hidden,replicates,W1_mean,W1_sd,ISE_mean,ISE_sd\n";
  for (std::size_t L : layers) {
    for (std::size_t h : hidden) {
      std::vector<Record> cell;
      for (std::size_t rep = 0; rep < replicates; ++rep) {
        const std::uint64_t seed = c.seed + rep;
        const Simulation sim = simulate(model, n, seed);
        MethodConfig cfg = method_config(f);
        cfg.train.layers = L;
        cfg.train.hidden = h;
        const MethodResult r = run_method(Method::Gb, sim.obs, model_kernel(model), cfg, seed);
        cell.push_back({"gb", model_name, n, seed, score(r, model), r.seconds});
        std::cerr << "L=" << L << " h=" << h << " rep " << rep << ": W1 " << cell.back().scores.w1 << '\n';
      }
      double w = 0, ww = 0, s = 0, ss = 0;
      for (const auto& r : cell) {
        w += r.scores.w1;
        ww += r.scores.w1 * r.scores.w1;
        s += *r.scores.ise;
        ss += *r.scores.ise * *r.scores.ise;
      }
      const double k = static_cast<double>(cell.size());
      const auto sd = [k](double sum, double sq) {
        return k > 1 ? std::sqrt(std::max(0.0, (sq - sum * sum / k) / (k - 1))) : 0.0;
      };
      csv << L << ',' << h << ',' << cell.size() << ',' << w / k << ',' << sd(w, ww) << ',' << s / k << ','
          << sd(s, ss) << '\n';
      records.insert(records.end(), cell.begin(), cell.end());
    }
  }
  write_file(dir / "sweep.csv", csv.str());
  json arr = json::array();
  for (const auto& r : records) arr.push_back(record_json(r, c.timing));
  write_file(dir / "metrics.json", dump(arr));
  m.config() = {{"model", model_name}, {"layers", layers}, {"hidden", hidden}, {"n", n}, {"replicates", replicates},
                {"train", to_json(method_config(f).train)}};
  m.output(dir / "sweep.csv");
  m.output(dir / "metrics.json");
  m.write(dir);
  return 0;
}

int run(std::vector<std::string> args);

int cmd_rerun(const std::string& manifest_path, const std::string& out_dir) {
  const json m = json::parse(read_file(manifest_path));
  std::vector<std::string> args = m.at("argv").get<std::vector<std::string>>();
  if (!out_dir.empty()) {
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] == "--out-dir") {
        args[i + 1] = out_dir;
        replaced = true;
      }
    }
    if (!replaced) {
      args.push_back("--out-dir");
      args.push_back(out_dir);
    }
  }
  return run(args);
}

int run(std::vector<std::string> args) {
  g_argv = args;
  CLI::App app{"Mixing-density estimation: NPMLE, bootstrap, smoothing and generative bootstrap"};
  app.set_config("--config", "", "INI/TOML config file; command-line flags take precedence");
  app.require_subcommand(1);
  Common common;
  DataFlags data;
  FitFlags fit;

  auto* sim = app.add_subcommand("simulate", "Simulate a dataset from a model");
  add_common(sim, common);
  add_data_flags(sim, data);

  std::string method = "npmle";
  auto* fitc = app.add_subcommand("fit", "Fit an estimator");
  add_common(fitc, common);
  add_data_flags(fitc, data);
  add_fit_flags(fitc, fit);
  fitc->add_option("--method", method, "npmle, boot, smooth or gb")
      ->check(CLI::IsMember({"npmle", "boot", "smooth", "gb"}))
      ->capture_default_str();

  std::vector<std::string> fit_dirs;
  std::string eval_model;
  bool truth = false;
  auto* ev = app.add_subcommand("eval", "Score fit directories against the true prior");
  add_common(ev, common);
  ev->add_option("--fit-dir", fit_dirs, "Output directory of a fit (repeatable)");
  ev->add_option("--model", eval_model, "Model to score against (default: from the fit manifest)");
  ev->add_flag("--truth", truth, "Score the true prior against itself");

  std::string dataset, lps_method = "gb", family = "poisson";
  std::size_t folds = 10, draws = 500;
  auto* lps = app.add_subcommand("lps", "K-fold log predictive score on a count dataset");
  add_common(lps, common);
  add_fit_flags(lps, fit);
  lps->add_option("--dataset", dataset, "mortality, thailand, norberg or a CSV path")->required();
  lps->add_option("--method", lps_method, "boot or gb")->check(CLI::IsMember({"boot", "gb"}))->capture_default_str();
  lps->add_option("--folds", folds, "K")->capture_default_str();
  lps->add_option("--draws", draws, "B draws per fold fit")->capture_default_str();
  lps->add_option("--family", family, "Kernel family")->capture_default_str();

  std::string bench_model = "gmm", n_list = "1000", methods = "boot,gb", b_list = "100";
  double timeout = 0.0;
  auto* bench = app.add_subcommand("bench", "Wall-clock timing per method, n and B");
  add_common(bench, common);
  add_fit_flags(bench, fit);
  bench->add_option("--model", bench_model)->capture_default_str();
  bench->add_option("--n-list", n_list, "Comma-separated sample sizes")->capture_default_str();
  bench->add_option("--methods", methods, "Comma-separated methods")->capture_default_str();
  bench->add_option("--B-list", b_list, "Comma-separated B values")->capture_default_str();
  bench->add_option("--timeout", timeout, "Per-cell time limit in seconds (0 = none)");

  std::string sweep_model = "gmm", layer_list = "2", hidden_list = "50,250,500,750";
  std::size_t sweep_n = 1000, replicates = 1;
  auto* sweep = app.add_subcommand("sweep", "GB-NPMLE architecture sensitivity");
  add_common(sweep, common);
  add_fit_flags(sweep, fit);
  sweep->add_option("--model", sweep_model)->capture_default_str();
  sweep->add_option("--layers-list", layer_list)->capture_default_str();
  sweep->add_option("--hidden-list", hidden_list)->capture_default_str();
  sweep->add_option("--n", sweep_n)->capture_default_str();
  sweep->add_option("--replicates", replicates)->capture_default_str();

  std::string manifest_path, rerun_out;
  auto* rerun = app.add_subcommand("rerun", "Repeat the command recorded in a manifest");
  rerun->add_option("manifest", manifest_path, "manifest.json")->required()->check(CLI::ExistingFile);
  rerun->add_option("--out-dir", rerun_out, "Write to this directory instead");

  std::vector<const char*> argv;
  argv.push_back("mixdens");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (rerun->parsed()) return cmd_rerun(manifest_path, rerun_out);
    apply_threads(common);
    if (sim->parsed()) return cmd_simulate(common, data);
    if (fitc->parsed()) return cmd_fit(common, data, fit, method);
    if (ev->parsed()) return cmd_eval(common, fit_dirs, eval_model, truth);
    if (lps->parsed()) return cmd_lps(common, dataset, lps_method, folds, draws, family, fit);
    if (bench->parsed()) return cmd_bench(common, bench_model, n_list, methods, b_list, timeout, fit);
    if (sweep->parsed()) return cmd_sweep(common, sweep_model, layer_list, hidden_list, sweep_n, replicates, fit);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(std::vector<std::string>(argv + 1, argv + argc)); }
