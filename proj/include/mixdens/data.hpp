#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixdens/kernels.hpp"
#include "mixdens/metrics.hpp"

namespace mixdens {

enum class SimModel { GMM, GaMM, PMM, GMMtri, BBM };

SimModel sim_model_from_name(std::string_view name);  // gmm, gamm, pmm, gmm-tri, bbm
std::string_view name(SimModel m);
std::vector<SimModel> all_sim_models();

/// Kernel of the model's observation density.
KernelModel model_kernel(SimModel m);

/// Range holding all but a negligible tail of the true prior; used for W1 and ISE.
struct EvalRange {
  double lo, hi;
};
EvalRange eval_range(SimModel m);
std::vector<double> eval_grid(SimModel m, std::size_t points = 2001);

struct Simulation {
  Observations obs;
  std::vector<double> theta;
};

/// theta_i from the true prior, y_i | theta_i from the kernel.
Simulation simulate(SimModel m, std::size_t n, std::uint64_t seed);

double true_prior_pdf(SimModel m, double t);
double true_prior_cdf(SimModel m, double t);
DensityOnGrid true_prior_density(SimModel m, std::span<const double> grid);
std::vector<double> true_prior_cdf(SimModel m, std::span<const double> grid);

struct CountDataset {
  std::string name;
  std::vector<double> y;

  std::size_t n() const { return y.size(); }
  Observations observations() const { return {y}; }
};

/// CSV with a header: either "y" (one count per row) or "y,freq" (expanded).
CountDataset load_counts(const std::filesystem::path& path);
CountDataset parse_counts(std::string_view text, std::string name = "");

/// Directory holding the vendored datasets: $MIXDENS_DATA_DIR, else the source tree's data/.
std::filesystem::path data_dir();
/// "mortality", "thailand" or "norberg" resolve to data_dir()/<name>.csv; any other value is a path.
CountDataset load_dataset(std::string_view name_or_path);

}  // namespace mixdens
