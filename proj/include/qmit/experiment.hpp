#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmit/data.hpp"
#include "qmit/train.hpp"

namespace qmit {

/// Config file problem; carries the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string benchmark = "MNIST-4";  // or "synthetic"
  std::string images;                 // single pool, split disjointly
  std::string labels;
  std::string test_images;  // optional separate test pool
  std::string test_labels;
  std::size_t train_cap = 1000;
  std::size_t test_cap = 500;
  std::optional<std::uint64_t> seed;  // defaults to the experiment seed
  // synthetic only
  int classes = 4;
  std::size_t per_class = 100;
  std::size_t test_per_class = 50;
  double separation = 3.0;
};

struct AblationGrid {
  std::vector<Design> designs;
  std::vector<int> steps;
  std::vector<double> alpha_fb;
  std::vector<int> layers;  // optional layer sweep
};

struct TraceConfig {
  std::string channel = "depolarizing";  // pauli, depolarizing, amplitude_damping
  int n = 4;
  int operations = 500;
  double alpha = 2.0;
  double rate = 0.01;   // depolarizing rate, or upper rate bound for pauli
  double gamma = 0.01;  // amplitude damping probability
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  DataConfig data;
  TrainConfig train;
  int repeats = 1;
  std::optional<AblationGrid> ablation;
  TraceConfig trace;
  nlohmann::json source;  // the document as read
};

/// Parses and validates; unknown keys and bad values raise ConfigError naming the field.
/// Relative paths are resolved against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved config, defaults included.
nlohmann::json resolved_json(const ExperimentConfig& cfg);

Split load_datasets(const ExperimentConfig& cfg);

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double x);

/// '#' comment lines with the code version and the resolved config.
void write_provenance(std::ostream& out, const ExperimentConfig& cfg);

/// QMIT_THREADS, if set, overrides the config's thread count.
void apply_thread_env(ExperimentConfig& cfg);

void run_train_command(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
void run_ablation_command(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
void run_trace_command(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// D_alpha(rho_i || I/2^n) for i = 0..operations under the configured channel.
std::vector<double> divergence_trace(const TraceConfig& cfg);

const char* code_version();

}  // namespace qmit
