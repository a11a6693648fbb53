#pragma once

#include "fedgia/baselines.hpp"
#include "fedgia/data.hpp"
#include "fedgia/fedgia.hpp"
#include "fedgia/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fedgia {

enum class Algorithm { FedAvg, FedProx, FedPD, FedGiADiag, FedGiAGram };

std::string_view to_string(Algorithm algo);
/// fedavg, fedprox, fedpd, fedgia-d, fedgia-g; plain "fedgia" means fedgia-g.
Algorithm parse_algorithm(std::string_view name);
/// The five trainers in reporting order.
std::vector<Algorithm> all_algorithms();

/// Per-loss trainer defaults.
struct DefaultSettings {
  double t = 0.15;
  double tol = 1e-7;
  double fedavg_a = 0.01;
  double fedprox_a = 0.001;
  double fedprox_mu = 1e-4;
  double fedpd_eta = 1.0;
  double fedpd_eta1_base = 0.05;
  int inner_iters = 5;
};

/// d: total samples, n: features, m: clients.
DefaultSettings default_settings(LossKind kind, long d, long n, int m);

struct RunSpec {
  Algorithm algorithm = Algorithm::FedGiAGram;
  int k0 = 1;
  double alpha = 1.0;
  /// Overrides of the per-loss defaults.
  std::optional<double> t;
  std::optional<double> tol;
  long max_iter = 10000;
  long max_cr = 0;
  std::uint64_t seed = 1;
  int workers = 1;
};

AlgoParams fedgia_params(const FederatedProblem& problem, const RunSpec& spec);
BaselineParams baseline_params(const FederatedProblem& problem, const RunSpec& spec);

/// Runs one trainer with default settings filled in. Baselines always use
/// full participation.
RunTrace run_algorithm(const FederatedProblem& problem, const RunSpec& spec);

struct ExperimentConfig {
  LossKind loss = LossKind::LeastSquares;
  /// Synthetic generator settings; the seed field is replaced per trial.
  SyntheticSpec synthetic;
  /// When set, the dataset is loaded once and re-partitioned per trial.
  std::optional<std::filesystem::path> data_path;
  DataFormat data_format = DataFormat::Csv;
  bool data_skip_header = false;
  int data_m = 128;

  std::vector<Algorithm> algorithms = all_algorithms();
  int trials = 20;
  std::vector<int> k0_list{1};
  std::vector<double> alpha_list{0.5};
  std::uint64_t seed = 1;
  std::optional<double> t;
  std::optional<double> tol;
  long max_iter = 10000;
  long max_cr = 0;
  int workers = 1;
  /// Empty: nothing is written.
  std::filesystem::path out_dir;

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat `key = value` text, `#` starts a comment. See README for the keys.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct SummaryRow {
  std::string algorithm;
  int k0 = 1;
  double alpha = 1.0;
  int trials = 0;
  double obj_mean = 0.0;
  double cr_mean = 0.0;
  double time_mean_s = 0.0;
  double err_mean = 0.0;
};

/// Arithmetic means over the final rows of the given traces.
SummaryRow summarize(std::string algorithm, int k0, double alpha, std::span<const RunTrace> traces);

struct RunRecord {
  Algorithm algorithm;
  int k0;
  double alpha;
  int trial;
  std::uint64_t instance_seed;
  /// Empty when the run threw before producing a trace.
  std::optional<RunTrace> trace;
  std::string failure;

  bool failed() const { return !trace || trace->status == RunStatus::Diverged; }
};

struct ExperimentResult {
  std::vector<SummaryRow> summary;
  std::vector<RunRecord> runs;
  int failures = 0;

  /// More than 10% of runs failed.
  bool failed() const { return failures * 10 > static_cast<int>(runs.size()); }
};

/// Seed of trial `trial`'s problem instance; shared by every algorithm.
std::uint64_t instance_seed(std::uint64_t master_seed, int trial);

/// Builds trial `trial`'s problem instance.
FederatedProblem make_instance(const ExperimentConfig& config, int trial);

ExperimentResult run_experiment(const ExperimentConfig& config);

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace fedgia
