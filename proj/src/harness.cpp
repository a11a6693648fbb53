#include "fedgia/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <cctype>
#include <limits>
#include <map>
#include <sstream>

namespace fedgia {

std::string_view to_string(Algorithm algo) {
  switch (algo) {
    case Algorithm::FedAvg: return "fedavg";
    case Algorithm::FedProx: return "fedprox";
    case Algorithm::FedPD: return "fedpd";
    case Algorithm::FedGiADiag: return "fedgia-d";
    case Algorithm::FedGiAGram: return "fedgia-g";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "fedavg") return Algorithm::FedAvg;
  if (name == "fedprox") return Algorithm::FedProx;
  if (name == "fedpd") return Algorithm::FedPD;
  if (name == "fedgia-d") return Algorithm::FedGiADiag;
  if (name == "fedgia-g" || name == "fedgia") return Algorithm::FedGiAGram;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

std::vector<Algorithm> all_algorithms() {
  return {Algorithm::FedAvg, Algorithm::FedProx, Algorithm::FedPD, Algorithm::FedGiADiag,
          Algorithm::FedGiAGram};
}

DefaultSettings default_settings(LossKind kind, long d, long n, int m) {
  DefaultSettings s;
  if (kind == LossKind::LeastSquares) return s;
  const double dd = static_cast<double>(d);
  s.t = std::max(0.025, 4.0 * std::log(dd) / static_cast<double>(n));
  s.tol = 5.0 / dd * 1e-6;
  s.fedavg_a = 0.5 * dd / m;
  s.fedprox_a = 0.5 * dd / m;
  s.fedpd_eta = std::max(400.0, dd / 50.0);
  s.fedpd_eta1_base = 0.5 * dd / m;
  return s;
}

namespace {

DefaultSettings defaults_for(const FederatedProblem& problem) {
  return default_settings(problem.loss().kind, static_cast<long>(problem.total_samples()),
                          static_cast<long>(problem.n()), problem.m());
}

bool is_fedgia(Algorithm a) { return a == Algorithm::FedGiADiag || a == Algorithm::FedGiAGram; }

}  // namespace

AlgoParams fedgia_params(const FederatedProblem& problem, const RunSpec& spec) {
  const auto defaults = defaults_for(problem);
  AlgoParams p;
  p.k0 = spec.k0;
  p.t = spec.t.value_or(defaults.t);
  p.alpha = spec.alpha;
  p.variant = spec.algorithm == Algorithm::FedGiADiag ? CurvatureVariant::Diagonal
                                                      : CurvatureVariant::Gram;
  p.tol = spec.tol.value_or(defaults.tol);
  p.max_iter = spec.max_iter;
  p.max_cr = spec.max_cr;
  p.seed = spec.seed;
  p.workers = spec.workers;
  return p;
}

BaselineParams baseline_params(const FederatedProblem& problem, const RunSpec& spec) {
  const auto defaults = defaults_for(problem);
  BaselineParams p;
  switch (spec.algorithm) {
    case Algorithm::FedAvg:
      p.kind = BaselineKind::FedAvg;
      p.step_base = defaults.fedavg_a;
      break;
    case Algorithm::FedProx:
      p.kind = BaselineKind::FedProx;
      p.step_base = defaults.fedprox_a;
      break;
    case Algorithm::FedPD:
      p.kind = BaselineKind::FedPD;
      break;
    default:
      throw std::invalid_argument("not a baseline algorithm");
  }
  p.prox_mu = defaults.fedprox_mu;
  p.inner_iters = defaults.inner_iters;
  p.eta = defaults.fedpd_eta;
  p.eta1_base = defaults.fedpd_eta1_base;
  p.k0 = spec.k0;
  p.alpha = 1.0;
  p.tol = spec.tol.value_or(defaults.tol);
  p.max_iter = spec.max_iter;
  p.max_cr = spec.max_cr;
  p.seed = spec.seed;
  p.workers = spec.workers;
  return p;
}

RunTrace run_algorithm(const FederatedProblem& problem, const RunSpec& spec) {
  if (is_fedgia(spec.algorithm)) return run(problem, fedgia_params(problem, spec));
  return run_baseline(problem, baseline_params(problem, spec));
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw ConfigError("trials", "must be >= 1");
  if (algorithms.empty()) throw ConfigError("algorithms", "list is empty");
  if (k0_list.empty()) throw ConfigError("k0", "list is empty");
  if (alpha_list.empty()) throw ConfigError("alpha", "list is empty");
  for (const int k0 : k0_list)
    if (k0 < 1) throw ConfigError("k0", "values must be >= 1");
  for (const double a : alpha_list)
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("alpha", "values must lie in (0, 1]");
  if (max_iter < 1) throw ConfigError("max_iter", "must be >= 1");
  if (max_cr < 0) throw ConfigError("max_cr", "must be >= 0");
  if (workers < 1) throw ConfigError("workers", "must be >= 1");
  if (t && !(*t > 0.0)) throw ConfigError("t", "must be > 0");
  if (tol && !(*tol > 0.0)) throw ConfigError("tol", "must be > 0");
  if (!data_path) {
    try {
      synthetic.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("synthetic", e.what());
    }
  } else if (data_m < 1) {
    throw ConfigError("data.m", "must be >= 1");
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <class T>
T parse_value(const std::string& key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end)
    throw ConfigError(key, "cannot parse '" + std::string(text) + "'");
  return value;
}

bool parse_bool(const std::string& key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + std::string(text) + "'");
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(std::string(line), "line " + std::to_string(line_no) + " has no '='");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));

    try {
      if (key == "loss") {
        cfg.loss = parse_loss_kind(value);
      } else if (key == "synthetic.m") {
        cfg.synthetic.m = parse_value<int>(key, value);
      } else if (key == "synthetic.n") {
        cfg.synthetic.n = parse_value<int>(key, value);
      } else if (key == "synthetic.dmin") {
        cfg.synthetic.d_min = parse_value<int>(key, value);
      } else if (key == "synthetic.dmax") {
        cfg.synthetic.d_max = parse_value<int>(key, value);
      } else if (key == "data") {
        cfg.data_path = std::filesystem::path(std::string(value));
      } else if (key == "data.format") {
        cfg.data_format = parse_data_format(value);
      } else if (key == "data.skip_header") {
        cfg.data_skip_header = parse_bool(key, value);
      } else if (key == "data.m") {
        cfg.data_m = parse_value<int>(key, value);
      } else if (key == "algorithms") {
        cfg.algorithms.clear();
        for (const auto item : split_list(value)) cfg.algorithms.push_back(parse_algorithm(item));
      } else if (key == "trials") {
        cfg.trials = parse_value<int>(key, value);
      } else if (key == "k0") {
        cfg.k0_list.clear();
        for (const auto item : split_list(value)) cfg.k0_list.push_back(parse_value<int>(key, item));
      } else if (key == "alpha") {
        cfg.alpha_list.clear();
        for (const auto item : split_list(value))
          cfg.alpha_list.push_back(parse_value<double>(key, item));
      } else if (key == "seed") {
        cfg.seed = parse_value<std::uint64_t>(key, value);
      } else if (key == "t") {
        cfg.t = parse_value<double>(key, value);
      } else if (key == "tol") {
        cfg.tol = parse_value<double>(key, value);
      } else if (key == "max_iter") {
        cfg.max_iter = parse_value<long>(key, value);
      } else if (key == "max_cr") {
        cfg.max_cr = parse_value<long>(key, value);
      } else if (key == "workers") {
        cfg.workers = parse_value<int>(key, value);
      } else if (key == "out") {
        cfg.out_dir = std::filesystem::path(std::string(value));
      } else {
        throw ConfigError(key, "unknown key");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(key, e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

SummaryRow summarize(std::string algorithm, int k0, double alpha, std::span<const RunTrace> traces) {
  if (traces.empty()) throw std::invalid_argument("summarize: no traces");
  SummaryRow row;
  row.algorithm = std::move(algorithm);
  row.k0 = k0;
  row.alpha = alpha;
  row.trials = static_cast<int>(traces.size());
  for (const auto& t : traces) {
    if (t.rows.empty()) throw std::invalid_argument("summarize: trace without rows");
    const auto& last = t.final_row();
    row.obj_mean += last.objective;
    row.cr_mean += static_cast<double>(last.cr);
    row.time_mean_s += last.elapsed_s;
    row.err_mean += last.error;
  }
  const double count = static_cast<double>(traces.size());
  row.obj_mean /= count;
  row.cr_mean /= count;
  row.time_mean_s /= count;
  row.err_mean /= count;
  return row;
}

std::uint64_t instance_seed(std::uint64_t master_seed, int trial) {
  return mix_seed(master_seed, static_cast<std::uint64_t>(trial));
}

namespace {

FederatedProblem build_instance(const ExperimentConfig& config, int trial,
                                const LoadedData* loaded) {
  const auto seed = instance_seed(config.seed, trial);
  const auto loss = LossModel::with_defaults(config.loss);
  if (loaded) return partition_dataset(loaded->features, loaded->labels, config.data_m, seed, loss);
  auto spec = config.synthetic;
  spec.seed = seed;
  return generate_linear_noniid(spec, loss);
}

LoadedData load_for(const ExperimentConfig& config) {
  LoadOptions opts;
  opts.skip_header = config.data_skip_header;
  LoadedData data = load_dataset(*config.data_path, config.data_format, opts);
  if (config.loss != LossKind::LeastSquares) normalize_logistic_labels(data.labels);
  return data;
}

std::string trace_file_name(Algorithm algo, int k0, double alpha, int trial) {
  return std::string(to_string(algo)) + "_k0-" + std::to_string(k0) + "_alpha-" +
         format_double(alpha) + "_trial-" + std::to_string(trial) + ".csv";
}

}  // namespace

FederatedProblem make_instance(const ExperimentConfig& config, int trial) {
  if (config.data_path) {
    const auto data = load_for(config);
    return build_instance(config, trial, &data);
  }
  return build_instance(config, trial, nullptr);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::optional<LoadedData> loaded;
  if (config.data_path) loaded = load_for(config);

  ExperimentResult result;
  for (int trial = 0; trial < config.trials; ++trial) {
    const FederatedProblem problem =
        build_instance(config, trial, loaded ? &*loaded : nullptr);
    const auto seed = instance_seed(config.seed, trial);
    for (const auto algo : config.algorithms) {
      for (const int k0 : config.k0_list) {
        for (const double alpha : config.alpha_list) {
          RunSpec spec;
          spec.algorithm = algo;
          spec.k0 = k0;
          spec.alpha = alpha;
          spec.t = config.t;
          spec.tol = config.tol;
          spec.max_iter = config.max_iter;
          spec.max_cr = config.max_cr;
          spec.seed = mix_seed(seed, 0x5e1ec7);
          spec.workers = config.workers;

          RunRecord rec{algo, k0, alpha, trial, seed, std::nullopt, {}};
          try {
            rec.trace = run_algorithm(problem, spec);
            if (rec.trace->rows.empty()) rec.failure = "no rounds recorded";
          } catch (const std::exception& e) {
            rec.trace.reset();
            rec.failure = e.what();
          }
          if (rec.trace && rec.trace->status == RunStatus::Diverged) rec.failure = "diverged";
          if (rec.failed()) ++result.failures;
          result.runs.push_back(std::move(rec));
        }
      }
    }
  }

  // Summary rows in (algorithm, k0, alpha) order; failed runs excluded.
  for (const auto algo : config.algorithms) {
    for (const int k0 : config.k0_list) {
      for (const double alpha : config.alpha_list) {
        std::vector<RunTrace> ok;
        for (const auto& rec : result.runs)
          if (rec.algorithm == algo && rec.k0 == k0 && rec.alpha == alpha && !rec.failed())
            ok.push_back(*rec.trace);
        if (ok.empty()) {
          SummaryRow row;
          row.algorithm = std::string(to_string(algo));
          row.k0 = k0;
          row.alpha = alpha;
          row.obj_mean = row.cr_mean = row.time_mean_s = row.err_mean =
              std::numeric_limits<double>::quiet_NaN();
          result.summary.push_back(row);
        } else {
          result.summary.push_back(summarize(std::string(to_string(algo)), k0, alpha, ok));
        }
      }
    }
  }

  if (!config.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir / "traces");
    {
      std::ofstream out(config.out_dir / "summary.csv", std::ios::binary);
      if (!out) throw std::runtime_error("cannot write summary in '" + config.out_dir.string() + "'");
      write_summary_csv(out, result.summary);
    }
    std::ofstream runs(config.out_dir / "runs.csv", std::ios::binary);
    runs << "algorithm,k0,alpha,trial,instance_seed,status,objective,cr,error,elapsed_s,failure\n";
    for (const auto& rec : result.runs) {
      runs << to_string(rec.algorithm) << ',' << rec.k0 << ',' << format_double(rec.alpha) << ','
           << rec.trial << ',' << rec.instance_seed << ',';
      if (rec.trace && !rec.trace->rows.empty()) {
        const auto& last = rec.trace->final_row();
        runs << to_string(rec.trace->status) << ',' << format_double(last.objective) << ','
             << last.cr << ',' << format_double(last.error) << ',' << format_double(last.elapsed_s);
        std::ofstream tf(config.out_dir / "traces" /
                             trace_file_name(rec.algorithm, rec.k0, rec.alpha, rec.trial),
                         std::ios::binary);
        write_trace_csv(tf, *rec.trace);
      } else {
        runs << "error,,,,";
      }
      std::string failure = rec.failure;
      std::replace(failure.begin(), failure.end(), ',', ';');
      runs << ',' << failure << '\n';
    }
  }
  return result;
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "algorithm,k0,alpha,trials,obj_mean,cr_mean,time_mean_s,err_mean\n";
  for (const auto& r : rows) {
    out << r.algorithm << ',' << r.k0 << ',' << format_double(r.alpha) << ',' << r.trials << ','
        << format_double(r.obj_mean) << ',' << format_double(r.cr_mean) << ','
        << format_double(r.time_mean_s) << ',' << format_double(r.err_mean) << '\n';
  }
}

}  // namespace fedgia
