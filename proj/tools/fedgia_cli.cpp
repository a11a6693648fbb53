#include "fedgia/harness.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace fedgia;

namespace {

constexpr int kUsageError = 2;
constexpr int kExperimentFailed = 1;
constexpr std::uint64_t kSelectionStream = 0x5e1ec7;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int parse_int_token(const std::string& key, const std::string& text) {
  int value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end)
    throw UsageError("--synthetic " + key + ": cannot parse '" + text + "'");
  return value;
}

/// Tokens of the form key=value with keys m, n, dmin, dmax.
SyntheticSpec parse_synthetic(const std::vector<std::string>& tokens, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.seed = seed;
  for (const auto& token : tokens) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw UsageError("--synthetic expects key=value, got '" + token + "'");
    const std::string key = token.substr(0, eq);
    const int value = parse_int_token(key, token.substr(eq + 1));
    if (key == "m")
      spec.m = value;
    else if (key == "n")
      spec.n = value;
    else if (key == "dmin")
      spec.d_min = value;
    else if (key == "dmax")
      spec.d_max = value;
    else
      throw UsageError("--synthetic: unknown key '" + key + "'");
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--synthetic: ") + e.what());
  }
  return spec;
}

/// A gen-data directory: clients are taken as written, no re-partitioning.
FederatedProblem load_client_directory(const fs::path& dir, LossModel loss) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) throw UsageError("no manifest.csv in '" + dir.string() + "'");
  std::string line;
  std::getline(manifest, line);
  std::vector<ClientDataset> clients;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, file;
    std::getline(fields, id, ',');
    std::getline(fields, file, ',');
    LoadedData data = load_dataset(dir / file, DataFormat::Csv);
    if (loss.kind != LossKind::LeastSquares) normalize_logistic_labels(data.labels);
    clients.emplace_back(std::move(data.features), std::move(data.labels));
  }
  if (clients.empty()) throw UsageError("manifest in '" + dir.string() + "' lists no clients");
  return FederatedProblem(std::move(clients), loss);
}

struct GenDataOptions {
  int m = 128;
  int n = 100;
  int d_min = 50;
  int d_max = 150;
  std::uint64_t seed = 1;
  std::string loss = "ls";
  std::string out;
};

int gen_data(const GenDataOptions& o) {
  SyntheticSpec spec{o.m, o.n, o.d_min, o.d_max, o.seed};
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto problem = generate_linear_noniid(spec, LossModel::with_defaults(parse_loss_kind(o.loss)));

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory '" + o.out + "'");
  std::ofstream manifest(dir / "manifest.csv", std::ios::binary);
  if (!manifest) throw UsageError("cannot write in '" + o.out + "'");
  manifest << "client,file,rows,features\n";
  for (int i = 0; i < problem.m(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "client_%03d.csv", i);
    const auto& c = problem.client(static_cast<std::size_t>(i));
    try {
      write_client_csv(dir / name, c);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    manifest << i << ',' << name << ',' << c.samples() << ',' << c.dim() << '\n';
  }
  if (!manifest.flush()) throw UsageError("cannot write in '" + o.out + "'");
  std::cout << "wrote " << problem.m() << " clients to " << dir.string() << '\n';
  return 0;
}

struct RunOptions {
  std::string algo = "fedgia-g";
  std::string loss = "ls";
  int k0 = 1;
  double alpha = 1.0;
  std::optional<double> t;
  std::optional<std::string> variant;
  std::optional<double> tol;
  std::uint64_t seed = 1;
  std::string data;
  std::string data_format = "csv";
  int data_m = 128;
  bool skip_header = false;
  std::vector<std::string> synthetic;
  std::string out;
  long max_iter = 10000;
  long max_cr = 0;
  int workers = 1;
  bool verbose = false;
};

int run_single(const RunOptions& o) {
  Algorithm algo;
  try {
    algo = parse_algorithm(o.algo);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (o.variant) {
    if (algo != Algorithm::FedGiADiag && algo != Algorithm::FedGiAGram)
      throw UsageError("--variant only applies to fedgia trainers");
    if (*o.variant == "gram")
      algo = Algorithm::FedGiAGram;
    else if (*o.variant == "diag")
      algo = Algorithm::FedGiADiag;
    else
      throw UsageError("--variant must be gram or diag");
  }
  if (!o.data.empty() && !o.synthetic.empty())
    throw UsageError("--data and --synthetic are mutually exclusive");

  const auto loss = LossModel::with_defaults(parse_loss_kind(o.loss));
  std::optional<FederatedProblem> problem;
  if (!o.data.empty()) {
    if (!fs::exists(o.data)) throw UsageError("no such dataset '" + o.data + "'");
    if (fs::is_directory(o.data)) {
      problem = load_client_directory(o.data, loss);
    } else {
      LoadOptions opts;
      opts.skip_header = o.skip_header;
      LoadedData data = load_dataset(o.data, parse_data_format(o.data_format), opts);
      if (loss.kind != LossKind::LeastSquares) normalize_logistic_labels(data.labels);
      problem = partition_dataset(data.features, data.labels, o.data_m, o.seed, loss);
    }
  } else {
    problem = generate_linear_noniid(parse_synthetic(o.synthetic, o.seed), loss);
  }

  RunSpec spec;
  spec.algorithm = algo;
  spec.k0 = o.k0;
  spec.alpha = o.alpha;
  spec.t = o.t;
  spec.tol = o.tol;
  spec.max_iter = o.max_iter;
  spec.max_cr = o.max_cr;
  spec.seed = mix_seed(o.seed, kSelectionStream);
  spec.workers = o.workers;

  RunTrace trace;
  try {
    trace = run_algorithm(*problem, spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  if (o.verbose)
    for (const auto& row : trace.rows)
      std::clog << "round " << row.tau << " k=" << row.k << " objective=" << format_double(row.objective)
                << " error=" << format_double(row.error) << '\n';
  if (!o.out.empty()) {
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw UsageError("cannot write trace '" + o.out + "'");
    write_trace_csv(out, trace);
  }
  const auto& last = trace.final_row();
  std::cout << "status=" << to_string(trace.status) << " objective=" << format_double(last.objective)
            << " error=" << format_double(last.error) << " cr=" << last.cr
            << " time=" << format_double(last.elapsed_s) << '\n';
  return exit_code(trace.status);
}

struct ExperimentOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
};

int run_config(const ExperimentOptions& o, bool force_all_algorithms) {
  ExperimentConfig config;
  try {
    config = load_config(o.config);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (force_all_algorithms) config.algorithms = all_algorithms();
  if (o.seed) config.seed = *o.seed;
  if (!o.out.empty()) config.out_dir = o.out;
  if (o.workers) config.workers = *o.workers;

  const auto result = run_experiment(config);
  write_summary_csv(std::cout, result.summary);
  for (const auto& rec : result.runs)
    if (rec.failed())
      std::cerr << "failed: " << to_string(rec.algorithm) << " k0=" << rec.k0
                << " alpha=" << format_double(rec.alpha) << " trial=" << rec.trial << ": "
                << rec.failure << '\n';
  if (result.failed()) {
    std::cerr << "error: " << result.failures << " of " << result.runs.size() << " runs failed\n";
    return kExperimentFailed;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated training with FedGiA and baseline trainers"};
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic non-i.i.d. dataset, one CSV per client");
  gen_cmd->add_option("--m", gen.m, "Number of clients")->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "Feature dimension")->capture_default_str();
  gen_cmd->add_option("--dmin", gen.d_min, "Smallest client sample count")->capture_default_str();
  gen_cmd->add_option("--dmax", gen.d_max, "Largest client sample count")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  gen_cmd->add_option("--loss", gen.loss, "ls, logl2 or lognc (logistic losses get 0/1 labels)")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Train one algorithm and write its trace");
  run_cmd->add_option("--algo", run.algo, "fedavg, fedprox, fedpd, fedgia-d, fedgia-g (fedgia = fedgia-g)")
      ->capture_default_str();
  run_cmd->add_option("--loss", run.loss, "ls, logl2 or lognc")->capture_default_str();
  run_cmd->add_option("--k0", run.k0, "Aggregation period")->capture_default_str();
  run_cmd->add_option("--alpha", run.alpha, "Fraction of clients selected per round")->capture_default_str();
  run_cmd->add_option("--t", run.t, "Penalty multiplier, sigma = t r / m");
  run_cmd->add_option("--variant", run.variant, "Curvature bound for fedgia: gram or diag");
  run_cmd->add_option("--tol", run.tol, "Stop when ||grad f||^2 <= tol");
  run_cmd->add_option("--seed", run.seed, "Seed for data and client selection")->capture_default_str();
  run_cmd->add_option("--data", run.data, "Dataset file, or a directory written by gen-data");
  run_cmd->add_option("--data-format", run.data_format, "csv or libsvm")->capture_default_str();
  run_cmd->add_option("--data-m", run.data_m, "Clients to split a dataset file into")->capture_default_str();
  run_cmd->add_flag("--skip-header", run.skip_header, "Skip the first line of a CSV dataset");
  run_cmd->add_option("--synthetic", run.synthetic, "Synthetic problem, e.g. m=32 n=50 dmin=50 dmax=150")
      ->expected(1, 4);
  run_cmd->add_option("--out", run.out, "Trace CSV path");
  run_cmd->add_option("--max-iter", run.max_iter, "Iteration cap")->capture_default_str();
  run_cmd->add_option("--max-cr", run.max_cr, "Communication-round cap, 0 for none")->capture_default_str();
  run_cmd->add_option("--workers", run.workers, "Worker threads for client updates")->capture_default_str();
  run_cmd->add_flag("-v,--verbose", run.verbose, "Log one line per aggregation round to stderr");

  ExperimentOptions compare;
  auto* compare_cmd = app.add_subcommand("compare", "Run all five trainers over a config's instances");
  ExperimentOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a config's algorithm, k0 and alpha grid");
  for (auto [cmd, opts] : {std::pair{compare_cmd, &compare}, std::pair{sweep_cmd, &sweep}}) {
    cmd->add_option("--config", opts->config, "Experiment config file")->required();
    cmd->add_option("--seed", opts->seed, "Override the config's master seed");
    cmd->add_option("--out", opts->out, "Override the config's output directory");
    cmd->add_option("--workers", opts->workers, "Override the config's worker count");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*gen_cmd) return gen_data(gen);
    if (*run_cmd) return run_single(run);
    if (*compare_cmd) return run_config(compare, true);
    return run_config(sweep, false);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExperimentFailed;
  }
}
