#pragma once

#include "fedgia/losses.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedgia {

struct SyntheticSpec {
  int m = 128;
  int n = 100;
  int d_min = 50;
  int d_max = 150;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Clients sharing one feature dimension and one loss.
class FederatedProblem {
 public:
  FederatedProblem(std::vector<ClientDataset> clients, LossModel loss);

  const std::vector<ClientDataset>& clients() const { return clients_; }
  const ClientDataset& client(std::size_t i) const { return clients_[i]; }
  const LossModel& loss() const { return loss_; }
  int m() const { return static_cast<int>(clients_.size()); }
  Eigen::Index n() const { return clients_.front().dim(); }
  /// Total sample count across clients.
  Eigen::Index total_samples() const;

  /// Same data under a different loss (labels are re-validated).
  FederatedProblem with_loss(LossModel loss) const { return {clients_, loss}; }

  /// f(x) = (1/m) sum_i f_i(x).
  double objective(const Vec& x) const;
  /// grad f(x) = (1/m) sum_i grad f_i(x), summed in client order.
  Vec gradient(const Vec& x) const;

 private:
  std::vector<ClientDataset> clients_;
  LossModel loss_;
};

/// Non-i.i.d. regression data: pooled samples drawn by thirds from N(0,1),
/// Student-t(5) and U[-5,5], shuffled, then cut into m contiguous parts.
FederatedProblem generate_linear_noniid(const SyntheticSpec& spec,
                                        LossModel loss = LossModel::least_squares());

/// Random permutation of rows followed by m near-equal contiguous groups.
FederatedProblem partition_dataset(const Mat& features, const Vec& labels, int m,
                                   std::uint64_t seed, LossModel loss);

enum class DataFormat { Csv, Libsvm };

DataFormat parse_data_format(std::string_view name);

struct LoadOptions {
  bool skip_header = false;
  /// LIBSVM feature count; 0 means the largest index seen.
  Eigen::Index n_features = 0;
};

struct LoadedData {
  Mat features;
  Vec labels;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

LoadedData load_dataset(const std::filesystem::path& path, DataFormat format,
                        const LoadOptions& options = {});
LoadedData parse_csv(std::string_view text, const LoadOptions& options = {});
LoadedData parse_libsvm(std::string_view text, const LoadOptions& options = {});

/// Maps {-1,+1} labels to {0,1} for logistic losses. Any other value throws.
/// Returns true when a remap happened.
bool normalize_logistic_labels(Vec& labels);

/// Writes one client's rows as CSV, label in the last column.
void write_client_csv(const std::filesystem::path& path, const ClientDataset& client);

/// 64-bit FNV-1a over the raw bytes of every client's features and labels.
std::uint64_t fingerprint(const FederatedProblem& problem);

}  // namespace fedgia
