#pragma once

#include "fedgia/data.hpp"
#include "fedgia/random.hpp"

#include <filesystem>
#include <string>

namespace fedgia::testing {

inline Mat normal_matrix(Sampler& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Mat a(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = scale * rng.normal();
  return a;
}

inline Vec normal_vector(Sampler& rng, Eigen::Index n, double scale = 1.0) {
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

/// Labels are 0/1 for logistic losses, normal otherwise.
inline ClientDataset random_client(Sampler& rng, const LossModel& loss, Eigen::Index d, Eigen::Index n) {
  Vec labels(d);
  for (Eigen::Index j = 0; j < d; ++j)
    labels[j] = loss.is_logistic() ? static_cast<double>(rng.below(2)) : rng.normal();
  return {normal_matrix(rng, d, n), labels};
}

inline FederatedProblem random_problem(Sampler& rng, const LossModel& loss, int m, Eigen::Index n,
                                       int d_min, int d_max) {
  std::vector<ClientDataset> clients;
  for (int i = 0; i < m; ++i) clients.push_back(random_client(rng, loss, rng.integer(d_min, d_max), n));
  return {std::move(clients), loss};
}

/// f_i(x) = 0.5 ||x - c_i||^2 written as least squares with A = I and the
/// sample count folded into the design (A = sqrt(n) I, b = sqrt(n) c).
inline ClientDataset centered_quadratic(const Vec& c) {
  const auto n = c.size();
  const double s = std::sqrt(static_cast<double>(n));
  return {s * Mat::Identity(n, n), s * c};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fedgia_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fedgia::testing
