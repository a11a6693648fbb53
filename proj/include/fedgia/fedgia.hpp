#pragma once

#include "fedgia/data.hpp"
#include "fedgia/losses.hpp"
#include "fedgia/random.hpp"
#include "fedgia/trace.hpp"

#include <Eigen/Cholesky>

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

namespace fedgia {

struct AlgoParams {
  int k0 = 1;
  /// sigma = t * r / m.
  double t = 0.15;
  /// Fraction of clients running the inexact ADMM update each round.
  double alpha = 1.0;
  CurvatureVariant variant = CurvatureVariant::Gram;
  /// Stop once ||grad f(x)||^2 <= tol at an aggregation.
  double tol = 1e-7;
  long max_iter = 10000;
  /// Stop once this many communication rounds are spent; 0 disables the cap.
  long max_cr = 0;
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const;
};

/// Cached inverse of (H/m + sigma I): a Cholesky factor for Gram, the
/// reciprocal scalar for Diagonal.
class SolveCache {
 public:
  SolveCache() = default;
  SolveCache(const CurvatureBound& h, int m, double sigma);

  Vec solve(const Vec& rhs) const;

 private:
  std::variant<double, Eigen::LLT<Mat>> factor_ = 0.0;
};

struct ClientState {
  Vec x;
  Vec pi;
  Vec z;
  CurvatureBound h;
  SolveCache solve;
  /// (1/m) grad f_i at the current global parameter.
  Vec g_bar;
  /// f_i at the current global parameter, filled with g_bar.
  double f_at_global = 0.0;
};

struct ServerState {
  Vec x_global;
  long k = 0;
  /// Aggregations performed so far.
  long tau = 0;
  long cr = 0;
  /// Sorted ids of the clients running the ADMM update this round.
  std::vector<int> selected;
  double sigma = 0.0;
  double r = 0.0;
};

struct FedGiAState {
  ServerState server;
  std::vector<ClientState> clients;
};

FedGiAState initialize(const FederatedProblem& problem, const AlgoParams& params);

/// Mean of the uploaded vectors, accumulated in index order.
Vec aggregate(std::span<const Vec> z_list);
Vec aggregate(const std::vector<ClientState>& clients);

/// round(alpha * m), halves rounded up, at least 1.
int selection_size(int m, double alpha);
/// Uniform sample without replacement of selection_size(m, alpha) ids, sorted.
std::vector<int> select_clients(int m, double alpha, Sampler& rng);

/// Inexact ADMM update: x, then pi, then z.
void local_admm_step(ClientState& client, const Vec& x_global, double sigma);
/// Assignment update for clients outside the selection.
void local_gd_hold(ClientState& client, const Vec& x_global, double sigma);

void refresh_gradients(std::vector<ClientState>& clients, const Vec& x_global,
                       const FederatedProblem& problem, int workers = 1);

/// sum_i [ f_i(x_i)/m + <x_i - x, pi_i> + sigma/2 ||x_i - x||^2 ].
double augmented_lagrangian(const Vec& x_global, const std::vector<ClientState>& clients,
                            double sigma, const FederatedProblem& problem, int workers = 1);
double augmented_lagrangian(const ServerState& server, const std::vector<ClientState>& clients,
                            const FederatedProblem& problem);

struct StationarityResiduals {
  /// max_i ||grad f_i(x_i)/m + pi_i||
  double grad_res = 0.0;
  /// max_i ||x_i - x||
  double consensus_res = 0.0;
  /// ||sum_i pi_i||
  double dual_res = 0.0;
};

StationarityResiduals stationarity_residuals(const ServerState& server,
                                             const std::vector<ClientState>& clients,
                                             const FederatedProblem& problem);

/// Worst ||z_i - x_i - pi_i/sigma|| over clients.
double state_identity_residual(const std::vector<ClientState>& clients, double sigma);
/// Worst ||g_bar_i + pi_i + H_i (x_i - x)/m|| over clients.
double first_order_residual(const std::vector<ClientState>& clients, const Vec& x_global, int m);

enum class Phase {
  /// After aggregation, selection and gradient refresh at k in K.
  Aggregated,
  /// After every client finished its update for iteration k.
  Stepped,
  /// Once, at termination; the server holds the last aggregate.
  Finished,
};

struct StepEvent {
  Phase phase;
  long k;
  const ServerState& server;
  const std::vector<ClientState>& clients;
};

using Observer = std::function<void(const StepEvent&)>;

RunTrace run(const FederatedProblem& problem, const AlgoParams& params,
             const Observer& observer = {});

/// Objective ceiling treated as divergence by every trainer.
inline constexpr double kDivergenceLimit = 1e12;

}  // namespace fedgia
