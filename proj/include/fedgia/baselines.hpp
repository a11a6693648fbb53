#pragma once

#include "fedgia/data.hpp"
#include "fedgia/trace.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace fedgia {

enum class BaselineKind { FedAvg, FedProx, FedPD };

std::string_view to_string(BaselineKind kind);

struct BaselineParams {
  BaselineKind kind = BaselineKind::FedAvg;
  /// `a` in the decaying step gamma_k(a) = a / log2(k + 2).
  double step_base = 0.01;
  /// FedProx proximal weight.
  double prox_mu = 1e-4;
  /// Gradient steps per local subproblem (FedProx, FedPD).
  int inner_iters = 5;
  /// FedPD penalty eta and base of its inner rate eta1 = gamma_k(eta1_base).
  double eta = 1.0;
  double eta1_base = 0.05;

  int k0 = 1;
  double alpha = 1.0;
  double tol = 1e-7;
  long max_iter = 10000;
  long max_cr = 0;
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const;
};

inline double decaying_step(double a, long k) { return a / std::log2(static_cast<double>(k) + 2.0); }

/// Called after every local iteration k with the current global parameter
/// and each client's local parameter.
using BaselineObserver =
    std::function<void(long k, const Vec& x_global, const std::vector<Vec>& local)>;

/// k0 full-gradient steps per round, then averaging.
RunTrace run_fedavg(const FederatedProblem& problem, const BaselineParams& params,
                    const BaselineObserver& observer = {});
/// Each step runs inner_iters gradient steps on f_i + (mu/2)||x - x_global||^2.
RunTrace run_fedprox(const FederatedProblem& problem, const BaselineParams& params,
                     const BaselineObserver& observer = {});
/// Primal-dual local updates with periodic averaging of x_i + eta * lambda_i.
RunTrace run_fedpd(const FederatedProblem& problem, const BaselineParams& params,
                   const BaselineObserver& observer = {});

/// Dispatches on params.kind.
RunTrace run_baseline(const FederatedProblem& problem, const BaselineParams& params,
                      const BaselineObserver& observer = {});

}  // namespace fedgia
