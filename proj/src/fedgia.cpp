#include "fedgia/fedgia.hpp"

#include "fedgia/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedgia {

void AlgoParams::validate() const {
  if (k0 < 1) throw std::invalid_argument("k0 must be >= 1");
  if (!(t > 0.0)) throw std::invalid_argument("t must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (max_cr < 0) throw std::invalid_argument("max_cr must be >= 0");
}

SolveCache::SolveCache(const CurvatureBound& h, int m, double sigma) {
  if (h.variant == CurvatureVariant::Diagonal) {
    factor_ = 1.0 / (h.scale / m + sigma);
    return;
  }
  Mat system = h.matrix / static_cast<double>(m);
  system.diagonal().array() += sigma;
  Eigen::LLT<Mat> llt(system);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("Cholesky factorization of H/m + sigma I failed");
  factor_ = std::move(llt);
}

Vec SolveCache::solve(const Vec& rhs) const {
  if (const auto* inv = std::get_if<double>(&factor_)) return *inv * rhs;
  return std::get<Eigen::LLT<Mat>>(factor_).solve(rhs);
}

FedGiAState initialize(const FederatedProblem& problem, const AlgoParams& params) {
  params.validate();
  const int m = problem.m();
  const Eigen::Index n = problem.n();

  FedGiAState state;
  state.clients.resize(static_cast<std::size_t>(m));
  std::vector<double> norms(static_cast<std::size_t>(m));
  parallel_for(state.clients.size(), params.workers, [&](std::size_t i) {
    auto& c = state.clients[i];
    c.h = curvature_bound(problem.loss(), problem.client(i), params.variant);
    norms[i] = c.h.norm();
  });

  const double r = *std::max_element(norms.begin(), norms.end());
  if (!(r > 0.0)) throw std::invalid_argument("curvature bound is zero for every client; sigma would be 0");
  const double sigma = params.t * r / m;

  parallel_for(state.clients.size(), params.workers, [&](std::size_t i) {
    auto& c = state.clients[i];
    c.x = Vec::Zero(n);
    c.pi = Vec::Zero(n);
    c.z = c.x + c.pi / sigma;
    c.g_bar = Vec::Zero(n);
    c.solve = SolveCache(c.h, m, sigma);
  });

  state.server.x_global = Vec::Zero(n);
  state.server.sigma = sigma;
  state.server.r = r;
  return state;
}

Vec aggregate(std::span<const Vec> z_list) {
  if (z_list.empty()) throw std::invalid_argument("aggregate: empty list");
  Vec sum = Vec::Zero(z_list.front().size());
  for (const auto& z : z_list) {
    if (z.size() != sum.size()) throw std::invalid_argument("aggregate: length mismatch");
    sum += z;
  }
  return sum / static_cast<double>(z_list.size());
}

Vec aggregate(const std::vector<ClientState>& clients) {
  if (clients.empty()) throw std::invalid_argument("aggregate: empty list");
  Vec sum = Vec::Zero(clients.front().z.size());
  for (const auto& c : clients) sum += c.z;
  return sum / static_cast<double>(clients.size());
}

int selection_size(int m, double alpha) {
  const auto count = static_cast<int>(std::floor(alpha * m + 0.5));
  return std::clamp(count, 1, m);
}

std::vector<int> select_clients(int m, double alpha, Sampler& rng) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  const int count = selection_size(m, alpha);
  std::vector<int> ids(static_cast<std::size_t>(m));
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: the first `count` slots end up a uniform sample.
  for (int i = 0; i < count; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(m - i)));
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
  }
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

void local_admm_step(ClientState& client, const Vec& x_global, double sigma) {
  client.x = x_global - client.solve.solve(client.g_bar + client.pi);
  client.pi += sigma * (client.x - x_global);
  client.z = client.x + client.pi / sigma;
}

void local_gd_hold(ClientState& client, const Vec& x_global, double sigma) {
  client.x = x_global;
  client.pi = -client.g_bar;
  client.z = client.x + client.pi / sigma;
}

void refresh_gradients(std::vector<ClientState>& clients, const Vec& x_global,
                       const FederatedProblem& problem, int workers) {
  const double m = problem.m();
  parallel_for(clients.size(), workers, [&](std::size_t i) {
    Vec grad;
    clients[i].f_at_global = loss_value_and_gradient(problem.loss(), problem.client(i), x_global, grad);
    clients[i].g_bar = grad / m;
  });
}

double augmented_lagrangian(const Vec& x_global, const std::vector<ClientState>& clients,
                            double sigma, const FederatedProblem& problem, int workers) {
  const double m = problem.m();
  std::vector<double> terms(clients.size());
  parallel_for(clients.size(), workers, [&](std::size_t i) {
    const auto& c = clients[i];
    const Vec diff = c.x - x_global;
    terms[i] = loss_value(problem.loss(), problem.client(i), c.x) / m + diff.dot(c.pi) +
               0.5 * sigma * diff.squaredNorm();
  });
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

double augmented_lagrangian(const ServerState& server, const std::vector<ClientState>& clients,
                            const FederatedProblem& problem) {
  return augmented_lagrangian(server.x_global, clients, server.sigma, problem);
}

StationarityResiduals stationarity_residuals(const ServerState& server,
                                             const std::vector<ClientState>& clients,
                                             const FederatedProblem& problem) {
  const double m = problem.m();
  StationarityResiduals res;
  Vec pi_sum = Vec::Zero(server.x_global.size());
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const auto& c = clients[i];
    const Vec g = loss_gradient(problem.loss(), problem.client(i), c.x) / m + c.pi;
    res.grad_res = std::max(res.grad_res, g.norm());
    res.consensus_res = std::max(res.consensus_res, (c.x - server.x_global).norm());
    pi_sum += c.pi;
  }
  res.dual_res = pi_sum.norm();
  return res;
}

double state_identity_residual(const std::vector<ClientState>& clients, double sigma) {
  double worst = 0.0;
  for (const auto& c : clients) worst = std::max(worst, (c.z - c.x - c.pi / sigma).norm());
  return worst;
}

double first_order_residual(const std::vector<ClientState>& clients, const Vec& x_global, int m) {
  double worst = 0.0;
  for (const auto& c : clients) {
    const Vec res = c.g_bar + c.pi + c.h.apply(c.x - x_global) / static_cast<double>(m);
    worst = std::max(worst, res.norm());
  }
  return worst;
}

RunTrace run(const FederatedProblem& problem, const AlgoParams& params, const Observer& observer) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  FedGiAState state = initialize(problem, params);
  ServerState& server = state.server;
  auto& clients = state.clients;
  const int m = problem.m();
  Sampler rng(params.seed);
  std::vector<char> in_selection(static_cast<std::size_t>(m), 0);

  RunTrace trace;
  for (long k = 0;; ++k) {
    server.k = k;
    if (k >= params.max_iter) {
      trace.status = RunStatus::IterCap;
      break;
    }
    const bool round_start = k % params.k0 == 0;
    if (round_start) {
      TraceRow row;
      row.k = k;
      // Diagnostics of the uploaded state, against the round it came from.
      row.lagrangian = augmented_lagrangian(server.x_global, clients, server.sigma, problem, params.workers);
      row.state_identity_res = state_identity_residual(clients, server.sigma);
      row.first_order_res = first_order_residual(clients, server.x_global, m);

      server.x_global = aggregate(clients);
      server.tau += 1;
      server.cr += 2;
      refresh_gradients(clients, server.x_global, problem, params.workers);

      Vec grad = Vec::Zero(problem.n());
      double objective = 0.0;
      for (const auto& c : clients) {
        grad += c.g_bar;
        objective += c.f_at_global;
      }
      row.tau = server.tau;
      row.cr = server.cr;
      row.objective = objective / m;
      row.error = grad.squaredNorm();
      row.elapsed_s = elapsed();
      trace.rows.push_back(row);

      if (!std::isfinite(row.objective) || !std::isfinite(row.error) ||
          row.objective > kDivergenceLimit) {
        trace.status = RunStatus::Diverged;
        break;
      }
      if (row.error <= params.tol) {
        trace.status = RunStatus::Converged;
        break;
      }
      if (params.max_cr > 0 && server.cr >= params.max_cr) {
        trace.status = RunStatus::IterCap;
        break;
      }

      server.selected = select_clients(m, params.alpha, rng);
      std::fill(in_selection.begin(), in_selection.end(), 0);
      for (const int id : server.selected) in_selection[static_cast<std::size_t>(id)] = 1;
      if (observer) observer({Phase::Aggregated, k, server, clients});
    }

    parallel_for(clients.size(), params.workers, [&](std::size_t i) {
      if (in_selection[i])
        local_admm_step(clients[i], server.x_global, server.sigma);
      else if (round_start)
        local_gd_hold(clients[i], server.x_global, server.sigma);
    });
    if (observer) observer({Phase::Stepped, k, server, clients});
  }
  trace.iterations = server.k;
  trace.x = server.x_global;
  if (observer) observer({Phase::Finished, server.k, server, clients});
  return trace;
}

}  // namespace fedgia
