#include "fedgia/baselines.hpp"

#include "fedgia/fedgia.hpp"
#include "fedgia/parallel.hpp"
#include "fedgia/random.hpp"

#include <chrono>
#include <limits>
#include <stdexcept>

namespace fedgia {

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::FedAvg: return "fedavg";
    case BaselineKind::FedProx: return "fedprox";
    case BaselineKind::FedPD: return "fedpd";
  }
  return "?";
}

void BaselineParams::validate() const {
  if (!(step_base > 0.0)) throw std::invalid_argument("step_base must be > 0");
  if (inner_iters < 1) throw std::invalid_argument("inner_iters must be >= 1");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (!(eta1_base > 0.0)) throw std::invalid_argument("eta1_base must be > 0");
  if (!(prox_mu >= 0.0)) throw std::invalid_argument("prox_mu must be >= 0");
  if (k0 < 1) throw std::invalid_argument("k0 must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (max_cr < 0) throw std::invalid_argument("max_cr must be >= 0");
}

namespace {

struct LocalState {
  Vec lambda;
  /// FedPD's local copy of the consensus variable; reset to x_global on broadcast.
  Vec center;
  Vec grad_at_global;
  double f_at_global = 0.0;
};

void fedavg_step(const FederatedProblem& problem, std::size_t i, const BaselineParams& p, long k,
                 bool round_start, Vec& x, const LocalState& s) {
  const Vec g = round_start ? s.grad_at_global : loss_gradient(problem.loss(), problem.client(i), x);
  x -= decaying_step(p.step_base, k) * g;
}

void fedprox_step(const FederatedProblem& problem, std::size_t i, const BaselineParams& p, long k,
                  bool round_start, const Vec& x_global, Vec& x, const LocalState& s) {
  const double rate = decaying_step(p.step_base, k);
  for (int it = 0; it < p.inner_iters; ++it) {
    Vec g = (round_start && it == 0) ? s.grad_at_global
                                     : loss_gradient(problem.loss(), problem.client(i), x);
    if (p.prox_mu != 0.0) g += p.prox_mu * (x - x_global);
    x -= rate * g;
  }
}

void fedpd_step(const FederatedProblem& problem, std::size_t i, const BaselineParams& p, long k,
                Vec& x, LocalState& s) {
  const double rate = decaying_step(p.eta1_base, k);
  // Same 1/m loss weighting as the FedGiA Lagrangian, so eta plays the role of 1/sigma.
  const double weight = 1.0 / problem.m();
  for (int it = 0; it < p.inner_iters; ++it) {
    const Vec g = weight * loss_gradient(problem.loss(), problem.client(i), x) + s.lambda +
                  (x - s.center) / p.eta;
    x -= rate * g;
  }
  s.lambda += (x - s.center) / p.eta;
  s.center = x + p.eta * s.lambda;
}

RunTrace run_local_scheme(const FederatedProblem& problem, const BaselineParams& params,
                          const BaselineObserver& observer) {
  params.validate();
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  const int m = problem.m();
  const Eigen::Index n = problem.n();
  const bool primal_dual = params.kind == BaselineKind::FedPD;

  std::vector<Vec> xs(static_cast<std::size_t>(m), Vec::Zero(n));
  std::vector<LocalState> locals(static_cast<std::size_t>(m));
  for (auto& s : locals) {
    s.lambda = Vec::Zero(n);
    s.center = Vec::Zero(n);
  }
  std::vector<char> active(static_cast<std::size_t>(m), 1);
  Vec x_global = Vec::Zero(n);
  Sampler rng(params.seed);

  RunTrace trace;
  long tau = 0;
  long cr = 0;
  long k = 0;
  for (;; ++k) {
    if (k >= params.max_iter) {
      trace.status = RunStatus::IterCap;
      break;
    }
    const bool round_start = k % params.k0 == 0;
    if (round_start) {
      Vec sum = Vec::Zero(n);
      int count = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (primal_dual) {
          sum += locals[i].center;
          ++count;
        } else if (active[i]) {
          sum += xs[i];
          ++count;
        }
      }
      x_global = sum / static_cast<double>(count);
      tau += 1;
      cr += 2;

      parallel_for(xs.size(), params.workers, [&](std::size_t i) {
        if (primal_dual)
          locals[i].center = x_global;
        else
          xs[i] = x_global;
        locals[i].f_at_global = loss_value_and_gradient(problem.loss(), problem.client(i), x_global,
                                                        locals[i].grad_at_global);
      });

      Vec grad = Vec::Zero(n);
      double objective = 0.0;
      for (const auto& s : locals) {
        grad += s.grad_at_global;
        objective += s.f_at_global;
      }
      grad /= static_cast<double>(m);

      TraceRow row;
      row.k = k;
      row.tau = tau;
      row.cr = cr;
      row.objective = objective / m;
      row.error = grad.squaredNorm();
      row.lagrangian = std::numeric_limits<double>::quiet_NaN();
      row.elapsed_s = std::chrono::duration<double>(Clock::now() - start).count();
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
      if (params.max_cr > 0 && cr >= params.max_cr) {
        trace.status = RunStatus::IterCap;
        break;
      }

      std::fill(active.begin(), active.end(), 0);
      for (const int id : select_clients(m, params.alpha, rng)) active[static_cast<std::size_t>(id)] = 1;
    }

    parallel_for(xs.size(), params.workers, [&](std::size_t i) {
      if (!active[i]) return;
      switch (params.kind) {
        case BaselineKind::FedAvg:
          fedavg_step(problem, i, params, k, round_start, xs[i], locals[i]);
          break;
        case BaselineKind::FedProx:
          fedprox_step(problem, i, params, k, round_start, x_global, xs[i], locals[i]);
          break;
        case BaselineKind::FedPD:
          fedpd_step(problem, i, params, k, xs[i], locals[i]);
          break;
      }
    });
    if (observer) observer(k, x_global, xs);
  }
  trace.iterations = k;
  trace.x = x_global;
  return trace;
}

}  // namespace

RunTrace run_fedavg(const FederatedProblem& problem, const BaselineParams& params,
                    const BaselineObserver& observer) {
  auto p = params;
  p.kind = BaselineKind::FedAvg;
  return run_local_scheme(problem, p, observer);
}

RunTrace run_fedprox(const FederatedProblem& problem, const BaselineParams& params,
                     const BaselineObserver& observer) {
  auto p = params;
  p.kind = BaselineKind::FedProx;
  return run_local_scheme(problem, p, observer);
}

RunTrace run_fedpd(const FederatedProblem& problem, const BaselineParams& params,
                   const BaselineObserver& observer) {
  auto p = params;
  p.kind = BaselineKind::FedPD;
  return run_local_scheme(problem, p, observer);
}

RunTrace run_baseline(const FederatedProblem& problem, const BaselineParams& params,
                      const BaselineObserver& observer) {
  return run_local_scheme(problem, params, observer);
}

}  // namespace fedgia
