#include "fedgia/fedgia.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace fedgia;
using namespace fedgia::testing;

namespace {

FederatedProblem identity_problem() {
  return {{ClientDataset(Mat::Identity(2, 2), Vec{{1.0, -1.0}})}, LossModel::least_squares()};
}

ClientState bare_client(Eigen::Index n, CurvatureBound h, int m, double sigma) {
  ClientState c;
  c.x = c.pi = c.z = c.g_bar = Vec::Zero(n);
  c.solve = SolveCache(h, m, sigma);
  c.h = std::move(h);
  return c;
}

/// Naive pooled gradient (1/m) sum_i (1/d_i) A_i^T (A_i x - b_i).
Vec pooled_ls_gradient(const FederatedProblem& p, const Vec& x) {
  Vec g = Vec::Zero(x.size());
  for (const auto& c : p.clients()) {
    for (Eigen::Index j = 0; j < c.samples(); ++j) {
      const double r = c.features().row(j).dot(x) - c.labels()[j];
      g += r * c.features().row(j).transpose() / static_cast<double>(c.samples());
    }
  }
  return g / p.m();
}

/// Least-squares minimizer of f = (1/m) sum_i (1/(2 d_i)) ||A_i x - b_i||^2.
Vec normal_equations(const FederatedProblem& p) {
  Mat lhs = Mat::Zero(p.n(), p.n());
  Vec rhs = Vec::Zero(p.n());
  for (const auto& c : p.clients()) {
    const double w = 1.0 / static_cast<double>(c.samples());
    lhs += w * c.features().transpose() * c.features();
    rhs += w * c.features().transpose() * c.labels();
  }
  return lhs.ldlt().solve(rhs);
}

}  // namespace

TEST_CASE("initialize on the identity design") {
  AlgoParams params;
  params.t = 0.15;
  const auto state = initialize(identity_problem(), params);
  REQUIRE(state.clients.size() == 1);
  const auto& c = state.clients[0];
  CHECK((c.h.matrix - 0.5 * Mat::Identity(2, 2)).norm() == 0.0);
  CHECK(state.server.r == doctest::Approx(0.5));
  CHECK(state.server.sigma == doctest::Approx(0.075));
  CHECK(c.x.isZero());
  CHECK(c.pi.isZero());
  CHECK(c.z.isZero());
  CHECK(state.server.k == 0);
  CHECK(state_identity_residual(state.clients, state.server.sigma) == 0.0);
}

TEST_CASE("sigma is t r / m with r the largest client bound") {
  Sampler rng(2);
  const auto p = random_problem(rng, LossModel::least_squares(), 6, 4, 3, 9);
  for (const auto variant : {CurvatureVariant::Gram, CurvatureVariant::Diagonal}) {
    AlgoParams params;
    params.t = 0.7;
    params.variant = variant;
    const auto state = initialize(p, params);
    double r = 0.0;
    for (int i = 0; i < p.m(); ++i) r = std::max(r, curvature_bound(p.loss(), p.client(i), variant).norm());
    CHECK(state.server.r == r);
    CHECK(state.server.sigma == doctest::Approx(0.7 * r / 6));
  }
}

TEST_CASE("initialize rejects all-zero data") {
  const FederatedProblem zero({ClientDataset(Mat::Zero(3, 2), Vec::Zero(3))}, LossModel::least_squares());
  CHECK_THROWS_AS(initialize(zero, AlgoParams{}), std::invalid_argument);
}

TEST_CASE("solve cache inverts H/m + sigma I") {
  Sampler rng(3);
  const auto data = random_client(rng, LossModel::least_squares(), 8, 5);
  for (const auto variant : {CurvatureVariant::Gram, CurvatureVariant::Diagonal}) {
    const auto h = curvature_bound(LossModel::least_squares(), data, variant);
    const int m = 4;
    const double sigma = 0.3;
    const SolveCache cache(h, m, sigma);
    Mat system = h.dense(5) / m;
    system.diagonal().array() += sigma;
    for (int trial = 0; trial < 10; ++trial) {
      const Vec v = normal_vector(rng, 5);
      CHECK((cache.solve(system * v) - v).norm() < 1e-10);
    }
  }
}

TEST_CASE("aggregate is the arithmetic mean") {
  const std::vector<Vec> pair{Vec{{1.0, 1.0}}, Vec{{3.0, 3.0}}};
  CHECK(aggregate(pair) == Vec{{2.0, 2.0}});

  const Vec v{{0.1, -7.0, 3.3}};
  const std::vector<Vec> same(4, v);
  CHECK((aggregate(same) - v).norm() < 1e-15);

  Sampler rng(4);
  std::vector<Vec> random;
  for (int i = 0; i < 5; ++i) random.push_back(normal_vector(rng, 6));
  Vec expected(6);
  for (int l = 0; l < 6; ++l) {
    double s = 0.0;
    for (const auto& z : random) s += z[l];
    expected[l] = s / 5.0;
  }
  CHECK(aggregate(random) == expected);

  CHECK_THROWS_AS(aggregate(std::vector<Vec>{}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate(std::vector<Vec>{Vec::Zero(2), Vec::Zero(3)}), std::invalid_argument);
}

TEST_CASE("client selection") {
  Sampler rng(5);
  CHECK(select_clients(4, 1.0, rng) == std::vector<int>{0, 1, 2, 3});

  const auto half = select_clients(128, 0.5, rng);
  CHECK(half.size() == 64);
  CHECK(std::set<int>(half.begin(), half.end()).size() == 64);
  CHECK(std::is_sorted(half.begin(), half.end()));
  CHECK(half.front() >= 0);
  CHECK(half.back() < 128);

  CHECK(selection_size(10, 0.01) == 1);
  CHECK(selection_size(10, 0.25) == 3);
  CHECK(selection_size(10, 1.0) == 10);
  CHECK_THROWS_AS(select_clients(4, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(select_clients(4, 1.5, rng), std::invalid_argument);

  Sampler a(77), b(77);
  CHECK(select_clients(50, 0.3, a) == select_clients(50, 0.3, b));
}

TEST_CASE("client selection is uniform") {
  Sampler rng(6);
  std::vector<int> hits(10, 0);
  const int draws = 10000;
  for (int t = 0; t < draws; ++t)
    for (const int id : select_clients(10, 0.3, rng)) ++hits[static_cast<std::size_t>(id)];
  for (const int h : hits) CHECK(std::abs(static_cast<double>(h) / draws - 0.3) <= 0.02);
}

TEST_CASE("inexact ADMM client step") {
  Sampler rng(7);
  const auto data = random_client(rng, LossModel::least_squares(), 9, 3);

  SUBCASE("stationary client stays put") {
    auto c = bare_client(3, curvature_bound(LossModel::least_squares(), data, CurvatureVariant::Gram), 2, 0.4);
    const Vec xg{{1.0, 2.0, 3.0}};
    local_admm_step(c, xg, 0.4);
    CHECK(c.x == xg);
    CHECK(c.pi.isZero());
    CHECK(c.z == xg);
  }

  SUBCASE("diagonal closed form") {
    const auto h = curvature_bound(LossModel::least_squares(), data, CurvatureVariant::Diagonal);
    const int m = 3;
    const double sigma = 0.2;
    auto c = bare_client(3, h, m, sigma);
    c.g_bar = Vec{{0.3, -0.1, 0.2}};
    c.pi = Vec{{0.05, 0.0, -0.4}};
    const Vec xg{{1.0, 0.0, -1.0}};
    const Vec g_bar = c.g_bar;
    const Vec pi0 = c.pi;
    local_admm_step(c, xg, sigma);
    const double denom = h.scale / m + sigma;
    for (int l = 0; l < 3; ++l) {
      const double x = xg[l] - (g_bar[l] + pi0[l]) / denom;
      const double pi = pi0[l] + sigma * (x - xg[l]);
      CHECK(c.x[l] == doctest::Approx(x).epsilon(1e-14));
      CHECK(c.pi[l] == doctest::Approx(pi).epsilon(1e-14));
      CHECK(c.z[l] == doctest::Approx(x + pi / sigma).epsilon(1e-14));
    }
    CHECK(c.g_bar == g_bar);
  }

  SUBCASE("first-order identity after the step") {
    const auto h = curvature_bound(LossModel::least_squares(), data, CurvatureVariant::Gram);
    const int m = 5;
    const double sigma = 0.05;
    auto c = bare_client(3, h, m, sigma);
    c.g_bar = normal_vector(rng, 3);
    c.pi = normal_vector(rng, 3);
    const Vec xg = normal_vector(rng, 3);
    local_admm_step(c, xg, sigma);
    CHECK((c.g_bar + c.pi + h.apply(c.x - xg) / m).norm() < 1e-10);
    CHECK((c.z - c.x - c.pi / sigma).norm() < 1e-10);
  }
}

TEST_CASE("GD hold for unselected clients") {
  const CurvatureBound h{CurvatureVariant::Diagonal, {}, 1.0};
  auto c = bare_client(2, h, 1, 0.5);
  const Vec xg{{1.0, 0.0}};

  local_gd_hold(c, xg, 0.5);
  CHECK(c.x == xg);
  CHECK(c.pi.isZero());
  CHECK(c.z == xg);

  c.g_bar = Vec{{0.2, 0.0}};
  local_gd_hold(c, xg, 0.5);
  CHECK(c.z[0] == doctest::Approx(0.6));
  CHECK(c.z[1] == 0.0);
  CHECK(c.pi == -c.g_bar);

  const auto once = c;
  local_gd_hold(c, xg, 0.5);
  CHECK(c.x == once.x);
  CHECK(c.pi == once.pi);
  CHECK(c.z == once.z);
}

TEST_CASE("gradient refresh") {
  Sampler rng(9);
  const auto p = random_problem(rng, LossModel::least_squares(), 4, 3, 2, 7);
  auto state = initialize(p, AlgoParams{});
  const Vec x = normal_vector(rng, 3);
  refresh_gradients(state.clients, x, p, 1);
  Vec sum = Vec::Zero(3);
  for (const auto& c : state.clients) sum += c.g_bar;
  CHECK((sum - pooled_ls_gradient(p, x)).norm() < 1e-12);
  for (int i = 0; i < p.m(); ++i)
    CHECK(state.clients[i].f_at_global == doctest::Approx(loss_value(p.loss(), p.client(i), x)));

  const auto data = random_client(rng, LossModel::least_squares(), 5, 3);
  const FederatedProblem twins({data, data}, LossModel::least_squares());
  auto twin_state = initialize(twins, AlgoParams{});
  refresh_gradients(twin_state.clients, x, twins, 2);
  CHECK(twin_state.clients[0].g_bar == twin_state.clients[1].g_bar);
}

TEST_CASE("augmented Lagrangian") {
  Sampler rng(10);
  const auto p = random_problem(rng, LossModel::logistic_l2(), 3, 2, 2, 5);
  auto state = initialize(p, AlgoParams{});
  const Vec x = normal_vector(rng, 2);
  for (auto& c : state.clients) {
    c.x = x;
    c.pi.setZero();
  }
  CHECK(augmented_lagrangian(x, state.clients, 0.3, p) == doctest::Approx(p.objective(x)));

  // One client, one feature: f(x) = (a x - b)^2 / 2.
  const FederatedProblem scalar({ClientDataset(Mat::Constant(1, 1, 2.0), Vec::Constant(1, 1.0))},
                                LossModel::least_squares());
  auto s = initialize(scalar, AlgoParams{});
  s.clients[0].x = Vec::Constant(1, 0.75);
  s.clients[0].pi = Vec::Constant(1, -0.2);
  const double sigma = 0.4;
  const double xg = 0.25;
  const double expected = 0.5 * (2.0 * 0.75 - 1.0) * (2.0 * 0.75 - 1.0) + (0.75 - xg) * -0.2 +
                          0.5 * sigma * (0.75 - xg) * (0.75 - xg);
  CHECK(augmented_lagrangian(Vec::Constant(1, xg), s.clients, sigma, scalar) == doctest::Approx(expected));
}

TEST_CASE("stationarity residuals") {
  Sampler rng(12);
  const auto p = random_problem(rng, LossModel::least_squares(), 3, 2, 3, 6);
  auto state = initialize(p, AlgoParams{});
  const Vec x = normal_equations(p);
  state.server.x_global = x;
  for (int i = 0; i < p.m(); ++i) {
    state.clients[i].x = x;
    state.clients[i].pi = -loss_gradient(p.loss(), p.client(i), x) / p.m();
  }
  const auto res = stationarity_residuals(state.server, state.clients, p);
  CHECK(res.grad_res == 0.0);
  CHECK(res.consensus_res == 0.0);
  CHECK(res.dual_res < 1e-14);

  state.clients[1].x += Vec::Ones(2);
  const auto moved = stationarity_residuals(state.server, state.clients, p);
  CHECK(moved.grad_res > 0.0);
  CHECK(moved.consensus_res == doctest::Approx(std::sqrt(2.0)));
  CHECK(moved.dual_res >= 0.0);
}

TEST_CASE("run reaches the least-squares solution") {
  for (const int m : {1, 4}) {
    CAPTURE(m);
    Sampler rng(100 + m);
    const auto p = random_problem(rng, LossModel::least_squares(), m, 6, 10, 20);
    for (const auto variant : {CurvatureVariant::Gram, CurvatureVariant::Diagonal}) {
      AlgoParams params;
      params.variant = variant;
      params.tol = 1e-10;
      StationarityResiduals res;
      const auto trace = run(p, params, [&](const StepEvent& e) {
        if (e.phase == Phase::Finished) res = stationarity_residuals(e.server, e.clients, p);
      });
      REQUIRE(trace.status == RunStatus::Converged);
      CHECK(trace.final_row().error <= 1e-10);
      CHECK((trace.x - normal_equations(p)).norm() < 1e-3);
      CHECK(res.grad_res < 1e-3);
      CHECK(res.consensus_res < 1e-3);
      CHECK(res.dual_res < 1e-3);
    }
  }
}

TEST_CASE("run finds the mean of centered quadratics") {
  Sampler rng(13);
  std::vector<ClientDataset> clients;
  Vec mean = Vec::Zero(3);
  for (int i = 0; i < 5; ++i) {
    const Vec c = normal_vector(rng, 3, 4.0);
    mean += c / 5.0;
    clients.push_back(centered_quadratic(c));
  }
  const FederatedProblem p(std::move(clients), LossModel::least_squares());
  AlgoParams params;
  params.tol = 1e-10;
  for (const int k0 : {1, 3}) {
    CAPTURE(k0);
    params.k0 = k0;
    params.t = 6.0;
    for (const double alpha : {0.6, 1.0}) {
      params.alpha = alpha;
      const auto trace = run(p, params);
      REQUIRE(trace.status == RunStatus::Converged);
      CHECK((trace.x - mean).norm() < 1e-3);
    }
  }
}

TEST_CASE("aggregation schedule and round accounting") {
  const auto p = generate_linear_noniid({8, 10, 20, 30, 5});
  AlgoParams params;
  params.k0 = 5;
  params.alpha = 0.5;
  params.max_iter = 60;
  params.tol = 1e-30;
  const auto trace = run(p, params);
  CHECK(trace.status == RunStatus::IterCap);
  CHECK(trace.iterations == 60);
  REQUIRE(trace.rows.size() == 12);
  for (std::size_t j = 0; j < trace.rows.size(); ++j) {
    CHECK(trace.rows[j].k == static_cast<long>(5 * j));
    CHECK(trace.rows[j].tau == static_cast<long>(j + 1));
    CHECK(trace.rows[j].cr == static_cast<long>(2 * (j + 1)));
  }

  params.max_cr = 10;
  params.max_iter = 10000;
  const auto capped = run(p, params);
  CHECK(capped.status == RunStatus::IterCap);
  CHECK(capped.final_row().cr == 10);
}

TEST_CASE("round contracts seen by an observer") {
  const auto p = generate_linear_noniid({10, 6, 10, 20, 21});
  AlgoParams params;
  params.k0 = 4;
  params.alpha = 0.4;
  params.max_iter = 80;
  params.tol = 1e-30;

  std::vector<Vec> g_bar_at_round;
  std::vector<Vec> x_at_round_start;
  std::vector<int> selected;
  bool ok_g = true, ok_inert = true, ok_selection = true, ok_sigma = true;
  const double expected_sigma = [&] {
    const auto state = initialize(p, params);
    return state.server.sigma;
  }();
  run(p, params, [&](const StepEvent& e) {
    if (e.phase == Phase::Aggregated) {
      g_bar_at_round.clear();
      for (const auto& c : e.clients) g_bar_at_round.push_back(c.g_bar);
      selected = e.server.selected;
      ok_selection &= static_cast<int>(selected.size()) == selection_size(p.m(), params.alpha);
      ok_selection &= std::set<int>(selected.begin(), selected.end()).size() == selected.size();
      ok_sigma &= e.server.sigma == expected_sigma;
      x_at_round_start.clear();
      return;
    }
    if (e.phase != Phase::Stepped) return;
    for (std::size_t i = 0; i < e.clients.size(); ++i) ok_g &= e.clients[i].g_bar == g_bar_at_round[i];
    if (x_at_round_start.empty()) {
      for (const auto& c : e.clients) x_at_round_start.push_back(c.x);
      return;
    }
    for (std::size_t i = 0; i < e.clients.size(); ++i) {
      if (std::binary_search(selected.begin(), selected.end(), static_cast<int>(i))) continue;
      ok_inert &= e.clients[i].x == x_at_round_start[i];
      ok_inert &= e.clients[i].x == e.server.x_global;
    }
  });
  CHECK(ok_g);
  CHECK(ok_inert);
  CHECK(ok_selection);
  CHECK(ok_sigma);
}

TEST_CASE("worker count does not change the trajectory") {
  const auto p = generate_linear_noniid({24, 12, 20, 40, 31});
  AlgoParams params;
  params.k0 = 3;
  params.alpha = 0.5;
  params.max_iter = 90;
  params.tol = 1e-30;
  params.seed = 4;
  auto record = [&](int workers) {
    params.workers = workers;
    std::vector<Vec> states;
    run(p, params, [&](const StepEvent& e) {
      if (e.phase != Phase::Stepped) states.push_back(e.server.x_global);
    });
    return states;
  };
  const auto serial = record(1);
  const auto parallel = record(8);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t j = 0; j < serial.size(); ++j) CHECK(serial[j] == parallel[j]);
}

TEST_CASE("divergence guard") {
  const auto p = generate_linear_noniid({8, 5, 50, 150, 3});
  AlgoParams params;
  params.k0 = 5;
  params.t = 0.01;
  const auto trace = run(p, params);
  CHECK(trace.status == RunStatus::Diverged);
  CHECK(exit_code(trace.status) == 4);
}

TEST_CASE("parameter validation") {
  const auto p = identity_problem();
  AlgoParams bad;
  bad.k0 = 0;
  CHECK_THROWS_AS(run(p, bad), std::invalid_argument);
  bad = {};
  bad.t = 0.0;
  CHECK_THROWS_AS(run(p, bad), std::invalid_argument);
  bad = {};
  bad.alpha = 0.0;
  CHECK_THROWS_AS(run(p, bad), std::invalid_argument);
  bad = {};
  bad.tol = -1.0;
  CHECK_THROWS_AS(run(p, bad), std::invalid_argument);
  bad = {};
  bad.max_iter = 0;
  CHECK_THROWS_AS(run(p, bad), std::invalid_argument);
}
