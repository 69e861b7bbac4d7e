#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "pqn/inner_cd.hpp"
#include "pqn/lbfgs.hpp"
#include "pqn/testkit.hpp"

using namespace pqn;

namespace {

std::vector<Index> iota_set(std::size_t n) {
  std::vector<Index> a(n);
  std::iota(a.begin(), a.end(), Index{0});
  return a;
}

// Random state with a few accepted pairs over all d coordinates.
LbfgsState random_state(std::size_t d, std::size_t m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  LbfgsState st(d, m);
  Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d),
                                                   [&] { return normal(rng); });
  const Eigen::MatrixXd A = M * M.transpose() + Eigen::MatrixXd::Identity(M.rows(), M.cols());
  auto all = iota_set(d);
  for (std::size_t k = 0; k < m + 1; ++k) {
    Eigen::VectorXd s = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(d), [&] { return normal(rng); });
    Eigen::VectorXd y = A * s;
    st.push_pair(all, std::vector<double>(s.data(), s.data() + d), std::vector<double>(y.data(), y.data() + d));
  }
  return st;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, double sparsity = 0.0) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  std::vector<double> v(n);
  for (auto& x : v) x = unit(rng) < sparsity ? 0.0 : normal(rng);
  return v;
}

}  // namespace

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(2.0, 0.5) == 1.5);
  CHECK(soft_threshold(-0.3, 0.5) == 0.0);
  CHECK(soft_threshold(-0.7, 0.0) == -0.7);
  CHECK(soft_threshold(-2.0, 0.5) == -1.5);
}

TEST_CASE("scalar coordinate step") {
  // a = 2, b = 1, c = 0, lambda = 0.5
  CHECK(cd_step(0.0, 0.0, 1.0, 2.0, 0.0, 0.5) == doctest::Approx(-0.25));
  // a = 1, b = 0, c = 1, lambda = 0.5
  CHECK(cd_step(1.0, 0.0, 0.0, 1.0, 0.0, 0.5) == doctest::Approx(-0.5));
  // lambda = 0 is a Newton step
  CHECK(cd_step(0.3, 0.1, 0.8, 4.0, 0.4, 0.0) == doctest::Approx(-1.2 / 4.0));

  // brute-force check of the closed form
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int rep = 0; rep < 200; ++rep) {
    const double a = 0.1 + std::abs(u(rng)), b = u(rng), c = u(rng), lam = std::abs(u(rng));
    const double z = cd_step(c, 0.0, b, a, 0.0, lam);
    auto obj = [&](double t) { return 0.5 * a * t * t + b * t + lam * std::abs(c + t); };
    for (double eps : {1e-4, -1e-4, 1e-2, -1e-2}) CHECK(obj(z) <= obj(z + eps) + 1e-14);
  }
}

TEST_CASE("sweep budget") {
  CHECK(inner_sweep_budget(1000, 50, 10) == 10);
  CHECK(inner_sweep_budget(100, 40, 10) == 2);
  CHECK(inner_sweep_budget(100, 100, 10) == 1);
  CHECK(inner_sweep_budget(5, 10, 10) == 1);
}

TEST_CASE("diagonal model is solved in one sweep") {
  LbfgsState st(6, 2);
  std::vector<Index> all = iota_set(6);
  std::vector<double> s(6, 0.0), y(6, 0.0);
  s[0] = 1;
  y[0] = 3;  // gamma = 3, B = 3I
  st.push_pair(all, s, y);
  std::mt19937_64 rng(5);
  auto g = random_vec(6, rng), w = random_vec(6, rng, 0.5);
  const double lambda = 0.4, gamma = st.gamma();
  auto dir = solve_subproblem(g, w, all, st, lambda, 1, rng);
  for (std::size_t j = 0; j < 6; ++j)
    CHECK(dir.d[j] == doctest::Approx(-w[j] + soft_threshold(w[j] - g[j] / gamma, lambda / gamma)).epsilon(1e-13));
}

TEST_CASE("zero gradient at zero weights gives a zero direction") {
  LbfgsState st(4, 2);
  std::mt19937_64 rng(1);
  std::vector<double> zero(4, 0.0);
  auto all = iota_set(4);
  auto dir = solve_subproblem(zero, zero, all, st, 0.3, 3, rng);
  CHECK(dir.is_zero());
  CHECK(dir.delta == 0.0);
}

TEST_CASE("many sweeps reach the exact minimizer") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t d = 2 + rng() % 9, m = 1 + rng() % 3;
    LbfgsState st = random_state(d, m, rng);
    auto g = random_vec(d, rng), w = random_vec(d, rng, 0.4);
    const double lambda = 0.5;
    auto all = iota_set(d);
    auto dir = solve_subproblem(g, w, all, st, lambda, 500, rng);
    const Eigen::VectorXd exact = testkit::exact_subproblem_solve(Eigen::Map<Eigen::VectorXd>(g.data(), d),
                                                                  Eigen::Map<Eigen::VectorXd>(w.data(), d),
                                                                  st.to_dense(), lambda);
    for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(dir.d[j] - exact[static_cast<Eigen::Index>(j)]) <= 1e-8);
  }
}

TEST_CASE("inner objective never increases and d_hat stays in sync") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t d = 3 + rng() % 18;
    LbfgsState st = random_state(d, 1 + rng() % 4, rng);
    auto g = random_vec(d, rng), w = random_vec(d, rng, 0.5);
    // a working set that skips some coordinates
    std::vector<Index> active;
    std::vector<double> ga, wa;
    for (Index j = 0; j < d; ++j) {
      if (rng() % 4 != 0 || w[j] != 0.0) {
        active.push_back(j);
        ga.push_back(g[j]);
        wa.push_back(w[j]);
      }
    }
    if (active.empty()) continue;
    double last = 0.0;
    bool monotone = true;
    auto watch = [&](std::span<const double> d_now) {
      const double v = subproblem_objective(ga, wa, active, st, 0.3, d_now);
      if (v > last + 1e-12 * (1.0 + std::abs(last))) monotone = false;
      last = v;
    };
    for (std::size_t sweeps : {1u, 2u, 5u}) {
      last = subproblem_objective(ga, wa, active, st, 0.3, std::vector<double>(active.size(), 0.0));
      std::mt19937_64 local(rep);
      auto dir = solve_subproblem(ga, wa, active, st, 0.3, sweeps, local, watch);
      CHECK(monotone);
      std::vector<double> h(st.rank(), 0.0);
      for (std::size_t k = 0; k < active.size(); ++k) {
        auto q = st.qhat_column(active[k]);
        for (std::size_t r = 0; r < h.size(); ++r) h[r] += q[r] * dir.d[k];
      }
      for (std::size_t r = 0; r < h.size(); ++r) CHECK(std::abs(h[r] - dir.d_hat[r]) <= 1e-10);
      if (!dir.is_zero()) CHECK(dir.delta < 0.0);
    }
  }
}

TEST_CASE("a sweep from the exact minimizer does not move") {
  std::mt19937_64 rng(29);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t d = 2 + rng() % 8;
    LbfgsState st = random_state(d, 2, rng);
    auto g = random_vec(d, rng), w = random_vec(d, rng, 0.4);
    const double lambda = 0.3;
    const Eigen::MatrixXd B = st.to_dense();
    const Eigen::VectorXd ds = testkit::exact_subproblem_solve(Eigen::Map<Eigen::VectorXd>(g.data(), d),
                                                               Eigen::Map<Eigen::VectorXd>(w.data(), d), B, lambda);
    // Re-centre at w + d*: the shifted problem has its minimizer at zero.
    const Eigen::VectorXd g2 = Eigen::Map<Eigen::VectorXd>(g.data(), d) + B * ds;
    std::vector<double> gs(g2.data(), g2.data() + d), ws(d);
    for (std::size_t j = 0; j < d; ++j) ws[j] = w[j] + ds[static_cast<Eigen::Index>(j)];
    auto all = iota_set(d);
    auto dir = solve_subproblem(gs, ws, all, st, lambda, 1, rng);
    for (double v : dir.d) CHECK(std::abs(v) <= 1e-12);
  }
}

TEST_CASE("same seed, same direction") {
  std::mt19937_64 rng(31);
  LbfgsState st = random_state(12, 3, rng);
  auto g = random_vec(12, rng), w = random_vec(12, rng, 0.5);
  auto all = iota_set(12);
  std::mt19937_64 r1(99), r2(99);
  auto a = solve_subproblem(g, w, all, st, 0.2, 3, r1);
  auto b = solve_subproblem(g, w, all, st, 0.2, 3, r2);
  CHECK(a.d == b.d);
  CHECK(a.delta == b.delta);
}
