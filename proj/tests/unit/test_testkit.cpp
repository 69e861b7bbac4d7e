#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pqn/error.hpp"
#include "pqn/inner_cd.hpp"
#include "pqn/testkit.hpp"
#include "small_problems.hpp"

using namespace pqn;
using namespace pqn::testkit;

TEST_CASE("enumeration limits") {
  SparseRows rows(1);
  std::vector<Index> bias{0};
  for (int t = 0; t < 7; ++t) rows.add_binary_row(bias);
  auto data = make_sequence_dataset(4, std::move(rows), {std::vector<Index>(7, 0)});  // 4^7 = 16384
  auto layout = SeqCrfLayout::of(data);
  std::vector<double> w(layout.dimension(), 0.0);
  CHECK_THROWS_AS(enumerate_seq(layout, w, data, 0), TooLargeError);
}

TEST_CASE("uniform enumeration") {
  SparseRows rows(1);
  std::vector<Index> bias{0};
  rows.add_binary_row(bias);
  rows.add_binary_row(bias);
  auto data = make_sequence_dataset(2, std::move(rows), {{0, 1}});
  auto layout = SeqCrfLayout::of(data);
  std::vector<double> w(layout.dimension(), 0.0);
  auto e = enumerate_seq(layout, w, data, 0);
  CHECK(std::exp(e.log_z) == doctest::Approx(4.0));
  CHECK(e.gold_log_prob == doctest::Approx(-std::log(4.0)));
}

TEST_CASE("zero-weight taxonomy enumeration is uniform") {
  std::mt19937_64 rng(3);
  auto data = random_taxonomy_data(rng, 2, 9, 3);
  auto layout = HierLayout::of(data);
  std::vector<double> w(layout.dimension(), 0.0);
  auto e = enumerate_hier(layout, w, data, 0);
  for (double p : e.leaf_posterior) CHECK(p == doctest::Approx(1.0 / static_cast<double>(e.leaf_posterior.size())));
  CHECK(e.beta[data.tree.root()] == doctest::Approx(1.0));
}

TEST_CASE("dense BFGS examples") {
  DenseBfgs b(2, 3);
  CHECK(b.push(Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1)));
  Eigen::Matrix2d expect;
  expect << 1, 1, 1, 2;
  CHECK((b.matrix() - expect).norm() < 1e-15);

  DenseBfgs c(2, 3);
  c.push(Eigen::Vector2d(1, 0), Eigen::Vector2d(2, 0));
  CHECK((c.matrix() - 2 * Eigen::Matrix2d::Identity()).norm() < 1e-15);
  CHECK_FALSE(c.push(Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0)));

  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  DenseBfgs d(6, 3);
  Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(6, 6, [&] { return normal(rng); });
  Eigen::MatrixXd A = M * M.transpose() + Eigen::MatrixXd::Identity(6, 6);
  for (int k = 0; k < 8; ++k) {
    Eigen::VectorXd s = Eigen::VectorXd::NullaryExpr(6, [&] { return normal(rng); });
    Eigen::VectorXd y = A * s;
    REQUIRE(d.push(s, y));
    CHECK((d.matrix() * s - y).norm() <= 1e-10 * y.norm());
    CHECK((d.matrix() - d.matrix().transpose()).norm() <= 1e-12 * d.matrix().norm());
  }
}

TEST_CASE("exact subproblem solver") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  Eigen::VectorXd g = Eigen::VectorXd::NullaryExpr(5, [&] { return normal(rng); });
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
  auto d = exact_subproblem_solve(g, zero, Eigen::MatrixXd::Identity(5, 5), 0.4);
  for (int j = 0; j < 5; ++j) CHECK(d[j] == doctest::Approx(soft_threshold(-g[j], 0.4)));

  Eigen::MatrixXd M = Eigen::MatrixXd::NullaryExpr(5, 5, [&] { return normal(rng); });
  Eigen::MatrixXd B = M * M.transpose() + Eigen::MatrixXd::Identity(5, 5);
  auto newton = exact_subproblem_solve(g, zero, B, 0.0);
  CHECK((newton + B.ldlt().solve(g)).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("finite differences") {
  LossFn quad = [](std::span<const double> w) {
    double s = 0.0;
    for (double v : w) s += 0.5 * v * v;
    return s;
  };
  std::vector<double> w{1.0, 2.0};
  auto g = fd_gradient(quad, w, 1e-5);
  CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g[1] == doctest::Approx(2.0).epsilon(1e-9));

  // central differences on a smooth non-polynomial loss: error shrinks like h^2
  LossFn smooth = [](std::span<const double> x) { return std::exp(x[0]) + std::sin(x[1]); };
  std::vector<double> x{0.3, 0.7};
  double prev = 0.0;
  for (double h : {1e-2, 1e-3}) {
    const double err = std::abs(fd_gradient(smooth, x, h)[0] - std::exp(0.3));
    if (prev > 0.0) CHECK(err < prev / 50.0);
    prev = err;
  }
  auto H = fd_hessian(smooth, x, 1e-4);
  CHECK(H(0, 0) == doctest::Approx(std::exp(0.3)).epsilon(1e-6));
  CHECK(H(1, 1) == doctest::Approx(-std::sin(0.7)).epsilon(1e-6));
  CHECK(std::abs(H(0, 1)) <= 1e-6);
}

TEST_CASE("Hessian of a single Bernoulli variable") {
  FeatureTable t(2, 1);
  t << 1, 0;
  std::vector<FeatureTable> tables{t};
  std::vector<double> w{0.0};
  CHECK(hessian_via_phi(tables, w)(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("Hessian diagnostic matches finite differences") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    auto data = random_chains(rng, 3, 2, 2, 3);
    auto layout = SeqCrfLayout::of(data);
    auto w = random_weights(rng, layout.dimension());
    auto tables = seq_feature_tables(layout, data);
    auto H = hessian_via_phi(tables, w);
    LossFn loss = [&](std::span<const double> x) {
      double s = 0.0;
      for (std::size_t i = 0; i < data.sequences.size(); ++i) s -= enumerate_seq(layout, x, data, i).gold_log_prob;
      return s;
    };
    auto F = fd_hessian(loss, w, 1e-4);
    CHECK((H - F).norm() <= 1e-4 * std::max(1.0, F.norm()));
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("Hessian diagnostic refuses large problems") {
  std::vector<FeatureTable> tables{FeatureTable::Zero(2, 31)};
  std::vector<double> w(31, 0.0);
  CHECK_THROWS_AS(hessian_via_phi(tables, w), TooLargeError);
}

TEST_CASE("ratio probe") {
  std::vector<double> ref{0.0};
  std::vector<std::vector<double>> quad;
  double e = 0.5;
  for (int t = 0; t < 6; ++t, e *= e) quad.push_back({e});
  auto r = superlinear_ratio_probe(quad, ref);
  for (std::size_t k = 1; k < r.size(); ++k) CHECK(r[k] < r[k - 1]);
  CHECK(r.back() < 1e-4);

  std::vector<std::vector<double>> linear{{1.0}, {0.5}, {0.25}, {0.0}, {0.0}};
  auto l = superlinear_ratio_probe(linear, ref);
  REQUIRE(l.size() == 3);  // the step from an exact hit is skipped
  CHECK(l[0] == 0.5);
  CHECK(l[1] == 0.5);
  CHECK(l[2] == 0.0);
}
