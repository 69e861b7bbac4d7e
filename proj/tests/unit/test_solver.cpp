#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pqn/error.hpp"
#include "pqn/inner_cd.hpp"
#include "pqn/logistic.hpp"
#include "pqn/math.hpp"
#include "pqn/seq_crf.hpp"
#include "pqn/solver.hpp"
#include "pqn/synthetic.hpp"
#include "pqn/testkit.hpp"

using namespace pqn;

namespace {

// l(w) = 1/2 w^T A w + b^T w
class QuadraticOracle final : public SmoothLossOracle {
 public:
  QuadraticOracle(Eigen::MatrixXd A, Eigen::VectorXd b) : A_(std::move(A)), b_(std::move(b)) {}
  std::size_t dimension() const override { return static_cast<std::size_t>(b_.size()); }
  std::size_t sample_count() const override { return 1; }
  double scale_gradient = 1.0;  // != 1 makes the gradient lie

 protected:
  double do_full_inference(std::span<const double> w) override {
    const Eigen::Map<const Eigen::VectorXd> x(w.data(), b_.size());
    grad_ = A_ * x + b_;
    return value(x);
  }
  double do_partial_gradient(Index j) const override { return scale_gradient * grad_[j]; }
  double do_loss(std::span<const double> w) override {
    return value(Eigen::Map<const Eigen::VectorXd>(w.data(), b_.size()));
  }

 private:
  double value(const Eigen::Ref<const Eigen::VectorXd>& x) const { return 0.5 * x.dot(A_ * x) + b_.dot(x); }
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  Eigen::VectorXd grad_;
};

class NanOracle final : public SmoothLossOracle {
 public:
  std::size_t dimension() const override { return 2; }
  std::size_t sample_count() const override { return 1; }

 protected:
  double do_full_inference(std::span<const double>) override { return std::numeric_limits<double>::quiet_NaN(); }
  double do_partial_gradient(Index) const override { return 0.0; }
  double do_loss(std::span<const double>) override { return 0.0; }
};

double gradient_inf_norm_at_zero(SmoothLossOracle& oracle) {
  std::vector<double> w(oracle.dimension(), 0.0);
  oracle.full_inference(w);
  double m = 0.0;
  for (double g : oracle.gradient()) m = std::max(m, std::abs(g));
  return m;
}

double full_stationarity(SmoothLossOracle& oracle, const std::vector<double>& w, double lambda) {
  oracle.full_inference(w);
  auto g = oracle.gradient();
  double m = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) m = std::max(m, std::abs(partial_subgradient(w[j], g[j], lambda)));
  return m;
}

BinaryDataset small_logistic() {
  LogisticSpec spec;
  spec.instances = 20;
  spec.features = 10;
  spec.support_fraction = 0.3;
  spec.seed = 4;
  return synthetic_logistic(spec);
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("minimum-norm subgradient") {
  CHECK(partial_subgradient(0.5, 1.0, 0.3) == doctest::Approx(1.3));
  CHECK(partial_subgradient(0.0, 0.2, 0.5) == 0.0);
  CHECK(partial_subgradient(0.0, -0.9, 0.5) == doctest::Approx(-0.4));
  CHECK(partial_subgradient(-2.0, 0.1, 0.5) == doctest::Approx(-0.4));
}

TEST_CASE("shrinking pass") {
  const std::vector<double> w{0.0, -0.2, 0.0};
  const std::vector<double> g{0.3, 5.0, 0.9};
  const std::vector<Index> all{0, 1, 2};
  // slack M/N = 0.1: coordinate 0 goes (0.3 - 0.5 + 0.1 < 0), 1 stays (nonzero), 2 stays
  auto r = shrink_pass(w, g, all, 0.5, 1.0, 10);
  CHECK(r.active == std::vector<Index>{1, 2});
  CHECK(r.m_new == doctest::Approx(5.0 - 0.5));

  auto first = shrink_pass(w, g, all, 0.5, std::numeric_limits<double>::infinity(), 10);
  CHECK(first.active == all);

  const std::vector<Index> some{0, 2};
  auto sub = shrink_pass(w, g, some, 0.5, 1.0, 10);
  CHECK(sub.active == std::vector<Index>{2});
}

TEST_CASE("Armijo search") {
  Eigen::MatrixXd A(1, 1);
  A << 1.0;
  QuadraticOracle q(A, Eigen::VectorXd::Zero(1));
  const std::vector<double> w{1.0};
  const std::vector<Index> support{0};

  SUBCASE("full step accepted") {
    const std::vector<double> d{-1.0};
    // delta = g d = -1 at w = 1
    auto r = armijo_search(q, w, support, d, 0.5, -1.0, 0.0, 0.5, 0.1, 40);
    CHECK(r.alpha == 1.0);
    CHECK(r.w[0] == 0.0);
    CHECK(r.objective == 0.0);
    CHECK(r.trials == 1);
  }
  SUBCASE("zero direction costs nothing") {
    q.reset_counters();
    const std::vector<double> d{0.0};
    auto r = armijo_search(q, w, support, d, 0.5, 0.0, 0.0, 0.5, 0.1, 40);
    CHECK(r.alpha == 1.0);
    CHECK(r.w == w);
    CHECK(q.counters().passes() == 0);
  }
  SUBCASE("a step overshooting the curvature backtracks") {
    // d = -4 from w = 1 lands at -3 (f = 4.5 > 0.5); with sigma near 1 alpha must shrink
    const std::vector<double> d{-4.0};
    auto r = armijo_search(q, w, support, d, 0.5, -4.0, 0.0, 0.5, 0.99, 40);
    CHECK(r.alpha < 1.0);
    CHECK(r.trials >= 2);
    CHECK(r.objective <= 0.5 + r.alpha * 0.99 * -4.0);
  }
  SUBCASE("exhausted trials raise") {
    const std::vector<double> d{1.0};  // ascent direction claimed to descend
    CHECK_THROWS_AS(armijo_search(q, w, support, d, 0.5, -1.0, 0.0, 0.5, 0.1, 5), LineSearchError);
  }
}

TEST_CASE("proximal gradient step") {
  // w = (1, -0.2), g = (0.5, 0), eta = 1, lambda = 0.1
  CHECK(soft_threshold(1.0 - 0.5, 0.1) == doctest::Approx(0.4));
  CHECK(soft_threshold(-0.2 - 0.0, 0.1) == doctest::Approx(-0.1));

  // first Prox-GD iterate on l = 1/2|w - c|^2 with eta = 1 is the same soft threshold
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd b(2);
  b << -0.5, 0.0;  // gradient at 0 is (-0.5, 0)
  QuadraticOracle q(A, b);
  SolverConfig cfg;
  cfg.kind = SolverKind::ProxGd;
  cfg.lambda = 0.1;
  cfg.max_outer = 1;
  cfg.record_iterates = true;
  auto r = solve(q, cfg);
  REQUIRE(r.iterates.size() == 2);
  CHECK(r.iterates[1][0] == doctest::Approx(0.4));
  CHECK(r.iterates[1][1] == 0.0);
}

TEST_CASE("unregularized quadratic under Prox-GD") {
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 0.2, 0.2, 0.5;
  Eigen::VectorXd b(2);
  b << 1.0, -1.0;
  QuadraticOracle q(A, b);
  SolverConfig cfg;
  cfg.kind = SolverKind::ProxGd;
  cfg.lambda = 0.0;
  cfg.epsilon = 1e-10;
  cfg.max_outer = 100000;
  cfg.record_iterates = true;
  auto r = solve(q, cfg);
  CHECK(r.status == SolveStatus::Converged);
  const Eigen::VectorXd x = A.ldlt().solve(-b);
  CHECK(std::abs(r.w[0] - x[0]) <= 1e-9);
  CHECK(std::abs(r.w[1] - x[1]) <= 1e-9);
  std::vector<double> ref{x[0], x[1]};
  auto ratios = testkit::superlinear_ratio_probe(r.iterates, ref);
  // linear rate: the tail ratios settle at a constant strictly between 0 and 1
  REQUIRE(ratios.size() > 10);
  const double tail = ratios[ratios.size() - 3];
  CHECK(tail > 0.3);
  CHECK(tail < 1.0);
}

TEST_CASE("large lambda keeps w at zero") {
  auto data = small_logistic();
  LogisticOracle oracle(data);
  SolverConfig cfg;
  cfg.lambda = gradient_inf_norm_at_zero(oracle) * 1.01;
  oracle.reset_counters();
  auto r = prox_qn_solve(oracle, cfg);
  CHECK(r.status == SolveStatus::Converged);
  CHECK(count_nonzeros(r.w) == 0);
  CHECK(r.stationarity == 0.0);
  CHECK(r.trace.size() == 1);
  CHECK(oracle.counters().full_inferences == 1);
}

TEST_CASE("small logistic problem reaches the reference optimum") {
  auto data = small_logistic();
  LogisticOracle oracle(data);
  const double lambda = 0.1 * gradient_inf_norm_at_zero(oracle);

  SolverConfig ref_cfg;
  ref_cfg.kind = SolverKind::ProxGd;
  ref_cfg.lambda = lambda;
  ref_cfg.epsilon = 1e-10;
  ref_cfg.max_outer = 1000000;
  auto ref = solve(oracle, ref_cfg);
  REQUIRE(ref.status == SolveStatus::Converged);

  SolverConfig cfg;
  cfg.lambda = lambda;
  cfg.record_iterates = true;
  auto on = prox_qn_solve(oracle, cfg);
  CHECK(on.status == SolveStatus::Converged);
  CHECK(full_stationarity(oracle, on.w, lambda) <= cfg.epsilon);
  CHECK(rel_diff(on.objective, ref.objective) <= 1e-6);

  cfg.shrink_enabled = false;
  auto off = prox_qn_solve(oracle, cfg);
  CHECK(off.status == SolveStatus::Converged);
  CHECK(rel_diff(off.objective, on.objective) <= 1e-6);

  SUBCASE("trace invariants") {
    const std::size_t d = oracle.dimension();
    for (std::size_t t = 1; t < on.trace.size(); ++t) {
      CHECK(on.trace[t].objective <= on.trace[t - 1].objective);
      CHECK(on.trace[t].iter == on.trace[t - 1].iter + 1);
    }
    // within an epoch working sets are nested and weights off the set stay at zero
    for (std::size_t t = 0; t < on.working_sets.size(); ++t) {
      const auto& A = on.working_sets[t];
      CHECK(std::is_sorted(A.begin(), A.end()));
      std::vector<bool> in(d, false);
      for (Index j : A) in[j] = true;
      for (std::size_t j = 0; j < d; ++j) {
        if (!in[j]) {
          CHECK(on.iterates[t][j] == 0.0);
          CHECK(on.iterates[t + 1][j] == 0.0);
        } else if (on.iterates[t][j] != 0.0) {
          CHECK(in[j]);
        }
      }
      if (t > 0 && on.trace[t + 1].epoch == on.trace[t].epoch && A.size() != d) {
        const auto& prev = on.working_sets[t - 1];
        CHECK(std::includes(prev.begin(), prev.end(), A.begin(), A.end()));
      }
    }
  }
}

TEST_CASE("gradients between epoch boundaries are read on the working set only") {
  ChainSpec spec;
  spec.sequences = 20;
  auto data = synthetic_chain(spec);
  SeqCrfOracle inner(data);
  testkit::RecordingOracle oracle(inner);
  SolverConfig cfg;
  cfg.lambda = 1.0;
  cfg.record_iterates = true;
  auto r = prox_qn_solve(oracle, cfg);
  CHECK(r.status == SolveStatus::Converged);
  const std::size_t d = oracle.dimension();
  const auto& reads = oracle.reads();
  REQUIRE(reads.size() == r.working_sets.size() + 1);
  CHECK(reads[0].size() == d);
  for (std::size_t t = 0; t < r.working_sets.size(); ++t) {
    const auto& A = r.working_sets[t];
    const auto& got = reads[t + 1];
    REQUIRE(got.size() >= A.size());
    CHECK(std::equal(A.begin(), A.end(), got.begin()));
    // anything beyond the working set is a full refresh at an epoch boundary
    if (got.size() > A.size()) {
      CHECK(got.size() - A.size() == d);
      for (std::size_t k = 0; k < d; ++k) CHECK(got[A.size() + k] == k);
    }
  }
}

TEST_CASE("line-search failure is reported") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd b(2);
  b << 1.0, -2.0;
  QuadraticOracle q(A, b);
  q.scale_gradient = -1.0;  // every proposed direction climbs
  SolverConfig cfg;
  cfg.lambda = 0.01;
  cfg.max_trials = 10;
  auto r = prox_qn_solve(q, cfg);
  CHECK(r.status == SolveStatus::LineSearchFailed);
  CHECK(r.message.find("line search") != std::string::npos);
}

TEST_CASE("non-finite objective raises") {
  NanOracle nan;
  SolverConfig cfg;
  CHECK_THROWS_AS(prox_qn_solve(nan, cfg), DivergenceError);
  cfg.kind = SolverKind::ProxGd;
  CHECK_THROWS_AS(solve(nan, cfg), DivergenceError);
}

TEST_CASE("configuration checks") {
  SolverConfig cfg;
  cfg.beta = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.sigma = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.cooling_factor = 1.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.lambda = -1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("one step from zero lowers an unregularized chain loss") {
  ChainSpec spec;
  spec.sequences = 10;
  auto data = synthetic_chain(spec);
  SeqCrfOracle oracle(data);
  SolverConfig cfg;
  cfg.lambda = 0.0;
  cfg.max_outer = 1;
  auto r = prox_qn_solve(oracle, cfg);
  REQUIRE(r.trace.size() == 2);
  CHECK(r.trace[1].objective < r.trace[0].objective);
}
