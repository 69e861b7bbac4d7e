#pragma once

// Brute-force reference computations used to check the solver and the oracles.
// Nothing here calls into the inference, L-BFGS or coordinate-descent code it is
// meant to verify; only the coordinate layouts and dataset types are shared.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pqn/hier_crf.hpp"
#include "pqn/oracle.hpp"
#include "pqn/seq_crf.hpp"
#include "pqn/sparse_data.hpp"

namespace pqn::testkit {

struct SeqEnumeration {
  double log_z = 0.0;
  double gold_log_prob = 0.0;
  std::vector<double> node_marginals;  // T x |Y|
  std::vector<double> edge_marginals;  // (T-1) x |Y| x |Y|
  std::vector<double> gradient;        // E[phi] - phi(gold), length d
};

// Sums over all |Y|^T labelings of one sequence. Refuses more than 10^4 labelings.
SeqEnumeration enumerate_seq(const SeqCrfLayout& layout, std::span<const double> w,
                             const SequenceDataset& data, std::size_t seq);

struct HierEnumeration {
  double log_z = 0.0;
  double gold_log_prob = 0.0;
  std::vector<double> leaf_posterior;  // aligned with Taxonomy::leaves()
  std::vector<double> beta;            // sum of leaf posteriors below each class
  std::vector<double> gradient;        // length d
};

// Softmax over leaves of the summed path scores. Refuses more than 10^3 leaves.
HierEnumeration enumerate_hier(const HierLayout& layout, std::span<const double> w,
                               const TaxonomyDataset& data, std::size_t instance);

// Explicit BFGS recursion on a dense matrix. Keeps the last m accepted pairs and, like the
// compact form, rebuilds B from gamma I (gamma from the newest pair) over that window.
class DenseBfgs {
 public:
  DenseBfgs(std::size_t dimension, std::size_t memory);

  // Returns false (and changes nothing) when s^T y <= 1e-12 |s| |y|.
  bool push(const Eigen::VectorXd& s, const Eigen::VectorXd& y);
  const Eigen::MatrixXd& matrix() const { return B_; }
  double gamma() const { return gamma_; }

 private:
  void rebuild();

  std::size_t memory_;
  double gamma_ = 1.0;
  std::vector<Eigen::VectorXd> s_;
  std::vector<Eigen::VectorXd> y_;
  Eigen::MatrixXd B_;
};

// Cyclic coordinate descent on the dense quadratic + l1 model until no coordinate moves
// by more than `tol`.
Eigen::VectorXd exact_subproblem_solve(const Eigen::VectorXd& g, const Eigen::VectorXd& w,
                                       const Eigen::MatrixXd& B, double lambda, double tol = 1e-14);

using LossFn = std::function<double(std::span<const double>)>;

// Central differences (l(w + h e_j) - l(w - h e_j)) / 2h.
std::vector<double> fd_gradient(const LossFn& loss, std::span<const double> w, double h);

// Second-order central differences.
Eigen::MatrixXd fd_hessian(const LossFn& loss, std::span<const double> w, double h);

// Feature vectors phi(y, x) of every labeling of one instance: one row per labeling.
using FeatureTable = Eigen::MatrixXd;

std::vector<FeatureTable> seq_feature_tables(const SeqCrfLayout& layout, const SequenceDataset& data);
std::vector<FeatureTable> hier_feature_tables(const HierLayout& layout, const TaxonomyDataset& data);

// Hessian of sum_i -log P(y_i | x_i) as Phi D Phi^T, where column n of Phi is
// phi(y_l, x_i) - E[phi(y, x_i)] and D_nn = P(y_l | x_i). Refuses d > 30 or more than
// 10^3 (instance, labeling) columns.
Eigen::MatrixXd hessian_via_phi(std::span<const FeatureTable> tables, std::span<const double> w);

// r_t = |w_{t+1} - w_ref| / |w_t - w_ref|; pairs whose denominator is below 1e-13 are skipped.
std::vector<double> superlinear_ratio_probe(std::span<const std::vector<double>> iterates,
                                            std::span<const double> w_ref);

// Forwards to another oracle and logs which coordinates were read after each inference.
class RecordingOracle final : public SmoothLossOracle {
 public:
  explicit RecordingOracle(SmoothLossOracle& inner) : inner_(inner) {}

  std::size_t dimension() const override { return inner_.dimension(); }
  std::size_t sample_count() const override { return inner_.sample_count(); }

  // reads()[k] lists the coordinates requested after the k-th full_inference.
  const std::vector<std::vector<Index>>& reads() const { return reads_; }

 protected:
  double do_full_inference(std::span<const double> w) override {
    reads_.emplace_back();
    return inner_.full_inference(w);
  }
  double do_partial_gradient(Index j) const override {
    reads_.back().push_back(j);
    return inner_.partial_gradient(j);
  }
  double do_loss(std::span<const double> w) override { return inner_.loss_at(w); }

 private:
  SmoothLossOracle& inner_;
  mutable std::vector<std::vector<Index>> reads_;
};

}  // namespace pqn::testkit
