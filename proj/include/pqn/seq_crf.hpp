#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pqn/oracle.hpp"
#include "pqn/sparse_data.hpp"

namespace pqn {

// Coordinates of the linear-chain model w = {Theta, Lambda}:
//   Theta(y, j)   unigram weight of label y and raw feature j, at y * J + j
//   Lambda(a, b)  bigram weight of the transition a -> b,    at |Y| * J + a * |Y| + b
struct SeqCrfLayout {
  std::size_t num_labels = 0;
  std::size_t num_features = 0;

  std::size_t dimension() const { return num_labels * num_labels + num_labels * num_features; }
  Index unigram(std::size_t y, std::size_t j) const { return static_cast<Index>(y * num_features + j); }
  Index bigram(std::size_t from, std::size_t to) const {
    return static_cast<Index>(num_labels * num_features + from * num_labels + to);
  }
  bool is_bigram(Index k) const { return k >= num_labels * num_features; }
  std::span<const double> transitions(std::span<const double> w) const {
    return w.subspan(num_labels * num_features, num_labels * num_labels);
  }

  static SeqCrfLayout of(const SequenceDataset& data) {
    return {data.label_alphabet_size, data.raw_feature_count};
  }
};

struct SeqCrfModel {
  SeqCrfLayout layout;
  std::vector<double> weights;

  explicit SeqCrfModel(SeqCrfLayout l) : layout(l), weights(l.dimension(), 0.0) {}
  double& theta(std::size_t y, std::size_t j) { return weights[layout.unigram(y, j)]; }
  double& lambda(std::size_t from, std::size_t to) { return weights[layout.bigram(from, to)]; }
};

// Log-domain forward/backward tables of one sequence.
struct ChainMessages {
  std::size_t length = 0;
  std::size_t num_labels = 0;
  std::vector<double> unary;       // T x |Y|, Theta_y^T x_t
  std::vector<double> transition;  // |Y| x |Y|
  std::vector<double> log_alpha;   // T x |Y|
  std::vector<double> log_beta;    // T x |Y|
  double log_z = 0.0;

  double node_marginal(std::size_t t, std::size_t y) const;
  // P(y_t = from, y_{t+1} = to | x)
  double edge_marginal(std::size_t t, std::size_t from, std::size_t to) const;
};

// Forward-backward from precomputed unary scores (T x |Y|) and transition scores (|Y| x |Y|).
ChainMessages chain_messages(std::span<const double> unary, std::span<const double> transition,
                             std::size_t length, std::size_t num_labels);

ChainMessages seq_forward_backward(const SeqCrfLayout& layout, std::span<const double> w,
                                   const SequenceDataset& data, std::size_t seq);

// Max-product decoding of one sequence.
std::vector<Index> seq_viterbi(const SeqCrfLayout& layout, std::span<const double> w,
                               const SequenceDataset& data, std::size_t seq);

// Fraction of positions whose decoded label equals the gold label.
double seq_accuracy(const SeqCrfLayout& layout, std::span<const double> w, const SequenceDataset& data);

// Negative conditional log-likelihood of a linear-chain CRF.
//
// Unary scores are accumulated feature by feature over the nonzero Theta entries, so an
// inference pass costs O(nnz(Theta) * D_nnz) for the scores plus O(|Y|^2 T) per sequence.
// Partial derivatives for Theta(y, j) walk only the feature-indexed column j.
class SeqCrfOracle final : public SmoothLossOracle {
 public:
  explicit SeqCrfOracle(const SequenceDataset& data, std::size_t threads = 1);

  std::size_t dimension() const override { return layout_.dimension(); }
  std::size_t sample_count() const override { return data_.sequences.size(); }
  const SeqCrfLayout& layout() const { return layout_; }

  // Node marginals P(y_t = y | x) per position row (num_positions x |Y|), valid after inference.
  std::span<const double> node_marginals() const { return node_marg_; }

 protected:
  double do_full_inference(std::span<const double> w) override;
  double do_partial_gradient(Index j) const override;
  double do_loss(std::span<const double> w) override;

 private:
  void compute_unary(std::span<const double> w);
  double gold_score(std::size_t seq, std::span<const double> transition) const;

  const SequenceDataset& data_;
  SeqCrfLayout layout_;
  std::size_t threads_;
  std::vector<Index> gold_;             // gold label per position row
  std::vector<double> empirical_edges_; // |Y| x |Y| transition counts
  std::vector<double> unary_;           // num_positions x |Y| scratch
  std::vector<double> node_marg_;
  std::vector<double> seq_edges_;       // per-sequence expected transitions, N x |Y|^2
  std::vector<double> expected_edges_;
  std::vector<double> seq_loss_;
};

}  // namespace pqn
