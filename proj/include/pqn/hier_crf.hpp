#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pqn/oracle.hpp"
#include "pqn/sparse_data.hpp"

namespace pqn {

// W is K x J; class k, feature j lives at k * J + j.
struct HierLayout {
  std::size_t num_classes = 0;
  std::size_t num_features = 0;

  std::size_t dimension() const { return num_classes * num_features; }
  Index index(std::size_t k, std::size_t j) const { return static_cast<Index>(k * num_features + j); }

  static HierLayout of(const TaxonomyDataset& data) { return {data.tree.num_classes(), data.num_features()}; }
};

struct HierModel {
  HierLayout layout;
  std::vector<double> weights;

  explicit HierModel(HierLayout l) : layout(l), weights(l.dimension(), 0.0) {}
  double& at(std::size_t k, std::size_t j) { return weights[layout.index(k, j)]; }
};

struct HierMessages {
  std::vector<double> alpha;           // accumulated path score per class
  std::vector<double> leaf_posterior;  // aligned with Taxonomy::leaves()
  std::vector<double> beta;            // posterior mass of the leaves below each class
  double log_z = 0.0;
};

// Downward pass alpha(k) = alpha(parent(k)) + w_k^T x, softmax over leaf scores, then the
// upward pass beta(k) = sum of beta over children. `class_scores` holds w_k^T x.
HierMessages hier_downward_upward(const Taxonomy& tree, std::span<const double> class_scores);

HierMessages hier_downward_upward(const HierLayout& layout, std::span<const double> w,
                                  const TaxonomyDataset& data, std::size_t instance);

// Leaf with the highest path score.
Index hier_predict(const HierLayout& layout, std::span<const double> w, const TaxonomyDataset& data,
                   std::size_t instance);
double hier_accuracy(const HierLayout& layout, std::span<const double> w, const TaxonomyDataset& data);

// Negative conditional log-likelihood of the taxonomy model
// P(y | x) proportional to exp(sum_{k in Path(y)} w_k^T x).
class HierOracle final : public SmoothLossOracle {
 public:
  explicit HierOracle(const TaxonomyDataset& data, std::size_t threads = 1);

  std::size_t dimension() const override { return layout_.dimension(); }
  std::size_t sample_count() const override { return data_.size(); }
  const HierLayout& layout() const { return layout_; }

  // beta(k) per instance (N x K), valid after inference.
  std::span<const double> upward_sums() const { return beta_; }

 protected:
  double do_full_inference(std::span<const double> w) override;
  double do_partial_gradient(Index j) const override;
  double do_loss(std::span<const double> w) override;

 private:
  void compute_scores(std::span<const double> w);

  const TaxonomyDataset& data_;
  HierLayout layout_;
  std::size_t threads_;
  std::vector<double> scores_;  // N x K, w_k^T x_i
  std::vector<double> beta_;    // N x K
  std::vector<double> inst_loss_;
};

}  // namespace pqn
