#include "pqn/hier_crf.hpp"

#include <algorithm>
#include <cmath>

#include "pqn/math.hpp"
#include "pqn/parallel.hpp"

namespace pqn {

HierMessages hier_downward_upward(const Taxonomy& tree, std::span<const double> class_scores) {
  const std::size_t K = tree.num_classes();
  HierMessages m;
  m.alpha.assign(K, 0.0);
  for (Index k : tree.top_down_order()) {
    const Index p = tree.parent(k);
    m.alpha[k] = (p == kNoIndex ? 0.0 : m.alpha[p]) + class_scores[k];
  }

  const auto leaves = tree.leaves();
  std::vector<double> leaf_scores(leaves.size());
  for (std::size_t l = 0; l < leaves.size(); ++l) leaf_scores[l] = m.alpha[leaves[l]];
  m.log_z = log_sum_exp(leaf_scores);
  m.leaf_posterior.resize(leaves.size());
  for (std::size_t l = 0; l < leaves.size(); ++l) m.leaf_posterior[l] = std::exp(leaf_scores[l] - m.log_z);

  m.beta.assign(K, 0.0);
  auto order = tree.top_down_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Index k = *it;
    if (tree.is_leaf(k)) m.beta[k] = m.leaf_posterior[tree.leaf_slot(k)];
    if (tree.parent(k) != kNoIndex) m.beta[tree.parent(k)] += m.beta[k];
  }
  return m;
}

namespace {

std::vector<double> scores_by_row(const HierLayout& layout, std::span<const double> w,
                                  const TaxonomyDataset& data, std::size_t instance) {
  std::vector<double> s(layout.num_classes, 0.0);
  for (const auto& e : data.instances.row(instance)) {
    for (std::size_t k = 0; k < layout.num_classes; ++k) s[k] += w[layout.index(k, e.feature)] * e.value;
  }
  return s;
}

}  // namespace

HierMessages hier_downward_upward(const HierLayout& layout, std::span<const double> w,
                                  const TaxonomyDataset& data, std::size_t instance) {
  return hier_downward_upward(data.tree, scores_by_row(layout, w, data, instance));
}

Index hier_predict(const HierLayout& layout, std::span<const double> w, const TaxonomyDataset& data,
                   std::size_t instance) {
  HierMessages m = hier_downward_upward(layout, w, data, instance);
  const auto leaves = data.tree.leaves();
  std::size_t best = 0;
  for (std::size_t l = 1; l < leaves.size(); ++l) {
    if (m.alpha[leaves[l]] > m.alpha[leaves[best]]) best = l;
  }
  return leaves[best];
}

double hier_accuracy(const HierLayout& layout, std::span<const double> w, const TaxonomyDataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hits += hier_predict(layout, w, data, i) == data.labels[i];
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------

HierOracle::HierOracle(const TaxonomyDataset& data, std::size_t threads)
    : data_(data), layout_(HierLayout::of(data)), threads_(threads) {
  scores_.assign(data.size() * layout_.num_classes, 0.0);
  beta_.assign(data.size() * layout_.num_classes, 0.0);
  inst_loss_.assign(data.size(), 0.0);
}

void HierOracle::compute_scores(std::span<const double> w) {
  const std::size_t K = layout_.num_classes, J = layout_.num_features;
  std::fill(scores_.begin(), scores_.end(), 0.0);
  // Only nonzero weights contribute; walk their feature columns.
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < J; ++j) {
      const double wkj = w[layout_.index(k, j)];
      if (wkj == 0.0) continue;
      for (const auto& e : data_.feature_index.column(static_cast<Index>(j)))
        scores_[static_cast<std::size_t>(e.instance) * K + k] += wkj * e.value;
    }
  }
}

double HierOracle::do_full_inference(std::span<const double> w) {
  const std::size_t K = layout_.num_classes;
  compute_scores(w);
  parallel_for(data_.size(), threads_, [&](std::size_t i) {
    HierMessages m = hier_downward_upward(data_.tree, std::span<const double>(scores_).subspan(i * K, K));
    std::copy(m.beta.begin(), m.beta.end(), beta_.begin() + static_cast<std::ptrdiff_t>(i * K));
    inst_loss_[i] = m.log_z - m.alpha[data_.labels[i]];
  });
  double loss = 0.0;
  for (double v : inst_loss_) loss += v;
  return loss;
}

double HierOracle::do_partial_gradient(Index idx) const {
  const std::size_t K = layout_.num_classes, J = layout_.num_features;
  const Index k = static_cast<Index>(idx / J);
  const Index j = static_cast<Index>(idx % J);
  double g = 0.0;
  for (const auto& e : data_.feature_index.column(j)) {
    const double indicator = data_.tree.on_path(k, data_.labels[e.instance]) ? 1.0 : 0.0;
    g += (beta_[static_cast<std::size_t>(e.instance) * K + k] - indicator) * e.value;
  }
  return g;
}

double HierOracle::do_loss(std::span<const double> w) {
  const std::size_t K = layout_.num_classes;
  compute_scores(w);
  parallel_for(data_.size(), threads_, [&](std::size_t i) {
    HierMessages m = hier_downward_upward(data_.tree, std::span<const double>(scores_).subspan(i * K, K));
    inst_loss_[i] = m.log_z - m.alpha[data_.labels[i]];
  });
  double loss = 0.0;
  for (double v : inst_loss_) loss += v;
  return loss;
}

}  // namespace pqn
