#include "pqn/testkit.hpp"

#include <algorithm>
#include <cmath>

#include "pqn/error.hpp"

namespace pqn::testkit {

namespace {

// Advances a base-`radix` counter; false after the last labeling.
bool next_labeling(std::vector<Index>& labels, std::size_t radix) {
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (++labels[t] < radix) return true;
    labels[t] = 0;
  }
  return false;
}

std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t limit) {
  std::size_t v = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    v *= base;
    if (v > limit) throw TooLargeError("too many labelings to enumerate");
  }
  return v;
}

// Feature vector of one labeling of a sequence, accumulated into `phi` with weight `scale`.
void add_seq_features(const SeqCrfLayout& layout, const SequenceDataset& data, std::size_t seq,
                      const std::vector<Index>& labels, double scale, std::span<double> phi) {
  const Sequence& s = data.sequences[seq];
  for (std::size_t t = 0; t < labels.size(); ++t) {
    for (const auto& e : data.positions.row(s.first_position + t)) phi[layout.unigram(labels[t], e.feature)] += scale * e.value;
    if (t + 1 < labels.size()) phi[layout.bigram(labels[t], labels[t + 1])] += scale;
  }
}

double seq_score(const SeqCrfLayout& layout, std::span<const double> w, const SequenceDataset& data,
                 std::size_t seq, const std::vector<Index>& labels) {
  const Sequence& s = data.sequences[seq];
  double score = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    for (const auto& e : data.positions.row(s.first_position + t)) score += w[layout.unigram(labels[t], e.feature)] * e.value;
    if (t + 1 < labels.size()) score += w[layout.bigram(labels[t], labels[t + 1])];
  }
  return score;
}

std::vector<Index> ancestors_of(const Taxonomy& tree, Index leaf) {
  std::vector<Index> path;
  for (Index k = leaf; k != kNoIndex; k = tree.parent(k)) path.push_back(k);
  return path;
}

}  // namespace

SeqEnumeration enumerate_seq(const SeqCrfLayout& layout, std::span<const double> w,
                             const SequenceDataset& data, std::size_t seq) {
  const Sequence& s = data.sequences.at(seq);
  const std::size_t T = s.length(), Y = layout.num_labels;
  const std::size_t count = checked_power(Y, T, 10000);

  std::vector<std::vector<Index>> labelings;
  std::vector<double> scores;
  labelings.reserve(count);
  std::vector<Index> labels(T, 0);
  do {
    labelings.push_back(labels);
    scores.push_back(seq_score(layout, w, data, seq, labels));
  } while (next_labeling(labels, Y));

  const double top = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double sc : scores) z += std::exp(sc - top);

  SeqEnumeration out;
  out.log_z = top + std::log(z);
  out.gold_log_prob = seq_score(layout, w, data, seq, s.labels) - out.log_z;
  out.node_marginals.assign(T * Y, 0.0);
  out.edge_marginals.assign((T > 0 ? T - 1 : 0) * Y * Y, 0.0);
  out.gradient.assign(layout.dimension(), 0.0);
  for (std::size_t l = 0; l < labelings.size(); ++l) {
    const double p = std::exp(scores[l] - out.log_z);
    const auto& lab = labelings[l];
    for (std::size_t t = 0; t < T; ++t) {
      out.node_marginals[t * Y + lab[t]] += p;
      if (t + 1 < T) out.edge_marginals[(t * Y + lab[t]) * Y + lab[t + 1]] += p;
    }
    add_seq_features(layout, data, seq, lab, p, out.gradient);
  }
  add_seq_features(layout, data, seq, s.labels, -1.0, out.gradient);
  return out;
}

HierEnumeration enumerate_hier(const HierLayout& layout, std::span<const double> w,
                               const TaxonomyDataset& data, std::size_t instance) {
  const Taxonomy& tree = data.tree;
  const auto leaves = tree.leaves();
  if (leaves.size() > 1000) throw TooLargeError("too many leaves to enumerate");
  const auto row = data.instances.row(instance);

  std::vector<double> class_score(tree.num_classes(), 0.0);
  for (std::size_t k = 0; k < tree.num_classes(); ++k) {
    for (const auto& e : row) class_score[k] += w[layout.index(k, e.feature)] * e.value;
  }
  std::vector<std::vector<Index>> paths;
  std::vector<double> scores;
  for (Index leaf : leaves) {
    paths.push_back(ancestors_of(tree, leaf));
    double sc = 0.0;
    for (Index k : paths.back()) sc += class_score[k];
    scores.push_back(sc);
  }
  const double top = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double sc : scores) z += std::exp(sc - top);

  HierEnumeration out;
  out.log_z = top + std::log(z);
  out.leaf_posterior.resize(leaves.size());
  out.beta.assign(tree.num_classes(), 0.0);
  out.gradient.assign(layout.dimension(), 0.0);
  const Index gold = data.labels[instance];
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    const double p = std::exp(scores[l] - out.log_z);
    out.leaf_posterior[l] = p;
    for (Index k : paths[l]) {
      out.beta[k] += p;
      for (const auto& e : row) out.gradient[layout.index(k, e.feature)] += p * e.value;
    }
    if (leaves[l] == gold) out.gold_log_prob = scores[l] - out.log_z;
  }
  for (Index k : ancestors_of(tree, gold)) {
    for (const auto& e : row) out.gradient[layout.index(k, e.feature)] -= e.value;
  }
  return out;
}

// ---------------------------------------------------------------------------

DenseBfgs::DenseBfgs(std::size_t dimension, std::size_t memory)
    : memory_(memory), B_(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dimension),
                                                    static_cast<Eigen::Index>(dimension))) {}

bool DenseBfgs::push(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  const double sy = s.dot(y);
  if (!(sy > 1e-12 * s.norm() * y.norm()) || s.squaredNorm() == 0.0) return false;
  s_.push_back(s);
  y_.push_back(y);
  if (s_.size() > memory_) {
    s_.erase(s_.begin());
    y_.erase(y_.begin());
  }
  gamma_ = sy / s.squaredNorm();
  rebuild();
  return true;
}

void DenseBfgs::rebuild() {
  const auto d = B_.rows();
  B_ = gamma_ * Eigen::MatrixXd::Identity(d, d);
  for (std::size_t k = 0; k < s_.size(); ++k) {
    const Eigen::VectorXd Bs = B_ * s_[k];
    B_ += -(Bs * Bs.transpose()) / s_[k].dot(Bs) + (y_[k] * y_[k].transpose()) / y_[k].dot(s_[k]);
  }
}

Eigen::VectorXd exact_subproblem_solve(const Eigen::VectorXd& g, const Eigen::VectorXd& w,
                                       const Eigen::MatrixXd& B, double lambda, double tol) {
  const auto n = g.size();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  for (int sweep = 0; sweep < 1000000; ++sweep) {
    double biggest = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = B(j, j);
      const double b = g[j] + B.row(j).dot(d);
      const double c = w[j] + d[j];
      // argmin_z a/2 z^2 + b z + lambda |c + z|, written out rather than shared with the solver
      const double u = c - b / a;
      const double shrunk = u > lambda / a ? u - lambda / a : (u < -lambda / a ? u + lambda / a : 0.0);
      const double z = shrunk - c;
      d[j] += z;
      biggest = std::max(biggest, std::abs(z));
    }
    if (biggest <= tol) break;
  }
  return d;
}

std::vector<double> fd_gradient(const LossFn& loss, std::span<const double> w, double h) {
  std::vector<double> x(w.begin(), w.end()), out(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    x[j] = w[j] + h;
    const double up = loss(x);
    x[j] = w[j] - h;
    const double down = loss(x);
    x[j] = w[j];
    out[j] = (up - down) / (2.0 * h);
  }
  return out;
}

Eigen::MatrixXd fd_hessian(const LossFn& loss, std::span<const double> w, double h) {
  const std::size_t d = w.size();
  std::vector<double> x(w.begin(), w.end());
  Eigen::MatrixXd H(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  auto eval = [&](std::size_t i, double di, std::size_t j, double dj) {
    x[i] += di;
    x[j] += dj;
    const double v = loss(x);
    x[i] = w[i];
    x[j] = w[j];
    return v;
  };
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double v = (eval(i, h, j, h) - eval(i, h, j, -h) - eval(i, -h, j, h) + eval(i, -h, j, -h)) / (4.0 * h * h);
      H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return H;
}

std::vector<FeatureTable> seq_feature_tables(const SeqCrfLayout& layout, const SequenceDataset& data) {
  std::vector<FeatureTable> tables;
  for (std::size_t i = 0; i < data.sequences.size(); ++i) {
    const std::size_t T = data.sequences[i].length();
    const std::size_t count = checked_power(layout.num_labels, T, 1000);
    FeatureTable table = FeatureTable::Zero(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(layout.dimension()));
    std::vector<Index> labels(T, 0);
    Eigen::Index row = 0;
    std::vector<double> phi(layout.dimension());
    do {
      std::fill(phi.begin(), phi.end(), 0.0);
      add_seq_features(layout, data, i, labels, 1.0, phi);
      for (std::size_t k = 0; k < phi.size(); ++k) table(row, static_cast<Eigen::Index>(k)) = phi[k];
      ++row;
    } while (next_labeling(labels, layout.num_labels));
    tables.push_back(std::move(table));
  }
  return tables;
}

std::vector<FeatureTable> hier_feature_tables(const HierLayout& layout, const TaxonomyDataset& data) {
  std::vector<FeatureTable> tables;
  const auto leaves = data.tree.leaves();
  for (std::size_t i = 0; i < data.size(); ++i) {
    FeatureTable table = FeatureTable::Zero(static_cast<Eigen::Index>(leaves.size()), static_cast<Eigen::Index>(layout.dimension()));
    for (std::size_t l = 0; l < leaves.size(); ++l) {
      for (Index k : ancestors_of(data.tree, leaves[l])) {
        for (const auto& e : data.instances.row(i))
          table(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(layout.index(k, e.feature))) += e.value;
      }
    }
    tables.push_back(std::move(table));
  }
  return tables;
}

Eigen::MatrixXd hessian_via_phi(std::span<const FeatureTable> tables, std::span<const double> w) {
  const auto d = static_cast<Eigen::Index>(w.size());
  if (d > 30) throw TooLargeError("hessian_via_phi supports at most 30 coordinates");
  Eigen::Index columns = 0;
  for (const auto& t : tables) columns += t.rows();
  if (columns > 1000) throw TooLargeError("hessian_via_phi supports at most 1000 (instance, labeling) columns");

  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), d);
  Eigen::MatrixXd Phi(d, columns);
  Eigen::VectorXd D(columns);
  Eigen::Index n = 0;
  for (const auto& table : tables) {
    Eigen::VectorXd logits = table * wv;
    const double top = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - top).exp();
    p /= p.sum();
    const Eigen::VectorXd mean = table.transpose() * p;
    for (Eigen::Index l = 0; l < table.rows(); ++l, ++n) {
      Phi.col(n) = table.row(l).transpose() - mean;
      D[n] = p[l];
    }
  }
  return Phi * D.asDiagonal() * Phi.transpose();
}

std::vector<double> superlinear_ratio_probe(std::span<const std::vector<double>> iterates,
                                            std::span<const double> w_ref) {
  auto dist = [&](const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) s += (w[j] - w_ref[j]) * (w[j] - w_ref[j]);
    return std::sqrt(s);
  };
  std::vector<double> ratios;
  for (std::size_t t = 0; t + 1 < iterates.size(); ++t) {
    const double den = dist(iterates[t]);
    if (den < 1e-13) continue;
    ratios.push_back(dist(iterates[t + 1]) / den);
  }
  return ratios;
}

}  // namespace pqn::testkit
