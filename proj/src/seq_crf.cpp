#include "pqn/seq_crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pqn/math.hpp"
#include "pqn/parallel.hpp"

namespace pqn {

double ChainMessages::node_marginal(std::size_t t, std::size_t y) const {
  const std::size_t Y = num_labels;
  return std::exp(log_alpha[t * Y + y] + log_beta[t * Y + y] - log_z);
}

double ChainMessages::edge_marginal(std::size_t t, std::size_t from, std::size_t to) const {
  const std::size_t Y = num_labels;
  return std::exp(log_alpha[t * Y + from] + transition[from * Y + to] + unary[(t + 1) * Y + to] +
                  log_beta[(t + 1) * Y + to] - log_z);
}

ChainMessages chain_messages(std::span<const double> unary, std::span<const double> transition,
                             std::size_t length, std::size_t num_labels) {
  const std::size_t T = length, Y = num_labels;
  ChainMessages m;
  m.length = T;
  m.num_labels = Y;
  m.unary.assign(unary.begin(), unary.begin() + static_cast<std::ptrdiff_t>(T * Y));
  m.transition.assign(transition.begin(), transition.end());
  m.log_alpha.assign(T * Y, 0.0);
  m.log_beta.assign(T * Y, 0.0);

  std::vector<double> terms(Y);
  for (std::size_t y = 0; y < Y; ++y) m.log_alpha[y] = unary[y];
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t y = 0; y < Y; ++y) {
      for (std::size_t p = 0; p < Y; ++p) terms[p] = m.log_alpha[(t - 1) * Y + p] + transition[p * Y + y];
      m.log_alpha[t * Y + y] = unary[t * Y + y] + log_sum_exp(terms);
    }
  }
  // log_beta at T-1 is zero.
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t p = 0; p < Y; ++p) {
      for (std::size_t y = 0; y < Y; ++y)
        terms[y] = m.log_beta[(t + 1) * Y + y] + unary[(t + 1) * Y + y] + transition[p * Y + y];
      m.log_beta[t * Y + p] = log_sum_exp(terms);
    }
  }
  m.log_z = log_sum_exp(std::span<const double>(m.log_alpha).subspan((T - 1) * Y, Y));
  return m;
}

namespace {

void unary_by_rows(const SeqCrfLayout& layout, std::span<const double> w, const SequenceDataset& data,
                   std::size_t seq, std::vector<double>& out) {
  const Sequence& s = data.sequences[seq];
  const std::size_t Y = layout.num_labels;
  out.assign(s.length() * Y, 0.0);
  for (std::size_t t = 0; t < s.length(); ++t) {
    for (const auto& e : data.positions.row(s.first_position + t)) {
      for (std::size_t y = 0; y < Y; ++y) out[t * Y + y] += w[layout.unigram(y, e.feature)] * e.value;
    }
  }
}

}  // namespace

ChainMessages seq_forward_backward(const SeqCrfLayout& layout, std::span<const double> w,
                                   const SequenceDataset& data, std::size_t seq) {
  std::vector<double> unary;
  unary_by_rows(layout, w, data, seq, unary);
  return chain_messages(unary, layout.transitions(w), data.sequences[seq].length(), layout.num_labels);
}

std::vector<Index> seq_viterbi(const SeqCrfLayout& layout, std::span<const double> w,
                               const SequenceDataset& data, std::size_t seq) {
  std::vector<double> unary;
  unary_by_rows(layout, w, data, seq, unary);
  const std::size_t T = data.sequences[seq].length(), Y = layout.num_labels;
  auto trans = layout.transitions(w);
  std::vector<double> best(T * Y);
  std::vector<Index> back(T * Y, 0);
  for (std::size_t y = 0; y < Y; ++y) best[y] = unary[y];
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t y = 0; y < Y; ++y) {
      double top = -std::numeric_limits<double>::infinity();
      Index arg = 0;
      for (std::size_t p = 0; p < Y; ++p) {
        const double v = best[(t - 1) * Y + p] + trans[p * Y + y];
        if (v > top) {
          top = v;
          arg = static_cast<Index>(p);
        }
      }
      best[t * Y + y] = top + unary[t * Y + y];
      back[t * Y + y] = arg;
    }
  }
  std::vector<Index> path(T);
  path[T - 1] = static_cast<Index>(std::max_element(best.begin() + static_cast<std::ptrdiff_t>((T - 1) * Y), best.end()) -
                                   (best.begin() + static_cast<std::ptrdiff_t>((T - 1) * Y)));
  for (std::size_t t = T - 1; t > 0; --t) path[t - 1] = back[t * Y + path[t]];
  return path;
}

double seq_accuracy(const SeqCrfLayout& layout, std::span<const double> w, const SequenceDataset& data) {
  std::size_t hits = 0, total = 0;
  for (std::size_t s = 0; s < data.sequences.size(); ++s) {
    auto pred = seq_viterbi(layout, w, data, s);
    for (std::size_t t = 0; t < pred.size(); ++t) hits += pred[t] == data.sequences[s].labels[t];
    total += pred.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------

SeqCrfOracle::SeqCrfOracle(const SequenceDataset& data, std::size_t threads)
    : data_(data), layout_(SeqCrfLayout::of(data)), threads_(threads) {
  const std::size_t Y = layout_.num_labels;
  gold_.resize(data.num_positions());
  empirical_edges_.assign(Y * Y, 0.0);
  for (const Sequence& s : data.sequences) {
    for (std::size_t t = 0; t < s.length(); ++t) {
      gold_[s.first_position + t] = s.labels[t];
      if (t + 1 < s.length()) empirical_edges_[s.labels[t] * Y + s.labels[t + 1]] += 1.0;
    }
  }
  unary_.assign(data.num_positions() * Y, 0.0);
  node_marg_.assign(data.num_positions() * Y, 0.0);
  seq_edges_.assign(data.sequences.size() * Y * Y, 0.0);
  expected_edges_.assign(Y * Y, 0.0);
  seq_loss_.assign(data.sequences.size(), 0.0);
}

void SeqCrfOracle::compute_unary(std::span<const double> w) {
  const std::size_t Y = layout_.num_labels, J = layout_.num_features;
  std::fill(unary_.begin(), unary_.end(), 0.0);
  std::vector<double> theta_j(Y);
  for (std::size_t j = 0; j < J; ++j) {
    bool any = false;
    for (std::size_t y = 0; y < Y; ++y) {
      theta_j[y] = w[layout_.unigram(y, j)];
      any |= theta_j[y] != 0.0;
    }
    if (!any) continue;
    for (const auto& e : data_.feature_index.column(static_cast<Index>(j))) {
      double* row = unary_.data() + static_cast<std::size_t>(e.instance) * Y;
      for (std::size_t y = 0; y < Y; ++y) row[y] += theta_j[y] * e.value;
    }
  }
}

double SeqCrfOracle::gold_score(std::size_t seq, std::span<const double> transition) const {
  const Sequence& s = data_.sequences[seq];
  const std::size_t Y = layout_.num_labels;
  double score = 0.0;
  for (std::size_t t = 0; t < s.length(); ++t) {
    score += unary_[(s.first_position + t) * Y + s.labels[t]];
    if (t + 1 < s.length()) score += transition[s.labels[t] * Y + s.labels[t + 1]];
  }
  return score;
}

double SeqCrfOracle::do_full_inference(std::span<const double> w) {
  const std::size_t Y = layout_.num_labels;
  compute_unary(w);
  const auto trans = layout_.transitions(w);
  parallel_for(data_.sequences.size(), threads_, [&](std::size_t i) {
    const Sequence& s = data_.sequences[i];
    const std::size_t T = s.length();
    auto unary = std::span<const double>(unary_).subspan(s.first_position * Y, T * Y);
    ChainMessages m = chain_messages(unary, trans, T, Y);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t y = 0; y < Y; ++y) node_marg_[(s.first_position + t) * Y + y] = m.node_marginal(t, y);
    }
    double* edges = seq_edges_.data() + i * Y * Y;
    std::fill(edges, edges + Y * Y, 0.0);
    for (std::size_t t = 0; t + 1 < T; ++t) {
      for (std::size_t a = 0; a < Y; ++a) {
        for (std::size_t b = 0; b < Y; ++b) edges[a * Y + b] += m.edge_marginal(t, a, b);
      }
    }
    seq_loss_[i] = m.log_z - gold_score(i, trans);
  });

  // Reductions in sequence order, independent of the thread count.
  double loss = 0.0;
  std::fill(expected_edges_.begin(), expected_edges_.end(), 0.0);
  for (std::size_t i = 0; i < data_.sequences.size(); ++i) {
    loss += seq_loss_[i];
    const double* edges = seq_edges_.data() + i * Y * Y;
    for (std::size_t k = 0; k < Y * Y; ++k) expected_edges_[k] += edges[k];
  }
  return loss;
}

double SeqCrfOracle::do_partial_gradient(Index k) const {
  const std::size_t Y = layout_.num_labels, J = layout_.num_features;
  if (layout_.is_bigram(k)) {
    const std::size_t e = k - Y * J;
    return expected_edges_[e] - empirical_edges_[e];
  }
  const std::size_t y = k / J, j = k % J;
  double g = 0.0;
  for (const auto& e : data_.feature_index.column(static_cast<Index>(j))) {
    const double indicator = gold_[e.instance] == y ? 1.0 : 0.0;
    g += (node_marg_[static_cast<std::size_t>(e.instance) * Y + y] - indicator) * e.value;
  }
  return g;
}

double SeqCrfOracle::do_loss(std::span<const double> w) {
  const std::size_t Y = layout_.num_labels;
  compute_unary(w);
  const auto trans = layout_.transitions(w);
  parallel_for(data_.sequences.size(), threads_, [&](std::size_t i) {
    const Sequence& s = data_.sequences[i];
    const std::size_t T = s.length();
    const double* unary = unary_.data() + s.first_position * Y;
    std::vector<double> alpha(unary, unary + Y), next(Y), terms(Y);
    for (std::size_t t = 1; t < T; ++t) {
      for (std::size_t y = 0; y < Y; ++y) {
        for (std::size_t p = 0; p < Y; ++p) terms[p] = alpha[p] + trans[p * Y + y];
        next[y] = unary[t * Y + y] + log_sum_exp(terms);
      }
      alpha.swap(next);
    }
    seq_loss_[i] = log_sum_exp(alpha) - gold_score(i, trans);
  });
  double loss = 0.0;
  for (double v : seq_loss_) loss += v;
  // The unary scratch no longer matches the cached marginals' weights, but partial
  // gradients never read it, so the cache stays valid.
  return loss;
}

}  // namespace pqn
