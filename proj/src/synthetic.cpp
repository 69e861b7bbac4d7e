#include "pqn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "pqn/error.hpp"

namespace pqn {

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

BinaryDataset synthetic_logistic(const LogisticSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t d = spec.features;

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto support = static_cast<std::size_t>(std::llround(spec.support_fraction * static_cast<double>(d)));
  std::vector<double> truth(d, 0.0);
  for (std::size_t k = 0; k < support && k < d; ++k) truth[order[k]] = (unit(rng) < 0.5 ? -1.0 : 1.0) * (1.0 + unit(rng));

  const double rho = spec.correlation;
  const double innovation = std::sqrt(1.0 - rho * rho);
  SparseRows rows(d);
  std::vector<int> labels;
  std::vector<Index> idx(d);
  std::iota(idx.begin(), idx.end(), Index{0});
  std::vector<double> x(d);
  for (std::size_t i = 0; i < spec.instances; ++i) {
    double margin = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = j == 0 ? normal(rng) : rho * x[j - 1] + innovation * normal(rng);
      margin += x[j] * truth[j];
    }
    int y = margin >= 0.0 ? 1 : -1;
    if (unit(rng) < spec.label_noise) y = -y;
    rows.add_row(idx, x);
    labels.push_back(y);
  }
  return make_binary_dataset(std::move(rows), std::move(labels));
}

BinaryDataset balanced_binary(std::size_t instances, std::size_t features, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  SparseRows rows(features);
  std::vector<int> labels;
  for (std::size_t i = 0; i < instances; ++i) {
    std::vector<Index> on;
    for (std::size_t j = 0; j < features; ++j) {
      if (coin(rng)) on.push_back(static_cast<Index>(j));
    }
    rows.add_binary_row(on);
    labels.push_back(i % 2 == 0 ? 1 : -1);
  }
  return make_binary_dataset(std::move(rows), std::move(labels));
}

SequenceDataset synthetic_chain(const ChainSpec& spec) {
  if (spec.features < 2 || spec.labels < 1) throw std::invalid_argument("chain needs >= 2 features and >= 1 label");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_label(0, spec.labels - 1);

  // Each label owns a few prototype features among 1 .. J-1.
  std::vector<std::vector<bool>> prototype(spec.labels, std::vector<bool>(spec.features, false));
  for (std::size_t y = 0; y < spec.labels; ++y) {
    for (std::size_t j = 1; j < spec.features; ++j) {
      if ((j - 1) % spec.labels == y) prototype[y][j] = true;
    }
  }

  SparseRows positions(spec.features);
  std::vector<std::vector<Index>> labels;
  for (std::size_t s = 0; s < spec.sequences; ++s) {
    std::vector<Index> seq;
    std::size_t y = pick_label(rng);
    for (std::size_t t = 0; t < spec.length; ++t) {
      if (t > 0 && unit(rng) >= spec.stay_probability) y = pick_label(rng);
      std::vector<Index> on{0};
      for (std::size_t j = 1; j < spec.features; ++j) {
        const double p = prototype[y][j] ? spec.on_probability : spec.off_probability;
        if (unit(rng) < p) on.push_back(static_cast<Index>(j));
      }
      positions.add_binary_row(on);
      seq.push_back(static_cast<Index>(y));
    }
    labels.push_back(std::move(seq));
  }
  std::vector<std::string> names;
  for (std::size_t y = 0; y < spec.labels; ++y) names.push_back("y" + std::to_string(y));
  return make_sequence_dataset(spec.labels, std::move(positions), std::move(labels), std::move(names));
}

TaxonomyDataset synthetic_taxonomy(const TaxonomySpec& spec) {
  if (spec.branching < 1 || spec.depth < 1) throw std::invalid_argument("taxonomy needs branching >= 1 and depth >= 1");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_feature(0, spec.features - 1);

  std::vector<Index> parent{kNoIndex};
  std::vector<Index> level{0};
  for (std::size_t depth = 0; depth < spec.depth; ++depth) {
    std::vector<Index> next;
    for (Index p : level) {
      for (std::size_t c = 0; c < spec.branching; ++c) {
        next.push_back(static_cast<Index>(parent.size()));
        parent.push_back(p);
      }
    }
    level = std::move(next);
  }
  Taxonomy tree(parent);
  const std::size_t K = parent.size();

  std::vector<std::vector<double>> prototype(K, std::vector<double>(spec.features, 0.0));
  for (std::size_t k = 1; k < K; ++k) {
    for (int r = 0; r < 3; ++r) prototype[k][pick_feature(rng)] = 0.5 + 0.5 * unit(rng);
  }

  const auto leaves = tree.leaves();
  std::uniform_int_distribution<std::size_t> pick_leaf(0, leaves.size() - 1);
  SparseRows rows(spec.features);
  std::vector<Index> labels;
  std::vector<Index> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < spec.instances; ++i) {
    const Index leaf = leaves[pick_leaf(rng)];
    std::vector<double> x(spec.features, 0.0);
    for (Index k : tree.path(leaf)) {
      for (std::size_t j = 0; j < spec.features; ++j) x[j] += prototype[k][j];
    }
    for (std::size_t j = 0; j < spec.features; ++j) {
      if (unit(rng) < spec.noise) x[j] += unit(rng);
    }
    idx.clear();
    val.clear();
    for (std::size_t j = 0; j < spec.features; ++j) {
      if (x[j] != 0.0) {
        idx.push_back(static_cast<Index>(j));
        val.push_back(x[j]);
      }
    }
    rows.add_row(idx, val);
    labels.push_back(leaf);
  }
  std::vector<long long> ids(K);
  std::iota(ids.begin(), ids.end(), 1LL);
  return make_taxonomy_dataset(std::move(rows), std::move(labels), std::move(tree), std::move(ids));
}

void write_synthetic_letters(const std::string& path, const LetterSpec& spec) {
  if (spec.letters < 1 || spec.letters > 26) throw std::invalid_argument("letters must be in [1, 26]");
  if (spec.min_length < 1 || spec.max_length < spec.min_length) throw std::invalid_argument("bad word length range");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_letter(0, spec.letters - 1);
  std::uniform_int_distribution<std::size_t> pick_length(spec.min_length, spec.max_length);

  std::vector<std::vector<int>> glyph(spec.letters, std::vector<int>(spec.pixels));
  for (auto& g : glyph) {
    for (int& p : g) p = unit(rng) < 0.5 ? 1 : 0;
  }

  std::ofstream out = open_output(path);
  std::size_t id = 1;
  for (std::size_t w = 0; w < spec.words; ++w) {
    const std::size_t len = pick_length(rng);
    for (std::size_t pos = 0; pos < len; ++pos, ++id) {
      const std::size_t letter = pick_letter(rng);
      out << id << '\t' << static_cast<char>('a' + letter) << '\t'
          << (pos + 1 == len ? std::string("-1") : std::to_string(id + 1)) << '\t' << w + 1 << '\t' << pos + 1
          << '\t' << w % 10;
      for (std::size_t p = 0; p < spec.pixels; ++p) {
        int bit = glyph[letter][p];
        if (unit(rng) < spec.flip_probability) bit = 1 - bit;
        out << '\t' << bit;
      }
      out << '\n';
    }
  }
}

void write_svmlight(const std::string& path, const BinaryDataset& data) {
  std::ofstream out = open_output(path);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << (data.labels[i] > 0 ? "+1" : "-1");
    for (const auto& e : data.instances.row(i)) out << ' ' << e.feature + 1 << ':' << format_value(e.value);
    out << '\n';
  }
}

void write_svmlight(const std::string& data_path, const std::string& hierarchy_path,
                    const TaxonomyDataset& data) {
  auto id_of = [&](Index k) { return data.class_ids.empty() ? static_cast<long long>(k) : data.class_ids[k]; };
  std::ofstream out = open_output(data_path);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << id_of(data.labels[i]);
    for (const auto& e : data.instances.row(i)) out << ' ' << e.feature + 1 << ':' << format_value(e.value);
    out << '\n';
  }
  std::ofstream hier = open_output(hierarchy_path);
  for (Index k : data.tree.top_down_order()) {
    if (data.tree.parent(k) != kNoIndex) hier << id_of(data.tree.parent(k)) << ' ' << id_of(k) << '\n';
  }
}

}  // namespace pqn
