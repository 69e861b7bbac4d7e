#include "pqn/sparse_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "pqn/error.hpp"

namespace pqn {

// ---------------------------------------------------------------------------
// SparseRows

void SparseRows::add_row(std::span<const Index> features, std::span<const double> values) {
  if (features.size() != values.size()) throw DataError("row has mismatched index/value lengths");
  std::vector<Entry> row;
  row.reserve(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k] >= num_features_)
      throw DataError("feature index " + std::to_string(features[k]) + " out of range");
    row.push_back({features[k], values[k]});
  }
  std::sort(row.begin(), row.end(), [](const Entry& a, const Entry& b) { return a.feature < b.feature; });
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k].feature == row[k - 1].feature)
      throw DataError("duplicate feature index " + std::to_string(row[k].feature) + " in row " +
                      std::to_string(num_rows()));
  }
  for (const Entry& e : row) {
    if (e.value != 0.0) entries_.push_back(e);
  }
  offsets_.push_back(entries_.size());
}

void SparseRows::add_binary_row(std::span<const Index> features) {
  std::vector<double> ones(features.size(), 1.0);
  add_row(features, ones);
}

void SparseRows::drop_zeros() {
  std::vector<std::size_t> offsets{0};
  std::vector<Entry> entries;
  entries.reserve(entries_.size());
  for (std::size_t i = 0; i + 1 < offsets_.size(); ++i) {
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      if (entries_[k].value != 0.0) entries.push_back(entries_[k]);
    }
    offsets.push_back(entries.size());
  }
  offsets_ = std::move(offsets);
  entries_ = std::move(entries);
}

SparseRows SparseRows::select(std::span<const std::size_t> rows) const {
  SparseRows out(num_features_);
  for (std::size_t i : rows) {
    auto r = row(i);
    out.entries_.insert(out.entries_.end(), r.begin(), r.end());
    out.offsets_.push_back(out.entries_.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// FeatureIndexedMatrix

FeatureIndexedMatrix::FeatureIndexedMatrix(const SparseRows& rows)
    : num_instances_(rows.num_rows()) {
  const std::size_t nf = rows.num_features();
  std::vector<std::size_t> counts(nf + 1, 0);
  for (std::size_t i = 0; i < rows.num_rows(); ++i) {
    for (const auto& e : rows.row(i)) ++counts[e.feature + 1];
  }
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  offsets_ = counts;
  entries_.resize(rows.nnz());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  // Rows are visited in order, so every column comes out sorted by instance.
  for (std::size_t i = 0; i < rows.num_rows(); ++i) {
    for (const auto& e : rows.row(i)) {
      entries_[fill[e.feature]++] = {static_cast<Index>(i), e.value};
    }
  }
}

FeatureIndexedMatrix::FeatureIndexedMatrix(const FeatureIndexedMatrix& other)
    : num_instances_(other.num_instances_), offsets_(other.offsets_), entries_(other.entries_) {}

FeatureIndexedMatrix& FeatureIndexedMatrix::operator=(const FeatureIndexedMatrix& other) {
  num_instances_ = other.num_instances_;
  offsets_ = other.offsets_;
  entries_ = other.entries_;
  visited_.store(0);
  return *this;
}

FeatureIndexedMatrix::FeatureIndexedMatrix(FeatureIndexedMatrix&& other) noexcept
    : num_instances_(other.num_instances_),
      offsets_(std::move(other.offsets_)),
      entries_(std::move(other.entries_)) {
  other.offsets_ = {0};
  other.num_instances_ = 0;
}

FeatureIndexedMatrix& FeatureIndexedMatrix::operator=(FeatureIndexedMatrix&& other) noexcept {
  num_instances_ = other.num_instances_;
  offsets_ = std::move(other.offsets_);
  entries_ = std::move(other.entries_);
  other.offsets_ = {0};
  other.num_instances_ = 0;
  visited_.store(0);
  return *this;
}

// ---------------------------------------------------------------------------
// Degree-2 features

std::size_t degree2_feature_count(std::size_t num_pixels) {
  return num_pixels * (num_pixels - 1) / 2 + num_pixels + 1;
}

Index degree2_pair_index(std::size_t num_pixels, std::size_t p, std::size_t q) {
  const std::size_t P = num_pixels;
  return static_cast<Index>(1 + P + p * (2 * P - p - 1) / 2 + (q - p - 1));
}

std::vector<Index> expand_degree2_features(std::span<const std::uint8_t> pixels) {
  const std::size_t P = pixels.size();
  std::vector<std::size_t> on;
  for (std::size_t p = 0; p < P; ++p) {
    if (pixels[p]) on.push_back(p);
  }
  std::vector<Index> out;
  out.reserve(1 + on.size() + on.size() * (on.size() - (on.empty() ? 0 : 1)) / 2);
  out.push_back(0);
  for (std::size_t p : on) out.push_back(static_cast<Index>(1 + p));
  for (std::size_t a = 0; a < on.size(); ++a) {
    for (std::size_t b = a + 1; b < on.size(); ++b) out.push_back(degree2_pair_index(P, on[a], on[b]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequences

SequenceDataset make_sequence_dataset(std::size_t label_alphabet_size, SparseRows positions,
                                      std::vector<std::vector<Index>> labels,
                                      std::vector<std::string> label_names) {
  SequenceDataset out;
  out.label_alphabet_size = label_alphabet_size;
  out.raw_feature_count = positions.num_features();
  std::size_t pos = 0;
  for (auto& seq_labels : labels) {
    if (seq_labels.empty()) throw DataError("empty sequence");
    for (Index y : seq_labels) {
      if (y >= label_alphabet_size) throw DataError("label " + std::to_string(y) + " out of range");
    }
    Sequence s;
    s.first_position = pos;
    pos += seq_labels.size();
    s.labels = std::move(seq_labels);
    out.sequences.push_back(std::move(s));
  }
  if (pos != positions.num_rows())
    throw DataError("sequence lengths sum to " + std::to_string(pos) + " but " +
                    std::to_string(positions.num_rows()) + " position rows were given");
  out.feature_index = FeatureIndexedMatrix(positions);
  out.positions = std::move(positions);
  out.label_names = std::move(label_names);
  return out;
}

SequenceDataset select_sequences(const SequenceDataset& data, std::span<const std::size_t> which) {
  std::vector<std::size_t> rows;
  std::vector<std::vector<Index>> labels;
  for (std::size_t s : which) {
    const Sequence& seq = data.sequences.at(s);
    for (std::size_t t = 0; t < seq.length(); ++t) rows.push_back(seq.first_position + t);
    labels.push_back(seq.labels);
  }
  return make_sequence_dataset(data.label_alphabet_size, data.positions.select(rows),
                               std::move(labels), data.label_names);
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  // Trailing tab produces an empty last field.
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

}  // namespace

SequenceDataset load_ocr(const std::string& path, std::size_t num_pixels) {
  std::ifstream in = open_input(path);
  const std::size_t J = degree2_feature_count(num_pixels);
  SparseRows positions(J);
  std::vector<std::vector<Index>> labels;
  std::vector<Index> current;
  std::vector<std::uint8_t> pixels(num_pixels);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (strip(line).empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 6 + num_pixels)
      throw ParseError(path, line_no,
                       "expected " + std::to_string(6 + num_pixels) + " columns, got " +
                           std::to_string(cols.size()));
    if (cols[1].size() != 1 || cols[1][0] < 'a' || cols[1][0] > 'z')
      throw ParseError(path, line_no, "unknown letter '" + std::string(cols[1]) + "'");
    long long next_id = 0;
    if (!parse_number(cols[2], next_id)) throw ParseError(path, line_no, "bad next_id");
    for (std::size_t p = 0; p < num_pixels; ++p) {
      std::string_view v = cols[6 + p];
      if (v == "0") {
        pixels[p] = 0;
      } else if (v == "1") {
        pixels[p] = 1;
      } else {
        throw ParseError(path, line_no, "non-binary pixel value '" + std::string(v) + "'");
      }
    }
    positions.add_binary_row(expand_degree2_features(pixels));
    current.push_back(static_cast<Index>(cols[1][0] - 'a'));
    if (next_id == -1) {
      labels.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) throw ParseError(path, line_no, "file ends inside a word (no next_id = -1)");

  std::vector<std::string> names;
  for (char c = 'a'; c <= 'z'; ++c) names.emplace_back(1, c);
  return make_sequence_dataset(26, std::move(positions), std::move(labels), std::move(names));
}

// ---------------------------------------------------------------------------
// Taxonomy

Taxonomy::Taxonomy(std::vector<Index> parent) : parent_(std::move(parent)) {
  const std::size_t K = parent_.size();
  if (K == 0) throw HierarchyError("empty taxonomy");
  std::vector<std::size_t> counts(K + 1, 0);
  for (Index k = 0; k < K; ++k) {
    const Index p = parent_[k];
    if (p == kNoIndex) {
      if (root_ != kNoIndex) throw HierarchyError("multiple roots: " + std::to_string(root_) + ", " + std::to_string(k));
      root_ = k;
    } else {
      if (p >= K) throw HierarchyError("parent id out of range");
      if (p == k) throw HierarchyError("class " + std::to_string(k) + " is its own parent");
      ++counts[p + 1];
    }
  }
  if (root_ == kNoIndex) throw HierarchyError("no root (every class has a parent)");
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  child_offsets_ = counts;
  child_list_.resize(K - 1);
  std::vector<std::size_t> fill(child_offsets_.begin(), child_offsets_.end() - 1);
  for (Index k = 0; k < K; ++k) {
    if (parent_[k] != kNoIndex) child_list_[fill[parent_[k]]++] = k;
  }

  depth_.assign(K, 0);
  order_.reserve(K);
  order_.push_back(root_);
  for (std::size_t head = 0; head < order_.size(); ++head) {
    const Index k = order_[head];
    for (Index c : children(k)) {
      depth_[c] = depth_[k] + 1;
      order_.push_back(c);
    }
  }
  if (order_.size() != K) throw HierarchyError("taxonomy contains a cycle or a detached component");

  leaf_slot_.assign(K, kNoIndex);
  for (Index k : order_) {
    if (is_leaf(k)) {
      leaf_slot_[k] = static_cast<Index>(leaves_.size());
      leaves_.push_back(k);
      std::vector<Index> p;
      for (Index a = k; a != kNoIndex; a = parent_[a]) p.push_back(a);
      std::reverse(p.begin(), p.end());
      paths_.push_back(std::move(p));
    }
  }
}

bool Taxonomy::on_path(Index k, Index leaf) const {
  Index a = leaf;
  while (depth_[a] > depth_[k]) a = parent_[a];
  return a == k;
}

TaxonomyDataset make_taxonomy_dataset(SparseRows instances, std::vector<Index> labels, Taxonomy tree,
                                      std::vector<long long> class_ids) {
  if (labels.size() != instances.num_rows()) throw DataError("label count does not match instance count");
  for (Index y : labels) {
    if (y >= tree.num_classes() || !tree.is_leaf(y))
      throw DataError("label " + std::to_string(y) + " is not a leaf of the taxonomy");
  }
  if (class_ids.empty()) {
    class_ids.resize(tree.num_classes());
    std::iota(class_ids.begin(), class_ids.end(), 0LL);
  }
  TaxonomyDataset out;
  out.feature_index = FeatureIndexedMatrix(instances);
  out.instances = std::move(instances);
  out.labels = std::move(labels);
  out.tree = std::move(tree);
  out.class_ids = std::move(class_ids);
  return out;
}

TaxonomyDataset select_instances(const TaxonomyDataset& data, std::span<const std::size_t> which) {
  std::vector<Index> labels;
  for (std::size_t i : which) labels.push_back(data.labels.at(i));
  return make_taxonomy_dataset(data.instances.select(which), std::move(labels), data.tree, data.class_ids);
}

namespace {

struct SvmlightLine {
  std::string label;
  std::vector<std::pair<long long, double>> entries;
  std::size_t line_no;
};

std::vector<SvmlightLine> read_svmlight(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<SvmlightLine> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    SvmlightLine parsed;
    parsed.line_no = line_no;
    if (!(ss >> parsed.label)) continue;
    std::string tok;
    while (ss >> tok) {
      auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(path, line_no, "expected index:value, got '" + tok + "'");
      long long idx = 0;
      double val = 0.0;
      if (!parse_number(std::string_view(tok).substr(0, colon), idx) || idx < 0)
        throw ParseError(path, line_no, "bad feature index in '" + tok + "'");
      try {
        std::size_t used = 0;
        val = std::stod(tok.substr(colon + 1), &used);
        if (used != tok.size() - colon - 1) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError(path, line_no, "bad feature value in '" + tok + "'");
      }
      parsed.entries.emplace_back(idx, val);
    }
    out.push_back(std::move(parsed));
  }
  return out;
}

SparseRows rows_from_svmlight(const std::string& path, const std::vector<SvmlightLine>& lines,
                              const SvmlightOptions& options) {
  bool zero_based = false;
  long long max_index = -1;
  for (const auto& l : lines) {
    for (const auto& [idx, val] : l.entries) {
      if (idx == 0) zero_based = true;
      max_index = std::max(max_index, idx);
    }
  }
  const long long shift = zero_based ? 0 : 1;
  std::size_t nf = static_cast<std::size_t>(std::max(0LL, max_index + 1 - shift));
  if (options.num_features) {
    if (*options.num_features < nf) throw DataError("feature index exceeds the requested feature count");
    nf = *options.num_features;
  }
  SparseRows rows(nf);
  std::vector<Index> idx;
  std::vector<double> val;
  for (const auto& l : lines) {
    idx.clear();
    val.clear();
    for (const auto& [i, v] : l.entries) {
      idx.push_back(static_cast<Index>(i - shift));
      val.push_back(v);
    }
    try {
      rows.add_row(idx, val);
    } catch (const DataError& e) {
      throw ParseError(path, l.line_no, e.what());
    }
  }
  if (options.scale_unit_interval) scale_unit_interval(rows);
  return rows;
}

}  // namespace

void scale_unit_interval(SparseRows& rows) {
  const std::size_t nf = rows.num_features();
  const std::size_t n = rows.num_rows();
  std::vector<double> lo(nf, 0.0), hi(nf, 0.0);
  std::vector<std::size_t> count(nf, 0);
  std::vector<bool> seen(nf, false);
  for (const auto& e : rows.mutable_entries()) {
    if (!seen[e.feature]) {
      lo[e.feature] = hi[e.feature] = e.value;
      seen[e.feature] = true;
    }
    lo[e.feature] = std::min(lo[e.feature], e.value);
    hi[e.feature] = std::max(hi[e.feature], e.value);
    ++count[e.feature];
  }
  for (std::size_t j = 0; j < nf; ++j) {
    if (count[j] < n) {
      lo[j] = std::min(lo[j], 0.0);
      hi[j] = std::max(hi[j], 0.0);
    }
  }
  for (auto& e : rows.mutable_entries()) {
    const double range = hi[e.feature] - lo[e.feature];
    e.value = range > 0.0 ? (e.value - lo[e.feature]) / range : 0.0;
  }
  rows.drop_zeros();
}

TaxonomyDataset load_svmlight_with_taxonomy(const std::string& data_path, const std::string& hierarchy_path,
                                            const SvmlightOptions& options) {
  std::ifstream hin = open_input(hierarchy_path);
  std::unordered_map<long long, Index> dense;
  std::vector<long long> class_ids;
  std::vector<Index> parent;
  auto intern = [&](long long id) {
    auto [it, inserted] = dense.emplace(id, static_cast<Index>(class_ids.size()));
    if (inserted) {
      class_ids.push_back(id);
      parent.push_back(kNoIndex);
    }
    return it->second;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(hin, line)) {
    ++line_no;
    std::istringstream ss(line);
    long long p = 0, c = 0;
    if (strip(line).empty()) continue;
    std::string extra;
    if (!(ss >> p >> c) || (ss >> extra)) throw ParseError(hierarchy_path, line_no, "expected 'parent child'");
    const Index pi = intern(p);
    const Index ci = intern(c);
    if (parent[ci] != kNoIndex && parent[ci] != pi)
      throw HierarchyError("class " + std::to_string(c) + " has two parents");
    parent[ci] = pi;
  }
  Taxonomy tree(std::move(parent));

  auto lines = read_svmlight(data_path);
  std::vector<Index> labels;
  for (const auto& l : lines) {
    long long id = 0;
    if (!parse_number(std::string_view(l.label), id))
      throw ParseError(data_path, l.line_no, "bad class label '" + l.label + "'");
    auto it = dense.find(id);
    if (it == dense.end() || !tree.is_leaf(it->second))
      throw DataError(data_path + ":" + std::to_string(l.line_no) + ": label " + l.label +
                      " is not a leaf of the taxonomy");
    labels.push_back(it->second);
  }
  SparseRows rows = rows_from_svmlight(data_path, lines, options);
  return make_taxonomy_dataset(std::move(rows), std::move(labels), std::move(tree), std::move(class_ids));
}

BinaryDataset make_binary_dataset(SparseRows instances, std::vector<int> labels) {
  if (labels.size() != instances.num_rows()) throw DataError("label count does not match instance count");
  for (int y : labels) {
    if (y != 1 && y != -1) throw DataError("binary labels must be +1 or -1");
  }
  BinaryDataset out;
  out.feature_index = FeatureIndexedMatrix(instances);
  out.instances = std::move(instances);
  out.labels = std::move(labels);
  return out;
}

BinaryDataset select_instances(const BinaryDataset& data, std::span<const std::size_t> which) {
  std::vector<int> labels;
  for (std::size_t i : which) labels.push_back(data.labels.at(i));
  return make_binary_dataset(data.instances.select(which), std::move(labels));
}

BinaryDataset load_svmlight_binary(const std::string& path, const SvmlightOptions& options) {
  auto lines = read_svmlight(path);
  std::vector<int> labels;
  for (const auto& l : lines) {
    int y = 0;
    if (!parse_number(std::string_view(l.label), y) || (y != 1 && y != -1))
      throw ParseError(path, l.line_no, "binary label must be +1 or -1, got '" + l.label + "'");
    labels.push_back(y);
  }
  return make_binary_dataset(rows_from_svmlight(path, lines, options), std::move(labels));
}

}  // namespace pqn
