#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pqn {

using Index = std::uint32_t;
inline constexpr Index kNoIndex = std::numeric_limits<Index>::max();

// Instance-major sparse storage: one row of (feature, value) pairs per instance.
// Rows are kept sorted by feature with zeros dropped.
class SparseRows {
 public:
  struct Entry {
    Index feature;
    double value;
  };

  SparseRows() = default;
  explicit SparseRows(std::size_t num_features) : num_features_(num_features) {}

  // Appends one row. Indices need not be sorted; duplicates raise DataError, zeros are dropped.
  void add_row(std::span<const Index> features, std::span<const double> values);
  // Binary row: every listed feature has value 1.
  void add_binary_row(std::span<const Index> features);

  std::size_t num_rows() const { return offsets_.size() - 1; }
  std::size_t num_features() const { return num_features_; }
  std::size_t nnz() const { return entries_.size(); }

  std::span<const Entry> row(std::size_t i) const {
    return {entries_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  // Mutable values, used by in-place feature scaling. Structure is fixed.
  std::span<Entry> mutable_entries() { return entries_; }
  void drop_zeros();

  SparseRows select(std::span<const std::size_t> rows) const;

 private:
  std::size_t num_features_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<Entry> entries_;
};

// Feature-indexed (column-major) view of a SparseRows matrix: for each feature j the
// list of (instance, value) pairs with a nonzero value, sorted by instance.
//
// column() counts the entries it hands out so tests can verify that gradient
// evaluation for feature j touches exactly the instances where j is nonzero.
class FeatureIndexedMatrix {
 public:
  struct Entry {
    Index instance;
    double value;
  };

  FeatureIndexedMatrix() = default;
  explicit FeatureIndexedMatrix(const SparseRows& rows);

  FeatureIndexedMatrix(const FeatureIndexedMatrix& other);
  FeatureIndexedMatrix& operator=(const FeatureIndexedMatrix& other);
  FeatureIndexedMatrix(FeatureIndexedMatrix&& other) noexcept;
  FeatureIndexedMatrix& operator=(FeatureIndexedMatrix&& other) noexcept;

  std::size_t num_features() const { return offsets_.size() - 1; }
  std::size_t num_instances() const { return num_instances_; }
  std::size_t nnz() const { return entries_.size(); }

  std::span<const Entry> column(Index j) const {
    const std::size_t n = offsets_[j + 1] - offsets_[j];
    visited_.fetch_add(n, std::memory_order_relaxed);
    return {entries_.data() + offsets_[j], n};
  }
  std::size_t column_size(Index j) const { return offsets_[j + 1] - offsets_[j]; }

  std::uint64_t entries_visited() const { return visited_.load(std::memory_order_relaxed); }
  void reset_access_counter() const { visited_.store(0, std::memory_order_relaxed); }

 private:
  std::size_t num_instances_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<Entry> entries_;
  mutable std::atomic<std::uint64_t> visited_{0};
};

// ---------------------------------------------------------------------------
// Degree-2 pixel features.
//
// Layout for P raw pixels (J = P(P-1)/2 + P + 1 slots):
//   0                       bias, always 1
//   1 + p                   singleton pixel p
//   pair_offset(p) + q      pair (p, q) with p < q, enumerated row-major
// where pair_offset(p) = 1 + P + p(2P - p - 1)/2 - (p + 1).

std::size_t degree2_feature_count(std::size_t num_pixels);
Index degree2_pair_index(std::size_t num_pixels, std::size_t p, std::size_t q);

// Sorted indices of the active degree-2 features of a binary pixel vector.
std::vector<Index> expand_degree2_features(std::span<const std::uint8_t> pixels);

// ---------------------------------------------------------------------------
// Sequence labeling data.

struct Sequence {
  std::size_t first_position = 0;  // row of the first position in SequenceDataset::positions
  std::vector<Index> labels;

  std::size_t length() const { return labels.size(); }
};

struct SequenceDataset {
  std::vector<Sequence> sequences;
  std::size_t label_alphabet_size = 0;
  std::size_t raw_feature_count = 0;  // J
  SparseRows positions;               // one row per (sequence, position)
  FeatureIndexedMatrix feature_index; // keyed by global position row
  std::vector<std::string> label_names;

  std::size_t num_positions() const { return positions.num_rows(); }
};

// Builds a dataset from per-position feature rows laid out sequence after sequence.
SequenceDataset make_sequence_dataset(std::size_t label_alphabet_size, SparseRows positions,
                                      std::vector<std::vector<Index>> labels,
                                      std::vector<std::string> label_names = {});

SequenceDataset select_sequences(const SequenceDataset& data,
                                 std::span<const std::size_t> which);

// Tab-separated letter data: id, letter, next_id, word_id, position, fold, pixels...
// A word ends at a line whose next_id is -1.
SequenceDataset load_ocr(const std::string& path, std::size_t num_pixels = 128);

// ---------------------------------------------------------------------------
// Hierarchical classification data.

// Rooted tree over dense class ids 0..K-1.
class Taxonomy {
 public:
  Taxonomy() = default;
  // parent[k] == kNoIndex marks the root. Throws HierarchyError unless the parent array
  // describes a single tree.
  explicit Taxonomy(std::vector<Index> parent);

  std::size_t num_classes() const { return parent_.size(); }
  Index root() const { return root_; }
  Index parent(Index k) const { return parent_[k]; }
  std::span<const Index> children(Index k) const {
    return {child_list_.data() + child_offsets_[k], child_offsets_[k + 1] - child_offsets_[k]};
  }
  bool is_leaf(Index k) const { return child_offsets_[k + 1] == child_offsets_[k]; }
  std::span<const Index> leaves() const { return leaves_; }
  // Position of a leaf inside leaves(), kNoIndex for internal nodes.
  Index leaf_slot(Index k) const { return leaf_slot_[k]; }
  // Classes in breadth-first order starting at the root; parents precede children.
  std::span<const Index> top_down_order() const { return order_; }
  std::size_t depth(Index k) const { return depth_[k]; }

  // Path(y): root, ..., y.
  std::span<const Index> path(Index leaf) const { return paths_[leaf_slot_[leaf]]; }
  bool on_path(Index k, Index leaf) const;

 private:
  std::vector<Index> parent_;
  Index root_ = kNoIndex;
  std::vector<std::size_t> child_offsets_{0};
  std::vector<Index> child_list_;
  std::vector<Index> leaves_;
  std::vector<Index> leaf_slot_;
  std::vector<Index> order_;
  std::vector<std::size_t> depth_;
  std::vector<std::vector<Index>> paths_;
};

struct TaxonomyDataset {
  SparseRows instances;
  FeatureIndexedMatrix feature_index;
  std::vector<Index> labels;  // dense class id of a leaf
  Taxonomy tree;
  std::vector<long long> class_ids;  // original id of each dense class

  std::size_t num_features() const { return instances.num_features(); }
  std::size_t size() const { return labels.size(); }
};

TaxonomyDataset make_taxonomy_dataset(SparseRows instances, std::vector<Index> labels,
                                      Taxonomy tree, std::vector<long long> class_ids = {});
TaxonomyDataset select_instances(const TaxonomyDataset& data, std::span<const std::size_t> which);

struct SvmlightOptions {
  // Forces the feature count; otherwise it is the largest index seen plus one.
  std::optional<std::size_t> num_features;
  // Min-max scale each feature to [0, 1] over all instances (implicit zeros included).
  bool scale_unit_interval = false;
};

// Data lines "label j:v j:v ..." and hierarchy lines "parent child". Feature indices
// are 1-based unless an index 0 appears anywhere in the file, in which case the whole
// file is read as 0-based.
TaxonomyDataset load_svmlight_with_taxonomy(const std::string& data_path,
                                            const std::string& hierarchy_path,
                                            const SvmlightOptions& options = {});

// ---------------------------------------------------------------------------
// Binary classification data (labels +1 / -1).

struct BinaryDataset {
  SparseRows instances;
  FeatureIndexedMatrix feature_index;
  std::vector<int> labels;

  std::size_t num_features() const { return instances.num_features(); }
  std::size_t size() const { return labels.size(); }
};

BinaryDataset make_binary_dataset(SparseRows instances, std::vector<int> labels);
BinaryDataset select_instances(const BinaryDataset& data, std::span<const std::size_t> which);
BinaryDataset load_svmlight_binary(const std::string& path, const SvmlightOptions& options = {});

void scale_unit_interval(SparseRows& rows);

}  // namespace pqn
