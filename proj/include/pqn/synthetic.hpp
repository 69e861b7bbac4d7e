#pragma once

// Seeded generators for small problems used by the tests and the `pqn synth` command.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pqn/sparse_data.hpp"

namespace pqn {

struct LogisticSpec {
  std::size_t instances = 200;
  std::size_t features = 50;
  double support_fraction = 0.2;  // share of features carrying true signal
  double correlation = 0.0;       // AR(1) correlation between neighbouring features
  double label_noise = 0.0;       // probability of flipping a label
  std::uint64_t seed = 1;
};

// Dense Gaussian design, labels from the sign of a sparse linear model.
BinaryDataset synthetic_logistic(const LogisticSpec& spec);

// N instances with labels alternating +1, -1 and random binary features.
BinaryDataset balanced_binary(std::size_t instances, std::size_t features, std::uint64_t seed);

struct ChainSpec {
  std::size_t sequences = 50;
  std::size_t length = 5;
  std::size_t labels = 3;
  std::size_t features = 20;  // feature 0 is a constant bias
  double on_probability = 0.6;   // chance a label's own prototype feature fires
  double off_probability = 0.1;  // chance any other feature fires
  double stay_probability = 0.6; // chance the next label repeats the current one
  std::uint64_t seed = 1;
};

SequenceDataset synthetic_chain(const ChainSpec& spec);

struct TaxonomySpec {
  std::size_t instances = 200;
  std::size_t branching = 3;  // children per internal class
  std::size_t depth = 2;      // root at depth 0, leaves at this depth
  std::size_t features = 30;
  double noise = 0.3;
  std::uint64_t seed = 1;
};

// Complete tree; each leaf has a sparse nonnegative prototype, instances are noisy copies.
TaxonomyDataset synthetic_taxonomy(const TaxonomySpec& spec);

// Letter-grid words in the tab-separated OCR layout, for exercising the file loader and CLI.
struct LetterSpec {
  std::size_t words = 40;
  std::size_t min_length = 3;
  std::size_t max_length = 6;
  std::size_t letters = 4;  // labels drawn from 'a' .. 'a' + letters - 1
  std::size_t pixels = 8;
  double flip_probability = 0.1;
  std::uint64_t seed = 1;
};

void write_synthetic_letters(const std::string& path, const LetterSpec& spec);

void write_svmlight(const std::string& path, const BinaryDataset& data);
// Writes labels and features (1-based) plus a "parent child" file with the original class ids.
void write_svmlight(const std::string& data_path, const std::string& hierarchy_path,
                    const TaxonomyDataset& data);

}  // namespace pqn
