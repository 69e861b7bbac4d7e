#pragma once

#include <vector>

#include "pqn/oracle.hpp"
#include "pqn/sparse_data.hpp"

namespace pqn {

// l(w) = sum_i log(1 + exp(-y_i w^T x_i)) on +-1 labels.
class LogisticOracle final : public SmoothLossOracle {
 public:
  explicit LogisticOracle(const BinaryDataset& data) : data_(data), coef_(data.size()) {}

  std::size_t dimension() const override { return data_.num_features(); }
  std::size_t sample_count() const override { return data_.size(); }

 protected:
  double do_full_inference(std::span<const double> w) override;
  double do_partial_gradient(Index j) const override;
  double do_loss(std::span<const double> w) override;

 private:
  const BinaryDataset& data_;
  // d loss_i / d (w^T x_i) at the inference point.
  std::vector<double> coef_;
};

// Fraction of instances with sign(w^T x) == y (ties count as +1).
double logistic_accuracy(const BinaryDataset& data, std::span<const double> w);

}  // namespace pqn
