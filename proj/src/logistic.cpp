#include "pqn/logistic.hpp"

#include <cmath>

#include "pqn/math.hpp"

namespace pqn {

namespace {

double margin(const BinaryDataset& data, std::span<const double> w, std::size_t i) {
  double z = 0.0;
  for (const auto& e : data.instances.row(i)) z += w[e.feature] * e.value;
  return z;
}

}  // namespace

double LogisticOracle::do_full_inference(std::span<const double> w) {
  double loss = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double y = data_.labels[i];
    const double z = y * margin(data_, w, i);
    loss += softplus(-z);
    // d/dm log(1 + exp(-y m)) = -y / (1 + exp(y m))
    coef_[i] = -y / (1.0 + std::exp(z));
  }
  return loss;
}

double LogisticOracle::do_partial_gradient(Index j) const {
  double g = 0.0;
  for (const auto& e : data_.feature_index.column(j)) g += coef_[e.instance] * e.value;
  return g;
}

double LogisticOracle::do_loss(std::span<const double> w) {
  double loss = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) loss += softplus(-data_.labels[i] * margin(data_, w, i));
  return loss;
}

double logistic_accuracy(const BinaryDataset& data, std::span<const double> w) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int pred = margin(data, w, i) >= 0.0 ? 1 : -1;
    hits += pred == data.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace pqn
