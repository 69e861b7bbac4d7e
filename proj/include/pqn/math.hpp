#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace pqn {

inline double log_sum_exp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double l1_norm(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) s += std::abs(v);
  return s;
}

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace pqn
