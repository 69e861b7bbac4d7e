#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pqn/error.hpp"
#include "pqn/sparse_data.hpp"

namespace pqn {

struct OracleCounters {
  std::uint64_t full_inferences = 0;
  std::uint64_t loss_evaluations = 0;
  std::uint64_t partial_gradients = 0;

  // One pass over the data per inference or loss-only evaluation.
  std::uint64_t passes() const { return full_inferences + loss_evaluations; }
};

// Smooth part l(w) of the composite objective. Computing anything requires a pass of
// (possibly expensive) inference over every instance, after which partial derivatives
// can be read one coordinate at a time.
//
//   full_inference(w)   inference at w; returns l(w) and caches what partial_gradient needs
//   partial_gradient(j) d l / d w_j at the last full_inference point
//   loss_at(w)          l(w) only; leaves the cache alone
class SmoothLossOracle {
 public:
  virtual ~SmoothLossOracle() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::size_t sample_count() const = 0;

  double full_inference(std::span<const double> w) {
    ++counters_.full_inferences;
    cache_valid_ = false;
    const double value = do_full_inference(w);
    cache_valid_ = true;
    return value;
  }

  double partial_gradient(Index j) const {
    if (!cache_valid_) throw ContractViolation("partial_gradient called without a current full_inference");
    ++counters_.partial_gradients;
    return do_partial_gradient(j);
  }

  double loss_at(std::span<const double> w) {
    ++counters_.loss_evaluations;
    return do_loss(w);
  }

  // Marks the cached statistics stale, e.g. after the weights they describe were changed.
  void invalidate() { cache_valid_ = false; }
  bool cache_valid() const { return cache_valid_; }

  // Full gradient from the current cache.
  std::vector<double> gradient() const {
    std::vector<double> g(dimension());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = partial_gradient(static_cast<Index>(j));
    return g;
  }

  const OracleCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }

 protected:
  virtual double do_full_inference(std::span<const double> w) = 0;
  virtual double do_partial_gradient(Index j) const = 0;
  virtual double do_loss(std::span<const double> w) = 0;

 private:
  bool cache_valid_ = false;
  mutable OracleCounters counters_;
};

}  // namespace pqn
