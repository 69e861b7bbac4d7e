#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "pqn/lbfgs.hpp"
#include "pqn/sparse_data.hpp"

namespace pqn {

inline double soft_threshold(double x, double tau) {
  if (x > tau) return x - tau;
  if (x < -tau) return x + tau;
  return 0.0;
}

// Exact minimizer z of  a/2 z^2 + b z + lambda |c + z|  with b = g_j + (Bd)_j, c = w_j + d_j.
inline double cd_step(double w_j, double d_j, double g_j, double a, double bd_j, double lambda) {
  const double b = g_j + bd_j;
  const double c = w_j + d_j;
  return -c + soft_threshold(c - b / a, lambda / a);
}

// max(1, min(max_inner, floor(total / active)))
std::size_t inner_sweep_budget(std::size_t total_coords, std::size_t active, std::size_t max_inner);

// Direction found on the working set. `d` is aligned with the working-set index list.
struct InnerDirection {
  std::vector<double> d;
  std::vector<double> d_hat;  // R Q^T d, kept in sync with d
  double delta = 0.0;         // g^T d + lambda (|w + d|_1 - |w|_1)
  std::size_t sweeps = 0;

  bool is_zero() const;
};

// Randomized coordinate descent on
//     min_d  g^T d + 1/2 d^T B d + lambda |w + d|_1,   supp(d) in A,
// starting from d = 0. Each sweep visits A in a fresh random permutation drawn from `rng`.
// g and w are given on A (aligned with `active`). `on_step`, when set, sees d after
// every coordinate update.
InnerDirection solve_subproblem(std::span<const double> g, std::span<const double> w,
                                std::span<const Index> active, const LbfgsState& lbfgs,
                                double lambda, std::size_t sweeps, std::mt19937_64& rng,
                                const std::function<void(std::span<const double>)>& on_step = {});

// Value of the subproblem objective for a direction on A. Used by tests and diagnostics.
double subproblem_objective(std::span<const double> g, std::span<const double> w,
                            std::span<const Index> active, const LbfgsState& lbfgs, double lambda,
                            std::span<const double> d);

}  // namespace pqn
