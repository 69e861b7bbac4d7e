#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pqn/oracle.hpp"
#include "pqn/sparse_data.hpp"

namespace pqn {

enum class SolverKind { ProxQn, ProxGd };

struct SolverConfig {
  double lambda = 1.0;
  double epsilon = 1e-6;      // stop when max_j |d_j f| <= epsilon over all coordinates
  std::size_t memory = 10;    // L-BFGS pairs
  double beta = 0.5;          // backtracking factor
  double sigma = 0.01;        // Armijo constant
  std::size_t max_inner = 10;
  std::size_t max_outer = 10000;
  std::size_t max_trials = 40;
  double cooling_factor = 10.0;
  bool shrink_enabled = true;
  std::uint64_t seed = 1;
  SolverKind kind = SolverKind::ProxQn;

  bool record_iterates = false;  // keep every iterate and working set in the result
  bool measure_time = true;      // false writes 0 elapsed time, for reproducible traces

  // Throws std::invalid_argument on out-of-range settings.
  void validate() const;
};

// Active coordinates plus the shrinking bookkeeping carried between passes.
struct WorkingSet {
  std::vector<Index> active;  // sorted
  double m_hat = std::numeric_limits<double>::infinity();
  double m_current = 0.0;
  std::size_t epoch = 0;
  double shrink_tol = std::numeric_limits<double>::infinity();
};

struct TraceRecord {
  std::size_t iter = 0;
  std::size_t epoch = 0;
  double elapsed_seconds = 0.0;
  double objective = 0.0;
  std::size_t nnz = 0;
  std::size_t active_set = 0;
  double step_size = 0.0;
  std::size_t inner_sweeps = 0;
  std::size_t line_search_trials = 0;
  std::uint64_t oracle_passes = 0;
};

enum class SolveStatus { Converged, MaxOuterReached, LineSearchFailed };

std::string to_string(SolveStatus status);

struct SolveResult {
  std::vector<double> w;
  std::vector<TraceRecord> trace;  // first record is the starting point w = 0
  SolveStatus status = SolveStatus::MaxOuterReached;
  std::string message;
  double objective = 0.0;
  double stationarity = 0.0;  // max_j |d_j f| over all coordinates at the last full pass
  std::size_t epochs = 0;

  // Filled when SolverConfig::record_iterates is set; iterates[t] matches trace[t] and
  // working_sets[t] is the working set used for the step that produced iterates[t + 1].
  std::vector<std::vector<double>> iterates;
  std::vector<std::vector<Index>> working_sets;
};

// Minimum-norm subgradient of f = l + lambda |.|_1 along coordinate j.
double partial_subgradient(double w_j, double g_j, double lambda);

struct ShrinkResult {
  std::vector<Index> active;
  double m_new = 0.0;  // max |d_j f| over the kept coordinates
};

// One shrinking pass over `previous`: keeps j iff w_j != 0 or |g_j| - lambda + m_hat / n > 0.
// g must be current on `previous`.
ShrinkResult shrink_pass(std::span<const double> w, std::span<const double> g,
                         std::span<const Index> previous, double lambda, double m_hat,
                         std::size_t sample_count);

struct ArmijoResult {
  double alpha = 1.0;
  std::vector<double> w;
  double objective = 0.0;
  std::size_t trials = 0;  // number of loss evaluations
};

// Backtracks alpha over 1, beta, beta^2, ... until
//     f(w + alpha d) <= f(w) + alpha sigma delta,
// with d given on `support`. A zero direction returns alpha = 1 without evaluating f.
// Throws LineSearchError after max_trials rejections.
ArmijoResult armijo_search(SmoothLossOracle& oracle, std::span<const double> w,
                           std::span<const Index> support, std::span<const double> d,
                           double f_w, double delta, double lambda, double beta, double sigma,
                           std::size_t max_trials);

// Proximal quasi-Newton with compact L-BFGS, coordinate-descent inner solves and
// epoch-based working-set shrinking. Starts from w = 0.
SolveResult prox_qn_solve(SmoothLossOracle& oracle, const SolverConfig& config);

// Proximal gradient (ISTA) with backtracking on the step size. Starts from w = 0.
SolveResult prox_gd_solve(SmoothLossOracle& oracle, const SolverConfig& config);

// Dispatches on config.kind.
SolveResult solve(SmoothLossOracle& oracle, const SolverConfig& config);

std::size_t count_nonzeros(std::span<const double> w);

}  // namespace pqn
