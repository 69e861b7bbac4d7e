#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pqn/sparse_data.hpp"

namespace pqn {

// Compact limited-memory BFGS approximation
//
//     B = gamma I - Q R Q^T,   Q = [gamma S  Y],
//     R = [ gamma S^T S   L ]^-1
//         [ L^T          -D ]
//
// built from the last m (s, y) pairs, with gamma = y^T s / s^T s of the newest pair.
//
// S and Y are stored by row and only for coordinates that appeared in the support of
// some pushed pair; every other row is implicitly zero. All per-coordinate queries
// read row j alone, and a push computes its inner products over the support of s only,
// so work scales with the working set rather than the full dimension.
class LbfgsState {
 public:
  static constexpr double kCurvatureFloor = 1e-12;

  LbfgsState(std::size_t dimension, std::size_t memory);

  LbfgsState(const LbfgsState& other);
  LbfgsState& operator=(const LbfgsState& other);

  // Adds the pair (s, y) given on a common support (values aligned with `support`).
  // Skips the pair and returns false when s^T y <= floor * |s| |y|.
  bool push_pair(std::span<const Index> support, std::span<const double> s, std::span<const double> y);

  // B_jj = gamma - q_j^T R q_j.
  double b_diag(Index j) const;
  // (B d)_j = gamma d_j - q_j^T d_hat, where d_hat = R Q^T d.
  double b_times_d_entry(Index j, double d_j, std::span<const double> d_hat) const;
  // R q_j, the j-th column of Q-hat.
  std::vector<double> qhat_column(Index j) const;
  // q_j = (gamma S_j., Y_j.) in oldest-to-newest order; `out` must have rank() entries.
  void q_row(Index j, std::span<double> out) const;

  void reset();

  std::size_t dimension() const { return slot_of_.size(); }
  std::size_t memory() const { return memory_; }
  std::size_t size() const { return count_; }
  std::size_t rank() const { return 2 * count_; }
  double gamma() const { return gamma_; }

  const Eigen::MatrixXd& middle_inverse() const { return R_; }
  const Eigen::MatrixXd& gram_ss() const { return SS_; }
  const Eigen::MatrixXd& lower_sy() const { return L_; }
  const Eigen::VectorXd& diag_sy() const { return D_; }

  // Dense d x d matrix implied by the compact form. Diagnostics only.
  Eigen::MatrixXd to_dense() const;

  // Number of history rows read by queries since construction or the last counter reset.
  std::uint64_t row_reads() const { return row_reads_.load(std::memory_order_relaxed); }
  void reset_row_reads() const { row_reads_.store(0, std::memory_order_relaxed); }

 private:
  std::size_t physical(std::size_t logical) const { return (head_ + logical) % memory_; }
  double s_at(Index slot, std::size_t col) const { return s_rows_[slot * memory_ + col]; }
  double y_at(Index slot, std::size_t col) const { return y_rows_[slot * memory_ + col]; }
  Index ensure_slot(Index j);
  void evict_oldest();
  void refresh_middle_inverse();

  std::size_t memory_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  double gamma_ = 1.0;

  std::vector<Index> slot_of_;
  std::vector<Index> slot_owner_;
  std::vector<double> s_rows_;
  std::vector<double> y_rows_;
  std::vector<std::vector<Index>> column_support_;

  Eigen::MatrixXd SS_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd D_;
  Eigen::MatrixXd R_;

  mutable std::atomic<std::uint64_t> row_reads_{0};
};

}  // namespace pqn
