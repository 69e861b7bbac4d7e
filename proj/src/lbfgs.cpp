#include "pqn/lbfgs.hpp"

#include <cassert>
#include <cmath>

namespace pqn {

LbfgsState::LbfgsState(std::size_t dimension, std::size_t memory)
    : memory_(memory), slot_of_(dimension, kNoIndex), column_support_(memory) {
  assert(memory >= 1);
}

LbfgsState::LbfgsState(const LbfgsState& other)
    : memory_(other.memory_),
      head_(other.head_),
      count_(other.count_),
      gamma_(other.gamma_),
      slot_of_(other.slot_of_),
      slot_owner_(other.slot_owner_),
      s_rows_(other.s_rows_),
      y_rows_(other.y_rows_),
      column_support_(other.column_support_),
      SS_(other.SS_),
      L_(other.L_),
      D_(other.D_),
      R_(other.R_) {}

LbfgsState& LbfgsState::operator=(const LbfgsState& other) {
  if (this == &other) return *this;
  memory_ = other.memory_;
  head_ = other.head_;
  count_ = other.count_;
  gamma_ = other.gamma_;
  slot_of_ = other.slot_of_;
  slot_owner_ = other.slot_owner_;
  s_rows_ = other.s_rows_;
  y_rows_ = other.y_rows_;
  column_support_ = other.column_support_;
  SS_ = other.SS_;
  L_ = other.L_;
  D_ = other.D_;
  R_ = other.R_;
  return *this;
}

Index LbfgsState::ensure_slot(Index j) {
  if (slot_of_[j] == kNoIndex) {
    slot_of_[j] = static_cast<Index>(slot_owner_.size());
    slot_owner_.push_back(j);
    s_rows_.resize(s_rows_.size() + memory_, 0.0);
    y_rows_.resize(y_rows_.size() + memory_, 0.0);
  }
  return slot_of_[j];
}

void LbfgsState::evict_oldest() {
  const std::size_t col = head_;
  for (Index j : column_support_[col]) {
    const Index slot = slot_of_[j];
    s_rows_[slot * memory_ + col] = 0.0;
    y_rows_[slot * memory_ + col] = 0.0;
  }
  column_support_[col].clear();
  head_ = (head_ + 1) % memory_;
  --count_;

  const auto k = static_cast<Eigen::Index>(count_);
  Eigen::MatrixXd ss = SS_.bottomRightCorner(k, k);
  Eigen::MatrixXd l = L_.bottomRightCorner(k, k);
  Eigen::VectorXd dd = D_.tail(k);
  SS_ = std::move(ss);
  L_ = std::move(l);
  D_ = std::move(dd);
}

bool LbfgsState::push_pair(std::span<const Index> support, std::span<const double> s,
                           std::span<const double> y) {
  assert(support.size() == s.size() && support.size() == y.size());
  double sy = 0.0, ss = 0.0, yy = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k) {
    sy += s[k] * y[k];
    ss += s[k] * s[k];
    yy += y[k] * y[k];
  }
  if (!(sy > kCurvatureFloor * std::sqrt(ss) * std::sqrt(yy)) || ss == 0.0) return false;

  if (count_ == memory_) evict_oldest();

  // Inner products of the new s against the retained history, over supp(s) only.
  const auto k_old = static_cast<Eigen::Index>(count_);
  Eigen::VectorXd s_dot_s(k_old), s_dot_y(k_old);
  s_dot_s.setZero();
  s_dot_y.setZero();
  for (std::size_t k = 0; k < support.size(); ++k) {
    const Index slot = slot_of_[support[k]];
    if (slot == kNoIndex || s[k] == 0.0) continue;
    for (Eigen::Index i = 0; i < k_old; ++i) {
      const std::size_t col = physical(static_cast<std::size_t>(i));
      s_dot_s[i] += s[k] * s_at(slot, col);
      s_dot_y[i] += s[k] * y_at(slot, col);
    }
  }

  const std::size_t col = physical(count_);
  column_support_[col].assign(support.begin(), support.end());
  for (std::size_t k = 0; k < support.size(); ++k) {
    const Index slot = ensure_slot(support[k]);
    s_rows_[slot * memory_ + col] = s[k];
    y_rows_[slot * memory_ + col] = y[k];
  }
  ++count_;

  const Eigen::Index n = k_old + 1;
  SS_.conservativeResize(n, n);
  L_.conservativeResize(n, n);
  D_.conservativeResize(n);
  SS_.row(n - 1).head(k_old) = s_dot_s.transpose();
  SS_.col(n - 1).head(k_old) = s_dot_s;
  SS_(n - 1, n - 1) = ss;
  L_.row(n - 1).head(k_old) = s_dot_y.transpose();
  L_.col(n - 1).setZero();
  D_[n - 1] = sy;

  gamma_ = sy / ss;
  refresh_middle_inverse();
  return true;
}

void LbfgsState::refresh_middle_inverse() {
  const auto k = static_cast<Eigen::Index>(count_);
  Eigen::MatrixXd middle(2 * k, 2 * k);
  middle.topLeftCorner(k, k) = gamma_ * SS_;
  middle.topRightCorner(k, k) = L_;
  middle.bottomLeftCorner(k, k) = L_.transpose();
  middle.bottomRightCorner(k, k) = -D_.asDiagonal().toDenseMatrix();
  R_ = middle.fullPivLu().inverse();
}

void LbfgsState::q_row(Index j, std::span<double> out) const {
  assert(out.size() == rank());
  row_reads_.fetch_add(1, std::memory_order_relaxed);
  const Index slot = slot_of_[j];
  if (slot == kNoIndex) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  for (std::size_t i = 0; i < count_; ++i) {
    const std::size_t col = physical(i);
    out[i] = gamma_ * s_at(slot, col);
    out[count_ + i] = y_at(slot, col);
  }
}

std::vector<double> LbfgsState::qhat_column(Index j) const {
  const auto r = static_cast<Eigen::Index>(rank());
  Eigen::VectorXd q(r);
  q_row(j, std::span<double>(q.data(), q.size()));
  Eigen::VectorXd qhat = R_ * q;
  return {qhat.data(), qhat.data() + r};
}

double LbfgsState::b_diag(Index j) const {
  if (count_ == 0) return gamma_;
  const auto r = static_cast<Eigen::Index>(rank());
  Eigen::VectorXd q(r);
  q_row(j, std::span<double>(q.data(), q.size()));
  return gamma_ - q.dot(R_ * q);
}

double LbfgsState::b_times_d_entry(Index j, double d_j, std::span<const double> d_hat) const {
  if (count_ == 0) return gamma_ * d_j;
  const auto r = static_cast<Eigen::Index>(rank());
  Eigen::VectorXd q(r);
  q_row(j, std::span<double>(q.data(), q.size()));
  return gamma_ * d_j - q.dot(Eigen::Map<const Eigen::VectorXd>(d_hat.data(), r));
}

void LbfgsState::reset() {
  for (Index j : slot_owner_) slot_of_[j] = kNoIndex;
  slot_owner_.clear();
  s_rows_.clear();
  y_rows_.clear();
  for (auto& c : column_support_) c.clear();
  head_ = 0;
  count_ = 0;
  gamma_ = 1.0;
  SS_.resize(0, 0);
  L_.resize(0, 0);
  D_.resize(0);
  R_.resize(0, 0);
}

Eigen::MatrixXd LbfgsState::to_dense() const {
  const auto d = static_cast<Eigen::Index>(dimension());
  const auto r = static_cast<Eigen::Index>(rank());
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(d, r);
  for (Index j : slot_owner_) {
    for (std::size_t i = 0; i < count_; ++i) {
      const std::size_t col = physical(i);
      Q(j, static_cast<Eigen::Index>(i)) = gamma_ * s_at(slot_of_[j], col);
      Q(j, static_cast<Eigen::Index>(count_ + i)) = y_at(slot_of_[j], col);
    }
  }
  Eigen::MatrixXd B = gamma_ * Eigen::MatrixXd::Identity(d, d);
  if (r > 0) B -= Q * R_ * Q.transpose();
  return B;
}

}  // namespace pqn
