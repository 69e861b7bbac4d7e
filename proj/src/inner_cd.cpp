#include "pqn/inner_cd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pqn {

std::size_t inner_sweep_budget(std::size_t total_coords, std::size_t active, std::size_t max_inner) {
  const std::size_t ratio = active == 0 ? total_coords : total_coords / active;
  return std::max<std::size_t>(1, std::min(max_inner, ratio));
}

bool InnerDirection::is_zero() const {
  return std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; });
}

namespace {

// q_j and q-hat_j for every coordinate of the working set, plus the cached diagonal of B.
struct WorkingRows {
  std::size_t rank = 0;
  std::vector<double> q;     // |A| x rank, row-major
  std::vector<double> qhat;  // |A| x rank, row-major
  std::vector<double> diag;

  WorkingRows(std::span<const Index> active, const LbfgsState& lbfgs) : rank(lbfgs.rank()) {
    const std::size_t n = active.size();
    q.resize(n * rank);
    qhat.resize(n * rank);
    diag.resize(n);
    const auto r = static_cast<Eigen::Index>(rank);
    const Eigen::MatrixXd& R = lbfgs.middle_inverse();
    for (std::size_t k = 0; k < n; ++k) {
      if (rank == 0) {
        diag[k] = lbfgs.gamma();
        continue;
      }
      lbfgs.q_row(active[k], std::span<double>(q.data() + k * rank, rank));
      Eigen::Map<const Eigen::VectorXd> qk(q.data() + k * rank, r);
      Eigen::Map<Eigen::VectorXd> qhk(qhat.data() + k * rank, r);
      qhk.noalias() = R * qk;
      diag[k] = lbfgs.gamma() - qk.dot(qhk);
    }
  }

  double dot_q(std::size_t k, const std::vector<double>& v) const {
    double s = 0.0;
    const double* row = q.data() + k * rank;
    for (std::size_t i = 0; i < rank; ++i) s += row[i] * v[i];
    return s;
  }
};

}  // namespace

InnerDirection solve_subproblem(std::span<const double> g, std::span<const double> w,
                                std::span<const Index> active, const LbfgsState& lbfgs,
                                double lambda, std::size_t sweeps, std::mt19937_64& rng,
                                const std::function<void(std::span<const double>)>& on_step) {
  const std::size_t n = active.size();
  const WorkingRows rows(active, lbfgs);
  const double gamma = lbfgs.gamma();

  InnerDirection out;
  out.d.assign(n, 0.0);
  out.d_hat.assign(rows.rank, 0.0);

  std::vector<std::size_t> order(n);
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k : order) {
      // B is positive definite, so the diagonal is too; the floor only absorbs rounding.
      const double a = std::max(rows.diag[k], 1e-12 * gamma);
      const double bd = gamma * out.d[k] - rows.dot_q(k, out.d_hat);
      const double z = cd_step(w[k], out.d[k], g[k], a, bd, lambda);
      if (z != 0.0) {
        out.d[k] += z;
        const double* qh = rows.qhat.data() + k * rows.rank;
        for (std::size_t i = 0; i < rows.rank; ++i) out.d_hat[i] += z * qh[i];
      }
      if (on_step) on_step(out.d);
    }
  }
  out.sweeps = sweeps;

  double delta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    delta += g[k] * out.d[k] + lambda * (std::abs(w[k] + out.d[k]) - std::abs(w[k]));
  }
  out.delta = delta;
  return out;
}

double subproblem_objective(std::span<const double> g, std::span<const double> w,
                            std::span<const Index> active, const LbfgsState& lbfgs, double lambda,
                            std::span<const double> d) {
  const std::size_t n = active.size();
  const std::size_t r = lbfgs.rank();
  // Q^T d over A, then B d = gamma d - Q R Q^T d.
  Eigen::VectorXd qtd = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r));
  std::vector<double> qj(r);
  for (std::size_t k = 0; k < n; ++k) {
    lbfgs.q_row(active[k], qj);
    for (std::size_t i = 0; i < r; ++i) qtd[static_cast<Eigen::Index>(i)] += qj[i] * d[k];
  }
  Eigen::VectorXd dhat = r > 0 ? Eigen::VectorXd(lbfgs.middle_inverse() * qtd) : Eigen::VectorXd();
  double value = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    lbfgs.q_row(active[k], qj);
    double bd = lbfgs.gamma() * d[k];
    for (std::size_t i = 0; i < r; ++i) bd -= qj[i] * dhat[static_cast<Eigen::Index>(i)];
    value += g[k] * d[k] + 0.5 * d[k] * bd + lambda * std::abs(w[k] + d[k]);
  }
  return value;
}

}  // namespace pqn
