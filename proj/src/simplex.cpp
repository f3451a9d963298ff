#include "simplex.hpp"

#include <cmath>
#include <limits>

namespace mnar::detail {

namespace {

constexpr double kTol = 1e-11;

struct Tableau {
  Eigen::MatrixXd T;          // rows 0..m-1 constraints, last row objective (reduced costs)
  std::vector<int> basis;     // basic column per constraint row
  int rhs = 0;                // index of the right-hand-side column

  void pivot(int r, int col) {
    T.row(r) /= T(r, col);
    for (int i = 0; i < T.rows(); ++i)
      if (i != r && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(r);
    basis[static_cast<std::size_t>(r)] = col;
  }

  // Minimise with the objective row holding reduced costs; columns >= allowed are barred.
  bool optimise(int allowed) {
    const int m = static_cast<int>(basis.size());
    const int obj = m;
    for (int guard = 0; guard < 100000; ++guard) {
      int enter = -1;
      for (int j = 0; j < allowed; ++j)
        if (T(obj, j) < -kTol) {
          enter = j;  // Bland: lowest index
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        if (T(i, enter) > kTol) {
          const double ratio = T(i, rhs) / T(i, enter);
          if (ratio < best - kTol ||
              (std::abs(ratio - best) <= kTol && leave >= 0 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;  // unbounded
      pivot(leave, enter);
    }
    return false;
  }
};

}  // namespace

LpSolution solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  int n_art = 0;
  for (int i = 0; i < m; ++i)
    if (b(i) < 0.0) ++n_art;
  // Columns: x (n), slacks (m), artificials (n_art), rhs.
  const int cols = n + m + n_art + 1;
  Tableau tb;
  tb.T = Eigen::MatrixXd::Zero(m + 1, cols);
  tb.rhs = cols - 1;
  tb.basis.assign(static_cast<std::size_t>(m), -1);
  int art = n + m;
  for (int i = 0; i < m; ++i) {
    const double sign = b(i) < 0.0 ? -1.0 : 1.0;
    tb.T.row(i).head(n) = sign * A.row(i);
    tb.T(i, n + i) = sign;
    tb.T(i, tb.rhs) = sign * b(i);
    if (b(i) < 0.0) {
      tb.T(i, art) = 1.0;
      tb.basis[static_cast<std::size_t>(i)] = art++;
    } else {
      tb.basis[static_cast<std::size_t>(i)] = n + i;
    }
  }
  LpSolution out;
  if (n_art > 0) {
    // Phase one: minimise the sum of artificials.
    tb.T.row(m).setZero();
    for (int j = n + m; j < n + m + n_art; ++j) tb.T(m, j) = 1.0;
    for (int i = 0; i < m; ++i)
      if (tb.basis[static_cast<std::size_t>(i)] >= n + m) tb.T.row(m) -= tb.T.row(i);
    tb.optimise(n + m + n_art);
    if (-tb.T(m, tb.rhs) > 1e-9) return out;  // infeasible
    // Drive remaining zero-level artificials out of the basis.
    for (int i = 0; i < m; ++i) {
      if (tb.basis[static_cast<std::size_t>(i)] < n + m) continue;
      for (int j = 0; j < n + m; ++j)
        if (std::abs(tb.T(i, j)) > kTol) {
          tb.pivot(i, j);
          break;
        }
    }
  }
  // Phase two objective.
  tb.T.row(m).setZero();
  tb.T.row(m).head(n) = c.transpose();
  for (int i = 0; i < m; ++i) {
    const int bcol = tb.basis[static_cast<std::size_t>(i)];
    if (bcol < n && c(bcol) != 0.0) tb.T.row(m) -= c(bcol) * tb.T.row(i);
  }
  // Artificials stuck in the basis sit on redundant rows; they are never allowed to enter.
  if (!tb.optimise(n + m)) {
    out.status = LpSolution::Status::Unbounded;
    return out;
  }
  out.status = LpSolution::Status::Optimal;
  out.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i) {
    const int bcol = tb.basis[static_cast<std::size_t>(i)];
    if (bcol < n) out.x(bcol) = tb.T(i, tb.rhs);
  }
  out.value = c.dot(out.x);
  return out;
}

}  // namespace mnar::detail
