#pragma once

#include <vector>

#include <Eigen/Dense>

namespace mnar::detail {

struct LpSolution {
  enum class Status { Optimal, Infeasible, Unbounded } status = Status::Infeasible;
  double value = 0.0;
  Eigen::VectorXd x;
};

// minimise c^T x subject to A x <= b, x >= 0. Dense two-phase tableau simplex with
// Bland's rule; meant for small oracle problems only.
LpSolution solve_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

}  // namespace mnar::detail
