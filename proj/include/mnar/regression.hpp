#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mnar/core_types.hpp"

namespace mnar {

struct RegularityReport {
  double beta_hat = 0.0;
  double gamma = 0.0;
  Eigen::VectorXd worst_direction;
  std::size_t n_directions_tested = 0;
  bool exact = false;  // d = 1; otherwise a Monte Carlo estimate, not a certificate
};

// Half the smallest fraction of rows with |x_i^T v| > gamma over the tested unit directions.
RegularityReport check_regular_design(const Eigen::MatrixXd& X, double gamma, std::size_t n_dirs, std::uint64_t seed);

// Least squares on the rows with an observed response. Throws EstimationError when the
// observed design is rank deficient.
Eigen::VectorXd ols_observed(const Eigen::MatrixXd& X, const std::vector<ExtendedValue>& Z);

// Symmetrised distance from the residual law at theta to R(N(0, sigma^2), 1 - q(1-eps), 1).
double ks_regression_objective(const Eigen::MatrixXd& X, const std::vector<ExtendedValue>& Z, double sigma,
                               double epsilon, double q, const Eigen::VectorXd& theta);

struct KsRegressionOptions {
  int restarts = 5;
  int max_evals = 2000;
  bool parallel = true;  // one thread per restart
};

struct KsRegressionResult {
  Eigen::VectorXd theta;
  double objective = 0.0;
  std::vector<double> start_objectives;
  std::vector<double> restart_objectives;
  std::vector<int> restart_evaluations;
  std::size_t best_restart = 0;
  bool ols_fallback = false;
  std::string warning;
};

KsRegressionResult ks_regression_full(const Eigen::MatrixXd& X, const std::vector<ExtendedValue>& Z, double sigma,
                                      double epsilon, double q, std::uint64_t seed,
                                      const KsRegressionOptions& options = {});
Eigen::VectorXd ks_regression_estimate(const Eigen::MatrixXd& X, const std::vector<ExtendedValue>& Z, double sigma,
                                       double epsilon, double q, std::uint64_t seed);

}  // namespace mnar
