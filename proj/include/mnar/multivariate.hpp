#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mnar/core_types.hpp"

namespace mnar {

using BlockMeans = std::vector<Eigen::VectorXd>;

struct DescentConfig {
  double A1 = 1e-9;
  double A2 = 300.0;
  double A3 = 180000.0;
  int sdp_iters = 20;
  std::optional<Eigen::MatrixXd> sigma_ipw;  // exact Sigma^IPW, if known
  std::optional<double> rank_bound;          // else an upper bound on its effective rank; else d
};

struct SdpResult {
  Eigen::VectorXd direction;
  double value = 0.0;
  int iterations = 0;
  std::vector<double> trace;  // objective after each accepted step
};

// Rank-one alternation for max_v min_{w in capped simplex} sum_m w_m <x_m - theta, v>^2.
SdpResult solve_sdp_approx(const BlockMeans& block_means, const Eigen::VectorXd& theta, int iters = 20);

// ceil(log(8 sqrt(d)) / log(10/9))
int block_descent_steps(std::size_t d);

Eigen::VectorXd robust_block_descent(const BlockMeans& block_means, int sdp_iters = 20);

// min(ceil(max(300(2 eps n + log(2/delta)), 180000 log(2/delta))), n)
std::size_t robust_descent_blocks(std::size_t n, double epsilon, double delta);

Eigen::VectorXd robust_descent(const std::vector<Eigen::VectorXd>& data, double epsilon, double delta,
                               std::uint64_t seed, int sdp_iters = 20);

struct IterativePlan {
  double rank = 0.0;
  int T = 0;
  double eps_prime = 0.0;
  std::size_t M = 0;
  std::size_t required_n = 0;  // T (M + 1)
};
IterativePlan iterative_plan(std::size_t n, std::size_t d, double epsilon, double delta, const DescentConfig& config);

Eigen::VectorXd iterative_robust_descent(const std::vector<ExtendedVector>& sample, double epsilon, double delta,
                                         const DescentConfig& config, std::uint64_t seed);

struct SphereNet {
  std::vector<Eigen::VectorXd> directions;
  double radius = 0.25;
  double audit_max_distance = 0.0;  // worst nearest-net distance over the audit directions
  std::size_t added_by_audit = 0;
};

// Greedy 1/4-separated set of unit vectors, closed under v -> -v, audited on 1e5 random directions.
SphereNet quarter_net(std::size_t d, std::uint64_t seed);

struct MultiMkResult {
  Eigen::VectorXd theta;
  double objective = 0.0;          // max_v (v^T theta - k_v)^2
  std::vector<double> projected;   // k_v per net direction; k_{-v} = -k_v
  SphereNet net;
};

MultiMkResult multivariate_mk_full(const std::vector<ExtendedVector>& sample, double epsilon, double q,
                                   const Eigen::MatrixXd& Sigma, std::uint64_t seed);
Eigen::VectorXd multivariate_mk(const std::vector<ExtendedVector>& sample, double epsilon, double q,
                                const Eigen::MatrixXd& Sigma, std::uint64_t seed);

// Mean of the fully observed rows.
Eigen::VectorXd complete_case_mean(const std::vector<ExtendedVector>& sample);

}  // namespace mnar
