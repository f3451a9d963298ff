#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mnar/errors.hpp"

namespace mnar {

/// A coordinate that is either a finite real or the missing token.
class ExtendedValue {
 public:
  ExtendedValue() = default;  // missing
  explicit ExtendedValue(double v);

  static ExtendedValue missing() { return ExtendedValue(); }

  bool observed() const { return v_.has_value(); }
  bool is_missing() const { return !v_.has_value(); }
  double value() const;  // throws ModelError when missing

  friend bool operator==(const ExtendedValue&, const ExtendedValue&) = default;

 private:
  std::optional<double> v_;
};

using ExtendedVector = std::vector<ExtendedValue>;
using RevelationPattern = std::vector<std::uint8_t>;

ExtendedVector make_observation(const Eigen::VectorXd& x, const RevelationPattern& omega);
ExtendedVector make_observation(const ExtendedVector& x, const RevelationPattern& omega);

bool fully_observed(const ExtendedVector& z);
bool fully_missing(const ExtendedVector& z);

// Rows whose every coordinate is observed, in increasing order.
std::vector<std::size_t> observed_rows(std::span<const ExtendedVector> sample);
// Per row, the observed coordinate indices.
std::vector<std::vector<std::size_t>> observed_coordinates(std::span<const ExtendedVector> sample);
// Univariate: indices i with Z_i observed.
std::vector<std::size_t> observed_indices(std::span<const ExtendedValue> sample);
std::vector<double> observed_values(std::span<const ExtendedValue> sample);

/// Law of the revelation vector: finitely many distinct patterns with weights.
class PatternDistribution {
 public:
  PatternDistribution(std::vector<RevelationPattern> support, std::vector<double> probs);

  static PatternDistribution univariate(double q);
  static PatternDistribution all_or_nothing(std::size_t d, double q);
  static PatternDistribution independent(const std::vector<double>& q);

  std::size_t dim() const { return d_; }
  const std::vector<RevelationPattern>& support() const { return support_; }
  const std::vector<double>& probs() const { return probs_; }

  double marginal(std::size_t j) const;                // q_j
  double joint(std::size_t j, std::size_t k) const;    // q_jk
  // Pattern chosen by inverse-CDF on a single uniform in (0,1).
  const RevelationPattern& pick(double u) const;

 private:
  std::size_t d_ = 0;
  std::vector<RevelationPattern> support_;
  std::vector<double> probs_;
};

struct ContaminationParams {
  double epsilon = 0.0;
  std::variant<double, PatternDistribution> q_or_pi = 1.0;

  ContaminationParams(double eps, double q);
  ContaminationParams(double eps, PatternDistribution pi);

  double q() const;  // scalar q; for a pattern law, probability of the full pattern
};

double effective_contamination(double epsilon, double q);

Eigen::MatrixXd sigma_ipw(const Eigen::MatrixXd& Sigma, const PatternDistribution& pi);

// tr(A)/||A||_op for symmetric A; 0 when A = 0.
double effective_rank(const Eigen::MatrixXd& A);

// Smallest eigenvalue divided by the operator norm (0 for the zero matrix).
double min_eigen_ratio(const Eigen::MatrixXd& A);

}  // namespace mnar
