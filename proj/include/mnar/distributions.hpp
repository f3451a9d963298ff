#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mnar/rng.hpp"

namespace mnar {

struct Gaussian {
  Eigen::VectorXd theta;
  Eigen::MatrixXd Sigma;
};

// Atoms at -b (probability p_minus) and +b.
struct TwoPoint {
  double b = 1.0;
  double p_minus = 0.5;
};

struct BoundedUniform {
  double lo = 0.0;
  double hi = 1.0;
};

// theta + S * s * G^(1/r) with S a fair sign, G ~ Gamma(1/r, 1) and
// s = sigma * 2^(-1/r); then E exp(|X - theta|^r / sigma^r) - 1 = 2^(1/r) - 1 <= 1,
// i.e. the psi_r Orlicz norm of X - theta is at most sigma.
struct SubWeibullFolded {
  double r = 2.0;
  double sigma = 1.0;
  double theta = 0.0;
};

/// Base law P of the clean data. Every variant has a closed-form mean.
class BaseDistribution {
 public:
  using Variant = std::variant<Gaussian, TwoPoint, BoundedUniform, SubWeibullFolded>;

  explicit BaseDistribution(Variant v);

  static BaseDistribution gaussian(double mu, double sd);
  static BaseDistribution gaussian(Eigen::VectorXd theta, Eigen::MatrixXd Sigma);
  static BaseDistribution two_point(double b, double p_minus);
  static BaseDistribution uniform(double lo, double hi);
  static BaseDistribution sub_weibull(double r, double sigma, double theta = 0.0);

  std::size_t dim() const;
  Eigen::VectorXd mean() const;
  const Variant& params() const { return v_; }
  std::string name() const;

  // Consumes exactly dim() uniforms from s.
  Eigen::VectorXd draw(Stream& s) const;
  double draw1(Stream& s) const;  // univariate only; one uniform

  // Univariate queries.
  bool absolutely_continuous() const;
  double cdf(double x) const;
  double pdf(double x) const;               // continuous variants only
  double interval_mass(double lo, double hi) const;  // P((lo, hi)) for continuous, P((lo, hi]) otherwise
  double quantile(double p) const;          // continuous variants only
  double mean1() const { return mean()(0); }

 private:
  void require_univariate(const char* what) const;

  Variant v_;
  Eigen::MatrixXd chol_;  // lower Cholesky factor for Gaussian
};

/// Reveal probability m(x) of the contaminated (MNAR) component.
class MnarMechanism {
 public:
  enum class Kind { Constant, ThresholdAbove, ThresholdBelow, TailsOnly, Custom };

  static MnarMechanism constant(double c);
  static MnarMechanism threshold_above(double t);  // m = 1{x >= t}
  static MnarMechanism threshold_below(double t);  // m = 1{x <= t}
  static MnarMechanism tails_only(double t);       // m = 1{|x| >= t}
  // values[k] on [breaks[k-1], breaks[k]) with breaks[-1] = -inf, breaks[K] = +inf;
  // values.size() == breaks.size() + 1; values clamped to [0,1].
  static MnarMechanism custom(std::vector<double> breaks, std::vector<double> values);

  double operator()(double x) const;
  Kind kind() const { return kind_; }
  double parameter() const { return t_; }
  // Points where m may jump; m is constant between consecutive ones.
  std::vector<double> breakpoints() const;
  std::string describe() const;

 private:
  Kind kind_ = Kind::Constant;
  double t_ = 0.0;
  std::vector<double> breaks_, values_;
};

}  // namespace mnar
