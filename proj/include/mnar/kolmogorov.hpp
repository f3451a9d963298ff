#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mnar/core_types.hpp"
#include "mnar/distributions.hpp"

namespace mnar {

/// Sorted observed values plus the total count (observed + missing).
struct EmpiricalSummary {
  std::vector<double> sorted_observed;
  std::size_t n_total = 0;

  static EmpiricalSummary from_sample(const std::vector<ExtendedValue>& sample);
  static EmpiricalSummary from_values(std::vector<double> observed, std::size_t n_total);

  std::size_t m() const { return sorted_observed.size(); }
};

/// The set R(P, epsilon, q) for an absolutely continuous univariate P.
struct RealisableSetSpec {
  BaseDistribution base;
  double epsilon;
  double q;

  RealisableSetSpec(BaseDistribution base, double epsilon, double q);
  // R(N(0, sigma^2), 1 - q(1-eps), 1): the residual class for regression.
  static RealisableSetSpec residual_class(double sigma, double epsilon, double q);

  double lower_mass() const { return q * (1.0 - epsilon); }
  double upper_mass() const { return q * (1.0 - epsilon) + epsilon; }
};

/// Increment bounds L_i <= V_{i+1} - V_i <= U_i over the m+1 gaps between sorted points.
struct ChainBounds {
  std::vector<double> L, U;
};
ChainBounds chain_bounds(const EmpiricalSummary& emp, const RealisableSetSpec& set);

/// A law on R_* as finitely many atoms plus an optional continuous part.
class ExtendedLaw {
 public:
  static ExtendedLaw empirical(const EmpiricalSummary& emp);
  static ExtendedLaw atoms(std::vector<double> at, std::vector<double> mass);
  static ExtendedLaw point_mass(double x) { return atoms({x}, {1.0}); }
  static ExtendedLaw all_missing() { return atoms({}, {}); }
  // Continuous sub-probability with CDF `cdf` (cdf(+inf) = total). `probes` are points
  // where the distance search evaluates it (relevant only when both laws are continuous).
  static ExtendedLaw continuous(std::function<double(double)> cdf, double total, std::vector<double> probes);

  double cdf(double t) const;       // R((-inf, t])
  double cdf_left(double t) const;  // R((-inf, t))
  double observed_mass() const { return atom_total_ + cont_total_; }
  double star_mass() const { return 1.0 - observed_mass(); }
  const std::vector<double>& atom_positions() const { return at_; }
  const std::vector<double>& probes() const { return probes_; }
  bool has_continuous_part() const { return static_cast<bool>(cont_); }

 private:
  std::vector<double> at_, cum_;  // cum_[k] = mass of atoms 0..k
  double atom_total_ = 0.0;
  std::function<double(double)> cont_;
  double cont_total_ = 0.0;
  std::vector<double> probes_;
};

double kolmogorov_distance(const ExtendedLaw& a, const ExtendedLaw& b);
double sym_kolmogorov_distance(const ExtendedLaw& a, const ExtendedLaw& b);

// Distance from the empirical law to R(P, eps, q) over lower half-lines: bisection on the
// level with forward interval propagation along the chain.
double dist_to_realisable(const EmpiricalSummary& emp, const RealisableSetSpec& set);
// Same program solved as an explicit LP by the simplex method; m <= 8.
double dist_to_realisable_bruteforce(const EmpiricalSummary& emp, const RealisableSetSpec& set);

// Symmetrised version (lower and upper half-lines). For a fixed level the feasible set is
// described by difference constraints among (0, V_{m+1}, V_j); propagating them as a
// three-node difference-bound matrix decides feasibility exactly in O(m).
double dist_to_realisable_sym(const EmpiricalSummary& emp, const RealisableSetSpec& set);
double dist_to_realisable_sym_bruteforce(const EmpiricalSummary& emp, const RealisableSetSpec& set);

// Same programs on precomputed chain bounds (used by the estimators to avoid rebuilding).
double chain_distance(const ChainBounds& cb, std::size_t n_total);
double chain_distance_sym(const ChainBounds& cb, std::size_t n_total);

// b = (1/2) log(1 + 4 eps / (q(1-eps))).
double separation_b(double epsilon, double q);
// Lower bound on the Kolmogorov distance between R(N(-a, s^2)) and R(N(a, s^2)).
double separation_profile(double a, double b, double sigma, double epsilon, double q);

}  // namespace mnar
