#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mnar/core_types.hpp"
#include "mnar/kolmogorov.hpp"

namespace mnar {

struct UniEstimate {
  double value = 0.0;
  std::map<std::string, double> meta;
};

// a_(floor(n/2)+1) of the sorted values (1-based), i.e. index n/2 after sorting.
double median_of(std::vector<double> v);

// T_{alpha,beta}(x): clamp x to [alpha, beta].
double clamp_to(double x, double alpha, double beta);

UniEstimate average_of_extremes(std::span<const ExtendedValue> sample);
UniEstimate observed_mean(std::span<const ExtendedValue> sample);

// Seeded partition into M blocks whose sizes differ by at most one (the first n mod M
// blocks are the larger ones), then the median of block means.
UniEstimate median_of_means(std::span<const double> data, std::size_t M, std::uint64_t seed);

// Seeded half split; clamp levels from the second half, mean of the clamped first half.
UniEstimate trimmed_mean(std::span<const double> data, double epsilon, double delta, std::uint64_t seed);

// theta -> distance from the empirical law to R(N(theta, sigma^2), eps, q).
double mk_objective(const EmpiricalSummary& emp, double epsilon, double q, double sigma, double theta);

// Smallest minimiser of mk_objective: 512-point grid over the observed range +- 6 sigma,
// golden-section refinement around the best grid point, then a left-boundary search.
UniEstimate mk_estimate(std::span<const ExtendedValue> sample, double epsilon, double q, double sigma);
UniEstimate mk_estimate(const EmpiricalSummary& emp, double epsilon, double q, double sigma);

}  // namespace mnar
