#include "mnar/univariate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mnar/errors.hpp"
#include "mnar/rng.hpp"

namespace mnar {

double median_of(std::vector<double> v) {
  if (v.empty()) throw SizeError("median of an empty set");
  const std::size_t k = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

double clamp_to(double x, double alpha, double beta) {
  if (x >= beta) return beta;
  if (x <= alpha) return alpha;
  return x;
}

UniEstimate average_of_extremes(std::span<const ExtendedValue> sample) {
  UniEstimate e;
  double lo = 0.0, hi = 0.0;
  std::size_t m = 0;
  for (const auto& z : sample) {
    if (!z.observed()) continue;
    const double v = z.value();
    if (m == 0) lo = hi = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    ++m;
  }
  e.value = m ? 0.5 * (lo + hi) : 0.0;
  e.meta["m_observed"] = static_cast<double>(m);
  return e;
}

UniEstimate observed_mean(std::span<const ExtendedValue> sample) {
  double s = 0.0;
  std::size_t m = 0;
  for (const auto& z : sample)
    if (z.observed()) {
      s += z.value();
      ++m;
    }
  if (m == 0) throw EstimationError("observed_mean: empty observed set");
  UniEstimate e;
  e.value = s / static_cast<double>(m);
  e.meta["m_observed"] = static_cast<double>(m);
  return e;
}

UniEstimate median_of_means(std::span<const double> data, std::size_t M, std::uint64_t seed) {
  const std::size_t n = data.size();
  if (n == 0) throw DomainError("median_of_means: empty data");
  if (M == 0 || M > n) throw DomainError("median_of_means: need 1 <= M <= n");
  const auto perm = permutation(n, seed);
  const std::size_t base = n / M, extra = n % M;
  std::vector<double> means;
  means.reserve(M);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < M; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    double s = 0.0;
    for (std::size_t k = 0; k < size; ++k) s += data[perm[pos + k]];
    pos += size;
    means.push_back(s / static_cast<double>(size));
  }
  UniEstimate e;
  e.value = median_of(std::move(means));
  e.meta["blocks"] = static_cast<double>(M);
  return e;
}

UniEstimate trimmed_mean(std::span<const double> data, double epsilon, double delta, std::uint64_t seed) {
  const std::size_t n = data.size();
  if (n < 4) throw SizeError("trimmed_mean: need at least 4 points");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("trimmed_mean: epsilon outside [0,1)");
  if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("trimmed_mean: delta outside (0,1]");
  const double fn = static_cast<double>(n);
  double eta = 8.0 * epsilon + 24.0 * std::log(4.0 / delta) / fn;
  eta = std::min(std::max(eta, 2.0 / fn), 0.5 - 1.0 / fn);
  const auto perm = permutation(n, seed);
  const std::size_t ny = (n + 1) / 2;
  std::vector<double> z;
  z.reserve(n - ny);
  for (std::size_t k = ny; k < n; ++k) z.push_back(data[perm[k]]);
  std::sort(z.begin(), z.end());
  auto rank = [&](double x) {
    auto r = static_cast<std::size_t>(std::max(0.0, std::floor(x + 0.5)));
    return std::clamp<std::size_t>(r, 1, z.size());
  };
  const std::size_t ka = rank(fn * eta / 2.0), kb = rank(fn * (1.0 - eta) / 2.0);
  const double alpha = z[ka - 1], beta = z[kb - 1];
  double s = 0.0;
  for (std::size_t k = 0; k < ny; ++k) s += clamp_to(data[perm[k]], alpha, beta);
  UniEstimate e;
  e.value = s / static_cast<double>(ny);
  e.meta["eta"] = eta;
  e.meta["alpha"] = alpha;
  e.meta["beta"] = beta;
  e.meta["rank_alpha"] = static_cast<double>(ka);
  e.meta["rank_beta"] = static_cast<double>(kb);
  return e;
}

double mk_objective(const EmpiricalSummary& emp, double epsilon, double q, double sigma, double theta) {
  const RealisableSetSpec set(BaseDistribution::gaussian(theta, sigma), epsilon, q);
  return chain_distance(chain_bounds(emp, set), emp.n_total);
}

UniEstimate mk_estimate(std::span<const ExtendedValue> sample, double epsilon, double q, double sigma) {
  return mk_estimate(EmpiricalSummary::from_sample(std::vector<ExtendedValue>(sample.begin(), sample.end())), epsilon,
                     q, sigma);
}

UniEstimate mk_estimate(const EmpiricalSummary& emp, double epsilon, double q, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("mk_estimate: sigma must be > 0");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("mk_estimate: epsilon outside [0,1)");
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("mk_estimate: q outside (0,1]");
  if (emp.n_total == 0) throw SizeError("mk_estimate: empty sample");
  constexpr int kGrid = 512;
  constexpr double kTieTol = 1e-12;
  double lo, hi;
  if (emp.m() == 0) {
    lo = -6.0 * sigma;
    hi = 6.0 * sigma;
  } else {
    lo = emp.sorted_observed.front() - 6.0 * sigma;
    hi = emp.sorted_observed.back() + 6.0 * sigma;
  }
  std::size_t evals = 0;
  auto f = [&](double th) {
    ++evals;
    return mk_objective(emp, epsilon, q, sigma, th);
  };
  const double h = (hi - lo) / (kGrid - 1);
  std::vector<double> grid(kGrid), val(kGrid);
  for (int k = 0; k < kGrid; ++k) {
    grid[static_cast<std::size_t>(k)] = k == kGrid - 1 ? hi : lo + h * k;
    val[static_cast<std::size_t>(k)] = f(grid[static_cast<std::size_t>(k)]);
  }
  const double vmin = *std::min_element(val.begin(), val.end());
  std::size_t kb = 0;
  while (val[kb] > vmin + kTieTol) ++kb;

  // Golden-section on the two cells around the best grid point.
  double a = grid[kb == 0 ? 0 : kb - 1], b = grid[std::min<std::size_t>(kb + 1, kGrid - 1)];
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-9 * sigma) {
    if (f1 <= f2) {  // ties keep the left part
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    }
  }
  double best = f1 <= f2 ? x1 : x2;
  double fbest = std::min(f1, f2);
  if (val[kb] <= fbest + kTieTol) {
    best = grid[kb];
    fbest = val[kb];
  }
  // Smallest point of the (locally connected) argmin set.
  if (kb > 0) {
    double left = grid[kb - 1], right = best;
    while (right - left > 1e-9 * sigma) {
      const double mid = 0.5 * (left + right);
      if (mid <= left || mid >= right) break;
      (f(mid) <= fbest + kTieTol ? right : left) = mid;
    }
    best = right;
  }
  UniEstimate e;
  e.value = best;
  e.meta["m_observed"] = static_cast<double>(emp.m());
  e.meta["kolmogorov_value"] = fbest;
  e.meta["bracket_lo"] = lo;
  e.meta["bracket_hi"] = hi;
  e.meta["evaluations"] = static_cast<double>(evals);
  return e;
}

}  // namespace mnar
