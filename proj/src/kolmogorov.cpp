#include "mnar/kolmogorov.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mnar/errors.hpp"
#include "mnar/normal.hpp"
#include "simplex.hpp"

namespace mnar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_summary(const EmpiricalSummary& emp) {
  if (emp.n_total == 0) throw SizeError("empirical summary with n_total = 0");
  if (emp.m() > emp.n_total) throw SizeError("empirical summary: more observed values than observations");
}

// P((z_i, z_{i+1})) for i = 0..m with z_0 = -inf, z_{m+1} = +inf.
std::vector<double> gap_masses(const std::vector<double>& z, const BaseDistribution& base) {
  const std::size_t m = z.size();
  std::vector<double> P(m + 1);
  if (const auto* g = std::get_if<Gaussian>(&base.params())) {
    // One erfc per point: keep the small tail (lower for negatives, upper otherwise).
    const double mu = g->theta(0), s = std::sqrt(g->Sigma(0, 0));
    std::vector<double> tail(m);
    std::vector<char> neg(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double t = (z[k] - mu) / s;
      neg[k] = t < 0.0;
      tail[k] = neg[k] ? norm_cdf(t) : norm_sf(t);
    }
    auto lower_cdf = [&](std::size_t k) { return neg[k] ? tail[k] : 1.0 - tail[k]; };
    auto upper_sf = [&](std::size_t k) { return neg[k] ? 1.0 - tail[k] : tail[k]; };
    if (m == 0) {
      P[0] = 1.0;
      return P;
    }
    P[0] = lower_cdf(0);
    P[m] = upper_sf(m - 1);
    for (std::size_t i = 1; i < m; ++i) {
      const std::size_t a = i - 1, b = i;
      double v;
      if (!neg[a]) v = tail[a] - tail[b];
      else if (neg[b]) v = tail[b] - tail[a];
      else v = 1.0 - tail[a] - tail[b];
      P[i] = std::max(v, 0.0);
    }
    return P;
  }
  for (std::size_t i = 0; i <= m; ++i) {
    const double lo = i == 0 ? -kInf : z[i - 1];
    const double hi = i == m ? kInf : z[i];
    P[i] = std::max(base.interval_mass(lo, hi), 0.0);
  }
  return P;
}

// Lower bound on either program: the empirical jump and the total-mass mismatch.
double level_floor(const ChainBounds& cb, std::size_t n_total) {
  const std::size_t m = cb.L.size() - 1;
  const double n = static_cast<double>(n_total);
  double sl = 0.0, su = 0.0;
  for (std::size_t i = 0; i <= m; ++i) {
    sl += cb.L[i];
    su += cb.U[i];
  }
  const double frac = static_cast<double>(m) / n;
  double lb = frac < sl ? sl - frac : (frac > su ? frac - su : 0.0);
  if (m > 0) lb = std::max(lb, 0.5 / n);
  return lb;
}

template <class Feasible>
double bisect_level(Feasible&& feasible, double floor) {
  double lo = std::max(0.0, floor - 1e-12), hi = 1.0;
  if (!feasible(hi)) throw std::logic_error("realisable distance: level 1 infeasible");
  if (feasible(lo)) return lo;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (feasible(mid) ? hi : lo) = mid;
  }
  // Monotonicity in the level: the bracket must still separate.
  if (feasible(lo) || !feasible(hi)) throw std::logic_error("realisable distance: feasibility not monotone in the level");
  return hi;
}

}  // namespace

EmpiricalSummary EmpiricalSummary::from_sample(const std::vector<ExtendedValue>& sample) {
  EmpiricalSummary e;
  e.sorted_observed = observed_values(sample);
  std::sort(e.sorted_observed.begin(), e.sorted_observed.end());
  e.n_total = sample.size();
  return e;
}

EmpiricalSummary EmpiricalSummary::from_values(std::vector<double> observed, std::size_t n_total) {
  if (observed.size() > n_total) throw SizeError("from_values: more observed values than n_total");
  for (double v : observed)
    if (!std::isfinite(v)) throw DomainError("from_values: non-finite observation");
  std::sort(observed.begin(), observed.end());
  return EmpiricalSummary{std::move(observed), n_total};
}

RealisableSetSpec::RealisableSetSpec(BaseDistribution b, double eps, double qq)
    : base(std::move(b)), epsilon(eps), q(qq) {
  if (base.dim() != 1) throw DimensionError("realisable set: base must be univariate");
  if (!base.absolutely_continuous())
    throw DomainError("realisable set: base must be absolutely continuous for the chain program");
  if (!(eps >= 0.0 && eps < 1.0)) throw DomainError("realisable set: epsilon outside [0,1)");
  if (!(qq > 0.0 && qq <= 1.0)) throw DomainError("realisable set: q outside (0,1]");
}

RealisableSetSpec RealisableSetSpec::residual_class(double sigma, double epsilon, double q) {
  if (!(epsilon >= 0.0 && epsilon < 1.0) || !(q > 0.0 && q <= 1.0))
    throw DomainError("residual_class: epsilon or q out of range");
  return RealisableSetSpec(BaseDistribution::gaussian(0.0, sigma), 1.0 - q * (1.0 - epsilon), 1.0);
}

ChainBounds chain_bounds(const EmpiricalSummary& emp, const RealisableSetSpec& set) {
  check_summary(emp);
  const auto P = gap_masses(emp.sorted_observed, set.base);
  ChainBounds cb;
  cb.L.resize(P.size());
  cb.U.resize(P.size());
  const double lo = set.lower_mass(), hi = set.upper_mass();
  for (std::size_t i = 0; i < P.size(); ++i) {
    cb.L[i] = lo * P[i];
    cb.U[i] = hi * P[i];
  }
  return cb;
}

double chain_distance(const ChainBounds& cb, std::size_t n_total) {
  const std::size_t m = cb.L.size() - 1;
  const double n = static_cast<double>(n_total);
  auto feasible = [&](double t) {
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i <= m; ++i) {
      lo += cb.L[i];
      hi += cb.U[i];
      const std::size_t j = i + 1;
      double wlo, whi;
      if (j <= m) {
        wlo = static_cast<double>(j) / n - t;
        whi = static_cast<double>(j - 1) / n + t;
      } else {
        wlo = static_cast<double>(m) / n - t;
        whi = static_cast<double>(m) / n + t;
      }
      lo = std::max(lo, std::max(wlo, 0.0));
      hi = std::min(hi, std::min(whi, 1.0));
      // L = U when eps = 0 and q = 1; allow for rounding in the running sums
      if (lo > hi + 1e-12) return false;
      lo = std::min(lo, hi);
    }
    return true;
  };
  return bisect_level(feasible, level_floor(cb, n_total));
}

double chain_distance_sym(const ChainBounds& cb, std::size_t n_total) {
  const std::size_t m = cb.L.size() - 1;
  const double n = static_cast<double>(n_total);
  const double fm = static_cast<double>(m);
  // Nodes: 0 = zero, 1 = s = V_{m+1}, 2 = current V_j. D[a][b] bounds x_a - x_b from above.
  auto feasible = [&](double t) {
    using Dbm = std::array<std::array<double, 3>, 3>;
    auto close = [](Dbm& D) {
      for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) D[i][j] = std::min(D[i][j], D[i][k] + D[k][j]);
      for (int i = 0; i < 3; ++i) {
        if (D[i][i] < -1e-12) return false;
        D[i][i] = 0.0;
      }
      return true;
    };
    const double slo = std::max(0.0, fm / n - t), shi = std::min(1.0, fm / n + t);
    if (slo > shi) return false;
    Dbm D{};
    D[2][0] = 0.0;
    D[0][2] = 0.0;
    D[1][0] = shi;
    D[0][1] = -slo;
    D[2][1] = -slo;
    D[1][2] = shi;
    for (std::size_t i = 0; i <= m; ++i) {
      Dbm N = D;
      N[2][0] = cb.U[i] + D[2][0];
      N[0][2] = D[0][2] - cb.L[i];
      N[2][1] = cb.U[i] + D[2][1];
      N[1][2] = D[1][2] - cb.L[i];
      const std::size_t j = i + 1;
      double wlo, whi, clo, chi;
      if (j <= m) {
        const double fj = static_cast<double>(j);
        wlo = fj / n - t;
        whi = (fj - 1.0) / n + t;
        clo = -(fm - fj) / n - t;
        chi = -(fm - fj + 1.0) / n + t;
      } else {
        wlo = fm / n - t;
        whi = fm / n + t;
        clo = 0.0;
        chi = 0.0;
      }
      N[2][0] = std::min({N[2][0], whi, 1.0});
      N[0][2] = std::min({N[0][2], -wlo, 0.0});
      N[2][1] = std::min(N[2][1], chi);
      N[1][2] = std::min(N[1][2], -clo);
      if (!close(N)) return false;
      D = N;
    }
    return true;
  };
  return bisect_level(feasible, level_floor(cb, n_total));
}

double dist_to_realisable(const EmpiricalSummary& emp, const RealisableSetSpec& set) {
  return chain_distance(chain_bounds(emp, set), emp.n_total);
}

double dist_to_realisable_sym(const EmpiricalSummary& emp, const RealisableSetSpec& set) {
  return chain_distance_sym(chain_bounds(emp, set), emp.n_total);
}

namespace {

double bruteforce(const EmpiricalSummary& emp, const RealisableSetSpec& set, bool symmetric) {
  check_summary(emp);
  const std::size_t m = emp.m();
  if (m > 8) throw SizeError("bruteforce LP limited to m <= 8 observed values");
  const ChainBounds cb = chain_bounds(emp, set);
  const double n = static_cast<double>(emp.n_total);
  const int nv = static_cast<int>(m) + 2;  // V_1..V_{m+1}, t
  const int tcol = nv - 1;
  const int scol = static_cast<int>(m);  // V_{m+1}
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  auto add = [&](std::initializer_list<std::pair<int, double>> coef, double b) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nv);
    for (auto [c, v] : coef) r(c) += v;
    rows.push_back(r);
    rhs.push_back(b);
  };
  auto vcol = [](std::size_t j) { return static_cast<int>(j) - 1; };  // V_j, j >= 1
  for (std::size_t j = 1; j <= m + 1; ++j) add({{vcol(j), 1.0}}, 1.0);
  for (std::size_t i = 0; i <= m; ++i) {
    // L_i <= V_{i+1} - V_i <= U_i
    if (i == 0) {
      add({{vcol(1), 1.0}}, cb.U[0]);
      add({{vcol(1), -1.0}}, -cb.L[0]);
    } else {
      add({{vcol(i + 1), 1.0}, {vcol(i), -1.0}}, cb.U[i]);
      add({{vcol(i + 1), -1.0}, {vcol(i), 1.0}}, -cb.L[i]);
    }
    const double fi = static_cast<double>(i) / n;
    // |i/n - V_i| <= t and |i/n - V_{i+1}| <= t
    if (i > 0) {
      add({{vcol(i), 1.0}, {tcol, -1.0}}, fi);
      add({{vcol(i), -1.0}, {tcol, -1.0}}, -fi);
    }
    add({{vcol(i + 1), 1.0}, {tcol, -1.0}}, fi);
    add({{vcol(i + 1), -1.0}, {tcol, -1.0}}, -fi);
    if (symmetric) {
      const double gi = static_cast<double>(m - i) / n;
      // |(m-i)/n - (s - V_i)| <= t
      if (i == 0) {
        add({{scol, 1.0}, {tcol, -1.0}}, gi);
        add({{scol, -1.0}, {tcol, -1.0}}, -gi);
      } else {
        add({{scol, 1.0}, {vcol(i), -1.0}, {tcol, -1.0}}, gi);
        add({{scol, -1.0}, {vcol(i), 1.0}, {tcol, -1.0}}, -gi);
      }
      // |(m-i)/n - (s - V_{i+1})| <= t (trivial when i + 1 = m + 1)
      if (i + 1 <= m) {
        add({{scol, 1.0}, {vcol(i + 1), -1.0}, {tcol, -1.0}}, gi);
        add({{scol, -1.0}, {vcol(i + 1), 1.0}, {tcol, -1.0}}, -gi);
      }
    }
  }
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), nv);
  Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    A.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    b(static_cast<Eigen::Index>(r)) = rhs[r];
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(nv);
  c(tcol) = 1.0;
  const auto sol = detail::solve_lp(A, b, c);
  if (sol.status != detail::LpSolution::Status::Optimal)
    throw std::logic_error("bruteforce LP did not reach an optimum");
  return sol.value;
}

}  // namespace

double dist_to_realisable_bruteforce(const EmpiricalSummary& emp, const RealisableSetSpec& set) {
  return bruteforce(emp, set, false);
}

double dist_to_realisable_sym_bruteforce(const EmpiricalSummary& emp, const RealisableSetSpec& set) {
  return bruteforce(emp, set, true);
}

ExtendedLaw ExtendedLaw::empirical(const EmpiricalSummary& emp) {
  check_summary(emp);
  std::vector<double> at, mass;
  const double w = 1.0 / static_cast<double>(emp.n_total);
  for (double v : emp.sorted_observed) {
    if (!at.empty() && at.back() == v) mass.back() += w;
    else {
      at.push_back(v);
      mass.push_back(w);
    }
  }
  return atoms(std::move(at), std::move(mass));
}

ExtendedLaw ExtendedLaw::atoms(std::vector<double> at, std::vector<double> mass) {
  if (at.size() != mass.size()) throw DimensionError("ExtendedLaw: atoms and masses differ in length");
  std::vector<std::size_t> order(at.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return at[a] < at[b]; });
  ExtendedLaw law;
  double c = 0.0;
  for (std::size_t k : order) {
    if (!(mass[k] >= 0.0) || !std::isfinite(at[k])) throw DomainError("ExtendedLaw: bad atom");
    c += mass[k];
    if (!law.at_.empty() && law.at_.back() == at[k]) {
      law.cum_.back() = c;
    } else {
      law.at_.push_back(at[k]);
      law.cum_.push_back(c);
    }
  }
  if (c > 1.0 + 1e-12) throw DomainError("ExtendedLaw: total mass exceeds 1");
  law.atom_total_ = c;
  return law;
}

ExtendedLaw ExtendedLaw::continuous(std::function<double(double)> cdf, double total, std::vector<double> probes) {
  if (!(total >= 0.0 && total <= 1.0 + 1e-12)) throw DomainError("ExtendedLaw: continuous mass outside [0,1]");
  ExtendedLaw law;
  law.cont_ = std::move(cdf);
  law.cont_total_ = total;
  std::sort(probes.begin(), probes.end());
  law.probes_ = std::move(probes);
  return law;
}

double ExtendedLaw::cdf(double t) const {
  double c = cont_ ? cont_(t) : 0.0;
  const auto k = std::upper_bound(at_.begin(), at_.end(), t) - at_.begin();
  if (k > 0) c += cum_[static_cast<std::size_t>(k - 1)];
  return c;
}

double ExtendedLaw::cdf_left(double t) const {
  double c = cont_ ? cont_(t) : 0.0;
  const auto k = std::lower_bound(at_.begin(), at_.end(), t) - at_.begin();
  if (k > 0) c += cum_[static_cast<std::size_t>(k - 1)];
  return c;
}

namespace {

double distance_impl(const ExtendedLaw& a, const ExtendedLaw& b, bool symmetric) {
  const double ma = a.observed_mass(), mb = b.observed_mass();
  double best = 0.0;
  auto consider = [&](double t) {
    const double fa = a.cdf(t), fb = b.cdf(t);
    const double la = a.cdf_left(t), lb = b.cdf_left(t);
    double v = std::max(std::abs(fa - fb), std::abs(la - lb));
    if (symmetric) v = std::max({v, std::abs((ma - la) - (mb - lb)), std::abs((ma - fa) - (mb - fb))});
    return v;
  };
  // Half-lines far out: (-inf, t] -> empty or all of R; [t, inf) -> all of R or empty.
  best = std::abs(ma - mb);
  std::vector<double> pts = a.atom_positions();
  pts.insert(pts.end(), b.atom_positions().begin(), b.atom_positions().end());
  const bool both_cont = a.has_continuous_part() && b.has_continuous_part();
  if (both_cont) {
    pts.insert(pts.end(), a.probes().begin(), a.probes().end());
    pts.insert(pts.end(), b.probes().begin(), b.probes().end());
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::size_t arg = 0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double v = consider(pts[k]);
    if (v > best) {
      best = v;
      arg = k;
    }
  }
  if (both_cont && pts.size() >= 3) {
    // Refine the difference of two continuous CDFs between the neighbouring probes.
    for (std::size_t k : {arg}) {
      double lo = pts[k == 0 ? 0 : k - 1], hi = pts[std::min(k + 1, pts.size() - 1)];
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
      double f1 = consider(x1), f2 = consider(x2);
      for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
        if (f1 > f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - gr * (hi - lo);
          f1 = consider(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + gr * (hi - lo);
          f2 = consider(x2);
        }
      }
      best = std::max({best, f1, f2});
    }
  }
  return best;
}

}  // namespace

double kolmogorov_distance(const ExtendedLaw& a, const ExtendedLaw& b) { return distance_impl(a, b, false); }

double sym_kolmogorov_distance(const ExtendedLaw& a, const ExtendedLaw& b) { return distance_impl(a, b, true); }

double separation_b(double epsilon, double q) {
  return 0.5 * std::log1p(4.0 * effective_contamination(epsilon, q));
}

double separation_profile(double a, double b, double sigma, double epsilon, double q) {
  if (!(a > 0.0)) throw DomainError("separation_profile: a must be > 0");
  if (!(sigma > 0.0)) throw DomainError("separation_profile: sigma must be > 0");
  if (!(b >= 0.0)) throw DomainError("separation_profile: b must be >= 0");
  const double keep = q * (1.0 - epsilon);
  const double window = (b <= 0.5 ? 1.0 : 2.0) * sigma * b / a;
  return keep * norm_cdf(a / sigma - window) - (keep + epsilon) * norm_cdf(-a / sigma - window);
}

}  // namespace mnar
