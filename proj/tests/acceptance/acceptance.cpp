// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mnar/harness.hpp"
#include "mnar/kolmogorov.hpp"
#include "mnar/missingness.hpp"
#include "mnar/multivariate.hpp"
#include "mnar/normal.hpp"
#include "mnar/regression.hpp"
#include "mnar/rng.hpp"
#include "mnar/univariate.hpp"

using namespace mnar;

namespace {

// residual membership: dist <= kMembershipC * sqrt((d + log(1/delta)) / n)
constexpr double kMembershipC = 0.65;

int failures = 0;

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("criterion %2d %s: %s (%s)\n", id, ok ? "PASS" : "FAIL", title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <class... A>
std::string fmt(const char* f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double median(std::vector<double> v) { return median_of(std::move(v)); }

std::vector<double> errors_of(const std::vector<ResultRecord>& recs, const std::string& estimator) {
  std::vector<double> out;
  for (const auto& r : recs)
    if (r.estimator == estimator && r.sq_error) out.push_back(*r.sq_error);
  return out;
}

std::size_t na_count(const std::vector<ResultRecord>& recs) {
  return static_cast<std::size_t>(std::count_if(recs.begin(), recs.end(), [](const auto& r) { return !r.sq_error; }));
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

void criterion1() {
  Timer timer;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Stream s(seed, 0, 0);
    const std::size_t m = s.below(7);
    const std::size_t missing = s.below(4) + (m == 0 ? 1 : 0);
    std::vector<double> x;
    for (std::size_t i = 0; i < m; ++i) x.push_back(1.5 * s.normal());
    const double eps_grid[] = {0.0, 0.1, 0.3, 0.5, 0.8};
    const double q_grid[] = {0.3, 0.5, 0.8, 1.0};
    const double mu = 0.5 * s.normal(), sd = 0.5 + s.uniform();
    const RealisableSetSpec set(BaseDistribution::gaussian(mu, sd), eps_grid[s.below(5)], q_grid[s.below(4)]);
    const auto emp = EmpiricalSummary::from_values(x, m + missing);
    worst = std::max(worst, std::abs(dist_to_realisable(emp, set) - dist_to_realisable_bruteforce(emp, set)));
  }
  double analytic = 0.0;
  for (double eps : {0.0, 0.25, 0.6})
    for (double q : {0.3, 1.0}) {
      const RealisableSetSpec set(BaseDistribution::gaussian(0.0, 1.0), eps, q);
      analytic = std::max(analytic, std::abs(dist_to_realisable(EmpiricalSummary::from_values({}, 4), set) - q * (1 - eps)));
    }
  const RealisableSetSpec std_normal(BaseDistribution::gaussian(0.0, 1.0), 0.0, 1.0);
  analytic = std::max(analytic, std::abs(dist_to_realisable(EmpiricalSummary::from_values({0.0}, 1), std_normal) - 0.5));
  const double t = timer.seconds();
  report(1, "Kolmogorov LP oracle equivalence", worst <= 1e-6 && analytic <= 1e-9 && t < 10.0,
         fmt("max |bisection - simplex| = %.2e over 200 instances, analytic error %.2e, %.2fs", worst, analytic, t));
}

void criterion2() {
  Timer timer;
  const auto base = BaseDistribution::gaussian(0.0, 1.0);
  double worst_ratio = 0.0, worst_excess = -1.0, lib_gap = 0.0;
  std::size_t points = 0;
  for (double eps : {0.1, 0.3, 0.5})
    for (double q : {0.5, 1.0}) {
      const double bound = realisable_bias_bound(eps, q, 1.0, 2.0);
      for (int k = -80; k <= 80; ++k) {
        const double t = 0.05 * k;
        const double lo = q * (1 - eps);
        const auto dens = [&](double x, bool weighted) {
          const double w = lo + (x >= t ? eps : 0.0);
          return w * norm_pdf(x) * (weighted ? x : 1.0);
        };
        const double inf = std::numeric_limits<double>::infinity();
        const double mass = integrate([&](double x) { return dens(x, false); }, -inf, t) +
                            integrate([&](double x) { return dens(x, false); }, t, inf);
        const double first = integrate([&](double x) { return dens(x, true); }, -inf, t) +
                             integrate([&](double x) { return dens(x, true); }, t, inf);
        const double bias = std::abs(first / mass);
        worst_excess = std::max(worst_excess, bias - bound);
        worst_ratio = std::max(worst_ratio, bias / bound);
        const auto lib = realisable_observed_moments(base, eps, q, MnarMechanism::threshold_above(t));
        lib_gap = std::max(lib_gap, std::abs(lib.mean - first / mass));
        ++points;
      }
    }
  const double t = timer.seconds();
  report(2, "bias oracle", worst_excess <= 1e-6 && t < 5.0,
         fmt("%zu grid points, max bias/bound = %.4f, library vs quadrature %.1e, %.2fs", points, worst_ratio, lib_gap, t));
}

void criterion3() {
  Timer timer;
  const std::size_t n = 100000;
  // DKW at confidence 1 - 1e-6
  const double slack = std::sqrt(std::log(2.0 / 1e-6) / (2.0 * n));
  const std::vector<MnarMechanism> mechs = {
      MnarMechanism::constant(0.0),        MnarMechanism::constant(1.0),       MnarMechanism::constant(0.3),
      MnarMechanism::threshold_above(0.0), MnarMechanism::threshold_below(0.5), MnarMechanism::tails_only(1.0),
      MnarMechanism::custom({-1.0, 0.0, 1.0}, {0.2, 1.0, 0.0, 0.7})};
  const std::vector<BaseDistribution> bases = {BaseDistribution::gaussian(0.0, 1.0),
                                               BaseDistribution::sub_weibull(1.5, 1.0, 0.5),
                                               BaseDistribution::uniform(-1.0, 2.0)};
  double worst = 0.0;
  std::uint64_t seed = 3000;
  for (const auto& base : bases)
    for (const auto& m : mechs)
      for (double eps : {0.1, 0.4})
        worst = std::max(worst, realisable_sandwich_violation(sample_realisable(base, eps, 0.5, m, n, ++seed), base, eps, 0.5));
  // control: an arbitrary point mass must be flagged
  const auto g = BaseDistribution::gaussian(0.0, 1.0);
  const auto bad = to_univariate(sample_arbitrary(g, 0.3, PatternDistribution::univariate(1.0),
                                                  Contaminant::point({ExtendedValue(-5.0)}), n, 1));
  const double control = realisable_sandwich_violation(bad, g, 0.3, 1.0);
  const double t = timer.seconds();
  report(3, "realisable sandwich on samplers", worst <= slack && control > slack && t < 30.0,
         fmt("%zu mechanism/base/eps combinations, max violation %.4f <= slack %.4f, control %.3f, %.2fs",
             mechs.size() * bases.size() * 2, worst, slack, control, t));
}

void criterion4() {
  Timer timer;
  const auto c = parse_config(R"({"model": {"type": "mcar", "name": "mcar_rate"},
    "estimators": ["observed_mean", "median_of_means"],
    "grid": {"n": [100, 1000, 10000], "q": [0.5]}, "reps": 200, "delta": 0.1, "seed": 4004})");
  const auto recs = run_scenario(c);
  bool ok = na_count(recs) == 0;
  std::string detail;
  for (const auto& row : rate_table(recs, {"estimator"}, 0.1)) {
    if (row.n != 10000) continue;
    const double s = row.slope ? *row.slope : NAN;
    ok = ok && row.slope && s >= -1.25 && s <= -0.8;
    detail += fmt("%s slope %.3f, ", row.estimator.c_str(), s);
  }
  const double t = timer.seconds();
  ok = ok && t < 120.0;
  report(4, "MCAR rate slope", ok, detail + fmt("%.1fs", t));
}

void criterion5() {
  Timer timer;
  const double a = 0.5, eps = 0.3, q = 1.0;
  const auto c = parse_config(R"({"model": {"type": "adversary", "which": "f1", "a": 0.5},
    "estimators": ["observed_mean", "mk_estimate"],
    "grid": {"n": [10000], "epsilon": [0.3], "q": [1]}, "reps": 100, "delta": 0.1, "seed": 5005})");
  const auto recs = run_scenario(c);
  const double med_om = median(errors_of(recs, "observed_mean"));
  const double med_mk = median(errors_of(recs, "mk_estimate"));
  const AdversaryDensity f("f1", a, 1.0, eps, q);
  const double inf = std::numeric_limits<double>::infinity();
  const double mass = integrate([&](double x) { return f.density(x); }, -inf, 0.0) +
                      integrate([&](double x) { return f.density(x); }, 0.0, inf);
  const double first = integrate([&](double x) { return x * f.density(x); }, -inf, 0.0) +
                       integrate([&](double x) { return x * f.density(x); }, 0.0, inf);
  const double bias = std::abs(first / mass - f.theta());
  const double om_err = std::sqrt(med_om);
  const double t = timer.seconds();
  const bool ok = na_count(recs) == 0 && med_mk < med_om && std::abs(om_err - bias) <= 0.3 * bias && t < 180.0;
  report(5, "realisable-vs-arbitrary separation", ok,
         fmt("a = %.2f: median sq error mk %.5f < observed_mean %.5f; observed_mean |error| %.4f vs f1 bias %.4f, %.1fs",
             a, med_mk, med_om, om_err, bias, t));
}

void criterion6() {
  Timer timer;
  const double eps = 0.8, q = 0.5, delta = 0.1;
  const auto c = parse_config(R"({"model": {"type": "realisable", "t": "worst", "name": "high_eps"},
    "estimators": ["average_of_extremes"],
    "grid": {"n": [1000, 100000], "epsilon": [0.8], "q": [0.5]}, "reps": 100, "delta": 0.1, "seed": 6006})");
  const auto recs = run_scenario(c);
  const auto rows = rate_table(recs, {"estimator"}, delta);
  const double kappa = eps / (q * (1 - eps));
  const auto bound = [&](double n) {
    return 10.0 * std::pow(std::log(8.0 / delta) + std::log(1.0 + 6.0 * kappa), 2) / std::log(n * q * (1 - eps));
  };
  bool ok = rows.size() == 2 && na_count(recs) == 0;
  std::string detail;
  if (ok) {
    const double q3 = *rows[0].quantile, q5 = *rows[1].quantile;
    ok = q5 < q3 && q3 <= bound(1e3) && q5 <= bound(1e5);
    detail = fmt("0.9-quantile %.4f at n=1e3 (bound %.2f), %.4f at n=1e5 (bound %.2f)", q3, bound(1e3), q5, bound(1e5));
  }
  report(6, "average-of-extremes high-eps consistency", ok, detail + fmt(", %.1fs", timer.seconds()));
}

void criterion7() {
  Timer timer;
  const auto c = parse_config(R"({"model": {"type": "arbitrary", "name": "outliers", "contaminant": 1000,
      "q_per_coordinate": [0.5, 0.8, 1]},
    "estimators": ["complete_case_mean", "robust_descent", {"name": "iterative_robust_descent", "A2": 3, "A3": 10}],
    "grid": {"n": [10000], "d": [3], "epsilon": [0.05]}, "reps": 20, "delta": 0.1, "seed": 7007})");
  const auto recs = run_scenario(c);
  const auto rd = errors_of(recs, "robust_descent"), it = errors_of(recs, "iterative_robust_descent"),
             cc = errors_of(recs, "complete_case_mean");
  const double rd_max = *std::max_element(rd.begin(), rd.end()), it_max = *std::max_element(it.begin(), it.end());
  const double cc_min = *std::min_element(cc.begin(), cc.end());
  bool ok = na_count(recs) == 0 && rd_max <= 1.0 && it_max <= 1.0 && cc_min >= 100.0;

  DescentConfig dc;
  dc.A2 = 3;
  dc.A3 = 10;
  const auto pi = PatternDistribution::independent({0.5, 0.8, 1.0});
  const auto base = BaseDistribution::gaussian(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  const auto outlier = Contaminant::point(ExtendedVector(3, ExtendedValue(1000.0)));
  double worst_shift = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Stream s(seed, 9, 0);
    const Eigen::Vector3d shift(20 * s.normal(), 20 * s.normal(), 20 * s.normal());
    const auto data = sample_arbitrary(base, 0.05, pi, outlier, 10000, seed + 70000);
    std::vector<ExtendedVector> moved = data;
    std::vector<Eigen::VectorXd> rows, rows_moved;
    for (auto& row : moved) {
      for (std::size_t j = 0; j < 3; ++j)
        if (row[j].observed()) row[j] = ExtendedValue(row[j].value() + shift(static_cast<Eigen::Index>(j)));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!fully_observed(data[i])) continue;
      rows.push_back(Eigen::Vector3d(data[i][0].value(), data[i][1].value(), data[i][2].value()));
      rows_moved.push_back(Eigen::Vector3d(moved[i][0].value(), moved[i][1].value(), moved[i][2].value()));
    }
    const Eigen::VectorXd a = robust_descent(rows, 0.05, 0.1, seed), b = robust_descent(rows_moved, 0.05, 0.1, seed);
    const Eigen::VectorXd ai = iterative_robust_descent(data, 0.05, 0.1, dc, seed),
                          bi = iterative_robust_descent(moved, 0.05, 0.1, dc, seed);
    worst_shift = std::max({worst_shift, (b - a - shift).norm(), (bi - ai - shift).norm()});
  }
  ok = ok && worst_shift <= 1e-6;
  report(7, "multivariate robustness", ok,
         fmt("max sq error robust_descent %.4f, iterative %.4f; min complete-case %.1f; translation residual %.1e "
             "over 50 seeds, %.1fs",
             rd_max, it_max, cc_min, worst_shift, timer.seconds()));
}

void criterion8() {
  Timer timer;
  const double sigma = 1.3;
  double worst_gap = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = BaseDistribution::gaussian(0.4, sigma);
    const auto mech = seed % 2 ? MnarMechanism::threshold_above(0.2) : MnarMechanism::tails_only(1.0);
    const auto z = sample_realisable(g, 0.2, 0.7, mech, 500, seed + 800);
    const double uni = mk_estimate(z, 0.2, 0.7, sigma).value;
    const auto multi = multivariate_mk(to_multivariate(z), 0.2, 0.7, Eigen::MatrixXd::Constant(1, 1, sigma * sigma), seed);
    worst_gap = std::max(worst_gap, std::abs(multi(0) - uni));
  }

  const auto c = parse_config(R"({"model": {"type": "realisable", "t": "worst"},
    "estimators": ["multivariate_mk"],
    "grid": {"n": [10000], "d": [2], "epsilon": [0.3], "q": [0.8]}, "reps": 5, "delta": 0.1, "seed": 8008})");
  const auto cell = grid_cells(c.grid).front();
  std::vector<double> multi_err, uni_err;
  for (std::size_t r = 0; r < c.reps; ++r) {
    const auto rep = make_replicate(c, cell, r);
    const auto out = run_estimator(c.estimators[0], rep, EstimatorContext{0.3, 0.8, 1.0, 0.1, derive_seed(rep.seed, 0, 0), true});
    multi_err.push_back((out.estimate - rep.theta0).squaredNorm());
    double e = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      UniSample z;
      for (const auto& row : rep.sample) z.push_back(row[j]);
      e += std::pow(mk_estimate(z, 0.3, 0.8, 1.0).value - rep.theta0(static_cast<Eigen::Index>(j)), 2);
    }
    uni_err.push_back(e);
  }
  const double mm = median(multi_err), mu = median(uni_err);
  const bool ok = worst_gap <= 1e-4 * sigma && mm <= 5.0 * mu;
  report(8, "multivariate MK reduction", ok,
         fmt("d=1 max gap %.2e on 20 datasets; d=2 median sq error %.4f vs 5 x per-coordinate MK %.4f, %.1fs", worst_gap,
             mm, 5.0 * mu, timer.seconds()));
}

void criterion9() {
  Timer timer;
  // clean recovery; identification is only second order off the mean direction, so one seed is noisy
  const Eigen::Vector2d theta0(1.0, -2.0);
  std::vector<double> clean;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Eigen::MatrixXd X(2000, 2);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      Stream s(900 + seed, 3, static_cast<std::uint64_t>(i));
      X(i, 0) = s.normal();
      X(i, 1) = s.normal();
    }
    const auto z = sample_regression(X, theta0, 1.0, 0.0, [](const Eigen::VectorXd&) { return 1.0; }, 1.0,
                                     [](const Eigen::VectorXd&, double) { return 1.0; }, 950 + seed);
    clean.push_back((ks_regression_estimate(X, z, 1.0, 0.0, 1.0, 990 + seed) - theta0).norm());
  }
  const double clean_err = median(clean), clean_worst = *std::max_element(clean.begin(), clean.end());

  // MNAR comparison, design N(1, I) so the OLS bias lies along the all-ones direction
  const auto c = parse_config(R"({"model": {"type": "regression", "name": "mnar_regression", "theta": [1, -2],
      "design_mean": 1, "response_mechanism": "above_fit"},
    "estimators": ["ols_observed", "ks_regression"],
    "grid": {"n": [5000], "d": [2], "epsilon": [0.4], "q": [1]}, "reps": 20, "delta": 0.1, "seed": 9009})");
  const auto recs = run_scenario(c);
  const double ks = std::sqrt(median(errors_of(recs, "ks_regression")));
  const double ols = std::sqrt(median(errors_of(recs, "ols_observed")));

  // residual membership at the true parameter
  std::size_t over = 0, total = 0;
  const double delta = 0.1;
  for (std::size_t n : {500, 2000, 5000})
    for (double eps : {0.0, 0.4})
      for (std::uint64_t r = 0; r < 50; ++r) {
        auto m = parse_config(R"({"model": {"type": "regression", "theta": [1, -2], "design_mean": 1},
          "estimators": ["ols_observed"], "grid": {"n": [10], "d": [2]}, "reps": 1, "delta": 0.1, "seed": 1})");
        m.seed = 90000 + r;
        Cell cell;
        cell.n = n;
        cell.d = 2;
        cell.epsilon = eps;
        const auto rep = make_replicate(m, cell, 0);
        const double obj = ks_regression_objective(rep.X, rep.response, 1.0, eps, 1.0, rep.theta0);
        over += obj > kMembershipC * std::sqrt((2.0 + std::log(1.0 / delta)) / static_cast<double>(n));
        ++total;
      }
  const double over_frac = static_cast<double>(over) / static_cast<double>(total);
  const double t = timer.seconds();
  const bool ok = na_count(recs) == 0 && clean_err <= 0.2 && ks < ols && over_frac <= delta && t < 300.0;
  report(9, "regression", ok,
         fmt("clean median error %.4f <= 0.2 over 10 seeds (worst %.4f); MNAR median error ks %.4f vs ols %.4f (needs ks < ols); membership C=%.2f "
             "exceeded in %zu/%zu, %.1fs",
             clean_err, clean_worst, ks, ols, kMembershipC, over, total, t));
}

void criterion10() {
  Timer timer;
  const auto c = load_config(ACCEPTANCE_CONFIG);
  std::ostringstream serial, serial2, parallel;
  write_csv(serial, run_scenario(c, RunOptions{1, false}));
  write_csv(serial2, run_scenario(c, RunOptions{1, false}));
  write_csv(parallel, run_scenario(c, RunOptions{8, false}));
  const std::string a = serial.str();
  const bool ok = a == parallel.str() && a == serial2.str();
  const auto lines = std::count(a.begin(), a.end(), '\n');
  report(10, "determinism", ok,
         fmt("%ld CSV lines, %zu bytes, serial x2 vs 8 workers %s, %.1fs", static_cast<long>(lines), a.size(),
             ok ? "identical" : "differ", timer.seconds()));
}

}  // namespace

int main() {
  const std::vector<void (*)()> all = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                       criterion6, criterion7, criterion8, criterion9, criterion10};
  for (std::size_t k = 0; k < all.size(); ++k) {
    try {
      all[k]();
    } catch (const std::exception& e) {
      report(static_cast<int>(k + 1), "exception", false, e.what());
    }
  }
  std::printf("%d of %zu criteria failed\n", failures, all.size());
  return failures;
}
