#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "mnar/dataset_io.hpp"
#include "mnar/errors.hpp"
#include "mnar/missingness.hpp"
#include "mnar/normal.hpp"

using namespace mnar;

namespace {

double observed_fraction(const UniSample& z) {
  double c = 0;
  for (const auto& v : z) c += v.observed();
  return c / static_cast<double>(z.size());
}

double phi(double x, double mu, double s) { return std::exp(-0.5 * std::pow((x - mu) / s, 2)) / (s * std::sqrt(2 * M_PI)); }

std::vector<MnarMechanism> library_mechanisms() {
  return {MnarMechanism::constant(0.0),         MnarMechanism::constant(1.0),
          MnarMechanism::constant(0.3),         MnarMechanism::threshold_above(0.0),
          MnarMechanism::threshold_below(0.5),  MnarMechanism::tails_only(1.0),
          MnarMechanism::custom({-1.0, 0.0, 1.0}, {0.2, 1.0, 0.0, 0.7})};
}

}  // namespace

TEST_CASE("mechanisms") {
  CHECK(MnarMechanism::threshold_above(1.0)(1.0) == 1.0);
  CHECK(MnarMechanism::threshold_above(1.0)(0.99) == 0.0);
  CHECK(MnarMechanism::threshold_below(1.0)(1.0) == 1.0);
  CHECK(MnarMechanism::tails_only(2.0)(-2.5) == 1.0);
  CHECK(MnarMechanism::tails_only(2.0)(1.0) == 0.0);
  auto c = MnarMechanism::custom({0.0}, {-0.5, 1.5});
  CHECK(c(-1.0) == 0.0);
  CHECK(c(0.0) == 1.0);
  CHECK_THROWS_AS(MnarMechanism::constant(1.5), DomainError);
}

TEST_CASE("sample_mcar") {
  const auto g = BaseDistribution::gaussian(0.0, 1.0);
  auto s = to_univariate(sample_mcar(g, PatternDistribution::univariate(1.0), 3, 11));
  CHECK(observed_fraction(s) == 1.0);
  auto hidden = sample_mcar(BaseDistribution::gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
                            PatternDistribution({{0, 0}}, {1.0}), 5, 1);
  for (const auto& row : hidden) CHECK(fully_missing(row));
  auto big = to_univariate(sample_mcar(g, PatternDistribution::univariate(0.3), 100000, 3));
  CHECK(std::abs(observed_fraction(big) - 0.3) < 0.01);
  CHECK(sample_mcar(g, PatternDistribution::univariate(0.3), 50, 3) ==
        sample_mcar(g, PatternDistribution::univariate(0.3), 50, 3));
  CHECK_THROWS_AS(sample_mcar(g, PatternDistribution::independent({0.5, 0.5}), 5, 1), DimensionError);
}

TEST_CASE("sample_realisable observed mass for constant mechanisms") {
  const auto g = BaseDistribution::gaussian(1.0, 2.0);
  const double eps = 0.3, q = 0.6;
  const std::size_t n = 200000;
  const double tol = 4.0 * std::sqrt(0.25 / n);
  CHECK(std::abs(observed_fraction(sample_realisable(g, eps, q, MnarMechanism::constant(0.0), n, 1)) - q * (1 - eps)) < tol);
  CHECK(std::abs(observed_fraction(sample_realisable(g, eps, q, MnarMechanism::constant(1.0), n, 2)) -
                 (q * (1 - eps) + eps)) < tol);
  CHECK_THROWS_AS(sample_realisable(g, 1.0, q, MnarMechanism::constant(0.0), 5, 1), DomainError);
  CHECK_THROWS_AS(sample_realisable(g, 0.1, 0.0, MnarMechanism::constant(0.0), 5, 1), DomainError);
}

TEST_CASE("realisable with eps = 0 reproduces the MCAR stream") {
  const auto g = BaseDistribution::gaussian(0.0, 1.0);
  auto a = sample_realisable(g, 0.0, 0.4, MnarMechanism::threshold_above(0.0), 2000, 77);
  auto b = to_univariate(sample_mcar(g, PatternDistribution::univariate(0.4), 2000, 77));
  CHECK(a == b);
}

TEST_CASE("realisable sandwich holds for every library mechanism") {
  const std::size_t n = 100000;
  const double slack = 3.0 * std::sqrt(std::log(static_cast<double>(n)) / n);
  for (const auto& base : {BaseDistribution::gaussian(0.0, 1.0), BaseDistribution::sub_weibull(1.5, 1.0, 0.5),
                           BaseDistribution::uniform(-1.0, 2.0)}) {
    std::uint64_t seed = 100;
    for (const auto& m : library_mechanisms()) {
      auto z = sample_realisable(base, 0.4, 0.5, m, n, ++seed);
      CAPTURE(m.describe());
      CHECK(realisable_sandwich_violation(z, base, 0.4, 0.5) <= slack);
    }
  }
}

TEST_CASE("sandwich check flags an arbitrary contaminant") {
  // a point mass at -5 puts eps of observed mass below every grid point
  const auto g = BaseDistribution::gaussian(0.0, 1.0);
  auto z = to_univariate(sample_arbitrary(g, 0.3, PatternDistribution::univariate(1.0),
                                          Contaminant::point({ExtendedValue(-5.0)}), 50000, 4));
  const double slack = 3.0 * std::sqrt(std::log(50000.0) / 50000.0);
  CHECK(realisable_sandwich_violation(z, g, 0.3, 1.0) > slack);
}

TEST_CASE("sample_arbitrary") {
  const auto g = BaseDistribution::gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  const auto pi = PatternDistribution::independent({0.6, 0.9});
  const std::size_t n = 100000;
  auto hidden = sample_arbitrary(g, 0.5, pi, Contaminant::point({ExtendedValue(), ExtendedValue()}), n, 5);
  double c0 = 0, c1 = 0;
  for (const auto& row : hidden) {
    c0 += row[0].observed();
    c1 += row[1].observed();
  }
  CHECK(std::abs(c0 / n - 0.6 * 0.5) < 0.01);
  CHECK(std::abs(c1 / n - 0.9 * 0.5) < 0.01);

  CHECK(sample_arbitrary(g, 0.0, pi, Contaminant::point({ExtendedValue(1e6), ExtendedValue(1e6)}), 500, 9) ==
        sample_mcar(g, pi, 500, 9));

  const auto g1 = BaseDistribution::gaussian(0.0, 1.0);
  auto out = to_univariate(sample_arbitrary(g1, 0.2, PatternDistribution::univariate(1.0),
                                            Contaminant::point({ExtendedValue(1e6)}), n, 6));
  double big = 0;
  for (const auto& v : out) big += v.observed() && v.value() == 1e6;
  CHECK(std::abs(big / n - 0.2) < 0.01);

  auto q1 = sample_arbitrary(g1, 1.0, PatternDistribution::univariate(0.5), Contaminant::point({ExtendedValue(3.0)}), 100, 8);
  auto q2 = sample_arbitrary(BaseDistribution::uniform(-9.0, 9.0), 1.0, PatternDistribution::univariate(0.5),
                             Contaminant::point({ExtendedValue(3.0)}), 100, 8);
  CHECK(q1 == q2);
}

TEST_CASE("f1/f2 adversaries") {
  const double kappa = std::exp(1.0) - 1.0;
  const double eps = kappa / (1.0 + kappa);
  AdversaryDensity f(std::string("f1"), 0.5, 1.0, eps, 1.0);
  CHECK(f.tau() == doctest::Approx(1.0).epsilon(1e-12));

  for (double e : {0.1, 0.3, 0.6})
    for (double q : {0.5, 1.0}) {
      AdversaryDensity f1("f1", 0.7, 1.3, e, q), f2("f2", 0.7, 1.3, e, q);
      const double lo = q * (1 - e), hi = q * (1 - e) + e;
      auto integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          [&](double x) { return f1.density(x); }, -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(), 15, 1e-12);
      CHECK(integral <= hi + 1e-6);
      CHECK(integral == doctest::Approx(f1.observed_mass()).epsilon(1e-6));
      for (double x = -6.0; x <= 6.0; x += 0.01) {
        const double r = f1.density(x) / phi(x, -0.7, 1.3);
        REQUIRE(r >= lo - 1e-12);
        REQUIRE(r <= hi + 1e-12);
        const double r2 = f2.density(x) / phi(x, 0.7, 1.3);
        REQUIRE(r2 >= lo - 1e-12);
        REQUIRE(r2 <= hi + 1e-12);
        REQUIRE(f1.density(x) == doctest::Approx(f2.density(-x)).epsilon(1e-12));
      }
    }
}

TEST_CASE("f1 sampler matches its CDF and observed mean") {
  AdversaryDensity f("f1", 0.4, 1.0, 0.3, 0.8);
  const std::size_t n = 100000;
  auto z = f.sample(n, 12);
  CHECK(std::abs(observed_fraction(z) - f.observed_mass()) < 0.01);
  double s = 0, m = 0, below = 0;
  for (const auto& v : z)
    if (v.observed()) {
      s += v.value();
      ++m;
      below += v.value() <= 0.0;
    }
  CHECK(std::abs(s / m - f.observed_mean()) < 0.02);
  CHECK(std::abs(below / n - f.cdf(0.0)) < 0.01);
  CHECK(f.sample(100, 12) == f.sample(100, 12));
}

TEST_CASE("two-point construction") {
  auto zero = adversary_two_point(2.0, 1.0, 0.0, 0.7);
  CHECK(zero.a == 1.0);
  CHECK(zero.mean_gap() == 0.0);

  auto tp = adversary_two_point(2.0, 1.0, 0.5, 0.5);
  CHECK(tp.a == doctest::Approx(1.0 / 3.0));
  CHECK(tp.b == doctest::Approx(0.5 * std::sqrt(3.0)));
  CHECK(tp.mean_gap() == doctest::Approx(tp.b));
  CHECK(tp.mass_star >= 0.0);
  CHECK(tp.mass_star < 1.0);
  CHECK(tp.mass_star == doctest::Approx(1.0 - 2.0 * 0.25 / (4.0 / 3.0)));
  CHECK(tp.first.theta0()(0) == doctest::Approx(tp.theta1));
  CHECK(tp.second.theta0()(0) == doctest::Approx(tp.theta2));

  // both specs generate the same observable law
  const std::size_t n = 200000;
  auto count = [&](const ContaminationSpec& s, std::uint64_t seed) {
    std::array<double, 3> c{0, 0, 0};
    for (const auto& row : s.sample(n, seed)) {
      if (row[0].is_missing()) c[2] += 1;
      else if (row[0].value() < 0) c[0] += 1;
      else c[1] += 1;
    }
    for (auto& v : c) v /= n;
    return c;
  };
  const auto c1 = count(tp.first, 1), c2 = count(tp.second, 2);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(c1[k] - c2[k]) < 0.01);
  CHECK(std::abs(c1[0] - tp.mass_minus) < 0.01);
  CHECK(std::abs(c1[2] - tp.mass_star) < 0.01);
  CHECK_THROWS_AS(adversary_two_point(1.5, 1.0, 0.1, 0.5), DomainError);
}

TEST_CASE("realisable observed moments match the analytic threshold case") {
  // m = 1{x >= 0} on N(0,1): observed density (k + eps 1{x>=0}) phi, k = q(1-eps)
  const double eps = 0.3, q = 0.5, k = q * (1 - eps);
  auto mom = realisable_observed_moments(BaseDistribution::gaussian(0.0, 1.0), eps, q, MnarMechanism::threshold_above(0.0));
  CHECK(mom.mass == doctest::Approx(k + eps / 2).epsilon(1e-10));
  CHECK(mom.mean == doctest::Approx(eps / std::sqrt(2 * M_PI) / (k + eps / 2)).epsilon(1e-10));
  CHECK(realisable_bias_bound(0.3, 0.5, 1.0, 2.0) == doctest::Approx(0.3 / 0.35));
  CHECK(realisable_bias_bound(0.5, 0.25, 1.0, 2.0) == doctest::Approx(2.0));
  CHECK(realisable_bias_bound(0.1, 1.0, 2.0, 2.0) == doctest::Approx(2.0 * 0.1 / 0.9));
}

TEST_CASE("sample_regression") {
  const std::size_t n = 10000;
  Eigen::MatrixXd X(n, 2);
  Stream s(1, 5, 0);
  for (std::size_t i = 0; i < n; ++i) X.row(i) << 1.0, s.normal();
  const Eigen::Vector2d theta(1.0, -2.0);
  auto ones = [](const Eigen::VectorXd&) { return 1.0; };
  auto full = sample_regression(X, theta, 1.0, 0.0, ones, 1.0, [](const Eigen::VectorXd&, double) { return 0.0; }, 3);
  CHECK(observed_fraction(full) == 1.0);

  auto half = [](const Eigen::VectorXd&) { return 0.5; };
  auto z = sample_regression(X, theta, 1.0, 0.4, half, 0.5, [](const Eigen::VectorXd&, double) { return 0.0; }, 4);
  CHECK(std::abs(observed_fraction(z) - 0.5 * 0.6) < 0.015);

  auto above = [theta](const Eigen::VectorXd& x, double y) { return y >= x.dot(theta) ? 1.0 : 0.0; };
  auto w = sample_regression(X, theta, 1.0, 0.4, ones, 1.0, above, 5);
  double sr = 0, m = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (w[i].observed()) {
      sr += w[i].value() - X.row(i).dot(theta);
      ++m;
    }
  CHECK(sr / m > 0.0);
  CHECK_THROWS_AS(sample_regression(X, theta, 1.0, 0.1, half, 0.8, above, 1), DomainError);
}

TEST_CASE("dataset dump round trip") {
  Dataset d{2, "mcar", 42, {{ExtendedValue(1.0 / 3.0), ExtendedValue()}, {ExtendedValue(-2.5e-300), ExtendedValue(7)}}};
  std::stringstream ss;
  write_dataset(ss, d);
  CHECK(ss.str().rfind("# d=2 model=mcar seed=42\n", 0) == 0);
  CHECK(ss.str().find("NA") != std::string::npos);
  auto back = read_dataset(ss);
  CHECK(back.d == 2);
  CHECK(back.model == "mcar");
  CHECK(back.seed == 42);
  CHECK(back.rows == d.rows);
  std::stringstream bad("# d=1 model=x seed=1\n1.0\tzz\n");
  CHECK_THROWS_AS(read_dataset(bad), ConfigError);
}
