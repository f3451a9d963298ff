#include <chrono>
#include <cmath>

#include "doctest.h"
#include "mnar/errors.hpp"
#include "mnar/missingness.hpp"
#include "mnar/normal.hpp"
#include "mnar/regression.hpp"
#include "mnar/rng.hpp"

using namespace mnar;

namespace {

Eigen::MatrixXd normal_design(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 0.0) {
  Eigen::MatrixXd X(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    Stream s(seed, 4, i);
    for (std::size_t j = 0; j < d; ++j) X(i, j) = shift + s.normal();
  }
  return X;
}

auto constant(double c) {
  return [c](const Eigen::VectorXd&) { return c; };
}

}  // namespace

TEST_CASE("design regularity") {
  Eigen::MatrixXd pm(4, 1);
  pm << 1, -1, 1, -1;
  auto r = check_regular_design(pm, 0.5, 10, 1);
  CHECK(r.exact);
  CHECK(r.beta_hat == 0.5);

  auto zero = check_regular_design(Eigen::MatrixXd::Zero(10, 3), 0.1, 50, 1);
  CHECK(zero.beta_hat == 0.0);
  CHECK(zero.n_directions_tested == 50);

  auto g = check_regular_design(normal_design(10000, 2, 3), 1.0, 200, 4);
  CHECK(!g.exact);
  // half of P(|N(0,1)| > 1) = Phi(-1)
  CHECK(std::abs(g.beta_hat - norm_cdf(-1.0)) <= 0.05);
  CHECK(g.beta_hat <= 0.5);
  CHECK(std::abs(g.worst_direction.norm() - 1.0) < 1e-12);

  CHECK_THROWS_AS(check_regular_design(pm, 0.0, 10, 1), DomainError);
}

TEST_CASE("ols on observed rows") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 0, 1, 1, 1, 2, 1, 3;
  std::vector<ExtendedValue> z = {ExtendedValue(1), ExtendedValue(3), ExtendedValue(), ExtendedValue(7)};
  CHECK((ols_observed(X, z) - Eigen::Vector2d(1, 2)).norm() < 1e-12);
  Eigen::MatrixXd dup(3, 2);
  dup << 1, 2, 2, 4, 3, 6;
  CHECK_THROWS_AS(ols_observed(dup, {ExtendedValue(1), ExtendedValue(2), ExtendedValue(3)}), EstimationError);
}

TEST_CASE("ks regression recovers theta on clean data") {
  const std::size_t n = 2000;
  const Eigen::Vector2d theta0(1.0, -2.0);
  const auto X = normal_design(n, 2, 10);
  const auto z = sample_regression(X, theta0, 1.0, 0.0, constant(1.0), 1.0,
                                   [](const Eigen::VectorXd&, double) { return 1.0; }, 11);
  const auto res = ks_regression_full(X, z, 1.0, 0.0, 1.0, 12);
  CHECK((res.theta - theta0).norm() <= 0.2);
  CHECK(!res.ols_fallback);
  REQUIRE(res.restart_objectives.size() == 5);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(res.objective <= res.restart_objectives[r]);
    CHECK(res.objective <= res.start_objectives[r]);
  }
  CHECK(res.objective == doctest::Approx(ks_regression_objective(X, z, 1.0, 0.0, 1.0, res.theta)));
}

TEST_CASE("ks regression is equivariant under response shifts") {
  const std::size_t n = 500;
  const Eigen::Vector2d theta0(0.5, 1.0);
  const auto X = normal_design(n, 2, 20, 1.0);
  auto above = [theta0](const Eigen::VectorXd& x, double y) { return y >= x.dot(theta0) ? 1.0 : 0.0; };
  const auto z = sample_regression(X, theta0, 1.0, 0.3, constant(1.0), 0.8, above, 21);
  const Eigen::Vector2d c(-2.0, 0.75);
  std::vector<ExtendedValue> moved;
  for (std::size_t i = 0; i < n; ++i)
    moved.push_back(z[i].observed() ? ExtendedValue(z[i].value() + X.row(i).dot(c)) : ExtendedValue());
  KsRegressionOptions serial;
  serial.parallel = false;
  const auto a = ks_regression_full(X, z, 1.0, 0.3, 0.8, 5, serial).theta;
  const auto b = ks_regression_full(X, moved, 1.0, 0.3, 0.8, 5, serial).theta;
  CHECK((b - a - c).norm() <= 1e-3);
  // threads do not change the answer
  CHECK(ks_regression_full(X, z, 1.0, 0.3, 0.8, 5).theta == a);
}

TEST_CASE("ks regression falls back to zero on a rank-deficient observed design") {
  Eigen::MatrixXd X(6, 2);
  X << 1, 2, 2, 4, 3, 6, 1, 0, 0, 1, 1, 1;
  std::vector<ExtendedValue> z = {ExtendedValue(1), ExtendedValue(2), ExtendedValue(3),
                                  ExtendedValue(),  ExtendedValue(),  ExtendedValue()};
  const auto res = ks_regression_full(X, z, 1.0, 0.1, 0.9, 1);
  CHECK(res.ols_fallback);
  CHECK(!res.warning.empty());
  CHECK(res.theta.allFinite());
}

TEST_CASE("ks regression input validation") {
  const auto X = normal_design(5, 2, 1);
  std::vector<ExtendedValue> none(5);
  CHECK_THROWS_AS(ks_regression_estimate(X, none, 1.0, 0.1, 0.5, 1), EstimationError);
  std::vector<ExtendedValue> short_z(4, ExtendedValue(1.0));
  CHECK_THROWS_AS(ks_regression_estimate(X, short_z, 1.0, 0.1, 0.5, 1), DimensionError);
  std::vector<ExtendedValue> ok(5, ExtendedValue(1.0));
  CHECK_THROWS_AS(ks_regression_estimate(X, ok, 0.0, 0.1, 0.5, 1), DomainError);
}
