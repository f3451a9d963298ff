#include "mnar/regression.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <numeric>
#include <thread>

#include "mnar/errors.hpp"
#include "mnar/kolmogorov.hpp"
#include "mnar/rng.hpp"

namespace mnar {

namespace {

void check_shapes(const Eigen::MatrixXd& X, const std::vector<ExtendedValue>& Z) {
  if (static_cast<std::size_t>(X.rows()) != Z.size()) throw DimensionError("regression: X and Z have different lengths");
  if (X.cols() == 0) throw DimensionError("regression: empty design");
  if (!X.allFinite()) throw DomainError("regression: non-finite design entry");
}

struct NelderMead {
  std::function<double(const Eigen::VectorXd&)> f;
  int max_evals;
  double xtol;
  int evals = 0;

  double eval(const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  }

  std::pair<Eigen::VectorXd, double> run(const Eigen::VectorXd& x0, const Eigen::VectorXd& step) {
    const Eigen::Index d = x0.size();
    std::vector<Eigen::VectorXd> p(static_cast<std::size_t>(d + 1), x0);
    std::vector<double> fv(p.size());
    for (Eigen::Index j = 0; j < d; ++j) p[static_cast<std::size_t>(j + 1)](j) += step(j);
    for (std::size_t k = 0; k < p.size(); ++k) fv[k] = eval(p[k]);
    std::vector<std::size_t> idx(p.size());
    while (evals < max_evals) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
      const std::size_t best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
      double size = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) size = std::max(size, (p[k] - p[best]).cwiseAbs().maxCoeff());
      if (size <= xtol) break;
      Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
      for (std::size_t k = 0; k < p.size(); ++k)
        if (k != worst) c += p[k];
      c /= static_cast<double>(d);
      const Eigen::VectorXd xr = c + (c - p[worst]);
      const double fr = eval(xr);
      if (fr < fv[best]) {
        const Eigen::VectorXd xe = c + 2.0 * (c - p[worst]);
        const double fe = eval(xe);
        if (fe < fr) {
          p[worst] = xe;
          fv[worst] = fe;
        } else {
          p[worst] = xr;
          fv[worst] = fr;
        }
        continue;
      }
      if (fr < fv[second]) {
        p[worst] = xr;
        fv[worst] = fr;
        continue;
      }
      const bool outside = fr < fv[worst];
      const Eigen::VectorXd xc = outside ? Eigen::VectorXd(c + 0.5 * (xr - c)) : Eigen::VectorXd(c + 0.5 * (p[worst] - c));
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[worst])) {
        p[worst] = xc;
        fv[worst] = fc;
        continue;
      }
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (k == best) continue;
        p[k] = p[best] + 0.5 * (p[k] - p[best]);
        fv[k] = eval(p[k]);
      }
    }
    const auto it = std::min_element(fv.begin(), fv.end());
    return {p[static_cast<std::size_t>(it - fv.begin())], *it};
  }
};

}  // namespace

RegularityReport check_regular_design(const Eigen::MatrixXd& X, double gamma, std::size_t n_dirs, std::uint64_t seed) {
  if (!(gamma > 0.0)) throw DomainError("check_regular_design: gamma must be positive");
  if (X.rows() == 0 || X.cols() == 0) throw SizeError("check_regular_design: empty design");
  const Eigen::Index d = X.cols();
  const double n = static_cast<double>(X.rows());
  RegularityReport rep;
  rep.gamma = gamma;
  auto fraction = [&](const Eigen::VectorXd& v) {
    return static_cast<double>(((X * v).array().abs() > gamma).count()) / n;
  };
  if (d == 1) {
    rep.exact = true;
    rep.worst_direction = Eigen::VectorXd::Ones(1);
    rep.n_directions_tested = 1;
    rep.beta_hat = fraction(rep.worst_direction) / 2.0;
    return rep;
  }
  if (n_dirs == 0) throw SizeError("check_regular_design: n_dirs must be >= 1");
  double worst = 2.0;
  for (std::size_t k = 0; k < n_dirs; ++k) {
    Stream s(seed, 0, k);
    Eigen::VectorXd v(d);
    do {
      for (Eigen::Index j = 0; j < d; ++j) v(j) = s.normal();
    } while (v.norm() == 0.0);
    v.normalize();
    const double f = fraction(v);
    if (f < worst) {
      worst = f;
      rep.worst_direction = v;
    }
  }
  rep.n_directions_tested = n_dirs;
  rep.beta_hat = worst / 2.0;
  return rep;
}

Eigen::VectorXd ols_observed(const Eigen::MatrixXd& X, const std::vector<ExtendedValue>& Z) {
  check_shapes(X, Z);
  const auto rows = observed_indices(Z);
  const Eigen::Index d = X.cols();
  if (rows.size() < static_cast<std::size_t>(d)) throw EstimationError("ols_observed: fewer observed rows than columns");
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), d);
  Eigen::VectorXd y(A.rows());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    A.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(rows[k]));
    y(static_cast<Eigen::Index>(k)) = Z[rows[k]].value();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < d) throw EstimationError("ols_observed: observed design is rank deficient");
  return qr.solve(y);
}

double ks_regression_objective(const Eigen::MatrixXd& X, const std::vector<ExtendedValue>& Z, double sigma,
                               double epsilon, double q, const Eigen::VectorXd& theta) {
  check_shapes(X, Z);
  const auto set = RealisableSetSpec::residual_class(sigma, epsilon, q);
  std::vector<double> r;
  r.reserve(Z.size());
  for (std::size_t i = 0; i < Z.size(); ++i)
    if (Z[i].observed()) r.push_back(Z[i].value() - X.row(static_cast<Eigen::Index>(i)).dot(theta));
  return dist_to_realisable_sym(EmpiricalSummary::from_values(std::move(r), Z.size()), set);
}

KsRegressionResult ks_regression_full(const Eigen::MatrixXd& X, const std::vector<ExtendedValue>& Z, double sigma,
                                      double epsilon, double q, std::uint64_t seed,
                                      const KsRegressionOptions& options) {
  check_shapes(X, Z);
  if (!(sigma > 0.0)) throw DomainError("ks_regression_estimate: sigma must be positive");
  if (options.restarts < 1 || options.max_evals < 1) throw DomainError("ks_regression_estimate: bad options");
  const auto obs = observed_indices(Z);
  if (obs.empty()) throw EstimationError("ks_regression_estimate: no observed response");
  const Eigen::Index d = X.cols();
  const auto set = RealisableSetSpec::residual_class(sigma, epsilon, q);

  KsRegressionResult res;
  Eigen::VectorXd init = Eigen::VectorXd::Zero(d);
  try {
    init = ols_observed(X, Z);
  } catch (const EstimationError& e) {
    res.ols_fallback = true;
    res.warning = std::string(e.what()) + "; starting from zero";
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
  const double smin = svd.singularValues()(d - 1);
  const double pinv_norm = smin > 0.0 ? 1.0 / smin : 0.0;
  const double scale = sigma * pinv_norm;

  // Simplex edge per coordinate: sigma over the rms size of that column.
  Eigen::VectorXd step(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double rms = X.col(j).norm() / std::sqrt(static_cast<double>(X.rows()));
    step(j) = 0.5 * sigma / std::max(rms, 1e-12);
  }

  const auto R = static_cast<std::size_t>(options.restarts);
  std::vector<Eigen::VectorXd> starts(R, init);
  for (std::size_t r = 1; r < R; ++r) {
    Stream s(seed, 10 + r, 0);
    for (Eigen::Index j = 0; j < d; ++j) starts[r](j) += scale * s.normal();
  }

  auto objective = [&](const Eigen::VectorXd& th) {
    std::vector<double> resid;
    resid.reserve(obs.size());
    for (std::size_t i : obs) resid.push_back(Z[i].value() - X.row(static_cast<Eigen::Index>(i)).dot(th));
    return dist_to_realisable_sym(EmpiricalSummary::from_values(std::move(resid), Z.size()), set);
  };

  std::vector<Eigen::VectorXd> found(R);
  res.start_objectives.assign(R, 0.0);
  res.restart_objectives.assign(R, 0.0);
  res.restart_evaluations.assign(R, 0);
  std::vector<std::exception_ptr> errors(R);
  auto run = [&](std::size_t r) {
    try {
      res.start_objectives[r] = objective(starts[r]);
      NelderMead nm{objective, options.max_evals, 1e-7 * step.maxCoeff()};
      auto [x, f] = nm.run(starts[r], step);
      if (f > res.start_objectives[r]) {
        x = starts[r];
        f = res.start_objectives[r];
      }
      found[r] = x;
      res.restart_objectives[r] = f;
      res.restart_evaluations[r] = nm.evals + 1;
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  if (options.parallel && R > 1) {
    std::vector<std::thread> pool;
    for (std::size_t r = 0; r < R; ++r) pool.emplace_back(run, r);
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t r = 0; r < R; ++r) run(r);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  res.best_restart = 0;
  for (std::size_t r = 1; r < R; ++r)
    if (res.restart_objectives[r] < res.restart_objectives[res.best_restart]) res.best_restart = r;
  res.theta = found[res.best_restart];
  res.objective = res.restart_objectives[res.best_restart];
  return res;
}

Eigen::VectorXd ks_regression_estimate(const Eigen::MatrixXd& X, const std::vector<ExtendedValue>& Z, double sigma,
                                       double epsilon, double q, std::uint64_t seed) {
  return ks_regression_full(X, Z, sigma, epsilon, q, seed).theta;
}

}  // namespace mnar
