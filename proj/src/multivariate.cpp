#include "mnar/multivariate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mnar/errors.hpp"
#include "mnar/rng.hpp"
#include "mnar/univariate.hpp"

namespace mnar {

namespace {

Eigen::MatrixXd centred_columns(const BlockMeans& means, const Eigen::VectorXd& theta) {
  Eigen::MatrixXd Y(theta.size(), static_cast<Eigen::Index>(means.size()));
  for (std::size_t m = 0; m < means.size(); ++m) {
    if (means[m].size() != theta.size()) throw DimensionError("block means of different dimension");
    Y.col(static_cast<Eigen::Index>(m)) = means[m] - theta;
  }
  return Y;
}

// Sign convention: first nonzero coordinate negative (lexicographically smallest of +-v).
void canonical_sign(Eigen::VectorXd& v) {
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v(j) != 0.0) {
      if (v(j) > 0.0) v = -v;
      return;
    }
  }
}

Eigen::VectorXd top_eigenvector(const Eigen::MatrixXd& S) {
  const Eigen::Index d = S.rows();
  Eigen::Index k0 = 0;
  S.diagonal().maxCoeff(&k0);
  Eigen::VectorXd x = S.col(k0);
  if (x.norm() == 0.0) return Eigen::VectorXd::Unit(d, 0);
  x.normalize();
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd y = S * x;
    const double nrm = y.norm();
    if (nrm == 0.0) break;
    y /= nrm;
    const double change = (y - x).norm();
    x = y;
    if (change < 1e-10) break;
  }
  canonical_sign(x);
  return x;
}

struct Weighted {
  Eigen::VectorXd w;
  double value = 0.0;
};

// Inner minimum over {w : 0 <= w_m <= 10/(9M), sum w = 1}: fill the smallest scores first.
Weighted capped_weights(const Eigen::MatrixXd& Y, const Eigen::VectorXd& v) {
  const Eigen::Index M = Y.cols();
  const Eigen::VectorXd scores = (Y.transpose() * v).array().square().matrix();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(M));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores(a) < scores(b); });
  const double cap = 10.0 / (9.0 * static_cast<double>(M));
  const auto full = static_cast<std::size_t>((9 * M) / 10);
  Weighted out;
  out.w = Eigen::VectorXd::Zero(M);
  for (std::size_t k = 0; k < full; ++k) out.w(order[k]) = cap;
  if (full < static_cast<std::size_t>(M)) out.w(order[full]) = std::max(0.0, 1.0 - cap * static_cast<double>(full));
  out.value = out.w.dot(scores);
  return out;
}

}  // namespace

SdpResult solve_sdp_approx(const BlockMeans& block_means, const Eigen::VectorXd& theta, int iters) {
  if (block_means.empty()) throw SizeError("solve_sdp_approx: no block means");
  const Eigen::MatrixXd Y = centred_columns(block_means, theta);
  SdpResult res;
  if (Y.cwiseAbs().maxCoeff() == 0.0) {
    res.direction = Eigen::VectorXd::Unit(theta.size(), 0);
    res.value = 0.0;
    res.trace = {0.0};
    return res;
  }
  const double M = static_cast<double>(Y.cols());
  Eigen::VectorXd v = top_eigenvector(Y * Y.transpose() / M);
  Weighted cur = capped_weights(Y, v);
  res.trace.push_back(cur.value);
  for (int it = 0; it < iters; ++it) {
    const Eigen::MatrixXd S = Y * cur.w.asDiagonal() * Y.transpose();
    Eigen::VectorXd cand = top_eigenvector(S);
    const Weighted next = capped_weights(Y, cand);
    // Only ascent steps are taken, so the recorded objective never decreases.
    if (next.value <= cur.value) break;
    const double gain = next.value - cur.value;
    v = cand;
    cur = next;
    res.trace.push_back(cur.value);
    ++res.iterations;
    if (gain <= 1e-12 * cur.value) break;
  }
  for (std::size_t k = 1; k < res.trace.size(); ++k)
    if (res.trace[k] < res.trace[k - 1]) throw std::logic_error("solve_sdp_approx: objective decreased");
  res.direction = v;
  res.value = cur.value;
  return res;
}

int block_descent_steps(std::size_t d) {
  if (d == 0) throw DimensionError("block_descent_steps: d must be >= 1");
  return static_cast<int>(std::ceil(std::log(8.0 * std::sqrt(static_cast<double>(d))) / std::log(10.0 / 9.0)));
}

Eigen::VectorXd robust_block_descent(const BlockMeans& block_means, int sdp_iters) {
  if (block_means.empty()) throw SizeError("robust_block_descent: no block means");
  const Eigen::Index d = block_means.front().size();
  if (d == 0) throw DimensionError("robust_block_descent: zero-dimensional means");
  Eigen::VectorXd theta(d);
  std::vector<double> col(block_means.size());
  for (Eigen::Index j = 0; j < d; ++j) {
    for (std::size_t m = 0; m < block_means.size(); ++m) {
      if (block_means[m].size() != d) throw DimensionError("robust_block_descent: ragged block means");
      col[m] = block_means[m](j);
    }
    theta(j) = median_of(col);
  }
  const int T = block_descent_steps(static_cast<std::size_t>(d));
  std::vector<double> proj(block_means.size());
  for (int t = 0; t < T; ++t) {
    const SdpResult sdp = solve_sdp_approx(block_means, theta, sdp_iters);
    for (std::size_t m = 0; m < block_means.size(); ++m) proj[m] = (block_means[m] - theta).dot(sdp.direction);
    const double s = -median_of(proj);
    theta -= s * sdp.direction;
  }
  return theta;
}

std::size_t robust_descent_blocks(std::size_t n, double epsilon, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("robust_descent: delta outside (0,1]");
  const double l = std::log(2.0 / delta);
  const double raw = std::ceil(std::max(300.0 * (2.0 * epsilon * static_cast<double>(n) + l), 180000.0 * l));
  if (raw >= static_cast<double>(n)) return n;
  return std::max<std::size_t>(1, static_cast<std::size_t>(raw));
}

Eigen::VectorXd robust_descent(const std::vector<Eigen::VectorXd>& data, double epsilon, double delta,
                               std::uint64_t seed, int sdp_iters) {
  const std::size_t n = data.size();
  if (n == 0) throw SizeError("robust_descent: no data");
  const std::size_t M = robust_descent_blocks(n, epsilon, delta);
  const std::size_t size = n / M;
  const auto perm = permutation(n, seed);
  BlockMeans means;
  means.reserve(M);
  std::vector<char> used(n, 0);
  for (std::size_t b = 0; b < M; ++b) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(data.front().size());
    for (std::size_t k = 0; k < size; ++k) {
      const std::size_t idx = perm[b * size + k];
      if (used[idx]++) throw std::logic_error("robust_descent: index reused across blocks");
      if (data[idx].size() != s.size()) throw DimensionError("robust_descent: ragged data");
      s += data[idx];
    }
    means.push_back(s / static_cast<double>(size));
  }
  return robust_block_descent(means, sdp_iters);
}

IterativePlan iterative_plan(std::size_t n, std::size_t d, double epsilon, double delta, const DescentConfig& config) {
  if (!(epsilon >= 0.0 && epsilon < 0.5)) throw DomainError("iterative_robust_descent: epsilon outside [0,1/2)");
  if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("iterative_robust_descent: delta outside (0,1]");
  if (!(config.A1 > 0.0) || !(config.A2 >= 1.0) || !(config.A3 >= 1.0))
    throw DomainError("iterative_robust_descent: need A1 > 0 and A2, A3 >= 1");
  if (n == 0 || d == 0) throw SizeError("iterative_robust_descent: empty sample");
  IterativePlan p;
  if (config.sigma_ipw) p.rank = effective_rank(*config.sigma_ipw);
  else if (config.rank_bound) p.rank = *config.rank_bound;
  else p.rank = static_cast<double>(d);
  const double fd = static_cast<double>(d), fn = static_cast<double>(n);
  const double inner = config.A1 * (p.rank + std::log(24.0 * fd / delta));
  const double logp = std::max(std::log(inner), 1.0);
  p.T = 1 + static_cast<int>(std::ceil(logp));
  const double T = p.T;
  p.eps_prime = 2.0 * epsilon + 2.0 * T * std::log(3.0 * T / delta) / fn;
  p.M = static_cast<std::size_t>(std::ceil(std::max(config.A2 * fn * p.eps_prime / T, config.A3 * std::log(6.0 * T / delta))));
  p.required_n = static_cast<std::size_t>(p.T) * (p.M + 1);
  return p;
}

Eigen::VectorXd iterative_robust_descent(const std::vector<ExtendedVector>& sample, double epsilon, double delta,
                                         const DescentConfig& config, std::uint64_t seed) {
  const std::size_t n = sample.size();
  if (n == 0) throw SizeError("iterative_robust_descent: empty sample");
  const std::size_t d = sample.front().size();
  for (const auto& row : sample)
    if (row.size() != d) throw DimensionError("iterative_robust_descent: ragged sample");
  const IterativePlan plan = iterative_plan(n, d, epsilon, delta, config);
  if (n < plan.required_n)
    throw SizeError("iterative_robust_descent: n = " + std::to_string(n) + " but T(M+1) = " +
                    std::to_string(plan.required_n) + " observations are required");
  const std::size_t T = static_cast<std::size_t>(plan.T);
  const std::size_t F = n / T;
  const auto perm = permutation(n, seed, 0);
  auto fold = [&](std::size_t t) {  // t = 0..T-1
    return std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(t * F),
                                    perm.begin() + static_cast<std::ptrdiff_t>((t + 1) * F));
  };

  Eigen::VectorXd theta(static_cast<Eigen::Index>(d));
  const auto first = fold(0);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> vals;
    for (std::size_t i : first)
      if (sample[i][j].observed()) vals.push_back(sample[i][j].value());
    if (vals.size() < 4)
      throw SizeError("iterative_robust_descent: coordinate " + std::to_string(j) +
                      " has fewer than 4 observed entries in the first fold");
    theta(static_cast<Eigen::Index>(j)) = trimmed_mean(vals, epsilon, delta, derive_seed(seed, 1, j)).value;
  }

  const std::size_t M = plan.M;
  for (std::size_t t = 1; t < T; ++t) {
    const auto S = fold(t);
    const std::size_t size = S.size() / M;
    const auto order = permutation(S.size(), derive_seed(seed, 2, t));
    BlockMeans means;
    means.reserve(M);
    for (std::size_t b = 0; b < M; ++b) {
      Eigen::VectorXd z(static_cast<Eigen::Index>(d));
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        std::size_t c = 0;
        for (std::size_t k = 0; k < size; ++k) {
          const auto& v = sample[S[order[b * size + k]]][j];
          if (v.observed()) {
            s += v.value();
            ++c;
          }
        }
        z(static_cast<Eigen::Index>(j)) = c ? s / static_cast<double>(c) : theta(static_cast<Eigen::Index>(j));
      }
      means.push_back(std::move(z));
    }
    theta = robust_block_descent(means, config.sdp_iters);
  }
  return theta;
}

SphereNet quarter_net(std::size_t d, std::uint64_t seed) {
  if (d == 0) throw DimensionError("quarter_net: d must be >= 1");
  if (d > 8) throw SizeError("quarter_net: d > 8 is not supported");
  // ||u - v|| <= 1/4  <=>  u.v >= 1 - 1/32
  constexpr double kCos = 1.0 - 1.0 / 32.0;
  // 1e4 * 9^d consecutive rejections, capped so d >= 3 stays tractable; the audit below
  // adds any direction it finds uncovered, which keeps the set 1/4-separated.
  const double limit_d = 1e4 * std::pow(9.0, static_cast<double>(d));
  const std::size_t limit = static_cast<std::size_t>(std::min(limit_d, 1e6));
  Stream s(seed, 0, 0);
  auto random_unit = [&](Stream& st) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(d));
    do {
      for (Eigen::Index j = 0; j < u.size(); ++j) u(j) = st.normal();
    } while (u.norm() == 0.0);
    return Eigen::VectorXd(u.normalized());
  };
  SphereNet net;
  auto nearest_cos = [&](const Eigen::VectorXd& u) {
    double best = -2.0;
    for (const auto& v : net.directions) best = std::max(best, u.dot(v));
    return best;
  };
  // Points are kept in antipodal pairs, so the net is symmetric; a candidate farther than 1/4
  // from every kept point has its reflection farther than 1/4 from every kept point too.
  auto keep = [&](Eigen::VectorXd u) {
    net.directions.push_back(u);
    net.directions.push_back(-u);
  };
  std::size_t rejections = 0;
  while (rejections < limit) {
    const Eigen::VectorXd u = random_unit(s);
    if (nearest_cos(u) >= kCos) {
      ++rejections;
    } else {
      keep(u);
      rejections = 0;
    }
  }
  Stream audit(seed, 1, 0);
  double worst = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const Eigen::VectorXd u = random_unit(audit);
    const double c = nearest_cos(u);
    if (c < kCos) {
      keep(u);
      net.added_by_audit += 2;
      continue;
    }
    worst = std::max(worst, std::sqrt(std::max(0.0, 2.0 - 2.0 * c)));
  }
  net.audit_max_distance = worst;
  if (worst > net.radius + 0.02) throw std::logic_error("quarter_net: coverage audit failed");
  std::sort(net.directions.begin(), net.directions.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  return net;
}

MultiMkResult multivariate_mk_full(const std::vector<ExtendedVector>& sample, double epsilon, double q,
                                   const Eigen::MatrixXd& Sigma, std::uint64_t seed) {
  if (sample.empty()) throw SizeError("multivariate_mk: empty sample");
  const std::size_t d = sample.front().size();
  if (Sigma.rows() != static_cast<Eigen::Index>(d) || Sigma.cols() != static_cast<Eigen::Index>(d))
    throw DimensionError("multivariate_mk: Sigma must be d x d");
  for (const auto& row : sample) {
    if (row.size() != d) throw DimensionError("multivariate_mk: ragged sample");
    if (!fully_observed(row) && !fully_missing(row))
      throw ModelError("multivariate_mk: rows must be fully observed or fully missing");
  }
  MultiMkResult res;
  res.net = quarter_net(d, seed);
  const auto& dirs = res.net.directions;
  std::vector<Eigen::VectorXd> rows;
  std::vector<char> obs(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    obs[i] = fully_observed(sample[i]);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    if (obs[i])
      for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(j)) = sample[i][j].value();
    rows.push_back(std::move(x));
  }
  const auto K = static_cast<Eigen::Index>(dirs.size());
  Eigen::MatrixXd V(K, static_cast<Eigen::Index>(d));
  Eigen::VectorXd k(K);
  std::vector<char> done(dirs.size(), 0);
  auto positive = [](const Eigen::VectorXd& v) {
    for (Eigen::Index j = 0; j < v.size(); ++j)
      if (v(j) != 0.0) return v(j) > 0.0;
    return false;
  };
  res.projected.assign(dirs.size(), 0.0);
  for (std::size_t a = 0; a < dirs.size(); ++a) {
    V.row(static_cast<Eigen::Index>(a)) = dirs[a].transpose();
    if (done[a] || !positive(dirs[a])) continue;
    const Eigen::VectorXd& v = dirs[a];
    const auto partner = std::find_if(dirs.begin(), dirs.end(), [&](const Eigen::VectorXd& w) { return w == -v; });
    if (partner == dirs.end()) throw std::logic_error("multivariate_mk: net is not symmetric");
    const double var = v.dot(Sigma * v);
    if (!(var > 0.0)) throw DomainError("multivariate_mk: Sigma is not positive definite");
    std::vector<ExtendedValue> proj(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i)
      if (obs[i]) proj[i] = ExtendedValue(v.dot(rows[i]));
    // The estimate along -v is the reflection of the one along v, so each line is fitted once.
    const double kv = mk_estimate(proj, epsilon, q, std::sqrt(var)).value;
    const auto b = static_cast<std::size_t>(partner - dirs.begin());
    res.projected[a] = kv;
    res.projected[b] = -kv;
    done[a] = done[b] = 1;
  }
  for (std::size_t a = 0; a < dirs.size(); ++a) k(static_cast<Eigen::Index>(a)) = res.projected[a];
  auto F = [&](const Eigen::VectorXd& th, Eigen::Index* arg) {
    const Eigen::VectorXd r = V * th - k;
    Eigen::Index i = 0;
    const double val = r.cwiseAbs().maxCoeff(&i);
    if (arg) *arg = i;
    return val;
  };
  Eigen::VectorXd theta = V.colPivHouseholderQr().solve(k);
  Eigen::VectorXd best = theta;
  double fbest = F(theta, nullptr);
  const double step0 = std::max(fbest, 1e-12);
  for (int it = 1; it <= 10000; ++it) {
    Eigen::Index a = 0;
    const double fv = F(theta, &a);
    if (fv == 0.0) break;
    const double r = V.row(a).dot(theta) - k(a);
    theta -= (step0 / it) * (r > 0 ? 1.0 : -1.0) * V.row(a).transpose();
    const double fn = F(theta, nullptr);
    if (fn < fbest) {
      fbest = fn;
      best = theta;
    }
  }
  res.theta = best;
  res.objective = fbest * fbest;
  return res;
}

Eigen::VectorXd multivariate_mk(const std::vector<ExtendedVector>& sample, double epsilon, double q,
                                const Eigen::MatrixXd& Sigma, std::uint64_t seed) {
  return multivariate_mk_full(sample, epsilon, q, Sigma, seed).theta;
}

Eigen::VectorXd complete_case_mean(const std::vector<ExtendedVector>& sample) {
  if (sample.empty()) throw EstimationError("complete_case_mean: empty sample");
  const std::size_t d = sample.front().size();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  std::size_t c = 0;
  for (const auto& row : sample) {
    if (!fully_observed(row)) continue;
    for (std::size_t j = 0; j < d; ++j) s(static_cast<Eigen::Index>(j)) += row[j].value();
    ++c;
  }
  if (c == 0) throw EstimationError("complete_case_mean: no complete rows");
  return s / static_cast<double>(c);
}

}  // namespace mnar
