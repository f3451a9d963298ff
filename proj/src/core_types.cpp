#include "mnar/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

namespace mnar {

ExtendedValue::ExtendedValue(double v) : v_(v) {
  if (!std::isfinite(v)) throw DomainError("ExtendedValue: value must be finite");
}

double ExtendedValue::value() const {
  if (!v_) throw ModelError("ExtendedValue: read of a missing coordinate");
  return *v_;
}

ExtendedVector make_observation(const Eigen::VectorXd& x, const RevelationPattern& omega) {
  if (static_cast<std::size_t>(x.size()) != omega.size())
    throw DimensionError("make_observation: x has length " + std::to_string(x.size()) +
                         ", pattern has length " + std::to_string(omega.size()));
  ExtendedVector z(omega.size());
  for (std::size_t j = 0; j < omega.size(); ++j)
    if (omega[j]) z[j] = ExtendedValue(x(static_cast<Eigen::Index>(j)));
  return z;
}

ExtendedVector make_observation(const ExtendedVector& x, const RevelationPattern& omega) {
  if (x.size() != omega.size()) throw DimensionError("make_observation: length mismatch");
  ExtendedVector z(omega.size());
  for (std::size_t j = 0; j < omega.size(); ++j)
    if (omega[j]) z[j] = x[j];
  return z;
}

bool fully_observed(const ExtendedVector& z) {
  return std::all_of(z.begin(), z.end(), [](const ExtendedValue& v) { return v.observed(); });
}

bool fully_missing(const ExtendedVector& z) {
  return std::all_of(z.begin(), z.end(), [](const ExtendedValue& v) { return v.is_missing(); });
}

std::vector<std::size_t> observed_rows(std::span<const ExtendedVector> sample) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sample.size(); ++i)
    if (fully_observed(sample[i])) out.push_back(i);
  return out;
}

std::vector<std::vector<std::size_t>> observed_coordinates(std::span<const ExtendedVector> sample) {
  std::vector<std::vector<std::size_t>> out(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i)
    for (std::size_t j = 0; j < sample[i].size(); ++j)
      if (sample[i][j].observed()) out[i].push_back(j);
  return out;
}

std::vector<std::size_t> observed_indices(std::span<const ExtendedValue> sample) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sample.size(); ++i)
    if (sample[i].observed()) out.push_back(i);
  return out;
}

std::vector<double> observed_values(std::span<const ExtendedValue> sample) {
  std::vector<double> out;
  out.reserve(sample.size());
  for (const auto& z : sample)
    if (z.observed()) out.push_back(z.value());
  return out;
}

PatternDistribution::PatternDistribution(std::vector<RevelationPattern> support,
                                         std::vector<double> probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
  if (support_.empty()) throw DomainError("PatternDistribution: empty support");
  if (support_.size() != probs_.size())
    throw DimensionError("PatternDistribution: support and probs differ in length");
  d_ = support_.front().size();
  if (d_ == 0) throw DimensionError("PatternDistribution: patterns must have length >= 1");
  std::set<RevelationPattern> seen;
  double total = 0.0;
  for (std::size_t k = 0; k < support_.size(); ++k) {
    if (support_[k].size() != d_) throw DimensionError("PatternDistribution: ragged patterns");
    for (auto& b : support_[k])
      if (b > 1) throw DomainError("PatternDistribution: pattern entries must be 0 or 1");
    if (!seen.insert(support_[k]).second)
      throw DomainError("PatternDistribution: repeated pattern in support");
    if (!(probs_[k] >= 0.0) || !std::isfinite(probs_[k]))
      throw DomainError("PatternDistribution: negative or non-finite probability");
    total += probs_[k];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw DomainError("PatternDistribution: probabilities sum to " + std::to_string(total));
  for (auto& p : probs_) p /= total;
}

PatternDistribution PatternDistribution::univariate(double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("univariate pattern: q outside [0,1]");
  return PatternDistribution({{1}, {0}}, {q, 1.0 - q});
}

PatternDistribution PatternDistribution::all_or_nothing(std::size_t d, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("all_or_nothing: q outside [0,1]");
  if (d == 0) throw DimensionError("all_or_nothing: d must be >= 1");
  return PatternDistribution({RevelationPattern(d, 1), RevelationPattern(d, 0)}, {q, 1.0 - q});
}

PatternDistribution PatternDistribution::independent(const std::vector<double>& q) {
  const std::size_t d = q.size();
  if (d == 0) throw DimensionError("independent: empty q");
  if (d > 20) throw SizeError("independent: d > 20 gives an unwieldy pattern support");
  for (double qj : q)
    if (!(qj >= 0.0 && qj <= 1.0)) throw DomainError("independent: q_j outside [0,1]");
  std::vector<RevelationPattern> support;
  std::vector<double> probs;
  // Enumerate masks with the all-ones pattern first so pick(u) with u < prod q reveals everything.
  const std::uint64_t full = (std::uint64_t{1} << d) - 1;
  for (std::uint64_t k = 0; k <= full; ++k) {
    const std::uint64_t mask = full ^ k;
    RevelationPattern w(d);
    double p = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      w[j] = static_cast<std::uint8_t>((mask >> j) & 1U);
      p *= w[j] ? q[j] : 1.0 - q[j];
    }
    support.push_back(std::move(w));
    probs.push_back(p);
  }
  // Products can drift from 1 by a few ulps; renormalise before validation.
  const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (auto& p : probs) p /= total;
  return PatternDistribution(std::move(support), std::move(probs));
}

double PatternDistribution::marginal(std::size_t j) const {
  if (j >= d_) throw DimensionError("marginal: index out of range");
  double s = 0.0;
  for (std::size_t k = 0; k < support_.size(); ++k)
    if (support_[k][j]) s += probs_[k];
  return s;
}

double PatternDistribution::joint(std::size_t j, std::size_t k) const {
  if (j >= d_ || k >= d_) throw DimensionError("joint: index out of range");
  double s = 0.0;
  for (std::size_t a = 0; a < support_.size(); ++a)
    if (support_[a][j] && support_[a][k]) s += probs_[a];
  return s;
}

const RevelationPattern& PatternDistribution::pick(double u) const {
  double c = 0.0;
  for (std::size_t k = 0; k + 1 < support_.size(); ++k) {
    c += probs_[k];
    if (u < c) return support_[k];
  }
  return support_.back();
}

ContaminationParams::ContaminationParams(double eps, double q) : epsilon(eps), q_or_pi(q) {
  if (!(eps >= 0.0 && eps < 1.0)) throw DomainError("epsilon must lie in [0,1)");
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("q must lie in (0,1]");
}

ContaminationParams::ContaminationParams(double eps, PatternDistribution pi)
    : epsilon(eps), q_or_pi(std::move(pi)) {
  if (!(eps >= 0.0 && eps < 1.0)) throw DomainError("epsilon must lie in [0,1)");
}

double ContaminationParams::q() const {
  if (const double* q = std::get_if<double>(&q_or_pi)) return *q;
  const auto& pi = std::get<PatternDistribution>(q_or_pi);
  for (std::size_t k = 0; k < pi.support().size(); ++k) {
    const auto& w = pi.support()[k];
    if (std::all_of(w.begin(), w.end(), [](std::uint8_t b) { return b == 1; })) return pi.probs()[k];
  }
  return 0.0;
}

double effective_contamination(double epsilon, double q) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("effective_contamination: epsilon outside [0,1)");
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("effective_contamination: q outside (0,1]");
  return epsilon / (q * (1.0 - epsilon));
}

Eigen::MatrixXd sigma_ipw(const Eigen::MatrixXd& Sigma, const PatternDistribution& pi) {
  const auto d = Sigma.rows();
  if (Sigma.cols() != d || static_cast<std::size_t>(d) != pi.dim())
    throw DimensionError("sigma_ipw: Sigma must be d x d with d = pattern length");
  const double scale = std::max(1.0, Sigma.cwiseAbs().maxCoeff());
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError("sigma_ipw: Sigma is not symmetric");
  std::vector<double> q(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    q[static_cast<std::size_t>(j)] = pi.marginal(static_cast<std::size_t>(j));
    if (q[static_cast<std::size_t>(j)] <= 0.0)
      throw DomainError("sigma_ipw: coordinate " + std::to_string(j) + " is never observed");
  }
  Eigen::MatrixXd out(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    out(j, j) = Sigma(j, j) / q[uj];
    for (Eigen::Index k = j + 1; k < d; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const double v = pi.joint(uj, uk) * Sigma(j, k) / (q[uj] * q[uk]);
      out(j, k) = v;
      out(k, j) = v;
    }
  }
  return out;
}

double effective_rank(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw DimensionError("effective_rank: matrix not square");
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  const double op = es.eigenvalues().cwiseAbs().maxCoeff();
  if (op == 0.0) return 0.0;
  return A.trace() / op;
}

double min_eigen_ratio(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  const double op = es.eigenvalues().cwiseAbs().maxCoeff();
  if (op == 0.0) return 0.0;
  return es.eigenvalues().minCoeff() / op;
}

}  // namespace mnar
