#include "mnar/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mnar/errors.hpp"
#include "mnar/normal.hpp"

namespace mnar {

namespace {

void check_eps_q(double epsilon, double q) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in [0,1)");
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("q must lie in (0,1]");
}

double check_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError(std::string(what) + " returned a value outside [0,1]");
  return p;
}

bool mix_draw(std::uint64_t seed, std::size_t i, double epsilon) {
  Stream w(seed, kLaneMix, i);
  return w.uniform() < epsilon;
}

}  // namespace

Contaminant Contaminant::point(ExtendedVector atom) {
  return point_masses({std::move(atom)}, {1.0});
}

Contaminant Contaminant::point_masses(std::vector<ExtendedVector> atoms, std::vector<double> probs) {
  if (atoms.empty() || atoms.size() != probs.size()) throw DimensionError("contaminant: atoms and probs must match");
  const std::size_t d = atoms.front().size();
  double total = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    if (atoms[k].size() != d || d == 0) throw DimensionError("contaminant: atoms of different dimension");
    if (!(probs[k] >= 0.0)) throw DomainError("contaminant: negative atom probability");
    total += probs[k];
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("contaminant: atom probabilities do not sum to 1");
  return Contaminant(Atoms{std::move(atoms), std::move(probs)}, d);
}

Contaminant Contaminant::mcar_view(BaseDistribution base, PatternDistribution pi) {
  if (base.dim() != pi.dim()) throw DimensionError("contaminant: base and pattern dimensions differ");
  const std::size_t d = base.dim();
  return Contaminant(View{std::move(base), std::move(pi)}, d);
}

ExtendedVector Contaminant::draw(Stream& s) const {
  if (const auto* a = std::get_if<Atoms>(&v_)) {
    const double u = s.uniform();
    double c = 0.0;
    for (std::size_t k = 0; k + 1 < a->atoms.size(); ++k) {
      c += a->probs[k];
      if (u < c) return a->atoms[k];
    }
    return a->atoms.back();
  }
  const auto& v = std::get<View>(v_);
  const Eigen::VectorXd x = v.base.draw(s);
  return make_observation(x, v.pi.pick(s.uniform()));
}

Sample ContaminationSpec::sample(std::size_t n, std::uint64_t seed) const {
  const std::size_t d = base.dim();
  if (const auto* m = std::get_if<MnarMechanism>(&kind)) {
    const double q = params.q();
    if (d == 1) return to_multivariate(sample_realisable(base, params.epsilon, q, *m, n, seed));
    const Eigen::VectorXd v = direction ? *direction : Eigen::VectorXd::Unit(static_cast<Eigen::Index>(d), 0);
    if (static_cast<std::size_t>(v.size()) != d) throw DimensionError("spec: mechanism direction has wrong length");
    const MnarMechanism mech = *m;
    return sample_realisable_all_or_nothing(
        base, params.epsilon, q, [mech, v](const Eigen::VectorXd& x) { return mech(v.dot(x)); }, n, seed);
  }
  const auto& c = std::get<Contaminant>(kind);
  if (const auto* pi = std::get_if<PatternDistribution>(&params.q_or_pi))
    return sample_arbitrary(base, params.epsilon, *pi, c, n, seed);
  const double q = std::get<double>(params.q_or_pi);
  const auto pi = d == 1 ? PatternDistribution::univariate(q) : PatternDistribution::all_or_nothing(d, q);
  return sample_arbitrary(base, params.epsilon, pi, c, n, seed);
}

Sample sample_mcar(const BaseDistribution& base, const PatternDistribution& pi, std::size_t n, std::uint64_t seed) {
  if (base.dim() != pi.dim()) throw DimensionError("sample_mcar: base and pattern dimensions differ");
  Sample out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Stream s(seed, kLaneClean, i);
    const Eigen::VectorXd x = base.draw(s);
    out.push_back(make_observation(x, pi.pick(s.uniform())));
  }
  return out;
}

UniSample sample_realisable(const BaseDistribution& base, double epsilon, double q, const MnarMechanism& mechanism,
                            std::size_t n, std::uint64_t seed) {
  check_eps_q(epsilon, q);
  if (base.dim() != 1) throw DimensionError("sample_realisable: base must be univariate");
  UniSample out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool contaminated = mix_draw(seed, i, epsilon);
    Stream s(seed, kLaneClean, i);
    const double x = base.draw1(s);
    const double u = s.uniform();
    const double reveal = contaminated ? check_prob(mechanism(x), "mechanism") : q;
    out.push_back(u < reveal ? ExtendedValue(x) : ExtendedValue::missing());
  }
  return out;
}

Sample sample_realisable_all_or_nothing(const BaseDistribution& base, double epsilon, double q,
                                        const VectorMechanism& mechanism, std::size_t n, std::uint64_t seed) {
  check_eps_q(epsilon, q);
  const std::size_t d = base.dim();
  Sample out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool contaminated = mix_draw(seed, i, epsilon);
    Stream s(seed, kLaneClean, i);
    const Eigen::VectorXd x = base.draw(s);
    const double u = s.uniform();
    const double reveal = contaminated ? check_prob(mechanism(x), "mechanism") : q;
    out.push_back(make_observation(x, RevelationPattern(d, u < reveal ? 1 : 0)));
  }
  return out;
}

Sample sample_arbitrary(const BaseDistribution& base, double epsilon, const PatternDistribution& pi,
                        const Contaminant& contaminant, std::size_t n, std::uint64_t seed) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("sample_arbitrary: epsilon outside [0,1]");
  if (base.dim() != pi.dim() || contaminant.dim() != pi.dim())
    throw DimensionError("sample_arbitrary: base, pattern and contaminant dimensions differ");
  Sample out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (mix_draw(seed, i, epsilon)) {
      Stream c(seed, kLaneContaminant, i);
      out.push_back(contaminant.draw(c));
      continue;
    }
    Stream s(seed, kLaneClean, i);
    const Eigen::VectorXd x = base.draw(s);
    out.push_back(make_observation(x, pi.pick(s.uniform())));
  }
  return out;
}

UniSample to_univariate(const Sample& s) {
  UniSample out;
  out.reserve(s.size());
  for (const auto& row : s) {
    if (row.size() != 1) throw DimensionError("to_univariate: rows must have one coordinate");
    out.push_back(row[0]);
  }
  return out;
}

Sample to_multivariate(const UniSample& s) {
  Sample out;
  out.reserve(s.size());
  for (const auto& z : s) out.push_back(ExtendedVector{z});
  return out;
}

ObservedMoments realisable_observed_moments(const BaseDistribution& base, double epsilon, double q,
                                            const MnarMechanism& mechanism) {
  check_eps_q(epsilon, q);
  if (base.dim() != 1) throw DimensionError("realisable_observed_moments: base must be univariate");
  const double keep = q * (1.0 - epsilon);
  double mass = 0.0, first = 0.0;
  if (const auto* t = std::get_if<TwoPoint>(&base.params())) {
    for (double x : {-t->b, t->b}) {
      const double p = x < 0 ? t->p_minus : 1.0 - t->p_minus;
      const double w = (keep + epsilon * mechanism(x)) * p;
      mass += w;
      first += w * x;
    }
    return {mass, mass > 0.0 ? first / mass : 0.0};
  }
  std::vector<double> cuts{-std::numeric_limits<double>::infinity()};
  double lo_support = -std::numeric_limits<double>::infinity(), hi_support = std::numeric_limits<double>::infinity();
  if (const auto* u = std::get_if<BoundedUniform>(&base.params())) {
    lo_support = u->lo;
    hi_support = u->hi;
    cuts[0] = u->lo;
  }
  for (double b : mechanism.breakpoints())
    if (b > lo_support && b < hi_support) cuts.push_back(b);
  // Split at the centre as well so each piece is a single-signed tail or a bounded bump.
  const double centre = base.mean1();
  if (centre > lo_support && centre < hi_support) cuts.push_back(centre);
  cuts.push_back(hi_support);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    // m is constant on (a, b); sample it at an interior point.
    double mid;
    if (std::isinf(a) && std::isinf(b)) mid = 0.0;
    else if (std::isinf(a)) mid = b - 1.0;
    else if (std::isinf(b)) mid = a + 1.0;
    else mid = 0.5 * (a + b);
    const double w = keep + epsilon * mechanism(mid);
    if (w == 0.0) continue;
    const double p0 = GK::integrate([&](double x) { return base.pdf(x); }, a, b, 15, 1e-13);
    const double p1 = GK::integrate([&](double x) { return x * base.pdf(x); }, a, b, 15, 1e-13);
    mass += w * p0;
    first += w * p1;
  }
  return {mass, mass > 0.0 ? first / mass : 0.0};
}

double realisable_bias_bound(double epsilon, double q, double sigma, double r) {
  if (!(r >= 1.0)) throw DomainError("realisable_bias_bound: r must be >= 1");
  const double kappa = effective_contamination(epsilon, q);
  return sigma * std::min(kappa, std::pow(kappa, 1.0 / r));
}

double realisable_sandwich_violation(const UniSample& sample, const BaseDistribution& base, double epsilon, double q,
                                     std::size_t grid) {
  check_eps_q(epsilon, q);
  if (sample.empty()) throw SizeError("realisable_sandwich_violation: empty sample");
  std::vector<double> obs = observed_values(sample);
  std::sort(obs.begin(), obs.end());
  const double n = static_cast<double>(sample.size());
  const double lower = q * (1.0 - epsilon), upper = lower + epsilon;
  double worst = 0.0;
  for (std::size_t k = 0; k < grid; ++k) {
    const double t = base.quantile((static_cast<double>(k) + 0.5) / static_cast<double>(grid));
    const double F = base.cdf(t);
    const double Fhat = static_cast<double>(std::upper_bound(obs.begin(), obs.end(), t) - obs.begin()) / n;
    worst = std::max({worst, lower * F - Fhat, Fhat - upper * F});
  }
  return worst;
}

AdversaryDensity::AdversaryDensity(std::string name, double a, double sigma, double epsilon, double q)
    : name_(std::move(name)), a_(a), sigma_(sigma), eps_(epsilon), q_(q) {
  if (name_ != "f1" && name_ != "f2") throw DomainError("adversary: name must be f1 or f2");
  if (!(a > 0.0)) throw DomainError("adversary: a must be > 0");
  if (!(sigma > 0.0)) throw DomainError("adversary: sigma must be > 0");
  check_eps_q(epsilon, q);
  const double keep = q * (1.0 - epsilon);
  tau_ = sigma * sigma / (2.0 * a) * std::log1p(epsilon / keep);
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (name_ == "f1") {
    pieces_ = {{-inf, 0.0, keep, -a}, {0.0, tau_, keep, a}, {tau_, inf, keep + epsilon, -a}};
  } else {
    pieces_ = {{-inf, -tau_, keep + epsilon, a}, {-tau_, 0.0, keep, -a}, {0.0, inf, keep, a}};
  }
  cdf_total_ = cdf(inf);
}

double AdversaryDensity::density(double x) const {
  for (const auto& p : pieces_)
    if (x > p.lo && x <= p.hi) return p.weight * norm_pdf((x - p.mu) / sigma_) / sigma_;
  return 0.0;
}

double AdversaryDensity::cdf(double x) const {
  double c = 0.0;
  for (const auto& p : pieces_) {
    if (x <= p.lo) break;
    c += p.weight * norm_interval(p.lo, std::min(x, p.hi), p.mu, sigma_);
  }
  return c;
}

double AdversaryDensity::observed_mean() const {
  double first = 0.0;
  for (const auto& p : pieces_) {
    const double zl = (p.lo - p.mu) / sigma_, zh = (p.hi - p.mu) / sigma_;
    const double phl = std::isinf(zl) ? 0.0 : norm_pdf(zl), phh = std::isinf(zh) ? 0.0 : norm_pdf(zh);
    first += p.weight * (p.mu * norm_interval(p.lo, p.hi, p.mu, sigma_) + sigma_ * (phl - phh));
  }
  return first / cdf_total_;
}

ExtendedValue AdversaryDensity::draw(Stream& s) const {
  const double u = s.uniform();
  if (u >= cdf_total_) return ExtendedValue::missing();
  double lo = -a_ - 40.0 * sigma_, hi = a_ + tau_ + 40.0 * sigma_;
  while (hi - lo > 1e-12 * sigma_) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (cdf(mid) < u ? lo : hi) = mid;
  }
  return ExtendedValue(0.5 * (lo + hi));
}

UniSample AdversaryDensity::sample(std::size_t n, std::uint64_t seed) const {
  UniSample out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Stream s(seed, kLaneClean, i);
    out.push_back(draw(s));
  }
  return out;
}

AdversaryDensity adversary_f1_f2(const std::string& name, double a, double sigma, double epsilon, double q) {
  return AdversaryDensity(name, a, sigma, epsilon, q);
}

TwoPointConstruction adversary_two_point(double r, double sigma, double epsilon, double q) {
  if (!(r >= 2.0)) throw DomainError("adversary_two_point: r must be >= 2");
  if (!(sigma > 0.0)) throw DomainError("adversary_two_point: sigma must be > 0");
  check_eps_q(epsilon, q);
  const double keep = q * (1.0 - epsilon);
  const double a = keep / (keep + epsilon);
  const double b = 0.5 * sigma * std::pow(a, -1.0 / r);
  // P1 puts 1/(a+1) on -b and hides -b in the contaminated part; P2 mirrors it.
  ContaminationSpec first{BaseDistribution::two_point(b, 1.0 / (a + 1.0)), ContaminationParams(epsilon, q),
                          MnarMechanism::threshold_above(0.0), std::nullopt};
  ContaminationSpec second{BaseDistribution::two_point(b, a / (a + 1.0)), ContaminationParams(epsilon, q),
                           MnarMechanism::threshold_below(0.0), std::nullopt};
  TwoPointConstruction out{std::move(first), std::move(second)};
  out.a = a;
  out.b = b;
  out.theta1 = -(1.0 - a) * b / (a + 1.0);
  out.theta2 = (1.0 - a) * b / (a + 1.0);
  out.mass_minus = keep / (a + 1.0);
  out.mass_plus = keep / (a + 1.0);
  out.mass_star = 1.0 - 2.0 * keep / (a + 1.0);
  return out;
}

UniSample sample_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta0, double sigma, double epsilon,
                            const Propensity& q_x, double q, const ResponseMechanism& mechanism2,
                            std::uint64_t seed) {
  check_eps_q(epsilon, q);
  if (X.cols() != theta0.size()) throw DimensionError("sample_regression: design and theta0 disagree in d");
  if (!(sigma > 0.0)) throw DomainError("sample_regression: sigma must be > 0");
  UniSample out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd x = X.row(i).transpose();
    const double qx = check_prob(q_x(x), "propensity");
    if (qx < q) throw DomainError("sample_regression: propensity below the lower bound q at row " + std::to_string(i));
    Stream s(seed, kLaneClean, static_cast<std::uint64_t>(i));
    const double y = x.dot(theta0) + sigma * s.normal();
    const bool mnar_branch = s.uniform() < epsilon;
    const double u = s.uniform();
    const double reveal = mnar_branch ? check_prob(mechanism2(x, y), "response mechanism") : qx;
    out.push_back(u < reveal ? ExtendedValue(y) : ExtendedValue::missing());
  }
  return out;
}

}  // namespace mnar
