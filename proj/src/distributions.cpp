#include "mnar/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "mnar/errors.hpp"
#include "mnar/normal.hpp"

namespace mnar {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double sw_scale(const SubWeibullFolded& w) { return w.sigma * std::pow(2.0, -1.0 / w.r); }
}  // namespace

BaseDistribution::BaseDistribution(Variant v) : v_(std::move(v)) {
  std::visit(overloaded{
                 [&](const Gaussian& g) {
                   if (g.theta.size() == 0) throw DimensionError("Gaussian: empty mean");
                   if (g.Sigma.rows() != g.theta.size() || g.Sigma.cols() != g.theta.size())
                     throw DimensionError("Gaussian: Sigma must be d x d");
                   if (!g.theta.allFinite() || !g.Sigma.allFinite())
                     throw DomainError("Gaussian: non-finite parameters");
                   Eigen::LLT<Eigen::MatrixXd> llt(g.Sigma);
                   if (llt.info() != Eigen::Success) throw DomainError("Gaussian: Sigma is not positive definite");
                   chol_ = llt.matrixL();
                 },
                 [](const TwoPoint& t) {
                   if (!(t.b > 0.0) || !std::isfinite(t.b)) throw DomainError("TwoPoint: b must be positive");
                   if (!(t.p_minus >= 0.0 && t.p_minus <= 1.0)) throw DomainError("TwoPoint: probability outside [0,1]");
                 },
                 [](const BoundedUniform& u) {
                   if (!(u.hi > u.lo) || !std::isfinite(u.lo) || !std::isfinite(u.hi))
                     throw DomainError("BoundedUniform: need finite lo < hi");
                 },
                 [](const SubWeibullFolded& w) {
                   if (!(w.r >= 1.0) || !std::isfinite(w.r)) throw DomainError("SubWeibullFolded: r must be >= 1");
                   if (!(w.sigma > 0.0) || !std::isfinite(w.sigma)) throw DomainError("SubWeibullFolded: sigma must be > 0");
                   if (!std::isfinite(w.theta)) throw DomainError("SubWeibullFolded: theta must be finite");
                 },
             },
             v_);
}

BaseDistribution BaseDistribution::gaussian(double mu, double sd) {
  if (!(sd > 0.0)) throw DomainError("gaussian: sd must be > 0");
  return BaseDistribution(Gaussian{Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, sd * sd)});
}

BaseDistribution BaseDistribution::gaussian(Eigen::VectorXd theta, Eigen::MatrixXd Sigma) {
  return BaseDistribution(Gaussian{std::move(theta), std::move(Sigma)});
}

BaseDistribution BaseDistribution::two_point(double b, double p_minus) {
  return BaseDistribution(TwoPoint{b, p_minus});
}

BaseDistribution BaseDistribution::uniform(double lo, double hi) {
  return BaseDistribution(BoundedUniform{lo, hi});
}

BaseDistribution BaseDistribution::sub_weibull(double r, double sigma, double theta) {
  return BaseDistribution(SubWeibullFolded{r, sigma, theta});
}

std::size_t BaseDistribution::dim() const {
  if (const auto* g = std::get_if<Gaussian>(&v_)) return static_cast<std::size_t>(g->theta.size());
  return 1;
}

Eigen::VectorXd BaseDistribution::mean() const {
  return std::visit(overloaded{
                        [](const Gaussian& g) -> Eigen::VectorXd { return g.theta; },
                        [](const TwoPoint& t) -> Eigen::VectorXd {
                          return Eigen::VectorXd::Constant(1, t.b * (1.0 - 2.0 * t.p_minus));
                        },
                        [](const BoundedUniform& u) -> Eigen::VectorXd {
                          return Eigen::VectorXd::Constant(1, 0.5 * (u.lo + u.hi));
                        },
                        [](const SubWeibullFolded& w) -> Eigen::VectorXd {
                          return Eigen::VectorXd::Constant(1, w.theta);
                        },
                    },
                    v_);
}

std::string BaseDistribution::name() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const Gaussian& g) { os << "gaussian(d=" << g.theta.size() << ")"; },
                 [&](const TwoPoint& t) { os << "two_point(b=" << t.b << ",p_minus=" << t.p_minus << ")"; },
                 [&](const BoundedUniform& u) { os << "uniform(" << u.lo << "," << u.hi << ")"; },
                 [&](const SubWeibullFolded& w) { os << "sub_weibull(r=" << w.r << ",sigma=" << w.sigma << ")"; },
             },
             v_);
  return os.str();
}

Eigen::VectorXd BaseDistribution::draw(Stream& s) const {
  if (const auto* g = std::get_if<Gaussian>(&v_)) {
    Eigen::VectorXd z(g->theta.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = s.normal();
    return g->theta + chol_ * z;
  }
  return Eigen::VectorXd::Constant(1, draw1(s));
}

double BaseDistribution::draw1(Stream& s) const {
  require_univariate("draw1");
  const double u = s.uniform();
  return std::visit(overloaded{
                        [&](const Gaussian& g) { return g.theta(0) + chol_(0, 0) * norm_quantile(u); },
                        [&](const TwoPoint& t) { return u < t.p_minus ? -t.b : t.b; },
                        [&](const BoundedUniform& b) { return b.lo + (b.hi - b.lo) * u; },
                        [&](const SubWeibullFolded& w) {
                          const double sign = u < 0.5 ? -1.0 : 1.0;
                          const double v = std::abs(2.0 * u - 1.0);
                          if (v <= 0.0) return w.theta;
                          const double g = boost::math::gamma_p_inv(1.0 / w.r, v);
                          return w.theta + sign * sw_scale(w) * std::pow(g, 1.0 / w.r);
                        },
                    },
                    v_);
}

void BaseDistribution::require_univariate(const char* what) const {
  if (dim() != 1) throw DimensionError(std::string(what) + ": base distribution is not univariate");
}

bool BaseDistribution::absolutely_continuous() const { return !std::holds_alternative<TwoPoint>(v_); }

double BaseDistribution::cdf(double x) const {
  require_univariate("cdf");
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return std::visit(overloaded{
                        [&](const Gaussian& g) { return norm_cdf((x - g.theta(0)) / chol_(0, 0)); },
                        [&](const TwoPoint& t) { return x < -t.b ? 0.0 : (x < t.b ? t.p_minus : 1.0); },
                        [&](const BoundedUniform& b) {
                          return x <= b.lo ? 0.0 : (x >= b.hi ? 1.0 : (x - b.lo) / (b.hi - b.lo));
                        },
                        [&](const SubWeibullFolded& w) {
                          const double z = std::abs(x - w.theta) / sw_scale(w);
                          const double half = 0.5 * boost::math::gamma_p(1.0 / w.r, std::pow(z, w.r));
                          return x >= w.theta ? 0.5 + half : 0.5 - half;
                        },
                    },
                    v_);
}

double BaseDistribution::pdf(double x) const {
  require_univariate("pdf");
  return std::visit(overloaded{
                        [&](const Gaussian& g) { return norm_pdf((x - g.theta(0)) / chol_(0, 0)) / chol_(0, 0); },
                        [&](const TwoPoint&) -> double { throw DomainError("pdf: two-point law has no density"); },
                        [&](const BoundedUniform& b) { return (x >= b.lo && x <= b.hi) ? 1.0 / (b.hi - b.lo) : 0.0; },
                        [&](const SubWeibullFolded& w) {
                          const double s = sw_scale(w);
                          const double z = std::abs(x - w.theta) / s;
                          return w.r / (2.0 * s * std::tgamma(1.0 / w.r)) * std::exp(-std::pow(z, w.r));
                        },
                    },
                    v_);
}

double BaseDistribution::interval_mass(double lo, double hi) const {
  require_univariate("interval_mass");
  if (!(hi > lo)) return 0.0;
  if (const auto* g = std::get_if<Gaussian>(&v_)) return norm_interval(lo, hi, g->theta(0), chol_(0, 0));
  if (const auto* w = std::get_if<SubWeibullFolded>(&v_)) {
    // Work with upper tails on the right of theta to keep precision.
    const double s = sw_scale(*w);
    auto tail = [&](double x) {  // P(X > x)
      if (std::isinf(x)) return x > 0 ? 0.0 : 1.0;
      const double z = std::abs(x - w->theta) / s;
      const double half = 0.5 * boost::math::gamma_q(1.0 / w->r, std::pow(z, w->r));
      return x >= w->theta ? half : 1.0 - half;
    };
    if (lo >= w->theta) return tail(lo) - tail(hi);
    return cdf(hi) - cdf(lo);
  }
  return cdf(hi) - cdf(lo);
}

double BaseDistribution::quantile(double p) const {
  require_univariate("quantile");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: p must be in (0,1)");
  return std::visit(overloaded{
                        [&](const Gaussian& g) { return g.theta(0) + chol_(0, 0) * norm_quantile(p); },
                        [&](const TwoPoint& t) { return p <= t.p_minus ? -t.b : t.b; },
                        [&](const BoundedUniform& b) { return b.lo + (b.hi - b.lo) * p; },
                        [&](const SubWeibullFolded& w) {
                          const double sign = p < 0.5 ? -1.0 : 1.0;
                          const double v = std::abs(2.0 * p - 1.0);
                          if (v <= 0.0) return w.theta;
                          return w.theta + sign * sw_scale(w) * std::pow(boost::math::gamma_p_inv(1.0 / w.r, v), 1.0 / w.r);
                        },
                    },
                    v_);
}

MnarMechanism MnarMechanism::constant(double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw DomainError("mechanism: constant reveal probability outside [0,1]");
  MnarMechanism m;
  m.kind_ = Kind::Constant;
  m.t_ = c;
  return m;
}

MnarMechanism MnarMechanism::threshold_above(double t) {
  if (!std::isfinite(t)) throw DomainError("mechanism: threshold must be finite");
  MnarMechanism m;
  m.kind_ = Kind::ThresholdAbove;
  m.t_ = t;
  return m;
}

MnarMechanism MnarMechanism::threshold_below(double t) {
  if (!std::isfinite(t)) throw DomainError("mechanism: threshold must be finite");
  MnarMechanism m;
  m.kind_ = Kind::ThresholdBelow;
  m.t_ = t;
  return m;
}

MnarMechanism MnarMechanism::tails_only(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("mechanism: tails_only needs finite t >= 0");
  MnarMechanism m;
  m.kind_ = Kind::TailsOnly;
  m.t_ = t;
  return m;
}

MnarMechanism MnarMechanism::custom(std::vector<double> breaks, std::vector<double> values) {
  if (values.size() != breaks.size() + 1) throw DimensionError("mechanism: need one more value than breaks");
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    if (!std::isfinite(breaks[k])) throw DomainError("mechanism: non-finite break");
    if (k > 0 && !(breaks[k] > breaks[k - 1])) throw DomainError("mechanism: breaks must increase strictly");
  }
  for (auto& v : values) {
    if (std::isnan(v)) throw DomainError("mechanism: NaN reveal probability");
    v = std::clamp(v, 0.0, 1.0);
  }
  MnarMechanism m;
  m.kind_ = Kind::Custom;
  m.breaks_ = std::move(breaks);
  m.values_ = std::move(values);
  return m;
}

double MnarMechanism::operator()(double x) const {
  switch (kind_) {
    case Kind::Constant: return t_;
    case Kind::ThresholdAbove: return x >= t_ ? 1.0 : 0.0;
    case Kind::ThresholdBelow: return x <= t_ ? 1.0 : 0.0;
    case Kind::TailsOnly: return std::abs(x) >= t_ ? 1.0 : 0.0;
    case Kind::Custom: {
      const auto k = static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), x) - breaks_.begin());
      return values_[k];
    }
  }
  return 0.0;
}

std::vector<double> MnarMechanism::breakpoints() const {
  switch (kind_) {
    case Kind::Constant: return {};
    case Kind::ThresholdAbove:
    case Kind::ThresholdBelow: return {t_};
    case Kind::TailsOnly: return t_ > 0.0 ? std::vector<double>{-t_, t_} : std::vector<double>{0.0};
    case Kind::Custom: return breaks_;
  }
  return {};
}

std::string MnarMechanism::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Constant: os << "constant(" << t_ << ")"; break;
    case Kind::ThresholdAbove: os << "threshold_above(" << t_ << ")"; break;
    case Kind::ThresholdBelow: os << "threshold_below(" << t_ << ")"; break;
    case Kind::TailsOnly: os << "tails_only(" << t_ << ")"; break;
    case Kind::Custom: os << "custom(" << breaks_.size() << " breaks)"; break;
  }
  return os.str();
}

}  // namespace mnar
