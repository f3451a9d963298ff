#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mnar/core_types.hpp"
#include "mnar/distributions.hpp"

namespace mnar {

using Sample = std::vector<ExtendedVector>;
using UniSample = std::vector<ExtendedValue>;

// Stream lanes. Observation i always uses index i; the clean draw (X then the
// pattern) lives on lane kLaneClean, so contamination never shifts it.
inline constexpr std::uint64_t kLaneClean = 0;
inline constexpr std::uint64_t kLaneMix = 1;
inline constexpr std::uint64_t kLaneContaminant = 2;

/// Law on R_*^d used as the arbitrary contaminant Q.
class Contaminant {
 public:
  static Contaminant point(ExtendedVector atom);
  static Contaminant point_masses(std::vector<ExtendedVector> atoms, std::vector<double> probs);
  // Law of Y (*) W with Y ~ base, W ~ pi independent.
  static Contaminant mcar_view(BaseDistribution base, PatternDistribution pi);

  std::size_t dim() const { return d_; }
  // Atom lists take one uniform; the MCAR view takes dim() + 1.
  ExtendedVector draw(Stream& s) const;

 private:
  struct Atoms {
    std::vector<ExtendedVector> atoms;
    std::vector<double> probs;
  };
  struct View {
    BaseDistribution base;
    PatternDistribution pi;
  };
  explicit Contaminant(std::variant<Atoms, View> v, std::size_t d) : v_(std::move(v)), d_(d) {}
  std::variant<Atoms, View> v_;
  std::size_t d_;
};

// A mechanism for multivariate realisable sampling: reveal probability as a function of x.
using VectorMechanism = std::function<double(const Eigen::VectorXd&)>;

/// Base law + (epsilon, q or pi) + either a reveal mechanism (realisable)
/// or an explicit contaminant (arbitrary).
struct ContaminationSpec {
  BaseDistribution base;
  ContaminationParams params;
  std::variant<MnarMechanism, Contaminant> kind;
  // For d > 1 realisable specs the mechanism is applied to direction^T x.
  std::optional<Eigen::VectorXd> direction;

  bool realisable() const { return std::holds_alternative<MnarMechanism>(kind); }
  Eigen::VectorXd theta0() const { return base.mean(); }
  Sample sample(std::size_t n, std::uint64_t seed) const;
};

// Per observation i (lane kLaneClean, index i): X uses dim() uniforms, then one uniform picks the pattern.
Sample sample_mcar(const BaseDistribution& base, const PatternDistribution& pi, std::size_t n, std::uint64_t seed);

// Per observation: one uniform on kLaneMix picks W ~ Ber(eps); on kLaneClean, X takes one
// uniform and one more decides revelation (u < q when W = 0, u < m(X) when W = 1).
UniSample sample_realisable(const BaseDistribution& base, double epsilon, double q, const MnarMechanism& mechanism,
                            std::size_t n, std::uint64_t seed);

// All-or-nothing multivariate version: the whole vector is revealed or hidden.
Sample sample_realisable_all_or_nothing(const BaseDistribution& base, double epsilon, double q,
                                        const VectorMechanism& mechanism, std::size_t n, std::uint64_t seed);

// (1 - eps) MCAR(pi, P) + eps Q. W on kLaneMix; Q draws on kLaneContaminant.
Sample sample_arbitrary(const BaseDistribution& base, double epsilon, const PatternDistribution& pi,
                        const Contaminant& contaminant, std::size_t n, std::uint64_t seed);

UniSample to_univariate(const Sample& s);
Sample to_multivariate(const UniSample& s);

/// Observed-value moments of the realisable law with density {q(1-eps) + eps m(z)} p(z),
/// by adaptive quadrature split at the mechanism's breakpoints.
struct ObservedMoments {
  double mass = 0.0;  // P(Z != star)
  double mean = 0.0;  // E(Z | Z != star)
};
ObservedMoments realisable_observed_moments(const BaseDistribution& base, double epsilon, double q,
                                            const MnarMechanism& mechanism);

// Upper bound sigma * min(kappa, kappa^(1/r)) on |E(Z | Z != star) - theta0| over the L^r class.
double realisable_bias_bound(double epsilon, double q, double sigma, double r);

// Largest violation of q(1-eps) F_P(t) <= #{Z_i <= t}/n <= (q(1-eps)+eps) F_P(t)
// over t at the P-quantiles (k + 1/2)/grid, k = 0..grid-1. Zero when the sandwich holds.
double realisable_sandwich_violation(const UniSample& sample, const BaseDistribution& base, double epsilon, double q,
                                     std::size_t grid = 100);

/// Piecewise-Gaussian lower-bound densities f1 (realisable for N(-a, sigma^2)) and f2 (for N(a, sigma^2)).
class AdversaryDensity {
 public:
  AdversaryDensity(std::string name, double a, double sigma, double epsilon, double q);

  const std::string& name() const { return name_; }
  double a() const { return a_; }
  double sigma() const { return sigma_; }
  double epsilon() const { return eps_; }
  double q() const { return q_; }
  double tau() const { return tau_; }
  double theta() const { return name_ == "f1" ? -a_ : a_; }  // mean of the base it is realisable for

  double density(double x) const;
  double cdf(double x) const;  // integral of the density over (-inf, x]
  double observed_mass() const { return cdf_total_; }
  double star_mass() const { return 1.0 - cdf_total_; }
  double observed_mean() const;  // closed form via truncated-normal moments

  // One uniform per draw on (seed, kLaneClean, i); inverse CDF by bisection to 1e-12 sigma.
  UniSample sample(std::size_t n, std::uint64_t seed) const;
  ExtendedValue draw(Stream& s) const;

 private:
  struct Piece {
    double lo, hi;  // (lo, hi]
    double weight;  // multiplies the normal density
    double mu;
  };
  std::string name_;
  double a_, sigma_, eps_, q_, tau_;
  std::vector<Piece> pieces_;
  double cdf_total_ = 0.0;
};

AdversaryDensity adversary_f1_f2(const std::string& name, double a, double sigma, double epsilon, double q);

/// Two laws on {-b, b} with different means that induce the same observed law R0.
struct TwoPointConstruction {
  ContaminationSpec first, second;
  double a = 1.0, b = 0.0;
  double theta1 = 0.0, theta2 = 0.0;
  double mass_minus = 0.0, mass_plus = 0.0, mass_star = 0.0;  // R0 on {-b, b, star}
  double mean_gap() const { return std::abs(theta2 - theta1); }
};
TwoPointConstruction adversary_two_point(double r, double sigma, double epsilon, double q);

using Propensity = std::function<double(const Eigen::VectorXd&)>;
using ResponseMechanism = std::function<double(const Eigen::VectorXd&, double)>;

// Row i (lane kLaneClean, index i): noise takes one uniform, B ~ Ber(eps) one, revelation one.
UniSample sample_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& theta0, double sigma, double epsilon,
                            const Propensity& q_x, double q, const ResponseMechanism& mechanism2,
                            std::uint64_t seed);

}  // namespace mnar
