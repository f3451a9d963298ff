#include "mnar/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "mnar/errors.hpp"
#include "mnar/missingness.hpp"
#include "mnar/multivariate.hpp"
#include "mnar/regression.hpp"
#include "mnar/rng.hpp"
#include "mnar/univariate.hpp"

namespace mnar {

using nlohmann::json;

namespace {

const std::set<std::string> kUnivariate = {"observed_mean", "median_of_means", "trimmed_mean", "average_of_extremes",
                                           "mk_estimate"};
const std::set<std::string> kMultivariate = {"complete_case_mean", "robust_descent", "iterative_robust_descent",
                                             "multivariate_mk"};
const std::set<std::string> kRegression = {"ols_observed", "ks_regression"};
const std::set<std::string> kModels = {"mcar", "realisable", "arbitrary", "adversary", "two_point", "regression"};

double num(const json& j, const std::string& what) {
  if (!j.is_number()) throw ConfigError(what + " must be a number");
  return j.get<double>();
}

std::string str(const json& j, const std::string& what) {
  if (!j.is_string()) throw ConfigError(what + " must be a string");
  return j.get<std::string>();
}

std::vector<double> num_list(const json& j, const std::string& what) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a number or a nonempty array");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(num(v, what));
  return out;
}

std::vector<std::size_t> count_list(const json& j, const std::string& what) {
  std::vector<std::size_t> out;
  for (double v : num_list(j, what)) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e12) throw ConfigError(what + " entries must be positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

ModelSpec parse_model(const json& j) {
  if (!j.is_object()) throw ConfigError("model must be an object");
  ModelSpec m;
  if (!j.contains("type")) throw ConfigError("model.type is required");
  for (const auto& [key, v] : j.items()) {
    const std::string w = "model." + key;
    if (key == "type") m.type = str(v, w);
    else if (key == "name") m.name = str(v, w);
    else if (key == "base") m.base = str(v, w);
    else if (key == "theta") {
      if (v.is_array()) m.theta_vector = num_list(v, w);
      else m.theta = num(v, w);
    } else if (key == "r") m.r = num(v, w);
    else if (key == "pattern") m.pattern = str(v, w);
    else if (key == "q_per_coordinate") m.q_per_coordinate = num_list(v, w);
    else if (key == "mechanism") m.mechanism = str(v, w);
    else if (key == "t") {
      if (v.is_string() && v.get<std::string>() == "worst") m.mechanism_t = std::numeric_limits<double>::quiet_NaN();
      else m.mechanism_t = num(v, w);
    } else if (key == "contaminant") m.contaminant = num(v, w);
    else if (key == "which") m.which = str(v, w);
    else if (key == "a") m.a = num(v, w);
    else if (key == "design_mean") m.design_mean = num(v, w);
    else if (key == "response_mechanism") m.response_mechanism = str(v, w);
    else if (key == "response_constant") m.response_constant = num(v, w);
    else if (key == "q_x") m.q_x = num(v, w);
    else throw ConfigError("unknown key '" + w + "'");
  }
  if (!kModels.count(m.type)) throw ConfigError("unknown model type '" + m.type + "'");
  if (m.label().find_first_of(",\"\n") != std::string::npos) throw ConfigError("model.name may not contain , \" or newlines");
  if (m.type == "adversary" && m.which.empty()) m.which = "f1";
  if (m.type == "two_point" && m.which.empty()) m.which = "first";
  return m;
}

EstimatorSpec parse_estimator(const json& j) {
  EstimatorSpec e;
  if (j.is_string()) {
    e.name = j.get<std::string>();
    return e;
  }
  if (!j.is_object() || !j.contains("name")) throw ConfigError("estimators entries must be names or objects with a name");
  for (const auto& [key, v] : j.items()) {
    if (key == "name") e.name = str(v, "estimator name");
    else e.options[key] = num(v, "estimator option '" + key + "'");
  }
  return e;
}

BaseDistribution make_base(const ModelSpec& m, std::size_t d, double sigma) {
  if (m.base == "gaussian") {
    return BaseDistribution::gaussian(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d), m.theta),
                                      sigma * sigma * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                                                static_cast<Eigen::Index>(d)));
  }
  if (d != 1) throw ConfigError("base '" + m.base + "' is univariate only");
  if (m.base == "sub_weibull") return BaseDistribution::sub_weibull(m.r, sigma, m.theta);
  if (m.base == "uniform") return BaseDistribution::uniform(m.theta - std::sqrt(3.0) * sigma, m.theta + std::sqrt(3.0) * sigma);
  throw ConfigError("unknown base '" + m.base + "'");
}

MnarMechanism make_mechanism(const std::string& kind, double t) {
  if (kind == "threshold_above") return MnarMechanism::threshold_above(t);
  if (kind == "threshold_below") return MnarMechanism::threshold_below(t);
  if (kind == "tails_only") return MnarMechanism::tails_only(t);
  if (kind == "constant") return MnarMechanism::constant(t);
  throw ConfigError("unknown mechanism '" + kind + "'");
}

// Threshold maximising |E(Z | Z != star) - theta| over theta + sigma * [-4, 4] in steps of 0.05 sigma.
double worst_threshold(const ModelSpec& m, const BaseDistribution& marginal, double eps, double q, double sigma) {
  double best_t = m.theta, best = -1.0;
  for (int k = -80; k <= 80; ++k) {
    const double t = m.theta + 0.05 * k * sigma;
    const auto mom = realisable_observed_moments(marginal, eps, q, make_mechanism(m.mechanism, t));
    const double bias = std::abs(mom.mean - marginal.mean1());
    if (bias > best) {
      best = bias;
      best_t = t;
    }
  }
  return best_t;
}

PatternDistribution make_pattern(const ModelSpec& m, std::size_t d, double q) {
  if (d == 1) return PatternDistribution::univariate(m.q_per_coordinate.empty() ? q : m.q_per_coordinate.front());
  if (m.pattern == "all_or_nothing") return PatternDistribution::all_or_nothing(d, q);
  if (m.pattern != "independent") throw ConfigError("unknown pattern '" + m.pattern + "'");
  std::vector<double> qs = m.q_per_coordinate.empty() ? std::vector<double>(d, q) : m.q_per_coordinate;
  if (qs.size() != d) throw ConfigError("q_per_coordinate has the wrong length");
  return PatternDistribution::independent(qs);
}

Eigen::VectorXd regression_theta(const ModelSpec& m, std::size_t d) {
  if (!m.theta_vector.empty()) {
    if (m.theta_vector.size() != d) throw ConfigError("model.theta has length different from d");
    return Eigen::Map<const Eigen::VectorXd>(m.theta_vector.data(), static_cast<Eigen::Index>(d));
  }
  Eigen::VectorXd t(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < t.size(); ++j) t(j) = j % 2 == 0 ? 1.0 : -2.0;
  return t;
}

std::string estimator_kind(const std::string& name) {
  if (kUnivariate.count(name)) return "univariate";
  if (kMultivariate.count(name)) return "multivariate";
  if (kRegression.count(name)) return "regression";
  throw ConfigError("unknown estimator '" + name + "'");
}

double opt(const EstimatorSpec& e, const std::string& key, double fallback) {
  const auto it = e.options.find(key);
  return it == e.options.end() ? fallback : it->second;
}

std::vector<double> observed_column(const std::vector<ExtendedVector>& sample) {
  std::vector<double> out;
  for (const auto& row : sample)
    if (row.front().observed()) out.push_back(row.front().value());
  return out;
}

}  // namespace

ScenarioConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> keys = {"model", "estimators", "grid", "reps", "delta", "seed"};
  for (const auto& [key, v] : j.items())
    if (!keys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  for (const auto& key : keys)
    if (!j.contains(key)) throw ConfigError("config key '" + key + "' is required");

  ScenarioConfig c;
  c.model = parse_model(j["model"]);
  const json& est = j["estimators"];
  if (!est.is_array() || est.empty()) throw ConfigError("estimators must be a nonempty array");
  for (const auto& e : est) c.estimators.push_back(parse_estimator(e));

  const json& g = j["grid"];
  if (!g.is_object()) throw ConfigError("grid must be an object");
  for (const auto& [key, v] : g.items()) {
    const std::string w = "grid." + key;
    if (key == "n") c.grid.n = count_list(v, w);
    else if (key == "d") c.grid.d = count_list(v, w);
    else if (key == "epsilon") c.grid.epsilon = num_list(v, w);
    else if (key == "q") c.grid.q = num_list(v, w);
    else if (key == "sigma") c.grid.sigma = num_list(v, w);
    else throw ConfigError("unknown key '" + w + "'");
  }
  if (c.grid.n.empty()) throw ConfigError("grid.n is required");
  if (c.grid.d.empty()) c.grid.d = {1};
  if (c.grid.epsilon.empty()) c.grid.epsilon = {0.0};
  if (c.grid.q.empty()) c.grid.q = {1.0};
  if (c.grid.sigma.empty()) c.grid.sigma = {1.0};

  const json& reps = j["reps"];
  if (!reps.is_number_integer() || reps.get<long long>() < 1) throw ConfigError("reps must be an integer >= 1");
  c.reps = reps.get<std::size_t>();
  c.delta = num(j["delta"], "delta");
  const json& seed = j["seed"];
  if (seed.is_number_unsigned()) c.seed = seed.get<std::uint64_t>();
  else if (seed.is_number_integer() && seed.get<long long>() >= 0) c.seed = static_cast<std::uint64_t>(seed.get<long long>());
  else if (seed.is_string()) {
    try {
      std::size_t pos = 0;
      c.seed = std::stoull(seed.get<std::string>(), &pos, 0);
      if (pos != seed.get<std::string>().size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw ConfigError("seed string is not an unsigned integer");
    }
  } else {
    throw ConfigError("seed must be a nonnegative integer");
  }
  validate_config(c);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::vector<Cell> grid_cells(const GridSpec& g) {
  std::vector<Cell> out;
  for (auto n : g.n)
    for (auto d : g.d)
      for (double e : g.epsilon)
        for (double q : g.q)
          for (double s : g.sigma) out.push_back(Cell{out.size(), n, d, e, q, s});
  return out;
}

void validate_config(const ScenarioConfig& c) {
  if (c.reps < 1) throw ConfigError("reps must be >= 1");
  if (!(c.delta > 0.0 && c.delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  if (c.estimators.empty()) throw ConfigError("no estimators");
  const auto& m = c.model;
  if (!kModels.count(m.type)) throw ConfigError("unknown model type '" + m.type + "'");
  for (double e : c.grid.epsilon)
    if (!(e >= 0.0 && e < 1.0)) throw ConfigError("grid.epsilon entries must lie in [0, 1)");
  for (double q : c.grid.q)
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("grid.q entries must lie in (0, 1]");
  for (double s : c.grid.sigma)
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("grid.sigma entries must be positive");
  for (double q : m.q_per_coordinate)
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("q_per_coordinate entries must lie in (0, 1]");
  const std::size_t dmax = *std::max_element(c.grid.d.begin(), c.grid.d.end());
  if ((m.type == "adversary" || m.type == "two_point") && dmax != 1)
    throw ConfigError("model '" + m.type + "' is univariate; grid.d must be 1");
  if (m.type == "adversary" && m.which != "f1" && m.which != "f2") throw ConfigError("adversary.which must be f1 or f2");
  if (m.type == "two_point" && m.which != "first" && m.which != "second")
    throw ConfigError("two_point.which must be first or second");
  if (m.type != "regression" && m.base != "gaussian" && dmax != 1)
    throw ConfigError("base '" + m.base + "' is univariate; grid.d must be 1");
  if (m.type == "regression") {
    if (m.response_mechanism != "above_fit" && m.response_mechanism != "below_fit" && m.response_mechanism != "constant")
      throw ConfigError("unknown response_mechanism '" + m.response_mechanism + "'");
    if (!(m.q_x > 0.0 && m.q_x <= 1.0)) throw ConfigError("q_x must lie in (0, 1]");
    for (double q : c.grid.q)
      if (m.q_x < q) throw ConfigError("q_x must be at least every grid q");
    for (auto d : c.grid.d) (void)regression_theta(m, d);
  }
  if (m.type == "realisable") (void)make_mechanism(m.mechanism, 0.0);
  for (const auto& e : c.estimators) {
    const std::string kind = estimator_kind(e.name);
    const std::string pair = "estimator '" + e.name + "' with model '" + m.type + "'";
    if ((kind == "regression") != (m.type == "regression")) throw ConfigError(pair + " is not supported");
    if (kind == "univariate" && dmax != 1) throw ConfigError(pair + ": univariate estimator on d > 1 data");
    if (e.name == "multivariate_mk") {
      if (dmax > 8) throw ConfigError(pair + ": multivariate_mk needs d <= 8");
      if (dmax > 1 && (m.type == "mcar" || m.type == "arbitrary") && m.pattern != "all_or_nothing")
        throw ConfigError(pair + ": multivariate_mk needs the all_or_nothing pattern");
    }
  }
}

Replicate make_replicate(const ScenarioConfig& config, const Cell& cell, std::size_t rep) {
  const auto& m = config.model;
  Replicate out;
  out.seed = derive_seed(config.seed, cell.index, rep);
  const std::size_t n = cell.n, d = cell.d;
  const double eps = cell.epsilon, q = cell.q, sigma = cell.sigma;
  if (m.type == "mcar" || m.type == "arbitrary" || m.type == "realisable") {
    const BaseDistribution base = make_base(m, d, sigma);
    out.theta0 = base.mean();
    if (m.type == "mcar") {
      out.sample = sample_mcar(base, make_pattern(m, d, q), n, out.seed);
    } else if (m.type == "arbitrary") {
      ExtendedVector atom(d, ExtendedValue(m.contaminant));
      out.sample = sample_arbitrary(base, eps, make_pattern(m, d, q), Contaminant::point(atom), n, out.seed);
    } else {
      const BaseDistribution marginal = d == 1 ? base : BaseDistribution::gaussian(m.theta, sigma);
      const double t = std::isnan(m.mechanism_t) ? worst_threshold(m, marginal, eps, q, sigma) : m.mechanism_t;
      ContaminationSpec spec{base, ContaminationParams(eps, q), make_mechanism(m.mechanism, t), std::nullopt};
      out.sample = spec.sample(n, out.seed);
    }
  } else if (m.type == "adversary") {
    const AdversaryDensity f(m.which, m.a, sigma, eps, q);
    out.theta0 = Eigen::VectorXd::Constant(1, f.theta());
    out.sample = to_multivariate(f.sample(n, out.seed));
  } else if (m.type == "two_point") {
    const auto tp = adversary_two_point(m.r, sigma, eps, q);
    const bool first = m.which == "first";
    out.theta0 = Eigen::VectorXd::Constant(1, first ? tp.theta1 : tp.theta2);
    out.sample = (first ? tp.first : tp.second).sample(n, out.seed);
  } else if (m.type == "regression") {
    const Eigen::VectorXd theta0 = regression_theta(m, d);
    out.theta0 = theta0;
    out.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
      Stream s(out.seed, 3, i);
      for (std::size_t j = 0; j < d; ++j)
        out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m.design_mean + s.normal();
    }
    ResponseMechanism mech;
    if (m.response_mechanism == "above_fit")
      mech = [theta0](const Eigen::VectorXd& x, double y) { return y >= x.dot(theta0) ? 1.0 : 0.0; };
    else if (m.response_mechanism == "below_fit")
      mech = [theta0](const Eigen::VectorXd& x, double y) { return y <= x.dot(theta0) ? 1.0 : 0.0; };
    else
      mech = [c = m.response_constant](const Eigen::VectorXd&, double) { return c; };
    const double qx = m.q_x;
    out.response = sample_regression(out.X, theta0, sigma, eps, [qx](const Eigen::VectorXd&) { return qx; }, q, mech,
                                     out.seed);
    out.sample.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      ExtendedVector row;
      for (std::size_t j = 0; j < d; ++j) row.emplace_back(out.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      row.push_back(out.response[i]);
      out.sample.push_back(std::move(row));
    }
  } else {
    throw ConfigError("unknown model type '" + m.type + "'");
  }
  return out;
}

EstimateOutput run_estimator(const EstimatorSpec& est, const Replicate& data, const EstimatorContext& ctx) {
  const std::string kind = estimator_kind(est.name);
  EstimateOutput out;
  const std::size_t d = static_cast<std::size_t>(data.theta0.size());
  auto scalar = [&](const UniEstimate& u) {
    out.estimate = Eigen::VectorXd::Constant(1, u.value);
    out.diagnostics = u.meta;
  };
  if (kind == "regression") {
    if (data.X.size() == 0) throw ConfigError("estimator '" + est.name + "' needs regression data");
    if (est.name == "ols_observed") {
      out.estimate = ols_observed(data.X, data.response);
    } else {
      KsRegressionOptions o;
      o.restarts = static_cast<int>(opt(est, "restarts", 5));
      o.max_evals = static_cast<int>(opt(est, "max_evals", 2000));
      o.parallel = ctx.allow_threads;
      const auto r = ks_regression_full(data.X, data.response, ctx.sigma, ctx.epsilon, ctx.q, ctx.seed, o);
      out.estimate = r.theta;
      out.diagnostics["objective"] = r.objective;
      out.diagnostics["best_restart"] = static_cast<double>(r.best_restart);
      out.diagnostics["ols_fallback"] = r.ols_fallback ? 1.0 : 0.0;
      for (std::size_t k = 0; k < r.restart_objectives.size(); ++k) {
        out.diagnostics["restart" + std::to_string(k) + "_objective"] = r.restart_objectives[k];
        out.diagnostics["restart" + std::to_string(k) + "_start_objective"] = r.start_objectives[k];
      }
    }
    return out;
  }
  if (kind == "univariate") {
    if (d != 1) throw ConfigError("estimator '" + est.name + "' is univariate but the data have d = " + std::to_string(d));
    const UniSample z = to_univariate(data.sample);
    if (est.name == "observed_mean") scalar(observed_mean(z));
    else if (est.name == "average_of_extremes") scalar(average_of_extremes(z));
    else if (est.name == "mk_estimate") scalar(mk_estimate(z, ctx.epsilon, ctx.q, ctx.sigma));
    else {
      const std::vector<double> obs = observed_column(data.sample);
      if (obs.empty()) throw EstimationError(est.name + ": empty observed set");
      if (est.name == "trimmed_mean") {
        scalar(trimmed_mean(obs, ctx.epsilon, ctx.delta, ctx.seed));
      } else {
        double M = opt(est, "M", std::ceil(std::log(2.0 / ctx.delta)));
        M = std::clamp(M, 1.0, static_cast<double>(obs.size()));
        scalar(median_of_means(obs, static_cast<std::size_t>(M), ctx.seed));
        out.diagnostics["M"] = M;
      }
    }
    return out;
  }
  if (est.name == "complete_case_mean") {
    out.estimate = complete_case_mean(data.sample);
  } else if (est.name == "robust_descent") {
    std::vector<Eigen::VectorXd> rows;
    for (const auto& row : data.sample) {
      if (!fully_observed(row)) continue;
      Eigen::VectorXd x(static_cast<Eigen::Index>(d));
      for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(j)) = row[j].value();
      rows.push_back(std::move(x));
    }
    if (rows.empty()) throw EstimationError("robust_descent: no complete rows");
    out.estimate = robust_descent(rows, ctx.epsilon, ctx.delta, ctx.seed, static_cast<int>(opt(est, "sdp_iters", 20)));
  } else if (est.name == "iterative_robust_descent") {
    DescentConfig dc;
    dc.A1 = opt(est, "A1", dc.A1);
    dc.A2 = opt(est, "A2", dc.A2);
    dc.A3 = opt(est, "A3", dc.A3);
    dc.sdp_iters = static_cast<int>(opt(est, "sdp_iters", dc.sdp_iters));
    if (est.options.count("rank_bound")) dc.rank_bound = est.options.at("rank_bound");
    out.estimate = iterative_robust_descent(data.sample, ctx.epsilon, ctx.delta, dc, ctx.seed);
    const auto plan = iterative_plan(data.sample.size(), d, ctx.epsilon, ctx.delta, dc);
    out.diagnostics["T"] = plan.T;
    out.diagnostics["M"] = static_cast<double>(plan.M);
  } else {
    const Eigen::MatrixXd Sigma = ctx.sigma * ctx.sigma * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                                                      static_cast<Eigen::Index>(d));
    const auto r = multivariate_mk_full(data.sample, ctx.epsilon, ctx.q, Sigma, ctx.seed);
    out.estimate = r.theta;
    out.diagnostics["objective"] = r.objective;
    out.diagnostics["net_size"] = static_cast<double>(r.net.directions.size());
  }
  return out;
}

EstimateOutput estimate_dataset(const EstimatorSpec& est, const Dataset& data, const EstimatorContext& ctx) {
  Replicate rep;
  rep.seed = ctx.seed;
  if (data.rows.empty()) throw EstimationError("dataset has no rows");
  const bool regression = data.model.rfind("regression", 0) == 0;
  const std::size_t width = data.rows.front().size();
  if (regression) {
    if (width != data.d + 1) throw ConfigError("regression dataset must have d + 1 columns");
    rep.X.resize(static_cast<Eigen::Index>(data.rows.size()), static_cast<Eigen::Index>(data.d));
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
      for (std::size_t j = 0; j < data.d; ++j) {
        if (data.rows[i][j].is_missing()) throw ConfigError("regression covariates may not be missing");
        rep.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data.rows[i][j].value();
      }
      rep.response.push_back(data.rows[i][data.d]);
    }
  } else {
    if (width != data.d) throw ConfigError("dataset rows must have d columns");
    rep.sample = data.rows;
  }
  rep.theta0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.d));
  return run_estimator(est, rep, ctx);
}

std::vector<ResultRecord> run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  validate_config(config);
  const auto cells = grid_cells(config.grid);
  struct Task {
    const Cell* cell;
    std::size_t rep;
  };
  std::vector<Task> tasks;
  for (const auto& c : cells)
    for (std::size_t r = 0; r < config.reps; ++r) tasks.push_back({&c, r});
  std::vector<std::vector<ResultRecord>> results(tasks.size());
  std::vector<std::exception_ptr> fatal(tasks.size());
  const unsigned workers = std::max(1u, options.workers);

  auto do_task = [&](std::size_t k) {
    const Task& t = tasks[k];
    const Cell& c = *t.cell;
    auto& out = results[k];
    std::optional<Replicate> data;
    std::string sample_failure;
    try {
      data = make_replicate(config, c, t.rep);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      sample_failure = e.what();
    }
    const std::uint64_t seed = derive_seed(config.seed, c.index, t.rep);
    for (const auto& est : config.estimators) {
      ResultRecord rec{config.model.label(), est.name, c.n, c.d, c.epsilon, c.q, c.sigma, t.rep, seed,
                       std::nullopt, std::nullopt, sample_failure};
      if (data) {
        EstimatorContext ctx{c.epsilon, c.q, c.sigma, config.delta, derive_seed(seed, 0, 0), workers == 1};
        const auto start = std::chrono::steady_clock::now();
        try {
          const auto res = run_estimator(est, *data, ctx);
          const double err = (res.estimate - data->theta0).squaredNorm();
          if (std::isfinite(err)) rec.sq_error = err;
          else rec.failure = "non-finite estimate";
        } catch (const ConfigError&) {
          throw;
        } catch (const std::exception& e) {
          rec.failure = e.what();
        }
        if (options.timing)
          rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
      out.push_back(std::move(rec));
    }
  };

  if (workers == 1) {
    for (std::size_t k = 0; k < tasks.size(); ++k) do_task(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < tasks.size(); k = next++) {
          try {
            do_task(k);
          } catch (...) {
            fatal[k] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : fatal)
      if (e) std::rethrow_exception(e);
  }

  std::vector<ResultRecord> all;
  for (auto& v : results)
    for (auto& r : v) all.push_back(std::move(r));
  std::stable_sort(all.begin(), all.end(), [](const ResultRecord& a, const ResultRecord& b) {
    return std::tie(a.scenario, a.estimator, a.n, a.d, a.epsilon, a.q, a.sigma, a.rep) <
           std::tie(b.scenario, b.estimator, b.n, b.d, b.epsilon, b.q, b.sigma, b.rep);
  });
  return all;
}

namespace {

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_opt_real(const std::string& s) {
  if (s == "NA") return std::nullopt;
  return std::stod(s);
}

const char* kHeader = "scenario,estimator,n,d,epsilon,q,sigma,rep,seed,sq_error,runtime_ms";

}  // namespace

void write_csv(std::ostream& os, const std::vector<ResultRecord>& records) {
  os << kHeader << '\n';
  for (const auto& r : records) {
    os << r.scenario << ',' << r.estimator << ',' << r.n << ',' << r.d << ',' << format_real(r.epsilon) << ','
       << format_real(r.q) << ',' << format_real(r.sigma) << ',' << r.rep << ',' << r.seed << ','
       << opt_real(r.sq_error) << ',' << opt_real(r.runtime_ms) << '\n';
  }
}

std::vector<ResultRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kHeader) throw ConfigError("results CSV has an unexpected header");
  std::vector<ResultRecord> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 11) throw ConfigError("results CSV line " + std::to_string(lineno) + ": expected 11 fields");
    try {
      ResultRecord r;
      r.scenario = f[0];
      r.estimator = f[1];
      r.n = std::stoull(f[2]);
      r.d = std::stoull(f[3]);
      r.epsilon = std::stod(f[4]);
      r.q = std::stod(f[5]);
      r.sigma = std::stod(f[6]);
      r.rep = std::stoull(f[7]);
      r.seed = std::stoull(f[8]);
      r.sq_error = parse_opt_real(f[9]);
      r.runtime_ms = parse_opt_real(f[10]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw ConfigError("results CSV line " + std::to_string(lineno) + ": malformed field");
    }
  }
  return out;
}

double empirical_quantile(std::vector<double> errors, double delta) {
  if (errors.empty()) throw SizeError("empirical_quantile: no errors");
  if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("empirical_quantile: delta outside (0, 1]");
  const double N = static_cast<double>(errors.size());
  // 1e-9 absorbs rounding in (1 - delta) N when it is an integer.
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil((1.0 - delta) * N - 1e-9)));
  std::sort(errors.begin(), errors.end());
  return errors[std::min(rank, errors.size()) - 1];
}

std::optional<double> log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) return std::nullopt;
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = std::log(x[k]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[k]) - my);
  }
  if (sxx <= 0.0) return std::nullopt;
  return sxy / sxx;
}

std::vector<RateRow> rate_table(const std::vector<ResultRecord>& records, const std::vector<std::string>& group_by,
                                double delta) {
  static const std::set<std::string> allowed = {"scenario", "estimator", "d", "epsilon", "q", "sigma"};
  std::set<std::string> g;
  for (const auto& k : group_by) {
    if (!allowed.count(k)) throw ConfigError("rate_table: cannot group by '" + k + "'");
    g.insert(k);
  }
  using Key = std::tuple<std::string, std::string, std::optional<std::size_t>, std::optional<double>,
                         std::optional<double>, std::optional<double>>;
  std::map<Key, std::map<std::size_t, std::vector<double>>> groups;
  for (const auto& r : records) {
    Key key{g.count("scenario") ? r.scenario : "*", g.count("estimator") ? r.estimator : "*",
            g.count("d") ? std::optional<std::size_t>(r.d) : std::nullopt,
            g.count("epsilon") ? std::optional<double>(r.epsilon) : std::nullopt,
            g.count("q") ? std::optional<double>(r.q) : std::nullopt,
            g.count("sigma") ? std::optional<double>(r.sigma) : std::nullopt};
    auto& cell = groups[key][r.n];
    if (r.sq_error) cell.push_back(*r.sq_error);
  }
  std::vector<RateRow> out;
  for (const auto& [key, by_n] : groups) {
    std::vector<RateRow> rows;
    std::vector<double> xs, ys;
    for (const auto& [n, errs] : by_n) {
      RateRow row;
      std::tie(row.scenario, row.estimator, row.d, row.epsilon, row.q, row.sigma) = key;
      row.n = n;
      row.count = errs.size();
      if (!errs.empty()) {
        row.quantile = empirical_quantile(errs, delta);
        xs.push_back(static_cast<double>(n));
        ys.push_back(*row.quantile);
      }
      rows.push_back(std::move(row));
    }
    const auto slope = log_log_slope(xs, ys);
    for (auto& row : rows) {
      row.slope = slope;
      out.push_back(std::move(row));
    }
  }
  return out;
}

void write_rate_table(std::ostream& os, const std::vector<RateRow>& rows) {
  os << "scenario,estimator,d,epsilon,q,sigma,n,count,quantile,slope\n";
  for (const auto& r : rows) {
    os << r.scenario << ',' << r.estimator << ',' << (r.d ? std::to_string(*r.d) : "*") << ','
       << (r.epsilon ? format_real(*r.epsilon) : "*") << ',' << (r.q ? format_real(*r.q) : "*") << ','
       << (r.sigma ? format_real(*r.sigma) : "*") << ',' << r.n << ',' << r.count << ',' << opt_real(r.quantile)
       << ',' << opt_real(r.slope) << '\n';
  }
}

std::vector<std::string> generate_datasets(const ScenarioConfig& config, const std::string& out_dir) {
  validate_config(config);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create '" + out_dir + "': " + ec.message());
  std::vector<std::string> paths;
  for (const auto& c : grid_cells(config.grid)) {
    for (std::size_t r = 0; r < config.reps; ++r) {
      const Replicate rep = make_replicate(config, c, r);
      Dataset ds{c.d, config.model.type, rep.seed, rep.sample};
      const std::string path = (std::filesystem::path(out_dir) / (config.model.label() + "_cell" +
                                                                  std::to_string(c.index) + "_rep" +
                                                                  std::to_string(r) + ".tsv"))
                                   .string();
      write_dataset_file(path, ds);
      paths.push_back(path);
    }
  }
  return paths;
}

}  // namespace mnar
