#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mnar/dataset_io.hpp"

namespace mnar {

/// Data-generating model of a scenario. Which fields are read depends on `type`:
///   mcar          base, theta, pattern, q_per_coordinate
///   realisable    base, theta, r, mechanism, mechanism_t (NaN = worst threshold)
///   arbitrary     base, theta, pattern, contaminant
///   adversary     which ("f1" or "f2"), a
///   two_point     which ("first" or "second"), r
///   regression    theta_vector, design_mean, response_mechanism, q_x
struct ModelSpec {
  std::string type = "mcar";
  std::string name;  // scenario label; defaults to type
  std::string base = "gaussian";  // gaussian | sub_weibull | uniform
  double theta = 0.0;
  double r = 2.0;
  std::string pattern = "independent";  // independent | all_or_nothing
  std::vector<double> q_per_coordinate;  // overrides the grid q for mcar/arbitrary when set
  std::string mechanism = "threshold_above";  // threshold_above | threshold_below | tails_only | constant
  double mechanism_t = 0.0;
  double contaminant = 0.0;  // arbitrary: point mass at contaminant * 1
  std::string which;
  double a = 1.0;
  std::vector<double> theta_vector;  // regression; default (1, -2, 1, -2, ...)
  double design_mean = 0.0;
  std::string response_mechanism = "above_fit";  // above_fit | below_fit | constant
  double response_constant = 0.5;
  double q_x = 1.0;

  std::string label() const { return name.empty() ? type : name; }
};

struct EstimatorSpec {
  std::string name;
  std::map<std::string, double> options;  // e.g. M, A1, A2, A3, sdp_iters
};

struct GridSpec {
  std::vector<std::size_t> n, d;
  std::vector<double> epsilon, q, sigma;
};

struct ScenarioConfig {
  ModelSpec model;
  std::vector<EstimatorSpec> estimators;
  GridSpec grid;
  std::size_t reps = 1;
  double delta = 0.1;
  std::uint64_t seed = 0;
};

// JSON with exactly the keys model, estimators, grid, reps, delta, seed. Throws ConfigError.
ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);

struct Cell {
  std::size_t index = 0;
  std::size_t n = 0, d = 0;
  double epsilon = 0.0, q = 1.0, sigma = 1.0;
};
// Grid cells in row-major order over (n, d, epsilon, q, sigma).
std::vector<Cell> grid_cells(const GridSpec& grid);

/// One replication's data together with the truth.
struct Replicate {
  std::vector<ExtendedVector> sample;  // covariates + response for regression
  Eigen::MatrixXd X;                   // regression design (empty otherwise)
  std::vector<ExtendedValue> response;  // regression responses (empty otherwise)
  Eigen::VectorXd theta0;
  std::uint64_t seed = 0;
};
Replicate make_replicate(const ScenarioConfig& config, const Cell& cell, std::size_t rep);

struct EstimateOutput {
  Eigen::VectorXd estimate;
  std::map<std::string, double> diagnostics;
};

struct EstimatorContext {
  double epsilon = 0.0, q = 1.0, sigma = 1.0, delta = 0.1;
  std::uint64_t seed = 0;
  bool allow_threads = true;
};

EstimateOutput run_estimator(const EstimatorSpec& est, const Replicate& data, const EstimatorContext& ctx);
// Same, on a dataset read from disk (regression when data.model starts with "regression").
EstimateOutput estimate_dataset(const EstimatorSpec& est, const Dataset& data, const EstimatorContext& ctx);

struct ResultRecord {
  std::string scenario, estimator;
  std::size_t n = 0, d = 0;
  double epsilon = 0.0, q = 0.0, sigma = 0.0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  std::optional<double> sq_error;
  std::optional<double> runtime_ms;
  std::string failure;  // not written to CSV
};

struct RunOptions {
  unsigned workers = 1;
  bool timing = false;  // fill runtime_ms; off by default so the CSV is byte-reproducible
};

// Throws ConfigError for invalid grids or estimator/model pairs.
void validate_config(const ScenarioConfig& config);
std::vector<ResultRecord> run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

void write_csv(std::ostream& os, const std::vector<ResultRecord>& records);
std::vector<ResultRecord> read_csv(std::istream& is);

// Order statistic of rank ceil((1 - delta) N), at least 1.
double empirical_quantile(std::vector<double> errors, double delta);

// Least-squares slope of log(y) on log(x); nullopt with fewer than two distinct x or y <= 0.
std::optional<double> log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

struct RateRow {
  std::string scenario, estimator;
  std::optional<std::size_t> d;
  std::optional<double> epsilon, q, sigma;
  std::size_t n = 0;
  std::size_t count = 0;
  std::optional<double> quantile;
  std::optional<double> slope;
};

// group_by is a subset of {scenario, estimator, d, epsilon, q, sigma}; other fields are pooled.
std::vector<RateRow> rate_table(const std::vector<ResultRecord>& records, const std::vector<std::string>& group_by,
                                double delta);
void write_rate_table(std::ostream& os, const std::vector<RateRow>& rows);

// One file per (cell, rep): <out>/<scenario>_cell<k>_rep<r>.tsv. Returns the paths written.
std::vector<std::string> generate_datasets(const ScenarioConfig& config, const std::string& out_dir);

}  // namespace mnar
