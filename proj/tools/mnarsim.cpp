#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mnar/dataset_io.hpp"
#include "mnar/errors.hpp"
#include "mnar/harness.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kNumericError = 2;

int cmd_generate(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = mnar::load_config(config_path);
  const auto paths = mnar::generate_datasets(cfg, out_dir);
  std::cerr << "wrote " << paths.size() << " datasets to " << out_dir << '\n';
  return 0;
}

int cmd_estimate(const std::string& name, const std::string& data_path, double eps, double q, double sigma,
                 double delta, std::uint64_t seed) {
  const auto data = mnar::read_dataset_file(data_path);
  mnar::EstimatorSpec est{name, {}};
  mnar::EstimatorContext ctx{eps, q, sigma, delta, seed, true};
  const auto out = mnar::estimate_dataset(est, data, ctx);
  nlohmann::ordered_json j;
  j["estimate"] = std::vector<double>(out.estimate.data(), out.estimate.data() + out.estimate.size());
  j["diagnostics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : out.diagnostics) j["diagnostics"][k] = v;
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path, unsigned workers, bool timing) {
  const auto cfg = mnar::load_config(config_path);
  const auto records = mnar::run_scenario(cfg, {workers, timing});
  std::size_t failed = 0;
  for (const auto& r : records) {
    if (r.sq_error) continue;
    ++failed;
    std::cerr << "failure: " << r.estimator << " n=" << r.n << " d=" << r.d << " rep=" << r.rep << ": " << r.failure
              << '\n';
  }
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw mnar::ConfigError("cannot open '" + out_path + "' for writing");
  mnar::write_csv(os, records);
  std::cerr << records.size() << " records (" << failed << " failed) -> " << out_path << '\n';
  return 0;
}

int cmd_report(const std::string& in_path, double delta, const std::string& out_path, const std::string& group_by) {
  std::ifstream is(in_path);
  if (!is) throw mnar::ConfigError("cannot open '" + in_path + "'");
  const auto records = mnar::read_csv(is);
  std::vector<std::string> keys;
  std::size_t start = 0;
  while (start <= group_by.size()) {
    const auto comma = group_by.find(',', start);
    const auto k = group_by.substr(start, comma - start);
    if (!k.empty()) keys.push_back(k);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  const auto rows = mnar::rate_table(records, keys, delta);
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw mnar::ConfigError("cannot open '" + out_path + "' for writing");
  mnar::write_rate_table(os, rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo harness for mean and regression estimation with missing data"};
  app.require_subcommand(1);

  std::string config_path, out_path, data_path, estimator, in_path;
  std::string group_by = "scenario,estimator,d,epsilon,q,sigma";
  double eps = 0.0, q = 1.0, sigma = 1.0, delta = 0.1;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool timing = false;

  auto* gen = app.add_subcommand("generate", "write dataset dumps for every grid cell and replication");
  gen->add_option("--config", config_path)->required();
  gen->add_option("--out", out_path, "output directory")->required();

  auto* est = app.add_subcommand("estimate", "run one estimator on a dataset dump");
  est->add_option("--estimator", estimator)->required();
  est->add_option("--data", data_path)->required();
  est->add_option("--epsilon", eps);
  est->add_option("--q", q);
  est->add_option("--sigma", sigma);
  est->add_option("--delta", delta);
  est->add_option("--seed", seed);

  auto* sim = app.add_subcommand("simulate", "run a scenario config and write results CSV");
  sim->add_option("--config", config_path)->required();
  sim->add_option("--out", out_path)->required();
  sim->add_option("--workers", workers)->check(CLI::Range(1u, 1024u));
  sim->add_flag("--timing", timing, "fill runtime_ms (makes the CSV run-dependent)");

  auto* rep = app.add_subcommand("report", "empirical quantiles and log-log slopes from a results CSV");
  rep->add_option("--in", in_path)->required();
  rep->add_option("--delta", delta)->required();
  rep->add_option("--out", out_path)->required();
  rep->add_option("--group-by", group_by, "comma-separated grouping fields");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*gen) return cmd_generate(config_path, out_path);
    if (*est) return cmd_estimate(estimator, data_path, eps, q, sigma, delta, seed);
    if (*sim) return cmd_simulate(config_path, out_path, workers, timing);
    if (*rep) return cmd_report(in_path, delta, out_path, group_by);
  } catch (const mnar::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericError;
  }
  return 0;
}
