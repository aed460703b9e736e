#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>

#include <CLI11.hpp>

#include "netid/error.hpp"
#include "netid/pipeline.hpp"

namespace fs = std::filesystem;
using namespace netid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kSchema:
    case ErrorCode::kInvalidParameter:
    case ErrorCode::kInvalidDimension:
    case ErrorCode::kUnsupportedTopology:
      return kExitConfig;
    case ErrorCode::kIo:
      return kExitIo;
    default:
      return kExitNumerical;
  }
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  ExperimentConfig config = load_config(config_path);
  if (seed) {
    config.seed = *seed;
    config.optimizer.seed = *seed;
  }
  const fs::path dir = out_dir.empty() ? fs::path(config.output_dir) : fs::path(out_dir);
  const Dataset data = generate_dataset(config.topology, config.truth(), config.n, config.lambda_true, config.seed);
  const Provenance prov = provenance_of(config);
  write_file_atomic(dir / "dataset.csv", dataset_csv(data, config.topology, prov));
  write_file_atomic(dir / "ground_truth.csv", ground_truth_csv(*data.full_state, config.topology, prov));
  nlohmann::json echo = config_to_json(config);
  echo["provenance"] = {{"config_hash", prov.config_hash}, {"seed", prov.seed}};
  write_file_atomic(dir / "config.json", echo.dump(2) + "\n");
  std::cout << "wrote " << (dir / "dataset.csv").string() << " (" << data.n << " samples)\n";
  return kExitOk;
}

int cmd_estimate(const std::string& config_path, const std::string& dataset_path, const std::string& method,
                 std::optional<int> n_starts, std::optional<std::uint64_t> seed, const std::string& out) {
  ExperimentConfig config = load_config(config_path);
  if (n_starts) {
    if (*n_starts < 1) throw Error(ErrorCode::kConfig, "--n-starts must be >= 1");
    config.n_starts = *n_starts;
  }
  if (seed) config.optimizer.seed = *seed;
  const Dataset data = read_dataset_csv(dataset_path, config.topology);
  config.n = data.n;
  const EstimationResult result = estimate(config, data, parse_method(method));
  const fs::path path = out.empty() ? fs::path(config.output_dir) / "results.json" : fs::path(out);
  write_file_atomic(path, results_to_json(config, result).dump(2) + "\n");
  if (!result.runs.empty()) {
    const auto& best = result.runs.front();
    std::cout << "best run " << best.run_index << ": cost " << best.cost << ", lambda " << best.lambda_hat
              << ", " << to_string(best.termination) << " after " << best.iterations << " iterations\n";
  }
  std::cout << "wrote " << path.string() << "\n";
  return kExitOk;
}

ExperimentConfig config_from_results(const nlohmann::json& results) {
  if (!results.contains("config")) throw Error(ErrorCode::kSchema, "results document has no config echo");
  return parse_config(results["config"].dump(2), "results.config");
}

int cmd_evaluate(const std::string& results_path, std::optional<std::uint64_t> seed, const std::string& variant,
                 const std::string& out) {
  const auto results = nlohmann::json::parse(read_file(results_path));
  const ExperimentConfig config = config_from_results(results);
  const FitVariant fv = variant.empty() ? config.fit_variant : parse_fit_variant(variant);
  const auto report = evaluate_results(config, results, seed.value_or(config.fresh_seed()), fv);
  const auto j = report_to_json(config, report, fv);
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_file_atomic(out, j.dump(2) + "\n");
    std::cout << "wrote " << out << "\n";
  }
  return kExitOk;
}

int cmd_bode(const std::string& results_path, std::optional<double> wmin, std::optional<double> wmax, int count,
             int rank_cutoff, const std::string& out) {
  const auto results = nlohmann::json::parse(read_file(results_path));
  const ExperimentConfig config = config_from_results(results);
  const double lo = wmin.value_or(1e-2);
  const double hi = wmax.value_or(std::numbers::pi / config.ts);
  if (!(lo > 0.0 && hi > lo) || count < 1) throw Error(ErrorCode::kConfig, "invalid frequency grid");
  if (rank_cutoff < 0) throw Error(ErrorCode::kConfig, "--rank-cutoff must be >= 0");
  const auto omegas = logspace(lo, hi, static_cast<std::size_t>(count));
  const std::string csv = bode_csv(config, results, omegas, rank_cutoff);
  const fs::path path = out.empty() ? fs::path(config.output_dir) / "bode.csv" : fs::path(out);
  write_file_atomic(path, csv);
  std::cout << "wrote " << path.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum-likelihood identification of dynamic networks with missing data"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, results_path, out, method = "direct", fit_variant;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_starts;
  std::optional<double> omega_min, omega_max;
  int omega_count = 200;
  int rank_cutoff = 10;

  auto* sim = app.add_subcommand("simulate", "Generate a dataset from the configured network");
  sim->add_option("--config", config_path, "Experiment config (JSON)")->required();
  sim->add_option("--seed", seed, "Override the data seed");
  sim->add_option("--out", out, "Output directory");

  auto* est = app.add_subcommand("estimate", "Estimate subsystem parameters from a dataset");
  est->add_option("--config", config_path, "Experiment config (JSON)")->required();
  est->add_option("--dataset", dataset_path, "Dataset CSV")->required();
  est->add_option("--method", method, "direct | indirect | direct-from-indirect")
      ->check(CLI::IsMember({"direct", "indirect", "direct-from-indirect"}));
  est->add_option("--n-starts", n_starts, "Number of random starts");
  est->add_option("--seed", seed, "Override the optimizer seed");
  est->add_option("--out", out, "Results JSON path");

  auto* ev = app.add_subcommand("evaluate", "Fit of the estimates on a fresh realization");
  ev->add_option("--results", results_path, "Results JSON")->required();
  ev->add_option("--seed", seed, "Fresh seed");
  ev->add_option("--fit-variant", fit_variant, "standard | literal")->check(CLI::IsMember({"standard", "literal"}));
  ev->add_option("--out", out, "Report JSON path (stdout when omitted)");

  auto* bode = app.add_subcommand("bode", "Frequency responses of true and estimated subsystems");
  bode->add_option("--results", results_path, "Results JSON")->required();
  bode->add_option("--omega-min", omega_min, "Lowest frequency [rad/s]");
  bode->add_option("--omega-max", omega_max, "Highest frequency [rad/s], default pi/Ts");
  bode->add_option("--omega-count", omega_count, "Number of log-spaced frequencies");
  bode->add_option("--rank-cutoff", rank_cutoff, "Number of best direct runs to emit");
  bode->add_option("--out", out, "Bode CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out, seed);
    if (est->parsed()) return cmd_estimate(config_path, dataset_path, method, n_starts, seed, out);
    if (ev->parsed()) return cmd_evaluate(results_path, seed, fit_variant, out);
    if (bode->parsed()) return cmd_bode(results_path, omega_min, omega_max, omega_count, rank_cutoff, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
