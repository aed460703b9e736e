#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netid/indirect.hpp"
#include "netid/likelihood.hpp"
#include "netid/optimizer.hpp"
#include "netid/simulator.hpp"

namespace netid {

enum class InitStrategy { kRandomStable, kIndirect, kFile };
enum class EvaluationNoise { kNone, kShared };

struct ExperimentConfig {
  NetworkTopology topology;
  /// Ground truth: ZOH discretized plants, or an explicit theta.
  std::vector<ContinuousPlant> plants;
  std::optional<ParameterVector> theta_true;
  std::size_t n = 500;
  double ts = 0.5;
  double lambda_true = 0.1;
  std::uint64_t seed = 1;
  OptimizerSettings optimizer;
  int n_starts = 100;
  InitStrategy init_strategy = InitStrategy::kRandomStable;
  std::string init_file;
  VarianceDof dof = VarianceDof::kObserved;
  std::optional<std::uint64_t> evaluation_seed;
  EvaluationNoise evaluation_noise = EvaluationNoise::kNone;
  FitVariant fit_variant = FitVariant::kStandard;
  std::string output_dir = "out";

  /// Ground-truth parameter vector; throws kEvaluation when neither plants
  /// nor theta_true are given.
  ParameterVector truth() const;
  std::uint64_t fresh_seed() const { return evaluation_seed.value_or(seed + 1000); }
};

/// Parses and validates. Errors carry "<source>:<line>: " prefixes.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);
/// The benchmark setup with the given observed signals.
ExperimentConfig default_experiment_config(const std::vector<std::string>& observed = {"u3"});

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// "# netid dataset config_hash=<h> seed=<s>", then "k,r1..rQ,<observed>".
std::string dataset_csv(const Dataset& data, const NetworkTopology& topology, const Provenance& prov);
/// "# netid ground_truth ...", then "k,y1..yM,u1..uM".
std::string ground_truth_csv(const Matrix& state, const NetworkTopology& topology, const Provenance& prov);
/// Throws kSchema when the header does not match the topology.
Dataset read_dataset_csv(const std::filesystem::path& path, const NetworkTopology& topology);
Matrix read_ground_truth_csv(const std::filesystem::path& path, const NetworkTopology& topology);

nlohmann::json to_json(const RunResult& run);
RunResult run_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Polynomial& p);
Polynomial polynomial_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SubsystemModel& m);
SubsystemModel subsystem_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IndirectResult& r);
nlohmann::json to_json(const FitReport& r);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);

}  // namespace netid
