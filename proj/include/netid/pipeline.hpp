#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netid/io.hpp"

namespace netid {

enum class Method { kDirect, kIndirect, kDirectFromIndirect };
Method parse_method(const std::string& text);
std::string to_string(Method m);

struct EstimationResult {
  Method method = Method::kDirect;
  std::vector<RunResult> runs;  // sorted by cost
  std::optional<IndirectResult> indirect;
};

/// Initial points for the direct method under the configured strategy
/// (empty for random-stable).
std::vector<ParameterVector> initial_points(const ExperimentConfig& config, const Dataset& data);

EstimationResult estimate(const ExperimentConfig& config, const Dataset& data, Method method);

Provenance provenance_of(const ExperimentConfig& config);
nlohmann::json results_to_json(const ExperimentConfig& config, const EstimationResult& result);

struct EvaluationReport {
  std::uint64_t fresh_seed = 0;
  std::optional<FitReport> direct;
  std::optional<FitReport> indirect;
};

/// Signals of the true network and of `models` on a fresh realization of r
/// (and e, shared between both when configured).
EvaluationReport evaluate_results(const ExperimentConfig& config, const nlohmann::json& results,
                                  std::uint64_t fresh_seed, FitVariant variant);
FitReport evaluate_models(const ExperimentConfig& config, std::span<const SubsystemModel> models,
                          std::uint64_t fresh_seed, FitVariant variant);
nlohmann::json report_to_json(const ExperimentConfig& config, const EvaluationReport& report,
                              FitVariant variant);

/// Rows "omega,system,source,magnitude_db,phase_deg" for the true blocks,
/// the best `rank_cutoff` direct runs and the indirect estimate.
std::string bode_csv(const ExperimentConfig& config, const nlohmann::json& results,
                     std::span<const double> omegas, int rank_cutoff);

}  // namespace netid
