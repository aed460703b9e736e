#include "netid/pipeline.hpp"

#include <cmath>

#include "netid/error.hpp"

namespace netid {

using nlohmann::json;

Method parse_method(const std::string& text) {
  if (text == "direct") return Method::kDirect;
  if (text == "indirect") return Method::kIndirect;
  if (text == "direct-from-indirect") return Method::kDirectFromIndirect;
  throw Error(ErrorCode::kConfig, "unknown method '" + text + "' (direct|indirect|direct-from-indirect)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kDirect: return "direct";
    case Method::kIndirect: return "indirect";
    case Method::kDirectFromIndirect: return "direct-from-indirect";
  }
  return "direct";
}

std::vector<ParameterVector> initial_points(const ExperimentConfig& config, const Dataset& data) {
  std::vector<ParameterVector> out;
  if (config.init_strategy == InitStrategy::kIndirect) {
    out.push_back(indirect_identify(config.topology, data).theta_init);
  } else if (config.init_strategy == InitStrategy::kFile) {
    json j;
    try {
      j = json::parse(read_file(config.init_file));
      for (const auto& row : j) out.push_back(vector_from_json(row));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kSchema, config.init_file + ": expected an array of parameter vectors (" + e.what() + ")");
    }
    for (const auto& v : out) {
      if (v.size() != config.topology.theta_size()) {
        throw Error(ErrorCode::kSchema, config.init_file + ": parameter vector length does not match the topology");
      }
    }
  }
  return out;
}

EstimationResult estimate(const ExperimentConfig& config, const Dataset& data, Method method) {
  if (data.observed.cols() != config.topology.observed_count() || data.r.cols() != config.topology.exogenous) {
    throw Error(ErrorCode::kSchema, "dataset columns do not match the configured topology");
  }
  EstimationResult out;
  out.method = method;
  if (method != Method::kDirect) out.indirect = indirect_identify(config.topology, data);
  if (method == Method::kIndirect) return out;

  LikelihoodOptions lo;
  lo.dof = config.dof;
  const LikelihoodWorkspace ws(config.topology, data.r, data.observed, lo);
  if (method == Method::kDirectFromIndirect) {
    out.runs = multistart(ws, config.optimizer, 1, {out.indirect->theta_init});
  } else {
    out.runs = multistart(ws, config.optimizer, config.n_starts, initial_points(config, data));
  }
  return out;
}

Provenance provenance_of(const ExperimentConfig& config) {
  return {config_hash(config_to_json(config)), config.seed};
}

json results_to_json(const ExperimentConfig& config, const EstimationResult& result) {
  const Provenance prov = provenance_of(config);
  json j;
  j["provenance"] = {{"config_hash", prov.config_hash}, {"seed", prov.seed}, {"version", "1.0.0"}};
  j["config"] = config_to_json(config);
  j["method"] = to_string(result.method);
  json runs = json::array();
  for (const auto& r : result.runs) runs.push_back(to_json(r));
  j["runs"] = runs;
  if (!result.runs.empty()) j["best_run_index"] = result.runs.front().run_index;
  if (result.indirect) j["indirect"] = to_json(*result.indirect);
  return j;
}

FitReport evaluate_models(const ExperimentConfig& config, std::span<const SubsystemModel> models,
                          std::uint64_t fresh_seed, FitVariant variant) {
  const ParameterVector truth = config.truth();
  const Dataset fresh = generate_dataset(config.topology, truth, config.n, config.lambda_true, fresh_seed);
  const Matrix e = config.evaluation_noise == EvaluationNoise::kShared
                       ? *fresh.disturbance
                       : Matrix::Zero(fresh.r.rows(), config.topology.subsystems);
  const Matrix reference = simulate_network(truth, config.topology, fresh.r, e);
  const Matrix estimate = simulate_network(models, config.topology, fresh.r, e);
  if (!estimate.allFinite()) throw Error(ErrorCode::kEvaluation, "estimated network diverged in simulation");
  return evaluate_fit(estimate, reference, config.topology, variant);
}

EvaluationReport evaluate_results(const ExperimentConfig& config, const json& results,
                                  std::uint64_t fresh_seed, FitVariant variant) {
  EvaluationReport rep;
  rep.fresh_seed = fresh_seed;
  try {
    if (results.contains("runs") && !results["runs"].empty()) {
      const RunResult best = run_from_json(results["runs"][0]);
      const auto models = unpack_theta(best.theta_hat, config.topology);
      rep.direct = evaluate_models(config, models, fresh_seed, variant);
    }
    if (results.contains("indirect")) {
      std::vector<SubsystemModel> models;
      for (const auto& m : results["indirect"].at("high_order")) models.push_back(subsystem_from_json(m));
      rep.indirect = evaluate_models(config, models, fresh_seed, variant);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("malformed results document: ") + e.what());
  }
  if (!rep.direct && !rep.indirect) throw Error(ErrorCode::kEvaluation, "results contain no estimate");
  return rep;
}

json report_to_json(const ExperimentConfig& config, const EvaluationReport& report, FitVariant variant) {
  const Provenance prov = provenance_of(config);
  json j;
  j["provenance"] = {{"config_hash", prov.config_hash}, {"seed", prov.seed}, {"fresh_seed", report.fresh_seed}};
  j["fit_variant"] = to_string(variant);
  if (report.direct) j["direct"] = to_json(*report.direct);
  if (report.indirect) j["indirect"] = to_json(*report.indirect);
  if (report.direct && report.indirect) {
    j["improvement"] = {{"observed", report.direct->observed - report.indirect->observed},
                        {"missing", report.direct->missing - report.indirect->missing}};
  }
  return j;
}

namespace {

void append_bode(std::string& out, std::span<const double> omegas, int system, const std::string& source,
                 const Polynomial& b, const Polynomial& a, double ts) {
  const auto fr = freq_response(b, a, omegas, ts);
  char buf[256];
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%d,%s,%.17g,%.17g\n", omegas[k], system, source.c_str(),
                  fr.magnitude_db[k], fr.phase_deg[k]);
    out += buf;
  }
}

}  // namespace

std::string bode_csv(const ExperimentConfig& config, const json& results, std::span<const double> omegas,
                     int rank_cutoff) {
  if (omegas.empty()) throw Error(ErrorCode::kInvalidInput, "empty frequency grid");
  const bool has_runs = results.contains("runs") && !results["runs"].empty();
  if (!has_runs && !results.contains("indirect")) throw Error(ErrorCode::kEvaluation, "results contain no estimate");
  const Provenance prov = provenance_of(config);
  std::string out = "# netid bode config_hash=" + prov.config_hash + " seed=" + std::to_string(prov.seed) + "\n";
  out += "omega,system,source,magnitude_db,phase_deg\n";
  const int m = config.topology.subsystems;
  const auto truth = unpack_theta(config.truth(), config.topology);
  std::vector<std::pair<std::string, std::vector<SubsystemModel>>> sources;
  sources.emplace_back("true", truth);
  if (has_runs) {
    int rank = 0;
    for (const auto& rj : results["runs"]) {
      if (rank >= rank_cutoff) break;
      const RunResult run = run_from_json(rj);
      if (!std::isfinite(run.cost)) continue;
      ++rank;
      sources.emplace_back("direct-rank-" + std::to_string(rank), unpack_theta(run.theta_hat, config.topology));
    }
  }
  if (results.contains("indirect")) {
    std::vector<SubsystemModel> models;
    for (const auto& mj : results["indirect"].at("high_order")) models.push_back(subsystem_from_json(mj));
    sources.emplace_back("indirect", models);
  }
  for (int i = 0; i < m; ++i) {
    for (const auto& [name, models] : sources) {
      const auto& md = models[static_cast<std::size_t>(i)];
      append_bode(out, omegas, i + 1, name, md.b_poly(), md.a_poly(), config.ts);
    }
  }
  return out;
}

}  // namespace netid
