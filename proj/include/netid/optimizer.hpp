#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "netid/likelihood.hpp"

namespace netid {

struct OptimizerSettings {
  int max_iter = 5000;
  /// Stop when |grad| <= grad_tol * (1 + |cost|).
  double grad_tol = 1e-6;
  double step_init = 1.0;
  double armijo_c = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 40;
  std::uint64_t seed = 1;
  /// Start each line search from the previously accepted step divided by
  /// shrink (capped at step_init) instead of from step_init.
  bool warm_start_step = true;

  /// Throws kInvalidParameter when a field is out of range.
  void validate() const;
};

using ObjectiveFn = std::function<double(const Vector&)>;
/// Returns f(x) and writes grad f(x).
using ValueGradFn = std::function<double(const Vector&, Vector&)>;

struct LineSearchResult {
  double step = 0.0;
  double value = 0.0;
  int trials = 0;
};

/// Armijo backtracking along -g starting from `step`. Non-finite or throwing
/// trial values count as rejections. Empty when every trial was rejected.
std::optional<LineSearchResult> backtracking_search(const ObjectiveFn& f, const Vector& theta,
                                                    double f_theta, const Vector& g,
                                                    const OptimizerSettings& settings,
                                                    double step);
std::optional<LineSearchResult> backtracking_search(const ObjectiveFn& f, const Vector& theta,
                                                    double f_theta, const Vector& g,
                                                    const OptimizerSettings& settings);

enum class Termination { kConverged, kMaxIterations, kLineSearchFailed, kFailed };
std::string to_string(Termination t);

struct TracePoint {
  double cost = 0.0;
  double grad_norm = 0.0;
};

struct RunResult {
  ParameterVector theta_hat;
  double cost = 0.0;
  double lambda_hat = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  Termination termination = Termination::kFailed;
  std::vector<TracePoint> trace;
  int run_index = 0;
  ParameterVector theta_init;
  std::string message;
};

/// Throws kInvalidStart when the cost at theta0 is not finite. `value`
/// serves the line search; `value_grad` the accepted points.
RunResult gradient_descent(const ObjectiveFn& value, const ValueGradFn& value_grad,
                           const ParameterVector& theta0, const OptimizerSettings& settings);
RunResult gradient_descent(const ValueGradFn& f, const ParameterVector& theta0,
                           const OptimizerSettings& settings);
/// Runs on the concentrated cost of a workspace and fills lambda_hat.
RunResult gradient_descent(const LikelihoodWorkspace& workspace, const ParameterVector& theta0,
                           const OptimizerSettings& settings);

struct SamplingResult {
  ParameterVector theta;
  int attempts = 0;
};

/// Coefficients uniform on [-1, 1], resampled until the interconnection is
/// stable with the given margin and every C polynomial has its roots inside
/// the unit circle. Throws kSamplingFailure after max_attempts.
SamplingResult sample_stable_initialization(const NetworkTopology& topology, std::mt19937_64& rng,
                                            int max_attempts = 10000, double margin = 0.01);

/// Seed of run `index` derived from the base seed (splitmix64).
std::uint64_t run_seed(std::uint64_t seed, int index);

/// Runs n_starts descents. Run i starts from init_list[i] when supplied,
/// else from a stable sample drawn with run_seed(settings.seed, i). Failed
/// runs are kept with termination kFailed and infinite cost. Output sorted
/// by cost, then gradient norm, then run index. Throws kAllRunsFailed when
/// no run produced a finite cost.
std::vector<RunResult> multistart(const LikelihoodWorkspace& workspace,
                                  const OptimizerSettings& settings, int n_starts,
                                  const std::vector<ParameterVector>& init_list = {});

}  // namespace netid
