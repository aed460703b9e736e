#include "netid/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "netid/error.hpp"

namespace netid {

void OptimizerSettings::validate() const {
  if (max_iter < 0) throw Error(ErrorCode::kInvalidParameter, "max_iter must be >= 0");
  if (!(grad_tol >= 0.0)) throw Error(ErrorCode::kInvalidParameter, "grad_tol must be >= 0");
  if (!(step_init > 0.0)) throw Error(ErrorCode::kInvalidParameter, "step_init must be > 0");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) {
    throw Error(ErrorCode::kInvalidParameter, "armijo_c must lie in (0, 1)");
  }
  if (!(shrink > 0.0 && shrink < 1.0)) {
    throw Error(ErrorCode::kInvalidParameter, "shrink must lie in (0, 1)");
  }
  if (max_backtracks < 1) throw Error(ErrorCode::kInvalidParameter, "max_backtracks must be >= 1");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kConverged: return "converged";
    case Termination::kMaxIterations: return "max_iterations";
    case Termination::kLineSearchFailed: return "line_search_failed";
    case Termination::kFailed: return "failed";
  }
  return "unknown";
}

namespace {

double safe_eval(const ObjectiveFn& f, const Vector& x) {
  try {
    return f(x);
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

std::optional<LineSearchResult> backtracking_search(const ObjectiveFn& f, const Vector& theta,
                                                    double f_theta, const Vector& g,
                                                    const OptimizerSettings& settings,
                                                    double step) {
  const double g2 = g.squaredNorm();
  double t = step;
  for (int k = 0; k <= settings.max_backtracks; ++k) {
    const Vector trial = theta - t * g;
    const double v = safe_eval(f, trial);
    if (std::isfinite(v) && v <= f_theta - settings.armijo_c * t * g2) {
      return LineSearchResult{t, v, k + 1};
    }
    t *= settings.shrink;
  }
  return std::nullopt;
}

std::optional<LineSearchResult> backtracking_search(const ObjectiveFn& f, const Vector& theta,
                                                    double f_theta, const Vector& g,
                                                    const OptimizerSettings& settings) {
  return backtracking_search(f, theta, f_theta, g, settings, settings.step_init);
}

RunResult gradient_descent(const ObjectiveFn& value_only, const ValueGradFn& f,
                           const ParameterVector& theta0, const OptimizerSettings& settings) {
  settings.validate();
  RunResult out;
  out.theta_init = theta0;
  Vector theta = theta0;
  Vector grad;
  double cost = 0.0;
  try {
    cost = f(theta, grad);
  } catch (const Error& e) {
    throw Error(ErrorCode::kInvalidStart, std::string("cost not finite at the start: ") + e.what());
  }
  if (!std::isfinite(cost) || !grad.allFinite()) {
    throw Error(ErrorCode::kInvalidStart, "cost not finite at the start");
  }
  double step = settings.step_init;
  out.trace.push_back({cost, grad.norm()});
  out.termination = Termination::kMaxIterations;
  int it = 0;
  for (; it < settings.max_iter; ++it) {
    const double gn = grad.norm();
    if (gn <= settings.grad_tol * (1.0 + std::abs(cost))) {
      out.termination = Termination::kConverged;
      break;
    }
    const double start = settings.warm_start_step ? std::min(settings.step_init, step / settings.shrink)
                                                  : settings.step_init;
    auto ls = backtracking_search(value_only, theta, cost, grad, settings, start);
    if (!ls && start < settings.step_init) {
      ls = backtracking_search(value_only, theta, cost, grad, settings, settings.step_init);
    }
    if (!ls) {
      out.termination = Termination::kLineSearchFailed;
      break;
    }
    step = ls->step;
    const Vector next = theta - step * grad;
    Vector next_grad;
    double next_cost = 0.0;
    try {
      next_cost = f(next, next_grad);
    } catch (const Error&) {
      out.termination = Termination::kLineSearchFailed;
      break;
    }
    if (!std::isfinite(next_cost) || !next_grad.allFinite()) {
      out.termination = Termination::kLineSearchFailed;
      break;
    }
    theta = next;
    cost = next_cost;
    grad = next_grad;
    out.trace.push_back({cost, grad.norm()});
  }
  if (out.termination == Termination::kMaxIterations &&
      grad.norm() <= settings.grad_tol * (1.0 + std::abs(cost))) {
    out.termination = Termination::kConverged;
  }
  out.theta_hat = theta;
  out.cost = cost;
  out.grad_norm = grad.norm();
  out.iterations = it;
  out.converged = out.termination == Termination::kConverged;
  return out;
}

RunResult gradient_descent(const ValueGradFn& f, const ParameterVector& theta0,
                           const OptimizerSettings& settings) {
  const ObjectiveFn value_only = [&f](const Vector& x) {
    Vector scratch;
    return f(x, scratch);
  };
  return gradient_descent(value_only, f, theta0, settings);
}

RunResult gradient_descent(const LikelihoodWorkspace& workspace, const ParameterVector& theta0,
                           const OptimizerSettings& settings) {
  const ValueGradFn f = [&workspace](const Vector& x, Vector& g) {
    return workspace.value_and_gradient(x, g);
  };
  const ObjectiveFn value = [&workspace](const Vector& x) { return workspace.concentrated_nll(x); };
  RunResult out = gradient_descent(value, f, theta0, settings);
  try {
    out.lambda_hat = workspace.lambda_hat(out.theta_hat);
  } catch (const Error&) {
    out.lambda_hat = 0.0;
  }
  return out;
}

SamplingResult sample_stable_initialization(const NetworkTopology& topology, std::mt19937_64& rng,
                                            int max_attempts, double margin) {
  topology.validate();
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int p = topology.theta_size();
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    ParameterVector theta(p);
    for (int i = 0; i < p; ++i) theta(i) = unit(rng);
    const auto models = unpack_theta(theta, topology);
    bool ok = true;
    for (const auto& m : models) {
      if (!m.c.empty()) {
        Polynomial c{1.0};
        c.coeffs.insert(c.coeffs.end(), m.c.begin(), m.c.end());
        if (!is_stable_poly(c, margin)) {
          ok = false;
          break;
        }
      }
    }
    if (ok && closed_loop_is_stable(models, topology, margin)) return {theta, attempt};
  }
  throw Error(ErrorCode::kSamplingFailure,
              "no stable initialization after " + std::to_string(max_attempts) + " attempts");
}

std::uint64_t run_seed(std::uint64_t seed, int index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<RunResult> multistart(const LikelihoodWorkspace& workspace,
                                  const OptimizerSettings& settings, int n_starts,
                                  const std::vector<ParameterVector>& init_list) {
  if (n_starts < 1) throw Error(ErrorCode::kInvalidParameter, "n_starts must be >= 1");
  settings.validate();
  std::vector<RunResult> runs;
  runs.reserve(static_cast<std::size_t>(n_starts));
  std::string failures;
  for (int i = 0; i < n_starts; ++i) {
    RunResult run;
    ParameterVector start;
    try {
      if (static_cast<std::size_t>(i) < init_list.size()) {
        start = init_list[static_cast<std::size_t>(i)];
      } else {
        std::mt19937_64 rng(run_seed(settings.seed, i));
        start = sample_stable_initialization(workspace.topology(), rng).theta;
      }
      run = gradient_descent(workspace, start, settings);
    } catch (const Error& e) {
      run.theta_init = start;
      run.theta_hat = start;
      run.cost = std::numeric_limits<double>::infinity();
      run.grad_norm = std::numeric_limits<double>::infinity();
      run.termination = Termination::kFailed;
      run.message = e.what();
      failures += "run " + std::to_string(i) + ": " + e.what() + "\n";
    }
    run.run_index = i;
    runs.push_back(std::move(run));
  }
  std::stable_sort(runs.begin(), runs.end(), [](const RunResult& a, const RunResult& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.grad_norm != b.grad_norm) return a.grad_norm < b.grad_norm;
    return a.run_index < b.run_index;
  });
  if (!std::isfinite(runs.front().cost)) {
    throw Error(ErrorCode::kAllRunsFailed, "all runs failed:\n" + failures);
  }
  return runs;
}

}  // namespace netid
