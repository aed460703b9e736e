#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netid/netmodel.hpp"

namespace netid {

/// Zero initial conditions; returns N x 2M signals in natural order
/// (y1..yM, u1..uM). r is N x Q, e is N x M. Throws kWellPosedness when the
/// instantaneous loop I - diag(b0) Lambda is singular.
Matrix simulate_network(std::span<const SubsystemModel> models, const NetworkTopology& topology,
                        const Matrix& r, const Matrix& e);
Matrix simulate_network(const ParameterVector& theta, const NetworkTopology& topology,
                        const Matrix& r, const Matrix& e);

/// Portable random streams: mt19937_64 words, 53-bit uniforms and
/// Box-Muller normals, so a seed gives the same numbers on every platform.
class SignalRng {
 public:
  explicit SignalRng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double rademacher();
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct Dataset {
  std::size_t n = 0;
  Matrix r;                  // N x Q
  Matrix observed;           // N x n_obs, columns in topology.observed order
  std::vector<std::string> observed_names;
  std::optional<Matrix> full_state;  // N x 2M natural order
  std::optional<Matrix> disturbance; // N x M
  std::uint64_t seed = 0;
  double lambda_true = 0.0;
};

/// Draws r (Rademacher, row by row) and then e (Gaussian with variance
/// lambda_true, row by row) from one SignalRng(seed), simulates and extracts
/// the observed columns.
Dataset generate_dataset(const NetworkTopology& topology, const ParameterVector& theta_true,
                         std::size_t n, double lambda_true, std::uint64_t seed);

/// Observed columns of a natural-order state matrix.
Matrix extract_signals(const Matrix& state, std::span<const SignalId> ids, int subsystems);

enum class FitVariant { kStandard, kLiteral };
FitVariant parse_fit_variant(const std::string& text);
std::string to_string(FitVariant v);

/// 1 - |xhat - xref| / |d| with d = xref - mean(xref) (standard) or
/// d = xhat - mean(xref) (literal). Throws kUndefinedFit on a zero
/// denominator and kInvalidDimension for lengths below 2.
double fit_metric(const Vector& xhat, const Vector& xref, FitVariant variant = FitVariant::kStandard);

struct FitReport {
  double observed = 0.0;
  double missing = 0.0;
  std::map<std::string, double> per_signal;
  std::vector<std::string> missing_signals;
};

/// Missing signals that carry information: every unobserved y, and every
/// unobserved u whose Lambda row is nonzero (the rest equal Omega r).
std::vector<SignalId> evaluated_missing_signals(const NetworkTopology& topology);

/// Aggregate fits over the concatenated observed / evaluated-missing
/// signals plus per-signal fits (NaN where a signal's fit is undefined).
FitReport evaluate_fit(const Matrix& estimate, const Matrix& reference,
                       const NetworkTopology& topology, FitVariant variant = FitVariant::kStandard);

/// The three-subsystem benchmark network: u1 = y2 + y3 + r1, u2 = r2,
/// u3 = y1 + r3, second-order ARX blocks.
NetworkTopology experiment_topology(const std::vector<std::string>& observed = {"u3"});
std::vector<ContinuousPlant> experiment_plants();
std::vector<SubsystemModel> experiment_models(double ts);
ParameterVector experiment_theta(double ts);

}  // namespace netid
