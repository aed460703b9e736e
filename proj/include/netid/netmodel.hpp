#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "netid/signals.hpp"

namespace netid {

using ParameterVector = Eigen::VectorXd;

enum class SignalKind { kOutput, kInput };

/// Identifies y^i (kOutput) or u^i (kInput); `index` is zero-based.
struct SignalId {
  SignalKind kind = SignalKind::kOutput;
  int index = 0;

  /// "y1".."yM", "u1".."uM"
  std::string name() const;
  static SignalId parse(std::string_view text);
  /// Position in the natural ordering (y^1..y^M, u^1..u^M).
  int natural_index(int subsystems) const {
    return kind == SignalKind::kOutput ? index : subsystems + index;
  }
  static SignalId from_natural_index(int natural, int subsystems);

  friend bool operator==(const SignalId&, const SignalId&) = default;
};

struct SubsystemOrders {
  int na = 0;
  int nb = 0;
  int nc = 0;

  int parameter_count() const { return na + nb + 1 + nc; }
  friend bool operator==(const SubsystemOrders&, const SubsystemOrders&) = default;
};

/// One ARMAX block
///   y_k = -sum a_j y_{k-j} + sum_{j>=0} b_j u_{k-j} + e_k + sum c_j e_{k-j}.
struct SubsystemModel {
  std::vector<double> a;  // a_1..a_na
  std::vector<double> b;  // b_0..b_nb
  std::vector<double> c;  // c_1..c_nc

  SubsystemOrders orders() const {
    return {static_cast<int>(a.size()), static_cast<int>(b.size()) - 1, static_cast<int>(c.size())};
  }
  /// Common degree of the q-polynomials below: max(na, nb, nc).
  int degree() const;
  Polynomial a_poly() const;
  Polynomial b_poly() const;
  Polynomial c_poly() const;
};

/// Interconnection u_k = Lambda y_k + Omega r_k plus the observed-signal
/// selection. Observed signals come first in the stacked variable, in the
/// listed order; the missing ones follow in natural order.
struct NetworkTopology {
  int subsystems = 0;  // M
  int exogenous = 0;   // Q
  Eigen::MatrixXi lambda;
  Eigen::MatrixXi omega;
  std::vector<SignalId> observed;
  std::vector<SubsystemOrders> orders;

  /// Throws kInvalidParameter on any structural violation.
  void validate() const;

  int signal_count() const { return 2 * subsystems; }
  int observed_count() const { return static_cast<int>(observed.size()); }
  int theta_size() const;
  /// Natural indices in stacked order (observed first).
  std::vector<int> signal_order() const;
  std::vector<SignalId> missing() const;
  bool is_observed(const SignalId& id) const;
  /// The M x 2M interconnection block [-Lambda, I] with columns in stacked
  /// order; the full A_2 is this matrix Kronecker I_N.
  Matrix interconnection_block() const;
};

ParameterVector pack_theta(std::span<const SubsystemModel> models);
std::vector<SubsystemModel> unpack_theta(const ParameterVector& theta,
                                         const NetworkTopology& topology);

/// First columns of T_y = T_c^{-1} T_a and -T_u = -T_c^{-1} T_b, truncated to
/// N taps (shorter when C = 1).
struct SubsystemFilters {
  std::vector<double> output;
  std::vector<double> input;
};

SubsystemFilters subsystem_filters(const SubsystemModel& model, std::size_t n);

/// A(theta) x + b = (e, 0) with A = [A1; A2], b = [b1; b2].
struct StackedSystem {
  Matrix a1;
  Matrix a2;
  Vector b1;
  Vector b2;
  int n_observed = 0;
  int n_missing = 0;

  Matrix a() const;
  Vector b() const;
};

/// r is N x Q.
StackedSystem assemble_stacked_system(const ParameterVector& theta,
                                      const NetworkTopology& topology, std::size_t n,
                                      const Matrix& r);
StackedSystem assemble_stacked_system(std::span<const SubsystemModel> models,
                                      const NetworkTopology& topology, std::size_t n,
                                      const Matrix& r);

/// Stacks the N x 2M natural-order signal matrix into x (stacked order).
Vector stack_signals(const Matrix& natural_signals, const NetworkTopology& topology);

/// Spectral radius of the interconnected companion realization < 1 - margin.
/// An ill-posed instantaneous loop counts as unstable.
bool closed_loop_is_stable(const ParameterVector& theta, const NetworkTopology& topology,
                           double margin = 0.01);
bool closed_loop_is_stable(std::span<const SubsystemModel> models,
                           const NetworkTopology& topology, double margin = 0.01);
double closed_loop_spectral_radius(std::span<const SubsystemModel> models,
                                   const NetworkTopology& topology);

}  // namespace netid
