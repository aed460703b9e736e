#pragma once

#include <vector>

#include "netid/netmodel.hpp"
#include "netid/simulator.hpp"

namespace netid {

/// Abar u3 = Bbar1 r1 + Bbar2 r2 + Bbar3 r3 (+ noise) for the benchmark
/// network, with Abar monic.
struct ClosedLoopModel {
  Polynomial abar;
  Polynomial bbar1;
  Polynomial bbar2;
  Polynomial bbar3;
};

/// Throws kUnsupportedTopology unless `topology` is the benchmark network
/// with ARX blocks.
void require_benchmark_topology(const NetworkTopology& topology);

/// Abar = A2 (A1 A3 - B1 B3), Bbar1 = B1 A2 A3, Bbar2 = B1 B2 A3,
/// Bbar3 = A1 A2 A3, all divided by the leading coefficient of Abar.
ClosedLoopModel closed_loop_polynomials(const ParameterVector& theta, const NetworkTopology& topology);

/// Equation-error least squares of the closed-loop ARX model of degree
/// `degree` from u3 (length N) and r (N x 3), samples before k = 0 taken as
/// zero. Solved as the minimum-norm least-squares problem (the limit of a
/// vanishing ridge) through a complete orthogonal decomposition.
/// Requires N > 8 degree.
ClosedLoopModel estimate_high_order_arx(const Vector& u3, const Matrix& r, int degree = 6);

/// Number of regression coefficients of estimate_high_order_arx.
int high_order_arx_parameter_count(int degree = 6);

/// num / den with den monic.
struct RationalModel {
  Polynomial num;
  Polynomial den;
};

/// Removes common roots of num and den that lie within rel_tol (relative)
/// of each other. Nearly repeated roots are grouped first and compared by
/// their mean. Throws kRecovery for a zero denominator.
RationalModel cancel_common_roots(const Polynomial& num, const Polynomial& den, double rel_tol = 1e-6);

/// Drops roots with |z| >= 1 and rescales to keep p(1), or the leading
/// coefficient when p(1) = 0. Returns p unchanged when nothing is dropped.
/// Throws kInvalidInput for the zero polynomial.
Polynomial stabilize_numerator(const Polynomial& p);

/// G1 = Bbar1 / Bbar3, G2 = Bbar2 / Bbar1, G3 = (Bbar3 - Abar) / Bbar1.
/// With stabilize set, Bbar1 is passed through stabilize_numerator where it
/// acts as a denominator (G2, G3).
std::vector<RationalModel> recover_subsystems(const ClosedLoopModel& cl, bool stabilize = false);

/// ARX block with the same transfer function. Numerator coefficients above
/// the denominator degree (an improper estimate) are dropped.
SubsystemModel to_subsystem_model(const RationalModel& g);

/// Second-order B/A fit to the frequency response of g on a uniform grid of
/// normalized frequencies in (0, pi), by iteratively reweighted linear least
/// squares; unstable poles are reflected into the unit disc keeping the
/// static gain.
SubsystemModel reduce_order(const RationalModel& g, int na = 2, int nb = 2, int iterations = 30);

struct IndirectResult {
  ClosedLoopModel closed_loop;
  std::vector<RationalModel> recovered;
  std::vector<SubsystemModel> high_order;
  std::vector<SubsystemModel> reduced;
  ParameterVector theta_init;
  int unstable_bbar1_zeros = 0;
};

/// The full baseline on a dataset of the benchmark network; u3 must be
/// observed. theta_init packs the reduced models in `topology.orders`.
IndirectResult indirect_identify(const NetworkTopology& topology, const Dataset& data, int degree = 6);

}  // namespace netid
