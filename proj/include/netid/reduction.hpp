#pragma once

#include "netid/signals.hpp"

namespace netid {

/// theta-independent operators mapping (A1, b1) of the singular model
///   [A1; A2] x + [b1; b2] = (e, 0)
/// onto the nonsingular model Phi x~ + Gamma = e. Built once per topology.
///
/// The interconnection rows are processed as follows: A_2m = U Sigma V^T is
/// split at its numerical rank r, the r pivoted rows eliminate V1^T x_m, and
/// the remaining U2^T A_2o rows are compressed by an orthogonal W (from an
/// LQ factorization) into hard constraints on W1^T x_o. The free coordinates
/// are W2^T x_o (observed) and V2^T x_m (missing).
struct ReductionOperators {
  Matrix u1, u2;
  Matrix v1, v2;
  Vector sigma1;  // descending, strictly positive
  Matrix w1, w2;
  Matrix a2o;
  Matrix h;  // W1 (U2^T A_2o W1)^{-1} U2^T, n_o x m2
  int rank = 0;
  int n_observed = 0;
  int n_missing = 0;

  /// [W2 0; -V1 Sigma1^{-1} U1^T A_2o W2  V2]; Phi = [A_1o A_1m] * phi_map.
  Matrix phi_map;
  /// [H; V1 Sigma1^{-1} U1^T (I - A_2o H)]; Gamma = b1 - A1 * gamma_map * b2.
  Matrix gamma_map;
  /// (U2^T A_2o W1) W1^T: hard constraints are constraint_map x_o + U2^T b2 = 0.
  Matrix constraint_map;

  int rows() const { return static_cast<int>(u1.rows()); }
  int observed_free() const { return static_cast<int>(w2.cols()); }
  int missing_free() const { return static_cast<int>(v2.cols()); }
};

/// Throws kRankDeficient when U2^T A_2o is not of full row rank.
ReductionOperators compute_reduction_operators(const Matrix& a2, int n_observed, int n_missing,
                                               double rank_tol = 1e-10);

struct ReducedModel {
  Matrix phi_o;
  Matrix phi_m;
  Vector gamma;
  Matrix obs_transform;  // W2^T

  Matrix phi() const;
  Eigen::Index rows() const { return phi_o.rows(); }
};

/// Throws kUnsupportedShape for a non-square Phi and kSingularModel when the
/// square Phi is numerically singular.
ReducedModel apply_reduction(const Matrix& a1, const Vector& b1, const Vector& b2,
                             const ReductionOperators& ops, bool check_singular = true);

struct ObservedTransform {
  Vector reduced;  // W2^T x_o
  double consistency_residual = 0.0;
};

/// Default tolerance (negative) is 1e-6 * (1 + |x_o|_inf). Throws
/// kInconsistentData when the hard constraints are violated.
ObservedTransform transform_observed(const Vector& x_o, const ReductionOperators& ops,
                                     const Vector& b2, double tolerance = -1.0);

}  // namespace netid
