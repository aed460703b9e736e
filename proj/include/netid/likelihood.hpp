#pragma once

#include <functional>

#include "netid/netmodel.hpp"
#include "netid/reduction.hpp"

namespace netid {

/// Which dimension multiplies ln(lambda) in the negative log-likelihood.
///  - kObserved: dim of the reduced observed vector, which makes the value
///    the exact marginal density of x_o up to a (lambda, theta)-free constant.
///  - kRows: the row count m of Phi (the printed cost). The two coincide
///    when no missing coordinates remain.
enum class VarianceDof { kObserved, kRows };

/// The data-dependent pieces of the cost at one theta.
struct LikelihoodTerms {
  double weighted_residual = 0.0;  // R^T Pi R with R = Phi_o x + Gamma
  double logdet_phi = 0.0;         // ln det(Phi^T Phi)
  double logdet_z = 0.0;           // ln det(Phi_m^T Phi_m)
  double rows = 0.0;               // m
  double observed_dof = 0.0;       // cols(Phi_o)

  double dof(VarianceDof mode) const { return mode == VarianceDof::kRows ? rows : observed_dof; }
};

/// Dense evaluation through Householder QR of Phi and Phi_m; Pi is applied
/// implicitly. Throws kRankDeficient / kSingularModel.
LikelihoodTerms likelihood_terms(const ReducedModel& reduced, const Vector& x_reduced);

double nll(double lambda, const LikelihoodTerms& terms, VarianceDof mode = VarianceDof::kObserved);
double nll(double lambda, const ReducedModel& reduced, const Vector& x_reduced,
           VarianceDof mode = VarianceDof::kObserved);
/// d nll / d lambda.
double nll_lambda_derivative(double lambda, const LikelihoodTerms& terms,
                             VarianceDof mode = VarianceDof::kObserved);

/// R^T Pi R / dof; throws kDegenerateVariance on a zero residual.
double lambda_star(const LikelihoodTerms& terms, VarianceDof mode = VarianceDof::kObserved);
double lambda_star(const ReducedModel& reduced, const Vector& x_reduced,
                   VarianceDof mode = VarianceDof::kObserved);

/// nll at lambda_star: (d/2) ln(R^T Pi R / d) - ln det(Phi^T Phi)/2 + ln det Z/2 + d/2.
double concentrated_from_terms(const LikelihoodTerms& terms,
                               VarianceDof mode = VarianceDof::kObserved);

struct LikelihoodOptions {
  VarianceDof dof = VarianceDof::kObserved;
  double rank_tol = 1e-10;
  /// Evaluate through dense matrices even when the banded kernel applies.
  bool force_dense = false;
  /// Relative step of the central-difference fallback gradient.
  double fd_step = 1e-6;
};

/// Everything about one identification problem that does not depend on
/// theta: the topology, exogenous inputs, observed data and the reduction
/// operators. Since A_2 = B (x) I_N for a small M x 2M block B, the
/// operators are computed on B and applied blockwise, so Phi is a block
/// matrix of lower-triangular Toeplitz blocks. Immutable after
/// construction; evaluations are safe to run concurrently.
class LikelihoodWorkspace {
 public:
  /// r is N x Q; observed is N x n_obs with columns in topology.observed order.
  LikelihoodWorkspace(NetworkTopology topology, Matrix r, Matrix observed,
                      LikelihoodOptions options = {});

  const NetworkTopology& topology() const { return topology_; }
  const LikelihoodOptions& options() const { return options_; }
  std::size_t samples() const { return n_; }
  const Matrix& exogenous() const { return r_; }
  const Matrix& observed() const { return observed_; }
  /// Operators of the small interconnection block.
  const ReductionOperators& operators() const { return ops_; }
  /// W2^T x_o, one column per reduced observed coordinate.
  const Matrix& reduced_observed() const { return x_reduced_; }
  double consistency_residual() const { return consistency_residual_; }

  LikelihoodTerms terms(const ParameterVector& theta) const;
  double concentrated_nll(const ParameterVector& theta) const;
  double lambda_hat(const ParameterVector& theta) const;
  /// Exact forward-mode derivative of concentrated_nll for up to 64
  /// parameters on the banded path, central differences otherwise.
  Vector gradient(const ParameterVector& theta) const;
  /// Cost and gradient in one pass.
  double value_and_gradient(const ParameterVector& theta, Vector& grad) const;

  /// Dense Phi, Gamma for this theta built from the blockwise operators.
  ReducedModel reduced_model(const ParameterVector& theta) const;
  Vector reduced_observed_stacked() const;

  /// Largest filter length; the banded kernel runs when it is short.
  bool uses_banded_kernel(const ParameterVector& theta) const;

 private:
  NetworkTopology topology_;
  Matrix r_;
  Matrix observed_;
  LikelihoodOptions options_;
  std::size_t n_ = 0;
  ReductionOperators ops_;
  Matrix x_reduced_;  // N x k_o
  Matrix gamma_input_;  // N x 2M, (gamma_map (x) I) b2 per stacked signal
  std::vector<int> position_;  // natural signal -> stacked position
  double consistency_residual_ = 0.0;
};

double concentrated_nll(const ParameterVector& theta, const LikelihoodWorkspace& workspace);
Vector nll_gradient(const ParameterVector& theta, const LikelihoodWorkspace& workspace);

/// Central differences with step rel_step * (1 + |x_i|).
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double rel_step = 1e-6);

/// The whole chain on dense matrices: assemble A, reduce with operators
/// computed from the assembled A_2, evaluate. x_o is the stacked observed
/// vector. Reference route for the blockwise workspace.
LikelihoodTerms dense_likelihood_terms(const ParameterVector& theta,
                                       const NetworkTopology& topology, const Matrix& r,
                                       const Vector& x_o);

/// Exact Gaussian negative log-density of x_o built from first principles:
/// x = A^{-1}((e, 0) - b), so x_o ~ N(-S A^{-1} b, lambda S A^{-1} E E^T A^{-T} S^T).
/// Small instances only. Throws kOracleInapplicable when Cov(x_o) is singular.
double marginal_nll_oracle(const ParameterVector& theta, double lambda, const Vector& x_o,
                           const NetworkTopology& topology, const Matrix& r);

}  // namespace netid
