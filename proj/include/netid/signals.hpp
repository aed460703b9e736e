#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace netid {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Complex = std::complex<double>;

/// Real polynomial in the forward shift q (or in s for continuous plants),
/// coefficients stored highest degree first.
struct Polynomial {
  std::vector<double> coeffs{0.0};

  Polynomial() = default;
  Polynomial(std::initializer_list<double> c) : coeffs(c) {}
  explicit Polynomial(std::vector<double> c) : coeffs(std::move(c)) {}

  std::size_t degree() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }
  double leading() const { return coeffs.front(); }
  bool is_zero() const;
  bool is_monic() const { return !coeffs.empty() && coeffs.front() == 1.0; }

  double operator()(double x) const;
  Complex operator()(Complex z) const;
};

Polynomial poly_mul(const Polynomial& p, const Polynomial& q);
Polynomial poly_add(const Polynomial& p, const Polynomial& q);
Polynomial poly_sub(const Polynomial& p, const Polynomial& q);
Polynomial poly_scale(const Polynomial& p, double factor);

/// Drops leading coefficients with |c| <= rel_tol * max|c|. Exact zeros are
/// always dropped; the zero polynomial is returned as {0}.
Polynomial trim_leading(const Polynomial& p, double rel_tol = 0.0);

/// Roots from the eigenvalues of the companion matrix. Leading zeros are
/// trimmed first; constants and the zero polynomial have no roots.
std::vector<Complex> poly_roots(const Polynomial& p);

/// lead * prod(q - root). Roots must come in conjugate pairs; the imaginary
/// residue of the expansion is discarded.
Polynomial poly_from_roots(std::span<const Complex> roots, double lead);

/// N x N lower-triangular Toeplitz matrix given by its first column.
class ToeplitzOperator {
 public:
  ToeplitzOperator(std::vector<double> first_column, std::size_t n);

  std::size_t size() const { return n_; }
  const std::vector<double>& first_column() const { return column_; }

  Matrix dense() const;
  /// Causal convolution of the first column with x.
  Vector apply(const Vector& x) const;
  /// Forward substitution; requires a nonzero diagonal.
  Vector solve(const Vector& rhs) const;

 private:
  std::vector<double> column_;  // length n
  std::size_t n_;
};

ToeplitzOperator toeplitz_from_first_column(std::span<const double> col, std::size_t n);

/// First n samples of the causal convolution h * x.
std::vector<double> convolve_truncated(std::span<const double> h, std::span<const double> x,
                                       std::size_t n);

/// First n samples of the sequence y solving c * y = x, with c[0] != 0.
std::vector<double> deconvolve_truncated(std::span<const double> c, std::span<const double> x,
                                         std::size_t n);

struct ContinuousPlant {
  Polynomial num;
  Polynomial den;
};

/// Discrete model in backward-shift form:
///   y_k + a_1 y_{k-1} + ... + a_n y_{k-n} = b_0 u_k + ... + b_n u_{k-n}.
struct DiscreteTransferFunction {
  std::vector<double> a;  // a_1..a_n
  std::vector<double> b;  // b_0..b_n

  Polynomial a_poly() const;  // q^n + a_1 q^{n-1} + ...
  Polynomial b_poly() const;  // b_0 q^n + b_1 q^{n-1} + ...
};

/// Step-invariant (zero-order hold) discretization via the matrix
/// exponential of the augmented (A, B) block of a controllable realization.
DiscreteTransferFunction zoh_discretize(const ContinuousPlant& plant, double ts);

struct FrequencyResponse {
  std::vector<double> magnitude_db;
  std::vector<double> phase_deg;  // unwrapped
};

/// H(e^{j w Ts}) = b/a for polynomials in q. Samples that hit a pole get an
/// infinite magnitude and a NaN phase.
FrequencyResponse freq_response(const Polynomial& b, const Polynomial& a,
                                std::span<const double> omegas, double ts);

/// True iff every root of `a` has modulus < 1 - margin.
bool is_stable_poly(const Polynomial& a, double margin = 0.0);

/// `count` log-spaced points in [lo, hi].
std::vector<double> logspace(double lo, double hi, std::size_t count);

}  // namespace netid
