#include "netid/signals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "netid/error.hpp"

namespace netid {

bool Polynomial::is_zero() const {
  return std::all_of(coeffs.begin(), coeffs.end(), [](double c) { return c == 0.0; });
}

double Polynomial::operator()(double x) const {
  double acc = 0.0;
  for (double c : coeffs) acc = acc * x + c;
  return acc;
}

Complex Polynomial::operator()(Complex z) const {
  Complex acc = 0.0;
  for (double c : coeffs) acc = acc * z + c;
  return acc;
}

Polynomial poly_mul(const Polynomial& p, const Polynomial& q) {
  if (p.coeffs.empty() || q.coeffs.empty()) {
    throw Error(ErrorCode::kInvalidInput, "poly_mul: empty polynomial");
  }
  std::vector<double> out(p.coeffs.size() + q.coeffs.size() - 1, 0.0);
  for (std::size_t i = 0; i < p.coeffs.size(); ++i) {
    for (std::size_t j = 0; j < q.coeffs.size(); ++j) out[i + j] += p.coeffs[i] * q.coeffs[j];
  }
  return Polynomial(std::move(out));
}

namespace {

// Aligns at the constant term.
Polynomial combine(const Polynomial& p, const Polynomial& q, double sign) {
  const std::size_t n = std::max(p.coeffs.size(), q.coeffs.size());
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < p.coeffs.size(); ++i) out[n - p.coeffs.size() + i] += p.coeffs[i];
  for (std::size_t i = 0; i < q.coeffs.size(); ++i) {
    out[n - q.coeffs.size() + i] += sign * q.coeffs[i];
  }
  return Polynomial(std::move(out));
}

// Coefficients (highest first) of det(zI - A) by Faddeev-LeVerrier.
std::vector<double> characteristic_polynomial(const Matrix& a) {
  const Eigen::Index n = a.rows();
  std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
  c[0] = 1.0;
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    m = a * m + c[static_cast<std::size_t>(k - 1)] * Matrix::Identity(n, n);
    c[static_cast<std::size_t>(k)] = -(a * m).trace() / static_cast<double>(k);
  }
  return c;
}

}  // namespace

Polynomial poly_add(const Polynomial& p, const Polynomial& q) { return combine(p, q, 1.0); }
Polynomial poly_sub(const Polynomial& p, const Polynomial& q) { return combine(p, q, -1.0); }

Polynomial poly_scale(const Polynomial& p, double factor) {
  Polynomial out = p;
  for (double& c : out.coeffs) c *= factor;
  return out;
}

Polynomial trim_leading(const Polynomial& p, double rel_tol) {
  double scale = 0.0;
  for (double c : p.coeffs) scale = std::max(scale, std::abs(c));
  const double cutoff = rel_tol * scale;
  std::size_t first = 0;
  while (first < p.coeffs.size() &&
         (p.coeffs[first] == 0.0 || std::abs(p.coeffs[first]) <= cutoff)) {
    ++first;
  }
  if (first == p.coeffs.size()) return Polynomial{0.0};
  return Polynomial(std::vector<double>(p.coeffs.begin() + static_cast<std::ptrdiff_t>(first),
                                        p.coeffs.end()));
}

std::vector<Complex> poly_roots(const Polynomial& p) {
  const Polynomial t = trim_leading(p);
  const std::size_t n = t.degree();
  if (n == 0) return {};
  Matrix companion = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    companion(0, static_cast<Eigen::Index>(j)) = -t.coeffs[j + 1] / t.coeffs[0];
  }
  for (std::size_t i = 1; i < n; ++i) {
    companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  }
  Eigen::EigenSolver<Matrix> solver(companion, false);
  std::vector<Complex> roots(n);
  for (std::size_t i = 0; i < n; ++i) roots[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
  return roots;
}

Polynomial poly_from_roots(std::span<const Complex> roots, double lead) {
  std::vector<Complex> acc{Complex(lead, 0.0)};
  for (const Complex& r : roots) {
    std::vector<Complex> next(acc.size() + 1, Complex(0.0, 0.0));
    for (std::size_t i = 0; i < acc.size(); ++i) {
      next[i] += acc[i];
      next[i + 1] -= acc[i] * r;
    }
    acc = std::move(next);
  }
  std::vector<double> out(acc.size());
  std::transform(acc.begin(), acc.end(), out.begin(), [](const Complex& c) { return c.real(); });
  return Polynomial(std::move(out));
}

ToeplitzOperator::ToeplitzOperator(std::vector<double> first_column, std::size_t n) : n_(n) {
  if (n == 0) throw Error(ErrorCode::kInvalidDimension, "Toeplitz operator needs N >= 1");
  if (first_column.size() > n) {
    throw Error(ErrorCode::kInvalidDimension, "first column longer than N");
  }
  first_column.resize(n, 0.0);
  column_ = std::move(first_column);
}

Matrix ToeplitzOperator::dense() const {
  const auto n = static_cast<Eigen::Index>(n_);
  Matrix t = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) t(i, j) = column_[static_cast<std::size_t>(i - j)];
  }
  return t;
}

Vector ToeplitzOperator::apply(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != n_) {
    throw Error(ErrorCode::kInvalidDimension, "Toeplitz apply: length mismatch");
  }
  const auto y = convolve_truncated(column_, std::span<const double>(x.data(), n_), n_);
  return Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(n_));
}

Vector ToeplitzOperator::solve(const Vector& rhs) const {
  if (static_cast<std::size_t>(rhs.size()) != n_) {
    throw Error(ErrorCode::kInvalidDimension, "Toeplitz solve: length mismatch");
  }
  const auto y = deconvolve_truncated(column_, std::span<const double>(rhs.data(), n_), n_);
  return Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(n_));
}

ToeplitzOperator toeplitz_from_first_column(std::span<const double> col, std::size_t n) {
  return ToeplitzOperator(std::vector<double>(col.begin(), col.end()), n);
}

std::vector<double> convolve_truncated(std::span<const double> h, std::span<const double> x,
                                       std::size_t n) {
  std::vector<double> y(n, 0.0);
  const std::size_t nx = std::min(n, x.size());
  for (std::size_t k = 0; k < nx; ++k) {
    if (x[k] == 0.0) continue;
    const std::size_t len = std::min(h.size(), n - k);
    for (std::size_t j = 0; j < len; ++j) y[k + j] += h[j] * x[k];
  }
  return y;
}

std::vector<double> deconvolve_truncated(std::span<const double> c, std::span<const double> x,
                                         std::size_t n) {
  if (c.empty() || c[0] == 0.0) {
    throw Error(ErrorCode::kSingularModel, "deconvolution needs a nonzero leading tap");
  }
  std::vector<double> y(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = k < x.size() ? x[k] : 0.0;
    const std::size_t len = std::min(c.size(), k + 1);
    for (std::size_t j = 1; j < len; ++j) acc -= c[j] * y[k - j];
    y[k] = acc / c[0];
  }
  return y;
}

Polynomial DiscreteTransferFunction::a_poly() const {
  std::vector<double> c{1.0};
  c.insert(c.end(), a.begin(), a.end());
  return Polynomial(std::move(c));
}

Polynomial DiscreteTransferFunction::b_poly() const { return Polynomial(b); }

DiscreteTransferFunction zoh_discretize(const ContinuousPlant& plant, double ts) {
  if (!(ts > 0.0)) throw Error(ErrorCode::kDomain, "sampling time must be positive");
  const Polynomial den = trim_leading(plant.den);
  const Polynomial num = trim_leading(plant.num);
  if (den.is_zero() || den.degree() == 0 || (!num.is_zero() && num.degree() >= den.degree())) {
    throw Error(ErrorCode::kUnsupportedModel, "ZOH discretization needs a strictly proper plant");
  }
  const auto n = static_cast<Eigen::Index>(den.degree());
  const double lead = den.leading();

  // Controllable canonical form.
  Matrix augmented = Matrix::Zero(n + 1, n + 1);
  for (Eigen::Index i = 0; i + 1 < n; ++i) augmented(i, i + 1) = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    augmented(n - 1, j) = -den.coeffs[static_cast<std::size_t>(n - j)] / lead;
  }
  augmented(n - 1, n) = 1.0;
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(n);
  for (std::size_t i = 0; i < num.coeffs.size(); ++i) {
    c(static_cast<Eigen::Index>(num.coeffs.size() - 1 - i)) = num.coeffs[i] / lead;
  }

  const Matrix e = (augmented * ts).exp();
  const Matrix ad = e.topLeftCorner(n, n);
  const Vector bd = e.topRightCorner(n, 1);

  const auto den_d = characteristic_polynomial(ad);
  const auto closed = characteristic_polynomial(ad - bd * c);

  DiscreteTransferFunction tf;
  tf.a.assign(den_d.begin() + 1, den_d.end());
  tf.b.assign(static_cast<std::size_t>(n) + 1, 0.0);
  // C adj(zI - A) B = det(zI - A + BC) - det(zI - A)
  for (std::size_t k = 1; k < den_d.size(); ++k) tf.b[k] = closed[k] - den_d[k];
  return tf;
}

FrequencyResponse freq_response(const Polynomial& b, const Polynomial& a,
                                std::span<const double> omegas, double ts) {
  FrequencyResponse out;
  out.magnitude_db.reserve(omegas.size());
  out.phase_deg.reserve(omegas.size());
  double previous = std::numeric_limits<double>::quiet_NaN();
  for (double w : omegas) {
    const Complex z = std::polar(1.0, w * ts);
    const Complex den = a(z);
    if (std::abs(den) == 0.0) {
      out.magnitude_db.push_back(std::numeric_limits<double>::infinity());
      out.phase_deg.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const Complex h = b(z) / den;
    out.magnitude_db.push_back(20.0 * std::log10(std::abs(h)));
    double phase = std::arg(h) * 180.0 / std::numbers::pi;
    if (!std::isnan(previous)) phase += 360.0 * std::round((previous - phase) / 360.0);
    previous = phase;
    out.phase_deg.push_back(phase);
  }
  return out;
}

bool is_stable_poly(const Polynomial& a, double margin) {
  for (const Complex& r : poly_roots(a)) {
    if (!(std::abs(r) < 1.0 - margin)) return false;
  }
  return true;
}

std::vector<double> logspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double l0 = std::log10(lo);
  const double l1 = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::pow(10.0, l0 + (l1 - l0) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return out;
}

}  // namespace netid
