#include "netid/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "netid/dual.hpp"
#include "netid/error.hpp"

namespace netid {

LikelihoodTerms likelihood_terms(const ReducedModel& reduced, const Vector& x_reduced) {
  const Eigen::Index m = reduced.rows();
  if (x_reduced.size() != reduced.phi_o.cols()) {
    throw Error(ErrorCode::kInvalidDimension, "reduced observed vector does not match Phi_o");
  }
  LikelihoodTerms t;
  t.rows = static_cast<double>(m);
  t.observed_dof = static_cast<double>(reduced.phi_o.cols());

  const Vector r = reduced.phi_o * x_reduced + reduced.gamma;
  const Eigen::Index km = reduced.phi_m.cols();
  if (km == 0) {
    t.weighted_residual = r.squaredNorm();
  } else {
    Eigen::HouseholderQR<Matrix> qr(reduced.phi_m);
    const auto& packed = qr.matrixQR();
    const double scale = std::max(packed.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i = 0; i < km; ++i) {
      const double d = std::abs(packed(i, i));
      if (!(d > 1e-12 * scale)) {
        throw Error(ErrorCode::kRankDeficient, "Phi_m is not of full column rank");
      }
      t.logdet_z += 2.0 * std::log(d);
    }
    const Vector qtr = qr.householderQ().adjoint() * r;
    t.weighted_residual = qtr.tail(m - km).squaredNorm();
  }

  const Matrix phi = reduced.phi();
  Eigen::HouseholderQR<Matrix> qr(phi);
  for (Eigen::Index i = 0; i < std::min(phi.rows(), phi.cols()); ++i) {
    const double d = std::abs(qr.matrixQR()(i, i));
    if (d == 0.0) throw Error(ErrorCode::kSingularModel, "Phi is singular");
    t.logdet_phi += 2.0 * std::log(d);
  }
  return t;
}

double nll(double lambda, const LikelihoodTerms& terms, VarianceDof mode) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::kDomain, "lambda must be positive");
  return terms.weighted_residual / (2.0 * lambda) + 0.5 * terms.dof(mode) * std::log(lambda) -
         0.5 * terms.logdet_phi + 0.5 * terms.logdet_z;
}

double nll(double lambda, const ReducedModel& reduced, const Vector& x_reduced, VarianceDof mode) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::kDomain, "lambda must be positive");
  return nll(lambda, likelihood_terms(reduced, x_reduced), mode);
}

double nll_lambda_derivative(double lambda, const LikelihoodTerms& terms, VarianceDof mode) {
  return -terms.weighted_residual / (2.0 * lambda * lambda) + 0.5 * terms.dof(mode) / lambda;
}

double lambda_star(const LikelihoodTerms& terms, VarianceDof mode) {
  if (!(terms.weighted_residual > 0.0)) {
    throw Error(ErrorCode::kDegenerateVariance, "zero projected residual: lambda* = 0");
  }
  return terms.weighted_residual / terms.dof(mode);
}

double lambda_star(const ReducedModel& reduced, const Vector& x_reduced, VarianceDof mode) {
  return lambda_star(likelihood_terms(reduced, x_reduced), mode);
}

double concentrated_from_terms(const LikelihoodTerms& terms, VarianceDof mode) {
  const double d = terms.dof(mode);
  const double lam = lambda_star(terms, mode);
  return 0.5 * d * std::log(lam) - 0.5 * terms.logdet_phi + 0.5 * terms.logdet_z + 0.5 * d;
}

namespace {

// Phi as an M x M grid of lower-triangular Toeplitz blocks (first `taps`
// coefficients each), plus the residual sequences R_i = (Phi_o x + Gamma)_i.
template <class T>
struct BlockModel {
  int m = 0;
  int ko = 0;
  std::size_t taps = 0;
  std::size_t n = 0;
  std::vector<T> phi;                 // ((i * m) + j) * taps + lag
  std::vector<std::vector<T>> resid;  // m sequences of length n

  const T& at(int i, int j, std::size_t lag) const {
    return phi[(static_cast<std::size_t>(i) * static_cast<std::size_t>(m) +
                static_cast<std::size_t>(j)) * taps + lag];
  }
};

template <class T>
std::vector<T> deconvolve_t(const std::vector<T>& c, const std::vector<T>& x, std::size_t n) {
  std::vector<T> y(n, T(0.0));
  for (std::size_t k = 0; k < n; ++k) {
    T acc = k < x.size() ? x[k] : T(0.0);
    const std::size_t len = std::min(c.size(), k + 1);
    for (std::size_t j = 1; j < len; ++j) acc -= c[j] * y[k - j];
    y[k] = acc;  // c[0] == 1
  }
  return y;
}

template <class T>
BlockModel<T> build_block_model(const std::vector<T>& theta, const NetworkTopology& topo,
                                 const ReductionOperators& ops, const std::vector<int>& position,
                                 const Matrix& x_reduced, const Matrix& gamma_input,
                                 std::size_t n) {
  const int m = topo.subsystems;
  // Slice theta in (a..., b..., c...) order.
  std::vector<std::vector<T>> out_f(static_cast<std::size_t>(m)), in_f(static_cast<std::size_t>(m));
  std::size_t pos = 0;
  std::vector<std::vector<T>> a(static_cast<std::size_t>(m)), b(static_cast<std::size_t>(m)),
      c(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < topo.orders[static_cast<std::size_t>(i)].na; ++k) a[static_cast<std::size_t>(i)].push_back(theta[pos++]);
  }
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k <= topo.orders[static_cast<std::size_t>(i)].nb; ++k) b[static_cast<std::size_t>(i)].push_back(theta[pos++]);
  }
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < topo.orders[static_cast<std::size_t>(i)].nc; ++k) c[static_cast<std::size_t>(i)].push_back(theta[pos++]);
  }
  std::size_t taps = 1;
  for (int i = 0; i < m; ++i) {
    const auto si = static_cast<std::size_t>(i);
    std::vector<T> af{T(1.0)};
    af.insert(af.end(), a[si].begin(), a[si].end());
    std::vector<T> bf = b[si];
    if (c[si].empty()) {
      af.resize(std::min(af.size(), n));
      bf.resize(std::min(bf.size(), n));
      out_f[si] = std::move(af);
      in_f[si] = std::move(bf);
    } else {
      std::vector<T> cf{T(1.0)};
      cf.insert(cf.end(), c[si].begin(), c[si].end());
      out_f[si] = deconvolve_t(cf, af, n);
      in_f[si] = deconvolve_t(cf, bf, n);
    }
    for (T& v : in_f[si]) v = -v;
    taps = std::max({taps, out_f[si].size(), in_f[si].size()});
  }

  BlockModel<T> bm;
  bm.m = m;
  bm.ko = ops.observed_free();
  bm.taps = taps;
  bm.n = n;
  bm.phi.assign(static_cast<std::size_t>(m * m) * taps, T(0.0));
  for (int i = 0; i < m; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const int py = position[si];
    const int pu = position[si + static_cast<std::size_t>(m)];
    for (int j = 0; j < m; ++j) {
      const double wy = ops.phi_map(py, j);
      const double wu = ops.phi_map(pu, j);
      T* dst = &bm.phi[(si * static_cast<std::size_t>(m) + static_cast<std::size_t>(j)) * taps];
      if (wy != 0.0) {
        for (std::size_t l = 0; l < out_f[si].size(); ++l) add_scaled(dst[l], wy, out_f[si][l]);
      }
      if (wu != 0.0) {
        for (std::size_t l = 0; l < in_f[si].size(); ++l) add_scaled(dst[l], wu, in_f[si][l]);
      }
    }
  }

  // R_i = Gamma_i + sum_{j < ko} Phi_ij * xbar_j, Gamma = -A1 (gamma_map (x) I) b2.
  bm.resid.assign(static_cast<std::size_t>(m), std::vector<T>(n, T(0.0)));
  for (int i = 0; i < m; ++i) {
    const auto si = static_cast<std::size_t>(i);
    auto& r = bm.resid[si];
    const int py = position[si];
    const int pu = position[si + static_cast<std::size_t>(m)];
    for (std::size_t t = 0; t < n; ++t) {
      T acc(0.0);
      const std::size_t ly = std::min(out_f[si].size(), t + 1);
      for (std::size_t l = 0; l < ly; ++l) add_scaled(acc, -gamma_input(static_cast<Eigen::Index>(t - l), py), out_f[si][l]);
      const std::size_t lu = std::min(in_f[si].size(), t + 1);
      for (std::size_t l = 0; l < lu; ++l) add_scaled(acc, -gamma_input(static_cast<Eigen::Index>(t - l), pu), in_f[si][l]);
      for (int j = 0; j < bm.ko; ++j) {
        const std::size_t lj = std::min(taps, t + 1);
        for (std::size_t l = 0; l < lj; ++l) {
          add_scaled(acc, x_reduced(static_cast<Eigen::Index>(t - l), j), bm.at(i, j, l));
        }
      }
      r[t] = acc;
    }
  }
  return bm;
}

template <class T>
struct BlockTerms {
  T residual{0.0};
  T logdet_phi{0.0};
  T logdet_z{0.0};
};

// ln |det| of the M x M lag-0 block by partial-pivot LU. Phi is block lower
// triangular after interleaving time, so ln det(Phi^T Phi) = 2 N ln|det Phi0|.
template <class T>
T log_abs_det(std::vector<T> a, int m) {
  using std::abs;
  using std::log;
  T acc(0.0);
  auto at = [&](int r, int c) -> T& { return a[static_cast<std::size_t>(r * m + c)]; };
  for (int k = 0; k < m; ++k) {
    int piv = k;
    for (int r = k + 1; r < m; ++r) {
      if (std::abs(value_of(at(r, k))) > std::abs(value_of(at(piv, k)))) piv = r;
    }
    if (value_of(at(piv, k)) == 0.0) {
      throw Error(ErrorCode::kSingularModel, "reduced Phi is singular (lag-0 block)");
    }
    if (piv != k) {
      for (int c = 0; c < m; ++c) std::swap(at(k, c), at(piv, c));
    }
    for (int r = k + 1; r < m; ++r) {
      const T f = at(r, k) / at(k, k);
      for (int c = k + 1; c < m; ++c) at(r, c) -= f * at(k, c);
    }
    acc += log(abs(at(k, k)));
  }
  return acc;
}

// Least squares min_z |R + Phi_m z|^2 and ln det(Phi_m^T Phi_m) for the
// block-banded Phi_m, with time interleaved. Rows of sample t touch column
// blocks t-taps+1..t, so a sliding window of Householder reflections covers
// the whole factorization; the first column block is retired once no later
// row can reach it.
template <class T>
void banded_least_squares(const BlockModel<T>& bm, BlockTerms<T>& out) {
  using std::log;
  using std::sqrt;
  const int m = bm.m;
  const int k = m - bm.ko;
  const auto n = static_cast<long>(bm.n);
  if (k == 0) {
    for (const auto& seq : bm.resid) {
      for (const T& v : seq) out.residual += v * v;
    }
    return;
  }
  const long taps = static_cast<long>(bm.taps);
  const int max_cols = static_cast<int>(taps) * k;
  const int ld = max_cols + m;
  std::vector<T> win(static_cast<std::size_t>(ld) * static_cast<std::size_t>(max_cols), T(0.0));
  std::vector<T> rhs(static_cast<std::size_t>(ld), T(0.0));
  auto a = [&](int r, int c) -> T& {
    return win[static_cast<std::size_t>(c) * static_cast<std::size_t>(ld) + static_cast<std::size_t>(r)];
  };

  double scale = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = bm.ko; j < m; ++j) {
      for (std::size_t l = 0; l < bm.taps; ++l) scale = std::max(scale, std::abs(value_of(bm.at(i, j, l))));
    }
  }
  const double tol = 1e-12 * std::max(scale, 1e-300) * std::sqrt(static_cast<double>(m * bm.taps));

  int nr = 0;
  int nc = 0;
  long lo = 0;
  auto retire = [&](int count) {
    if (nr < count) throw Error(ErrorCode::kRankDeficient, "Phi_m is not of full column rank");
    for (int c = 0; c < count; ++c) {
      const double d = std::abs(value_of(a(c, c)));
      if (!(d > tol)) throw Error(ErrorCode::kRankDeficient, "Phi_m is not of full column rank");
      using std::abs;
      out.logdet_z += 2.0 * log(abs(a(c, c)));
    }
  };

  for (long t = 0; t < n; ++t) {
    for (int c = nc; c < nc + k; ++c) {
      for (int r = 0; r < ld; ++r) a(r, c) = T(0.0);
    }
    nc += k;
    for (int i = 0; i < m; ++i) {
      const int row = nr + i;
      for (int c = 0; c < nc; ++c) a(row, c) = T(0.0);
      for (long blk = lo; blk <= t; ++blk) {
        const long lag = t - blk;
        if (lag >= taps) continue;
        for (int j = 0; j < k; ++j) {
          a(row, static_cast<int>(blk - lo) * k + j) = bm.at(i, bm.ko + j, static_cast<std::size_t>(lag));
        }
      }
      rhs[static_cast<std::size_t>(row)] = bm.resid[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
    }
    const int old_nr = nr;
    const int total = nr + m;

    for (int c = 0; c < nc && c < total; ++c) {
      const int first = std::max(c + 1, old_nr);
      double below = 0.0;
      for (int r = first; r < total; ++r) below += value_of(a(r, c)) * value_of(a(r, c));
      if (below == 0.0) {
        bool exact = true;
        if constexpr (!std::is_same_v<T, double>) {
          for (int r = first; r < total && exact; ++r) {
            for (double dv : a(r, c).d) {
              if (dv != 0.0) { exact = false; break; }
            }
          }
        }
        if (exact) continue;
      }
      T norm2 = a(c, c) * a(c, c);
      for (int r = first; r < total; ++r) norm2 += a(r, c) * a(r, c);
      const T norm = sqrt(norm2);
      const T alpha = value_of(a(c, c)) >= 0.0 ? -norm : norm;
      const T v0 = a(c, c) - alpha;
      T vtv = v0 * v0;
      for (int r = first; r < total; ++r) vtv += a(r, c) * a(r, c);
      if (value_of(vtv) == 0.0) continue;
      const T beta = T(2.0) / vtv;
      for (int cc = c + 1; cc < nc; ++cc) {
        T s = v0 * a(c, cc);
        for (int r = first; r < total; ++r) s += a(r, c) * a(r, cc);
        s *= beta;
        a(c, cc) -= s * v0;
        for (int r = first; r < total; ++r) a(r, cc) -= s * a(r, c);
      }
      {
        T s = v0 * rhs[static_cast<std::size_t>(c)];
        for (int r = first; r < total; ++r) s += a(r, c) * rhs[static_cast<std::size_t>(r)];
        s *= beta;
        rhs[static_cast<std::size_t>(c)] -= s * v0;
        for (int r = first; r < total; ++r) rhs[static_cast<std::size_t>(r)] -= s * a(r, c);
      }
      a(c, c) = alpha;
      for (int r = first; r < total; ++r) a(r, c) = T(0.0);
    }

    if (total > nc) {
      for (int r = nc; r < total; ++r) out.residual += rhs[static_cast<std::size_t>(r)] * rhs[static_cast<std::size_t>(r)];
      nr = nc;
    } else {
      nr = total;
    }

    if (t == n - 1) {
      retire(nc);
    } else if (t - lo == taps - 1) {
      retire(k);
      for (int c = k; c < nc; ++c) {
        for (int r = k; r < nr; ++r) a(r - k, c - k) = a(r, c);
      }
      for (int r = k; r < nr; ++r) rhs[static_cast<std::size_t>(r - k)] = rhs[static_cast<std::size_t>(r)];
      nr -= k;
      nc -= k;
      ++lo;
    }
  }
}

template <class T>
BlockTerms<T> block_terms(const BlockModel<T>& bm) {
  BlockTerms<T> out;
  std::vector<T> lag0(static_cast<std::size_t>(bm.m * bm.m));
  for (int i = 0; i < bm.m; ++i) {
    for (int j = 0; j < bm.m; ++j) lag0[static_cast<std::size_t>(i * bm.m + j)] = bm.at(i, j, 0);
  }
  out.logdet_phi = T(2.0 * static_cast<double>(bm.n)) * log_abs_det(std::move(lag0), bm.m);
  banded_least_squares(bm, out);
  return out;
}

template <class T>
T concentrated_t(const BlockTerms<T>& bt, double dof) {
  using std::log;
  if (!(value_of(bt.residual) > 0.0)) {
    throw Error(ErrorCode::kDegenerateVariance, "zero projected residual: lambda* = 0");
  }
  return T(0.5 * dof) * log(bt.residual / T(dof)) - T(0.5) * bt.logdet_phi +
         T(0.5) * bt.logdet_z + T(0.5 * dof);
}

template <int N>
double dual_value_and_gradient(const ParameterVector& theta, const NetworkTopology& topo,
                               const ReductionOperators& ops, const std::vector<int>& position,
                               const Matrix& x_reduced, const Matrix& gamma_input,
                               std::size_t n, double dof, Vector& grad) {
  using D = Dual<N>;
  std::vector<D> th(static_cast<std::size_t>(theta.size()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    th[static_cast<std::size_t>(i)] = D::variable(theta(i), static_cast<int>(i));
  }
  const auto bm = build_block_model(th, topo, ops, position, x_reduced, gamma_input, n);
  const D cost = concentrated_t(block_terms(bm), dof);
  grad.resize(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) grad(i) = cost.d[static_cast<std::size_t>(i)];
  return cost.v;
}

constexpr std::size_t kBandedWidthLimit = 64;

}  // namespace

LikelihoodWorkspace::LikelihoodWorkspace(NetworkTopology topology, Matrix r, Matrix observed,
                                         LikelihoodOptions options)
    : topology_(std::move(topology)),
      r_(std::move(r)),
      observed_(std::move(observed)),
      options_(options) {
  topology_.validate();
  n_ = static_cast<std::size_t>(r_.rows());
  if (n_ == 0) throw Error(ErrorCode::kInvalidDimension, "no samples");
  if (r_.cols() != topology_.exogenous) {
    throw Error(ErrorCode::kInvalidDimension, "r must have Q columns");
  }
  if (observed_.rows() != r_.rows() || observed_.cols() != topology_.observed_count()) {
    throw Error(ErrorCode::kInvalidDimension, "observed data must be N x (number of observed signals)");
  }
  const int m = topology_.subsystems;
  const int no = topology_.observed_count();
  ops_ = compute_reduction_operators(topology_.interconnection_block(), no, 2 * m - no,
                                     options_.rank_tol);
  const auto order = topology_.signal_order();
  position_.assign(order.size(), 0);
  for (std::size_t j = 0; j < order.size(); ++j) position_[static_cast<std::size_t>(order[j])] = static_cast<int>(j);

  Matrix b2 = Matrix::Zero(r_.rows(), m);
  for (int i = 0; i < m; ++i) {
    for (int q = 0; q < topology_.exogenous; ++q) {
      if (topology_.omega(i, q) != 0) b2.col(i) -= static_cast<double>(topology_.omega(i, q)) * r_.col(q);
    }
  }
  gamma_input_ = b2 * ops_.gamma_map.transpose();
  x_reduced_ = observed_ * ops_.w2;
  if (ops_.w1.cols() > 0) {
    const Matrix violation = observed_ * ops_.constraint_map.transpose() + b2 * ops_.u2;
    consistency_residual_ = violation.cwiseAbs().maxCoeff();
    const double tol = 1e-6 * (1.0 + observed_.cwiseAbs().maxCoeff());
    if (consistency_residual_ > tol) {
      throw Error(ErrorCode::kInconsistentData,
                  "observed data violate the interconnection constraints (residual " +
                      std::to_string(consistency_residual_) + ")");
    }
  }
}

bool LikelihoodWorkspace::uses_banded_kernel(const ParameterVector& theta) const {
  if (options_.force_dense) return false;
  std::size_t taps = 1;
  for (const auto& o : topology_.orders) {
    if (o.nc > 0) return n_ * static_cast<std::size_t>(ops_.missing_free()) <= kBandedWidthLimit;
    taps = std::max({taps, static_cast<std::size_t>(o.na) + 1, static_cast<std::size_t>(o.nb) + 1});
  }
  (void)theta;
  return std::min(taps, n_) * static_cast<std::size_t>(ops_.missing_free()) <= kBandedWidthLimit;
}

ReducedModel LikelihoodWorkspace::reduced_model(const ParameterVector& theta) const {
  if (theta.size() != topology_.theta_size()) {
    throw Error(ErrorCode::kInvalidParameter, "theta length does not match topology");
  }
  std::vector<double> th(theta.data(), theta.data() + theta.size());
  const auto bm = build_block_model(th, topology_, ops_, position_, x_reduced_, gamma_input_, n_);
  const auto n = static_cast<Eigen::Index>(n_);
  const int m = bm.m;
  Matrix phi = Matrix::Zero(m * n, m * n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      for (Eigen::Index tau = 0; tau < n; ++tau) {
        for (Eigen::Index t = tau; t < n && static_cast<std::size_t>(t - tau) < bm.taps; ++t) {
          phi(i * n + t, j * n + tau) = bm.at(i, j, static_cast<std::size_t>(t - tau));
        }
      }
    }
  }
  // Gamma = R - Phi_o xbar
  Vector resid(m * n);
  for (int i = 0; i < m; ++i) {
    for (Eigen::Index t = 0; t < n; ++t) resid(i * n + t) = bm.resid[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
  }
  const Eigen::Index ko = bm.ko * n;
  ReducedModel out;
  out.phi_o = phi.leftCols(ko);
  out.phi_m = phi.rightCols(m * n - ko);
  out.gamma = resid - out.phi_o * reduced_observed_stacked();
  out.obs_transform = ops_.w2.transpose();
  return out;
}

Vector LikelihoodWorkspace::reduced_observed_stacked() const {
  return Eigen::Map<const Vector>(x_reduced_.data(), x_reduced_.size());
}

LikelihoodTerms LikelihoodWorkspace::terms(const ParameterVector& theta) const {
  if (theta.size() != topology_.theta_size()) {
    throw Error(ErrorCode::kInvalidParameter, "theta length does not match topology");
  }
  if (!uses_banded_kernel(theta)) {
    return likelihood_terms(reduced_model(theta), reduced_observed_stacked());
  }
  std::vector<double> th(theta.data(), theta.data() + theta.size());
  const auto bm = build_block_model(th, topology_, ops_, position_, x_reduced_, gamma_input_, n_);
  const auto bt = block_terms(bm);
  LikelihoodTerms t;
  t.weighted_residual = bt.residual;
  t.logdet_phi = bt.logdet_phi;
  t.logdet_z = bt.logdet_z;
  t.rows = static_cast<double>(topology_.subsystems) * static_cast<double>(n_);
  t.observed_dof = static_cast<double>(ops_.observed_free()) * static_cast<double>(n_);
  return t;
}

double LikelihoodWorkspace::concentrated_nll(const ParameterVector& theta) const {
  const double v = concentrated_from_terms(terms(theta), options_.dof);
  if (!std::isfinite(v)) throw Error(ErrorCode::kEvaluation, "non-finite likelihood");
  return v;
}

double LikelihoodWorkspace::lambda_hat(const ParameterVector& theta) const {
  return lambda_star(terms(theta), options_.dof);
}

double LikelihoodWorkspace::value_and_gradient(const ParameterVector& theta, Vector& grad) const {
  if (theta.size() != topology_.theta_size()) {
    throw Error(ErrorCode::kInvalidParameter, "theta length does not match topology");
  }
  const double dof = options_.dof == VarianceDof::kRows
                         ? static_cast<double>(topology_.subsystems) * static_cast<double>(n_)
                         : static_cast<double>(ops_.observed_free()) * static_cast<double>(n_);
  double value = 0.0;
  const Eigen::Index p = theta.size();
  if (uses_banded_kernel(theta) && p <= 64) {
    if (p <= 8) {
      value = dual_value_and_gradient<8>(theta, topology_, ops_, position_, x_reduced_, gamma_input_, n_, dof, grad);
    } else if (p <= 16) {
      value = dual_value_and_gradient<16>(theta, topology_, ops_, position_, x_reduced_, gamma_input_, n_, dof, grad);
    } else if (p <= 32) {
      value = dual_value_and_gradient<32>(theta, topology_, ops_, position_, x_reduced_, gamma_input_, n_, dof, grad);
    } else {
      value = dual_value_and_gradient<64>(theta, topology_, ops_, position_, x_reduced_, gamma_input_, n_, dof, grad);
    }
  } else {
    value = concentrated_nll(theta);
    grad = finite_difference_gradient([this](const Vector& x) { return concentrated_nll(x); }, theta,
                                      options_.fd_step);
  }
  if (!std::isfinite(value) || !grad.allFinite()) {
    throw Error(ErrorCode::kEvaluation, "non-finite likelihood or gradient");
  }
  return value;
}

Vector LikelihoodWorkspace::gradient(const ParameterVector& theta) const {
  Vector g;
  value_and_gradient(theta, g);
  return g;
}

double concentrated_nll(const ParameterVector& theta, const LikelihoodWorkspace& workspace) {
  return workspace.concentrated_nll(theta);
}

Vector nll_gradient(const ParameterVector& theta, const LikelihoodWorkspace& workspace) {
  return workspace.gradient(theta);
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double rel_step) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * (1.0 + std::abs(x(i)));
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

LikelihoodTerms dense_likelihood_terms(const ParameterVector& theta,
                                       const NetworkTopology& topology, const Matrix& r,
                                       const Vector& x_o) {
  const auto sys = assemble_stacked_system(theta, topology, static_cast<std::size_t>(r.rows()), r);
  const auto ops = compute_reduction_operators(sys.a2, sys.n_observed, sys.n_missing);
  const auto reduced = apply_reduction(sys.a1, sys.b1, sys.b2, ops);
  const auto xt = transform_observed(x_o, ops, sys.b2);
  return likelihood_terms(reduced, xt.reduced);
}

double marginal_nll_oracle(const ParameterVector& theta, double lambda, const Vector& x_o,
                           const NetworkTopology& topology, const Matrix& r) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::kDomain, "lambda must be positive");
  const auto sys = assemble_stacked_system(theta, topology, static_cast<std::size_t>(r.rows()), r);
  const Matrix a = sys.a();
  const Vector b = sys.b();
  Eigen::PartialPivLU<Matrix> lu(a);
  const Eigen::Index no = sys.n_observed;
  const Eigen::Index m1 = sys.a1.rows();
  Matrix e_embed = Matrix::Zero(a.rows(), m1);
  e_embed.topRows(m1).setIdentity();
  const Matrix gain = lu.solve(e_embed).topRows(no);  // S A^{-1} E
  const Vector mean = -lu.solve(b).head(no);
  const Matrix cov = lambda * gain * gain.transpose();
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kOracleInapplicable, "marginal covariance of x_o is singular");
  }
  const Matrix& l = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < no; ++i) {
    if (!(l(i, i) > 0.0)) throw Error(ErrorCode::kOracleInapplicable, "singular marginal covariance");
    logdet += 2.0 * std::log(l(i, i));
  }
  const Vector diff = x_o - mean;
  const Vector white = llt.matrixL().solve(diff);
  return 0.5 * white.squaredNorm() + 0.5 * logdet +
         0.5 * static_cast<double>(no) * std::log(2.0 * std::numbers::pi);
}

}  // namespace netid
