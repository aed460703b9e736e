#include "netid/indirect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "netid/error.hpp"

namespace netid {

namespace {
// Relative pivot threshold of the rank-revealing least-squares solve.
constexpr double kRankThreshold = 1e-10;
}  // namespace

void require_benchmark_topology(const NetworkTopology& topology) {
  const NetworkTopology ref = experiment_topology({"u3"});
  bool ok = topology.subsystems == 3 && topology.exogenous == 3 && topology.lambda == ref.lambda &&
            topology.omega == ref.omega && topology.orders.size() == 3;
  if (ok) {
    for (const auto& o : topology.orders) ok = ok && o.nc == 0;
  }
  if (!ok) {
    throw Error(ErrorCode::kUnsupportedTopology,
                "the indirect baseline only supports the three-subsystem benchmark network with ARX blocks");
  }
}

ClosedLoopModel closed_loop_polynomials(const ParameterVector& theta, const NetworkTopology& topology) {
  require_benchmark_topology(topology);
  const auto models = unpack_theta(theta, topology);
  const Polynomial a1 = models[0].a_poly(), b1 = models[0].b_poly();
  const Polynomial a2 = models[1].a_poly(), b2 = models[1].b_poly();
  const Polynomial a3 = models[2].a_poly(), b3 = models[2].b_poly();
  ClosedLoopModel cl;
  cl.abar = poly_mul(a2, poly_sub(poly_mul(a1, a3), poly_mul(b1, b3)));
  cl.bbar1 = poly_mul(b1, poly_mul(a2, a3));
  cl.bbar2 = poly_mul(b1, poly_mul(b2, a3));
  cl.bbar3 = poly_mul(a1, poly_mul(a2, a3));
  const double lead = cl.abar.leading();
  if (lead == 0.0) throw Error(ErrorCode::kWellPosedness, "closed-loop denominator has zero leading coefficient");
  cl.abar = poly_scale(cl.abar, 1.0 / lead);
  cl.abar.coeffs.front() = 1.0;
  cl.bbar1 = poly_scale(cl.bbar1, 1.0 / lead);
  cl.bbar2 = poly_scale(cl.bbar2, 1.0 / lead);
  cl.bbar3 = poly_scale(cl.bbar3, 1.0 / lead);
  return cl;
}

int high_order_arx_parameter_count(int degree) { return degree + 3 * (degree + 1); }

ClosedLoopModel estimate_high_order_arx(const Vector& u3, const Matrix& r, int degree) {
  if (degree < 1) throw Error(ErrorCode::kInvalidParameter, "degree must be >= 1");
  const Eigen::Index n = u3.size();
  if (r.rows() != n || r.cols() != 3) throw Error(ErrorCode::kInvalidDimension, "r must be N x 3");
  if (n <= 8 * degree) throw Error(ErrorCode::kInvalidInput, "need N > 8 * degree samples");
  const int p = high_order_arx_parameter_count(degree);
  Matrix x = Matrix::Zero(n, p);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (int j = 1; j <= degree; ++j) {
      if (k - j >= 0) x(k, j - 1) = -u3(k - j);
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j <= degree; ++j) {
        if (k - j >= 0) x(k, degree + i * (degree + 1) + j) = r(k - j, i);
      }
    }
  }
  // Minimum-norm least squares, the vanishing-ridge limit: exact on
  // noiseless data, zero on zero data, and defined when the regressor loses
  // rank through a factor shared by all four polynomials.
  Vector coef = Vector::Zero(p);
  if (x.cwiseAbs().maxCoeff() > 0.0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(x);
    cod.setThreshold(kRankThreshold);
    coef = cod.solve(u3);
    if (!coef.allFinite()) throw Error(ErrorCode::kEstimation, "closed-loop regression failed");
  }
  ClosedLoopModel cl;
  cl.abar.coeffs.assign(static_cast<std::size_t>(degree) + 1, 0.0);
  cl.abar.coeffs[0] = 1.0;
  for (int j = 1; j <= degree; ++j) cl.abar.coeffs[static_cast<std::size_t>(j)] = coef(j - 1);
  Polynomial* outs[3] = {&cl.bbar1, &cl.bbar2, &cl.bbar3};
  for (int i = 0; i < 3; ++i) {
    outs[i]->coeffs.resize(static_cast<std::size_t>(degree) + 1);
    for (int j = 0; j <= degree; ++j) {
      outs[i]->coeffs[static_cast<std::size_t>(j)] = coef(degree + i * (degree + 1) + j);
    }
  }
  return cl;
}

namespace {

struct RootCluster {
  Complex center;
  std::size_t count = 0;
};

// Single-linkage groups of roots closer than `radius` (relative). A k-fold
// root splits by about eps^(1/k) in floating point while the mean of the
// group stays accurate, so matching is done on group centers.
std::vector<RootCluster> cluster_roots(const std::vector<Complex>& roots, double radius) {
  const std::size_t n = roots.size();
  std::vector<std::size_t> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = i;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double tol = radius * std::max(1.0, std::abs(roots[i]));
        if (label[i] != label[j] && std::abs(roots[i] - roots[j]) <= tol) {
          const std::size_t lo = std::min(label[i], label[j]);
          label[i] = label[j] = lo;
          changed = true;
        }
      }
    }
  }
  std::vector<RootCluster> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != i) continue;
    RootCluster c;
    for (std::size_t j = 0; j < n; ++j) {
      if (label[j] == i) {
        c.center += roots[j];
        ++c.count;
      }
    }
    c.center /= static_cast<double>(c.count);
    if (std::abs(c.center.imag()) <= 1e-14 * std::max(1.0, std::abs(c.center))) c.center.imag(0.0);
    out.push_back(c);
  }
  return out;
}

constexpr double kClusterRadius = 1e-4;

}  // namespace

RationalModel cancel_common_roots(const Polynomial& num, const Polynomial& den, double rel_tol) {
  const Polynomial d = trim_leading(den);
  if (d.is_zero()) throw Error(ErrorCode::kRecovery, "zero denominator polynomial");
  const Polynomial nm = trim_leading(num);
  if (nm.is_zero()) return {Polynomial{0.0}, Polynomial{1.0}};
  auto num_clusters = cluster_roots(poly_roots(nm), kClusterRadius);
  auto den_clusters = cluster_roots(poly_roots(d), kClusterRadius);
  bool any = false;
  for (auto& nc : num_clusters) {
    for (auto& dc : den_clusters) {
      if (dc.count == 0 || nc.count == 0) continue;
      if (std::abs(nc.center - dc.center) <= rel_tol * std::max(1.0, std::abs(nc.center))) {
        const std::size_t k = std::min(nc.count, dc.count);
        nc.count -= k;
        dc.count -= k;
        any = true;
      }
    }
  }
  if (!any) return {poly_scale(nm, 1.0 / d.leading()), poly_scale(d, 1.0 / d.leading())};
  auto expand = [](const std::vector<RootCluster>& clusters) {
    std::vector<Complex> out;
    for (const auto& c : clusters) out.insert(out.end(), c.count, c.center);
    return out;
  };
  const auto nr = expand(num_clusters);
  const auto dr = expand(den_clusters);
  RationalModel g;
  g.num = poly_from_roots(nr, nm.leading() / d.leading());
  g.den = poly_from_roots(dr, 1.0);
  return g;
}

Polynomial stabilize_numerator(const Polynomial& p) {
  const Polynomial t = trim_leading(p);
  if (t.is_zero()) throw Error(ErrorCode::kInvalidInput, "cannot stabilize the zero polynomial");
  const auto roots = poly_roots(t);
  std::vector<Complex> inside;
  for (const Complex& z : roots) {
    if (std::abs(z) < 1.0) inside.push_back(z);
  }
  if (inside.size() == roots.size()) return p;
  Polynomial out = poly_from_roots(inside, 1.0);
  const double target = t(1.0);
  const double current = out(1.0);
  const double scale = target != 0.0 && current != 0.0 ? target / current : t.leading();
  return poly_scale(out, scale);
}

std::vector<RationalModel> recover_subsystems(const ClosedLoopModel& cl, bool stabilize) {
  const Polynomial b1_den = stabilize ? stabilize_numerator(cl.bbar1) : cl.bbar1;
  if (trim_leading(cl.bbar3).is_zero() || trim_leading(b1_den).is_zero()) {
    throw Error(ErrorCode::kRecovery, "zero denominator in the subsystem ratios");
  }
  std::vector<RationalModel> out;
  out.push_back(cancel_common_roots(cl.bbar1, cl.bbar3));
  out.push_back(cancel_common_roots(cl.bbar2, b1_den));
  out.push_back(cancel_common_roots(poly_sub(cl.bbar3, cl.abar), b1_den));
  return out;
}

SubsystemModel to_subsystem_model(const RationalModel& g) {
  const Polynomial den = trim_leading(g.den);
  if (den.is_zero()) throw Error(ErrorCode::kRecovery, "zero denominator");
  const Polynomial num = poly_scale(trim_leading(g.num), 1.0 / den.leading());
  const std::size_t n = den.degree();
  SubsystemModel m;
  for (std::size_t j = 1; j <= n; ++j) m.a.push_back(den.coeffs[j] / den.leading());
  m.b.assign(n + 1, 0.0);
  // Align constant terms; coefficients of q^k with k > n are dropped.
  const std::size_t nn = num.coeffs.size();
  for (std::size_t i = 0; i < nn; ++i) {
    const std::size_t power = nn - 1 - i;
    if (power <= n) m.b[n - power] = num.coeffs[i];
  }
  return m;
}

SubsystemModel reduce_order(const RationalModel& g, int na, int nb, int iterations) {
  if (na < 1 || nb < 0 || nb > na) throw Error(ErrorCode::kInvalidParameter, "need 0 <= nb <= na, na >= 1");
  constexpr int kGrid = 256;
  std::vector<Complex> z(kGrid), h(kGrid);
  for (int k = 0; k < kGrid; ++k) {
    const double w = std::numbers::pi * (k + 0.5) / kGrid;
    z[static_cast<std::size_t>(k)] = std::polar(1.0, w);
    const Complex den = g.den(z[static_cast<std::size_t>(k)]);
    h[static_cast<std::size_t>(k)] = g.num(z[static_cast<std::size_t>(k)]) / den;
  }
  // Unknowns: a_1..a_na, b_0..b_nb with B in powers q^{na}..q^{na-nb}.
  const int p = na + nb + 1;
  std::vector<double> a_prev(static_cast<std::size_t>(na) + 1, 0.0);
  a_prev[0] = 1.0;
  Vector sol = Vector::Zero(p);
  for (int it = 0; it < iterations; ++it) {
    Matrix x(2 * kGrid, p);
    Vector y(2 * kGrid);
    for (int k = 0; k < kGrid; ++k) {
      const Complex zk = z[static_cast<std::size_t>(k)], hk = h[static_cast<std::size_t>(k)];
      Complex aprev(0.0, 0.0);
      for (int j = 0; j <= na; ++j) aprev += a_prev[static_cast<std::size_t>(j)] * std::pow(zk, na - j);
      const double wgt = 1.0 / std::max(std::abs(aprev), 1e-12);
      std::vector<Complex> row(static_cast<std::size_t>(p));
      for (int j = 1; j <= na; ++j) row[static_cast<std::size_t>(j - 1)] = -hk * std::pow(zk, na - j);
      for (int j = 0; j <= nb; ++j) row[static_cast<std::size_t>(na + j)] = std::pow(zk, na - j);
      const Complex target = hk * std::pow(zk, na);
      for (int c = 0; c < p; ++c) {
        x(2 * k, c) = wgt * row[static_cast<std::size_t>(c)].real();
        x(2 * k + 1, c) = wgt * row[static_cast<std::size_t>(c)].imag();
      }
      y(2 * k) = wgt * target.real();
      y(2 * k + 1) = wgt * target.imag();
    }
    sol = x.colPivHouseholderQr().solve(y);
    for (int j = 1; j <= na; ++j) a_prev[static_cast<std::size_t>(j)] = sol(j - 1);
  }
  Polynomial a(a_prev);
  Polynomial b(std::vector<double>(sol.data() + na, sol.data() + p));
  // Reflect unstable poles, then restore the static gain.
  auto roots = poly_roots(a);
  bool reflected = false;
  for (Complex& r : roots) {
    if (std::abs(r) >= 1.0) {
      r = 1.0 / std::conj(r);
      reflected = true;
    }
  }
  if (reflected) {
    const double gain_before = a(1.0) != 0.0 ? b(1.0) / a(1.0) : 0.0;
    a = poly_from_roots(roots, 1.0);
    const double bv = b(1.0);
    if (bv != 0.0 && std::isfinite(gain_before)) b = poly_scale(b, gain_before * a(1.0) / bv);
  }
  SubsystemModel m;
  m.a.assign(a.coeffs.begin() + 1, a.coeffs.end());
  m.b = b.coeffs;
  return m;
}

IndirectResult indirect_identify(const NetworkTopology& topology, const Dataset& data, int degree) {
  require_benchmark_topology(topology);
  const SignalId u3{SignalKind::kInput, 2};
  const auto it = std::find(topology.observed.begin(), topology.observed.end(), u3);
  if (it == topology.observed.end()) {
    throw Error(ErrorCode::kUnsupportedTopology, "the indirect baseline needs u3 observed");
  }
  const Eigen::Index col = std::distance(topology.observed.begin(), it);
  IndirectResult out;
  out.closed_loop = estimate_high_order_arx(data.observed.col(col), data.r, degree);
  for (const Complex& z : poly_roots(out.closed_loop.bbar1)) {
    if (std::abs(z) >= 1.0) ++out.unstable_bbar1_zeros;
  }
  out.recovered = recover_subsystems(out.closed_loop, true);
  std::vector<SubsystemModel> reduced;
  for (std::size_t i = 0; i < out.recovered.size(); ++i) {
    out.high_order.push_back(to_subsystem_model(out.recovered[i]));
    const auto& o = topology.orders[i];
    reduced.push_back(reduce_order(out.recovered[i], o.na, o.nb));
  }
  out.reduced = reduced;
  out.theta_init = pack_theta(reduced);
  return out;
}

}  // namespace netid
