#include "netid/netmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "netid/error.hpp"

namespace netid {

std::string SignalId::name() const {
  return (kind == SignalKind::kOutput ? "y" : "u") + std::to_string(index + 1);
}

SignalId SignalId::parse(std::string_view text) {
  if (text.size() < 2 || (text[0] != 'y' && text[0] != 'u')) {
    throw Error(ErrorCode::kInvalidParameter, "bad signal name '" + std::string(text) + "'");
  }
  int number = 0;
  const auto* first = text.data() + 1;
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, number);
  if (ec != std::errc() || ptr != last || number < 1) {
    throw Error(ErrorCode::kInvalidParameter, "bad signal name '" + std::string(text) + "'");
  }
  return {text[0] == 'y' ? SignalKind::kOutput : SignalKind::kInput, number - 1};
}

SignalId SignalId::from_natural_index(int natural, int subsystems) {
  if (natural < subsystems) return {SignalKind::kOutput, natural};
  return {SignalKind::kInput, natural - subsystems};
}

int SubsystemModel::degree() const {
  return std::max({static_cast<int>(a.size()), static_cast<int>(b.size()) - 1,
                   static_cast<int>(c.size())});
}

namespace {

Polynomial padded(double lead, const std::vector<double>& tail, bool has_lead, int degree) {
  std::vector<double> coeffs(static_cast<std::size_t>(degree) + 1, 0.0);
  std::size_t pos = 0;
  if (has_lead) coeffs[pos++] = lead;
  for (double v : tail) coeffs[pos++] = v;
  return Polynomial(std::move(coeffs));
}

}  // namespace

Polynomial SubsystemModel::a_poly() const { return padded(1.0, a, true, degree()); }
Polynomial SubsystemModel::b_poly() const { return padded(0.0, b, false, degree()); }
Polynomial SubsystemModel::c_poly() const { return padded(1.0, c, true, degree()); }

void NetworkTopology::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidParameter, msg); };
  if (subsystems < 1) fail("topology needs at least one subsystem");
  if (exogenous < 0) fail("negative exogenous signal count");
  if (lambda.rows() != subsystems || lambda.cols() != subsystems) fail("Lambda must be M x M");
  if (omega.rows() != subsystems || omega.cols() != exogenous) fail("Omega must be M x Q");
  auto unit_entries = [](const Eigen::MatrixXi& m) {
    return (m.array().abs() <= 1).all();
  };
  if (!unit_entries(lambda)) fail("Lambda entries must be -1, 0 or +1");
  if (!unit_entries(omega)) fail("Omega entries must be -1, 0 or +1");
  if (observed.empty()) fail("at least one observed signal is required");
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i].index < 0 || observed[i].index >= subsystems) {
      fail("observed signal " + observed[i].name() + " out of range");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (observed[i] == observed[j]) fail("duplicate observed signal " + observed[i].name());
    }
  }
  if (static_cast<int>(orders.size()) != subsystems) fail("one order triple per subsystem");
  for (const auto& o : orders) {
    if (o.na < 0 || o.nb < 0 || o.nc < 0) fail("orders must be nonnegative");
  }
}

int NetworkTopology::theta_size() const {
  int total = 0;
  for (const auto& o : orders) total += o.parameter_count();
  return total;
}

std::vector<int> NetworkTopology::signal_order() const {
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(signal_count()));
  for (const auto& id : observed) order.push_back(id.natural_index(subsystems));
  for (int s = 0; s < signal_count(); ++s) {
    if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
  }
  return order;
}

std::vector<SignalId> NetworkTopology::missing() const {
  std::vector<SignalId> out;
  const auto order = signal_order();
  for (std::size_t j = observed.size(); j < order.size(); ++j) {
    out.push_back(SignalId::from_natural_index(order[j], subsystems));
  }
  return out;
}

bool NetworkTopology::is_observed(const SignalId& id) const {
  return std::find(observed.begin(), observed.end(), id) != observed.end();
}

Matrix NetworkTopology::interconnection_block() const {
  const auto order = signal_order();
  Matrix block = Matrix::Zero(subsystems, signal_count());
  for (int j = 0; j < signal_count(); ++j) {
    const int s = order[static_cast<std::size_t>(j)];
    for (int i = 0; i < subsystems; ++i) {
      if (s < subsystems) {
        block(i, j) = -static_cast<double>(lambda(i, s));
      } else if (s - subsystems == i) {
        block(i, j) = 1.0;
      }
    }
  }
  return block;
}

ParameterVector pack_theta(std::span<const SubsystemModel> models) {
  std::vector<double> flat;
  for (const auto& m : models) flat.insert(flat.end(), m.a.begin(), m.a.end());
  for (const auto& m : models) {
    if (m.b.empty()) throw Error(ErrorCode::kInvalidParameter, "b must include b_0");
    flat.insert(flat.end(), m.b.begin(), m.b.end());
  }
  for (const auto& m : models) flat.insert(flat.end(), m.c.begin(), m.c.end());
  return Eigen::Map<const Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

std::vector<SubsystemModel> unpack_theta(const ParameterVector& theta,
                                         const NetworkTopology& topology) {
  if (theta.size() != topology.theta_size()) {
    throw Error(ErrorCode::kInvalidParameter,
                "theta has length " + std::to_string(theta.size()) + ", topology expects " +
                    std::to_string(topology.theta_size()));
  }
  std::vector<SubsystemModel> models(topology.orders.size());
  Eigen::Index pos = 0;
  auto take = [&](std::vector<double>& dst, int count) {
    dst.assign(theta.data() + pos, theta.data() + pos + count);
    pos += count;
  };
  for (std::size_t i = 0; i < models.size(); ++i) take(models[i].a, topology.orders[i].na);
  for (std::size_t i = 0; i < models.size(); ++i) take(models[i].b, topology.orders[i].nb + 1);
  for (std::size_t i = 0; i < models.size(); ++i) take(models[i].c, topology.orders[i].nc);
  return models;
}

SubsystemFilters subsystem_filters(const SubsystemModel& model, std::size_t n) {
  std::vector<double> a_col{1.0};
  a_col.insert(a_col.end(), model.a.begin(), model.a.end());
  std::vector<double> b_col = model.b;
  SubsystemFilters f;
  if (model.c.empty()) {
    a_col.resize(std::min(a_col.size(), n));
    b_col.resize(std::min(b_col.size(), n));
    f.output = std::move(a_col);
    f.input = std::move(b_col);
  } else {
    std::vector<double> c_col{1.0};
    c_col.insert(c_col.end(), model.c.begin(), model.c.end());
    f.output = deconvolve_truncated(c_col, a_col, n);
    f.input = deconvolve_truncated(c_col, b_col, n);
  }
  for (double& v : f.input) v = -v;
  return f;
}

Matrix StackedSystem::a() const {
  Matrix out(a1.rows() + a2.rows(), a1.cols());
  out << a1, a2;
  return out;
}

Vector StackedSystem::b() const {
  Vector out(b1.size() + b2.size());
  out << b1, b2;
  return out;
}

StackedSystem assemble_stacked_system(const ParameterVector& theta,
                                      const NetworkTopology& topology, std::size_t n,
                                      const Matrix& r) {
  const auto models = unpack_theta(theta, topology);
  return assemble_stacked_system(models, topology, n, r);
}

StackedSystem assemble_stacked_system(std::span<const SubsystemModel> models,
                                      const NetworkTopology& topology, std::size_t n,
                                      const Matrix& r) {
  topology.validate();
  if (n == 0) throw Error(ErrorCode::kInvalidDimension, "N must be positive");
  if (static_cast<int>(models.size()) != topology.subsystems) {
    throw Error(ErrorCode::kInvalidParameter, "one model per subsystem");
  }
  const auto nn = static_cast<Eigen::Index>(n);
  if (r.rows() != nn || r.cols() != topology.exogenous) {
    throw Error(ErrorCode::kInvalidDimension, "r must be N x Q");
  }
  const int m = topology.subsystems;
  const auto order = topology.signal_order();
  std::vector<int> position(order.size());
  for (std::size_t j = 0; j < order.size(); ++j) position[static_cast<std::size_t>(order[j])] = static_cast<int>(j);

  StackedSystem sys;
  sys.a1 = Matrix::Zero(m * nn, 2 * m * nn);
  sys.b1 = Vector::Zero(m * nn);
  for (int i = 0; i < m; ++i) {
    const auto f = subsystem_filters(models[static_cast<std::size_t>(i)], n);
    const Eigen::Index yc = position[static_cast<std::size_t>(i)] * nn;
    const Eigen::Index uc = position[static_cast<std::size_t>(m + i)] * nn;
    sys.a1.block(i * nn, yc, nn, nn) = ToeplitzOperator(f.output, n).dense();
    sys.a1.block(i * nn, uc, nn, nn) = ToeplitzOperator(f.input, n).dense();
  }

  const Matrix block = topology.interconnection_block();
  sys.a2 = Matrix::Zero(m * nn, 2 * m * nn);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < 2 * m; ++j) {
      if (block(i, j) != 0.0) {
        sys.a2.block(i * nn, j * nn, nn, nn).diagonal().setConstant(block(i, j));
      }
    }
  }
  sys.b2 = Vector::Zero(m * nn);
  for (int i = 0; i < m; ++i) {
    for (int q = 0; q < topology.exogenous; ++q) {
      if (topology.omega(i, q) != 0) {
        sys.b2.segment(i * nn, nn) -= static_cast<double>(topology.omega(i, q)) * r.col(q);
      }
    }
  }
  sys.n_observed = topology.observed_count() * static_cast<int>(n);
  sys.n_missing = (2 * m - topology.observed_count()) * static_cast<int>(n);
  return sys;
}

Vector stack_signals(const Matrix& natural_signals, const NetworkTopology& topology) {
  const auto order = topology.signal_order();
  const Eigen::Index n = natural_signals.rows();
  Vector x(n * static_cast<Eigen::Index>(order.size()));
  for (std::size_t j = 0; j < order.size(); ++j) {
    x.segment(static_cast<Eigen::Index>(j) * n, n) = natural_signals.col(order[j]);
  }
  return x;
}

double closed_loop_spectral_radius(std::span<const SubsystemModel> models,
                                   const NetworkTopology& topology) {
  const int m = topology.subsystems;
  std::vector<int> offsets(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 0; i < m; ++i) {
    const auto& mod = models[static_cast<std::size_t>(i)];
    offsets[static_cast<std::size_t>(i) + 1] =
        offsets[static_cast<std::size_t>(i)] +
        std::max(static_cast<int>(mod.a.size()), static_cast<int>(mod.b.size()) - 1);
  }
  const int states = offsets.back();
  // Observer canonical form per subsystem: x+ = F x + G u, y = H x + D u.
  Matrix f = Matrix::Zero(states, states);
  Matrix g = Matrix::Zero(states, m);
  Matrix h = Matrix::Zero(m, states);
  Matrix d = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    const auto& mod = models[static_cast<std::size_t>(i)];
    const int o = offsets[static_cast<std::size_t>(i)];
    const int n = offsets[static_cast<std::size_t>(i) + 1] - o;
    const double b0 = mod.b.empty() ? 0.0 : mod.b[0];
    d(i, i) = b0;
    if (n == 0) continue;
    h(i, o) = 1.0;
    for (int j = 0; j < n; ++j) {
      const double aj = j < static_cast<int>(mod.a.size()) ? mod.a[static_cast<std::size_t>(j)] : 0.0;
      const double bj = j + 1 < static_cast<int>(mod.b.size()) ? mod.b[static_cast<std::size_t>(j) + 1] : 0.0;
      f(o + j, o) = -aj;
      if (j + 1 < n) f(o + j, o + j + 1) = 1.0;
      g(o + j, i) = bj - aj * b0;
    }
  }
  const Matrix lam = topology.lambda.cast<double>();
  const Matrix loop = Matrix::Identity(m, m) - d * lam;
  Eigen::FullPivLU<Matrix> lu(loop);
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  if (states == 0) return 0.0;
  const Matrix closed = f + g * lam * lu.solve(h);
  if (!closed.allFinite()) return std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> solver(closed, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

bool closed_loop_is_stable(std::span<const SubsystemModel> models,
                           const NetworkTopology& topology, double margin) {
  return closed_loop_spectral_radius(models, topology) < 1.0 - margin;
}

bool closed_loop_is_stable(const ParameterVector& theta, const NetworkTopology& topology,
                           double margin) {
  const auto models = unpack_theta(theta, topology);
  return closed_loop_is_stable(models, topology, margin);
}

}  // namespace netid
