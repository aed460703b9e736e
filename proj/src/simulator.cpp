#include "netid/simulator.hpp"

#include <cmath>
#include <numbers>

#include "netid/error.hpp"

namespace netid {

Matrix simulate_network(std::span<const SubsystemModel> models, const NetworkTopology& topology,
                        const Matrix& r, const Matrix& e) {
  const int m = topology.subsystems;
  if (static_cast<int>(models.size()) != m) {
    throw Error(ErrorCode::kInvalidDimension, "one model per subsystem required");
  }
  if (r.cols() != topology.exogenous || e.cols() != m || e.rows() != r.rows()) {
    throw Error(ErrorCode::kInvalidDimension, "r must be N x Q and e must be N x M");
  }
  const Eigen::Index n = r.rows();
  const Matrix lambda = topology.lambda.cast<double>();
  const Matrix omega = topology.omega.cast<double>();

  Vector b0(m);
  for (int i = 0; i < m; ++i) b0(i) = models[static_cast<std::size_t>(i)].b.front();
  const Matrix loop = Matrix::Identity(m, m) - b0.asDiagonal() * lambda;
  Eigen::FullPivLU<Matrix> lu(loop);
  if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-12) {
    throw Error(ErrorCode::kWellPosedness, "instantaneous loop I - diag(b0) Lambda is singular");
  }

  Matrix y = Matrix::Zero(n, m);
  Matrix u = Matrix::Zero(n, m);
  Vector past(m);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (int i = 0; i < m; ++i) {
      const auto& md = models[static_cast<std::size_t>(i)];
      double acc = e(k, i);
      for (std::size_t j = 0; j < md.a.size(); ++j) {
        const Eigen::Index lag = k - static_cast<Eigen::Index>(j) - 1;
        if (lag >= 0) acc -= md.a[j] * y(lag, i);
      }
      for (std::size_t j = 1; j < md.b.size(); ++j) {
        const Eigen::Index lag = k - static_cast<Eigen::Index>(j);
        if (lag >= 0) acc += md.b[j] * u(lag, i);
      }
      for (std::size_t j = 0; j < md.c.size(); ++j) {
        const Eigen::Index lag = k - static_cast<Eigen::Index>(j) - 1;
        if (lag >= 0) acc += md.c[j] * e(lag, i);
      }
      past(i) = acc;
    }
    // y = diag(b0) (Lambda y + Omega r) + past
    const Vector ext = omega * r.row(k).transpose();
    const Vector yk = lu.solve(past + b0.cwiseProduct(ext));
    y.row(k) = yk.transpose();
    u.row(k) = (lambda * yk + ext).transpose();
  }
  Matrix out(n, 2 * m);
  out << y, u;
  return out;
}

Matrix simulate_network(const ParameterVector& theta, const NetworkTopology& topology,
                        const Matrix& r, const Matrix& e) {
  const auto models = unpack_theta(theta, topology);
  return simulate_network(models, topology, r, e);
}

double SignalRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SignalRng::rademacher() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }

double SignalRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Dataset generate_dataset(const NetworkTopology& topology, const ParameterVector& theta_true,
                         std::size_t n, double lambda_true, std::uint64_t seed) {
  topology.validate();
  if (n == 0) throw Error(ErrorCode::kInvalidDimension, "N must be positive");
  if (!(lambda_true > 0.0)) throw Error(ErrorCode::kInvalidParameter, "lambda_true must be positive");
  const auto rows = static_cast<Eigen::Index>(n);
  SignalRng rng(seed);
  Dataset d;
  d.n = n;
  d.seed = seed;
  d.lambda_true = lambda_true;
  d.r.resize(rows, topology.exogenous);
  for (Eigen::Index k = 0; k < rows; ++k) {
    for (int q = 0; q < topology.exogenous; ++q) d.r(k, q) = rng.rademacher();
  }
  Matrix e(rows, topology.subsystems);
  const double sd = std::sqrt(lambda_true);
  for (Eigen::Index k = 0; k < rows; ++k) {
    for (int i = 0; i < topology.subsystems; ++i) e(k, i) = sd * rng.normal();
  }
  d.full_state = simulate_network(theta_true, topology, d.r, e);
  d.disturbance = std::move(e);
  d.observed = extract_signals(*d.full_state, topology.observed, topology.subsystems);
  for (const auto& id : topology.observed) d.observed_names.push_back(id.name());
  return d;
}

Matrix extract_signals(const Matrix& state, std::span<const SignalId> ids, int subsystems) {
  Matrix out(state.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = state.col(ids[j].natural_index(subsystems));
  }
  return out;
}

FitVariant parse_fit_variant(const std::string& text) {
  if (text == "standard") return FitVariant::kStandard;
  if (text == "literal") return FitVariant::kLiteral;
  throw Error(ErrorCode::kConfig, "unknown fit variant '" + text + "' (standard|literal)");
}

std::string to_string(FitVariant v) { return v == FitVariant::kStandard ? "standard" : "literal"; }

double fit_metric(const Vector& xhat, const Vector& xref, FitVariant variant) {
  if (xhat.size() != xref.size() || xref.size() < 2) {
    throw Error(ErrorCode::kInvalidDimension, "fit needs two equal-length signals of length >= 2");
  }
  const double mean = xref.mean();
  const Vector centered = (variant == FitVariant::kStandard ? xref : xhat).array() - mean;
  const double denom = centered.norm();
  if (!(denom > 0.0)) throw Error(ErrorCode::kUndefinedFit, "fit denominator is zero");
  return 1.0 - (xhat - xref).norm() / denom;
}

std::vector<SignalId> evaluated_missing_signals(const NetworkTopology& topology) {
  std::vector<SignalId> out;
  for (const auto& id : topology.missing()) {
    if (id.kind == SignalKind::kInput && topology.lambda.row(id.index).cwiseAbs().sum() == 0) continue;
    out.push_back(id);
  }
  return out;
}

namespace {

Vector concat(const Matrix& state, const std::vector<SignalId>& ids, int m) {
  Vector out(state.rows() * static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out.segment(static_cast<Eigen::Index>(j) * state.rows(), state.rows()) = state.col(ids[j].natural_index(m));
  }
  return out;
}

}  // namespace

FitReport evaluate_fit(const Matrix& estimate, const Matrix& reference,
                       const NetworkTopology& topology, FitVariant variant) {
  const int m = topology.subsystems;
  if (estimate.rows() != reference.rows() || estimate.cols() != 2 * m || reference.cols() != 2 * m) {
    throw Error(ErrorCode::kInvalidDimension, "fit evaluation needs two N x 2M state matrices");
  }
  FitReport rep;
  const auto missing = evaluated_missing_signals(topology);
  rep.observed = fit_metric(concat(estimate, topology.observed, m), concat(reference, topology.observed, m), variant);
  rep.missing = missing.empty() ? std::nan("")
                                : fit_metric(concat(estimate, missing, m), concat(reference, missing, m), variant);
  for (const auto& id : missing) rep.missing_signals.push_back(id.name());
  for (int s = 0; s < 2 * m; ++s) {
    const auto id = SignalId::from_natural_index(s, m);
    try {
      rep.per_signal[id.name()] = fit_metric(estimate.col(s), reference.col(s), variant);
    } catch (const Error&) {
      rep.per_signal[id.name()] = std::nan("");
    }
  }
  return rep;
}

NetworkTopology experiment_topology(const std::vector<std::string>& observed) {
  NetworkTopology t;
  t.subsystems = 3;
  t.exogenous = 3;
  t.lambda = Eigen::MatrixXi::Zero(3, 3);
  t.lambda(0, 1) = 1;
  t.lambda(0, 2) = 1;
  t.lambda(2, 0) = 1;
  t.omega = Eigen::MatrixXi::Identity(3, 3);
  for (const auto& name : observed) t.observed.push_back(SignalId::parse(name));
  t.orders = {{2, 2, 0}, {2, 2, 0}, {2, 2, 0}};
  t.validate();
  return t;
}

std::vector<ContinuousPlant> experiment_plants() {
  return {
      {Polynomial{0.5}, Polynomial{1.0, 4.0, 4.0}},
      {Polynomial{1.0}, Polynomial{1.0, 2.0, 0.75}},
      {Polynomial{0.5}, Polynomial{1.0, 1.0, 0.25}},
  };
}

std::vector<SubsystemModel> experiment_models(double ts) {
  std::vector<SubsystemModel> out;
  for (const auto& plant : experiment_plants()) {
    const auto d = zoh_discretize(plant, ts);
    out.push_back({d.a, d.b, {}});
  }
  return out;
}

ParameterVector experiment_theta(double ts) {
  const auto models = experiment_models(ts);
  return pack_theta(models);
}

}  // namespace netid
