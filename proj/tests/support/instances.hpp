#pragma once

#include <random>
#include <string>
#include <vector>

#include "netid/netmodel.hpp"
#include "netid/simulator.hpp"

namespace netid::testing {

/// One ARX block driven by one exogenous input, u1 = r1.
inline NetworkTopology single_block(const std::vector<std::string>& observed, SubsystemOrders orders) {
  NetworkTopology t;
  t.subsystems = 1;
  t.exogenous = 1;
  t.lambda = Eigen::MatrixXi::Zero(1, 1);
  t.omega = Eigen::MatrixXi::Identity(1, 1);
  for (const auto& name : observed) t.observed.push_back(SignalId::parse(name));
  t.orders = {orders};
  return t;
}

/// Two-block feedback loop u1 = y2 + r1, u2 = y1 + r2.
inline NetworkTopology two_block_loop(const std::vector<std::string>& observed,
                                      SubsystemOrders orders = {1, 1, 0}) {
  NetworkTopology t;
  t.subsystems = 2;
  t.exogenous = 2;
  t.lambda.resize(2, 2);
  t.lambda << 0, 1, 1, 0;
  t.omega = Eigen::MatrixXi::Identity(2, 2);
  for (const auto& name : observed) t.observed.push_back(SignalId::parse(name));
  t.orders = {orders, orders};
  return t;
}

/// Random parameters of the topology with b0 = 0 and the closed loop stable.
inline ParameterVector random_stable_theta(const NetworkTopology& topology, std::mt19937_64& rng,
                                           double scale = 0.5) {
  std::uniform_real_distribution<double> coef(-scale, scale);
  for (;;) {
    std::vector<SubsystemModel> models;
    for (const auto& o : topology.orders) {
      SubsystemModel m;
      for (int j = 0; j < o.na; ++j) m.a.push_back(coef(rng));
      m.b.push_back(0.0);
      for (int j = 0; j < o.nb; ++j) m.b.push_back(coef(rng));
      for (int j = 0; j < o.nc; ++j) m.c.push_back(coef(rng) * 0.5);
      models.push_back(m);
    }
    bool c_stable = true;
    for (const auto& m : models) c_stable = c_stable && is_stable_poly(m.c_poly(), 0.05);
    if (c_stable && closed_loop_is_stable(models, topology, 0.05)) return pack_theta(models);
  }
}

/// A random square singular-model instance with A_2m of prescribed rank and
/// a consistent (x, e) pair.
struct ReductionInstance {
  Matrix a1, a2;
  Vector b1, b2;
  Vector x, e;
  int n_observed = 0;
  int n_missing = 0;
  int missing_rank = 0;
};

/// Matrix of the given shape and rank with singular values in [0.5, 2].
inline Matrix random_rank_matrix(Eigen::Index rows, Eigen::Index cols, Eigen::Index rank,
                                 std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> sv(0.5, 2.0);
  Matrix out = Matrix::Zero(rows, cols);
  for (Eigen::Index k = 0; k < rank; ++k) {
    Vector u(rows), v(cols);
    for (auto& c : u) c = normal(rng);
    for (auto& c : v) c = normal(rng);
    out += sv(rng) * u.normalized() * v.normalized().transpose();
  }
  return out;
}

/// n total variables, m2 interconnection rows, n_missing columns of which
/// A_2m has rank `rank`. Requires m2 - rank <= n - n_missing.
inline ReductionInstance random_reduction_instance(int n, int m2, int n_missing, int rank,
                                                   std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  ReductionInstance inst;
  inst.n_missing = n_missing;
  inst.n_observed = n - n_missing;
  inst.missing_rank = rank;
  inst.a2.resize(m2, n);
  inst.a2.rightCols(n_missing) = random_rank_matrix(m2, n_missing, rank, rng);
  inst.a2.leftCols(inst.n_observed) = random_rank_matrix(m2, inst.n_observed,
                                                         std::min(m2, inst.n_observed), rng);
  inst.a1.resize(n - m2, n);
  for (auto& c : inst.a1.reshaped()) c = normal(rng);
  inst.x.resize(n);
  for (auto& c : inst.x) c = normal(rng);
  inst.b1.resize(n - m2);
  for (auto& c : inst.b1) c = normal(rng);
  inst.b2 = -inst.a2 * inst.x;
  inst.e = inst.a1 * inst.x + inst.b1;
  return inst;
}

}  // namespace netid::testing
