#include <doctest.h>

#include <random>

#include "instances.hpp"
#include "netid/error.hpp"
#include "netid/netmodel.hpp"
#include "netid/simulator.hpp"

using namespace netid;
using netid::testing::single_block;
using netid::testing::two_block_loop;

TEST_CASE("signal names") {
  const auto y2 = SignalId::parse("y2");
  CHECK(y2.kind == SignalKind::kOutput);
  CHECK(y2.index == 1);
  CHECK(y2.name() == "y2");
  CHECK(SignalId::parse("u3").natural_index(3) == 5);
  CHECK(SignalId::from_natural_index(5, 3) == SignalId::parse("u3"));
  CHECK_THROWS_AS(SignalId::parse("x1"), Error);
  CHECK_THROWS_AS(SignalId::parse("y0"), Error);
  CHECK_THROWS_AS(SignalId::parse("u"), Error);
}

TEST_CASE("parameter packing order") {
  SubsystemModel m{{0.5}, {1.0, 2.0}, {}};
  const std::vector<SubsystemModel> one{m};
  const ParameterVector theta = pack_theta(one);
  REQUIRE(theta.size() == 3);
  CHECK(theta(0) == 0.5);
  CHECK(theta(1) == 1.0);
  CHECK(theta(2) == 2.0);

  const std::vector<SubsystemModel> gain{SubsystemModel{{}, {0.7}, {}}};
  CHECK(pack_theta(gain).size() == 1);
  CHECK(pack_theta(gain)(0) == 0.7);

  const auto topo = single_block({"y1"}, {1, 1, 0});
  CHECK_THROWS_AS(unpack_theta(ParameterVector::Zero(2), topo), Error);
}

TEST_CASE("pack and unpack round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  auto topo = netid::experiment_topology();
  topo.orders = {{2, 1, 1}, {1, 2, 0}, {0, 0, 2}};
  for (int trial = 0; trial < 10; ++trial) {
    ParameterVector theta(topo.theta_size());
    for (auto& v : theta) v = c(rng);
    CHECK((pack_theta(unpack_theta(theta, topo)) - theta).norm() == 0.0);
  }
}

TEST_CASE("open-loop stacked system") {
  const auto topo = single_block({"y1"}, {0, 0, 0});
  const double b0 = 0.8;
  ParameterVector theta(1);
  theta << b0;
  const std::size_t n = 3;
  Matrix r(3, 1);
  r << 1.0, -1.0, 2.0;
  const auto sys = assemble_stacked_system(theta, topo, n, r);
  const Matrix a = sys.a();
  REQUIRE(a.rows() == 6);
  REQUIRE(a.cols() == 6);
  // Stacked order is (y1, u1) since y1 is observed.
  Matrix expected = Matrix::Zero(6, 6);
  expected.topLeftCorner(3, 3).setIdentity();
  expected.topRightCorner(3, 3) = -b0 * Matrix::Identity(3, 3);
  expected.bottomRightCorner(3, 3).setIdentity();
  CHECK((a - expected).norm() < 1e-15);
  Vector b_expected = Vector::Zero(6);
  b_expected.tail(3) = -r.col(0);
  CHECK((sys.b() - b_expected).norm() < 1e-15);
}

TEST_CASE("zero dynamics give identity output rows") {
  const auto topo = two_block_loop({"y1", "y2"}, {1, 1, 0});
  const ParameterVector theta = ParameterVector::Zero(topo.theta_size());
  const std::size_t n = 4;
  const auto sys = assemble_stacked_system(theta, topo, n, Matrix::Zero(4, 2));
  Matrix expected = Matrix::Zero(8, 16);
  expected.leftCols(8).setIdentity();
  CHECK((sys.a1 - expected).norm() == 0.0);
}

TEST_CASE("experiment interconnection rows do not depend on theta") {
  const auto topo = experiment_topology();
  std::mt19937_64 rng(11);
  const auto t1 = netid::testing::random_stable_theta(topo, rng);
  const auto t2 = netid::testing::random_stable_theta(topo, rng);
  const std::size_t n = 500;
  const Matrix r = Matrix::Ones(500, 3);
  const auto s1 = assemble_stacked_system(t1, topo, n, r);
  const auto s2 = assemble_stacked_system(t2, topo, n, r);
  CHECK(s1.a().rows() == 3000);
  CHECK(s1.a().cols() == 3000);
  CHECK((s1.a2 - s2.a2).norm() == 0.0);
}

TEST_CASE("stacked system holds for simulated signals") {
  const auto topo = experiment_topology({"u3", "y2"});
  const auto theta = experiment_theta(0.5);
  const auto data = generate_dataset(topo, theta, 40, 0.1, 5);
  const auto sys = assemble_stacked_system(theta, topo, 40, data.r);
  const Vector x = stack_signals(*data.full_state, topo);
  Vector e(120);
  for (int i = 0; i < 3; ++i) e.segment(40 * i, 40) = data.disturbance->col(i);
  CHECK((sys.a1 * x + sys.b1 - e).norm() < 1e-10);
  CHECK((sys.a2 * x + sys.b2).norm() < 1e-12);
}

TEST_CASE("closed-loop stability") {
  CHECK(closed_loop_is_stable(experiment_theta(0.5), experiment_topology()));

  const auto open = single_block({"y1"}, {1, 0, 0});
  ParameterVector unstable(2);
  unstable << -2.0, 1.0;  // pole at q = 2
  CHECK_FALSE(closed_loop_is_stable(unstable, open, 0.0));

  const auto loop = experiment_topology();
  CHECK(closed_loop_is_stable(ParameterVector::Zero(loop.theta_size()), loop));

  // u1 = y1 + r1 with y1 = u1: the instantaneous loop is singular.
  auto alg = single_block({"y1"}, {0, 0, 0});
  alg.lambda(0, 0) = 1;
  ParameterVector unit(1);
  unit << 1.0;
  CHECK_FALSE(closed_loop_is_stable(unit, alg));
}

TEST_CASE("topology validation") {
  auto t = experiment_topology();
  t.observed.push_back(SignalId::parse("u3"));
  CHECK_THROWS_AS(t.validate(), Error);

  auto wide = experiment_topology();
  wide.lambda.resize(2, 3);
  CHECK_THROWS_AS(wide.validate(), Error);

  auto bad = experiment_topology();
  bad.observed = {SignalId::parse("y4")};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("stacked order places observed signals first") {
  const auto topo = experiment_topology({"u3", "u1"});
  const auto order = topo.signal_order();
  REQUIRE(order.size() == 6);
  CHECK(order[0] == 5);
  CHECK(order[1] == 3);
  CHECK(order[2] == 0);
  CHECK(order[5] == 4);
  CHECK(topo.missing().size() == 4);
}
