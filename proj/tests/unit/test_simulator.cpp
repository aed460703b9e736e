#include <doctest.h>

#include <cmath>
#include <set>

#include "instances.hpp"
#include "netid/error.hpp"
#include "netid/simulator.hpp"

using namespace netid;

TEST_CASE("zero excitation gives zero signals") {
  const auto topo = experiment_topology();
  const Matrix x = simulate_network(experiment_theta(0.5), topo, Matrix::Zero(30, 3), Matrix::Zero(30, 3));
  CHECK(x.rows() == 30);
  CHECK(x.cols() == 6);
  CHECK(x.norm() == 0.0);
}

TEST_CASE("static gain block follows its input") {
  const auto topo = netid::testing::single_block({"y1"}, {0, 0, 0});
  ParameterVector theta(1);
  theta << 0.8;
  Matrix r(4, 1);
  r << 1, -1, 1, 1;
  const Matrix x = simulate_network(theta, topo, r, Matrix::Zero(4, 1));
  CHECK((x.col(0) - 0.8 * r.col(0)).norm() < 1e-15);
  CHECK((x.col(1) - r.col(0)).norm() == 0.0);
}

TEST_CASE("recursion agrees with the dense stacked solve") {
  const auto topo = experiment_topology();
  auto models = experiment_models(0.5);
  models[1].c = {0.3};
  auto orders = topo.orders;
  orders[1].nc = 1;
  auto armax = topo;
  armax.orders = orders;
  const auto theta = pack_theta(models);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto data = generate_dataset(armax, theta, 60, 0.1, seed);
    const auto sys = assemble_stacked_system(theta, armax, 60, data.r);
    Vector rhs = -sys.b();
    for (int i = 0; i < 3; ++i) rhs.segment(60 * i, 60) += data.disturbance->col(i);
    const Vector x = sys.a().partialPivLu().solve(rhs);
    const Vector x_rec = stack_signals(*data.full_state, armax);
    CHECK((x - x_rec).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("ill-posed instantaneous loop") {
  auto topo = netid::testing::single_block({"y1"}, {0, 0, 0});
  topo.lambda(0, 0) = 1;
  ParameterVector theta(1);
  theta << 1.0;
  try {
    simulate_network(theta, topo, Matrix::Ones(3, 1), Matrix::Zero(3, 1));
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kWellPosedness);
  }
}

TEST_CASE("datasets are a pure function of the seed") {
  const auto topo = experiment_topology();
  const auto theta = experiment_theta(0.5);
  const auto a = generate_dataset(topo, theta, 100, 0.1, 42);
  const auto b = generate_dataset(topo, theta, 100, 0.1, 42);
  const auto c = generate_dataset(topo, theta, 100, 0.1, 43);
  CHECK(a.r == b.r);
  CHECK(a.observed == b.observed);
  CHECK(*a.full_state == *b.full_state);
  CHECK(a.r != c.r);
  CHECK(a.observed_names == std::vector<std::string>{"u3"});
}

TEST_CASE("random streams") {
  SignalRng rng(1);
  std::set<double> values;
  for (int k = 0; k < 1000; ++k) values.insert(rng.rademacher());
  CHECK(values == std::set<double>{-1.0, 1.0});

  SignalRng u(2);
  for (int k = 0; k < 1000; ++k) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("disturbance variance and input alphabet") {
  const auto topo = experiment_topology();
  const auto data = generate_dataset(topo, experiment_theta(0.5), 500, 0.1, 1);
  const Matrix& e = *data.disturbance;
  CHECK(e.size() == 1500);
  const double mean = e.mean();
  const double var = (e.array() - mean).square().sum() / static_cast<double>(e.size() - 1);
  CHECK(std::abs(var - 0.1) < 0.015);
  for (double v : data.r.reshaped()) CHECK(std::abs(v) == 1.0);
}

TEST_CASE("fit metric") {
  Vector ref(4);
  ref << 1.0, 2.0, 3.0, 4.0;
  CHECK(fit_metric(ref, ref) == 1.0);
  CHECK(fit_metric(ref, ref, FitVariant::kLiteral) == 1.0);
  CHECK(fit_metric(Vector::Constant(4, 2.5), ref) == doctest::Approx(0.0));
  // |xhat - xref| = |ref - mean| for the mirrored estimate.
  const Vector mirror = 5.0 - ref.array();
  CHECK(fit_metric(mirror, ref) == doctest::Approx(-1.0));
  Vector shifted = ref.array() + 1.0;
  const double lit = 1.0 - 2.0 / (shifted.array() - 2.5).matrix().norm();
  CHECK(fit_metric(shifted, ref, FitVariant::kLiteral) == doctest::Approx(lit));
  try {
    fit_metric(Vector::Ones(3), Vector::Ones(3));
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kUndefinedFit);
  }
  CHECK_THROWS_AS(fit_metric(Vector::Ones(1), Vector::Ones(1)), Error);
  CHECK_THROWS_AS(fit_metric(Vector::Ones(3), Vector::Ones(4)), Error);
  CHECK(parse_fit_variant("literal") == FitVariant::kLiteral);
  CHECK_THROWS_AS(parse_fit_variant("other"), Error);
}

TEST_CASE("evaluated missing signals skip noise-free inputs") {
  std::vector<std::string> names;
  for (const auto& id : evaluated_missing_signals(experiment_topology())) names.push_back(id.name());
  CHECK(names == std::vector<std::string>{"y1", "y2", "y3", "u1"});

  names.clear();
  for (const auto& id : evaluated_missing_signals(experiment_topology({"u3", "u1"}))) {
    names.push_back(id.name());
  }
  CHECK(names == std::vector<std::string>{"y1", "y2", "y3"});
}

TEST_CASE("fit report on identical signals") {
  const auto topo = experiment_topology();
  const auto data = generate_dataset(topo, experiment_theta(0.5), 100, 0.1, 7);
  const auto report = evaluate_fit(*data.full_state, *data.full_state, topo);
  CHECK(report.observed == 1.0);
  CHECK(report.missing == 1.0);
  CHECK(report.per_signal.at("y2") == 1.0);
  CHECK(report.missing_signals.size() == 4);
}

TEST_CASE("benchmark plants") {
  const auto plants = experiment_plants();
  REQUIRE(plants.size() == 3);
  const std::vector<double> gains{0.125, 1.0 / 0.75, 2.0};
  const auto models = experiment_models(0.5);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(models[i].b[0] == 0.0);
    CHECK(std::abs(models[i].b_poly()(1.0) / models[i].a_poly()(1.0) - gains[i]) < 1e-10);
  }
  const auto topo = experiment_topology();
  CHECK(topo.lambda(0, 1) == 1);
  CHECK(topo.lambda(0, 2) == 1);
  CHECK(topo.lambda(2, 0) == 1);
  CHECK(topo.lambda.sum() == 3);
  CHECK(topo.omega == Eigen::MatrixXi::Identity(3, 3));
  CHECK(topo.theta_size() == 15);
}
