#include <doctest.h>

#include <random>

#include "instances.hpp"
#include "netid/error.hpp"
#include "netid/reduction.hpp"

using namespace netid;

namespace {

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index j = 0;
  for (double c : v) m(0, j++) = c;
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index j = 0;
  for (double c : v) out(j++) = c;
  return out;
}

}  // namespace

TEST_CASE("missing block of rank zero") {
  const auto ops = compute_reduction_operators(row({1.0, 0.0}), 1, 1);
  CHECK(ops.rank == 0);
  CHECK(ops.observed_free() == 0);
  CHECK(ops.missing_free() == 1);
  REQUIRE(ops.h.size() == 1);
  CHECK(std::abs(ops.h(0, 0)) == doctest::Approx(1.0));

  // 2 x_o + 3 x_m + 5 = e with x_o forced to 4 by x_o - 4 = 0.
  const auto red = apply_reduction(row({2.0, 3.0}), vec({5.0}), vec({-4.0}), ops);
  REQUIRE(red.phi_m.size() == 1);
  CHECK(red.phi_o.cols() == 0);
  CHECK(std::abs(red.phi_m(0, 0)) == doctest::Approx(3.0));
  CHECK(red.gamma(0) == doctest::Approx(13.0));

  const auto ok = transform_observed(vec({4.0}), ops, vec({-4.0}));
  CHECK(ok.reduced.size() == 0);
  CHECK(ok.consistency_residual < 1e-14);
  CHECK_THROWS_AS(transform_observed(vec({5.0}), ops, vec({-4.0})), Error);
  try {
    transform_observed(vec({5.0}), ops, vec({-4.0}));
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kInconsistentData);
  }
  // The violation is reported as |x_o - 4| = 1.
  const auto loose = transform_observed(vec({5.0}), ops, vec({-4.0}), 2.0);
  CHECK(loose.consistency_residual == doctest::Approx(1.0));
}

TEST_CASE("missing block of full rank") {
  const auto ops = compute_reduction_operators(row({0.0, 1.0}), 1, 1);
  CHECK(ops.rank == 1);
  CHECK(ops.w1.cols() == 0);
  CHECK(ops.observed_free() == 1);
  CHECK(ops.missing_free() == 0);

  const double a = 1.5, c = -2.0, b1 = 0.3, b2 = 0.7;
  const auto red = apply_reduction(row({a, c}), vec({b1}), vec({b2}), ops);
  CHECK(red.phi_m.cols() == 0);
  CHECK(red.phi_o(0, 0) == doctest::Approx(a));
  CHECK(red.gamma(0) == doctest::Approx(b1 - c * b2));
}

TEST_CASE("row-rank deficient interconnection is rejected") {
  // Two constraints on a single observed coordinate.
  Matrix a2(2, 2);
  a2 << 1.0, 0.0, 2.0, 0.0;
  try {
    compute_reduction_operators(a2, 1, 1);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kRankDeficient);
  }
}

TEST_CASE("non-square and singular reduced models") {
  const auto ops = compute_reduction_operators(row({0.0, 1.0}), 1, 1);
  Matrix wide(2, 2);
  wide << 1, 0, 0, 1;
  try {
    apply_reduction(wide, vec({0.0, 0.0}), vec({0.0}), ops);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kUnsupportedShape);
  }
  try {
    apply_reduction(row({0.0, 1.0}), vec({0.0}), vec({0.0}), ops);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kSingularModel);
  }
}

TEST_CASE("operators are orthonormal and consistent") {
  std::mt19937_64 rng(7);
  const auto inst = netid::testing::random_reduction_instance(12, 5, 4, 2, rng);
  const auto ops = compute_reduction_operators(inst.a2, inst.n_observed, inst.n_missing);
  CHECK(ops.rank == 2);
  Matrix u(5, 5);
  u << ops.u1, ops.u2;
  CHECK((u.transpose() * u - Matrix::Identity(5, 5)).norm() < 1e-12);
  Matrix w(inst.n_observed, inst.n_observed);
  w << ops.w1, ops.w2;
  CHECK((w.transpose() * w - Matrix::Identity(w.rows(), w.rows())).norm() < 1e-12);
  for (Eigen::Index i = 1; i < ops.sigma1.size(); ++i) CHECK(ops.sigma1(i) <= ops.sigma1(i - 1));
  const Matrix a2m = inst.a2.rightCols(inst.n_missing);
  CHECK((a2m * ops.v2).norm() < 1e-12);
}

TEST_CASE("reconstruction identity on random instances of every missing rank") {
  std::mt19937_64 rng(2024);
  for (int rank = 0; rank <= 4; ++rank) {
    const auto inst = netid::testing::random_reduction_instance(20, 6, 4, rank, rng);
    const auto ops = compute_reduction_operators(inst.a2, inst.n_observed, inst.n_missing);
    CHECK(ops.rank == rank);
    const auto red = apply_reduction(inst.a1, inst.b1, inst.b2, ops);
    const Vector x_o = inst.x.head(inst.n_observed);
    const Vector x_m = inst.x.tail(inst.n_missing);
    const auto obs = transform_observed(x_o, ops, inst.b2);
    CHECK(obs.consistency_residual < 1e-10);
    const Vector lhs = red.phi_o * obs.reduced + red.phi_m * (ops.v2.transpose() * x_m) + red.gamma;
    CHECK((lhs - inst.e).cwiseAbs().maxCoeff() < 1e-9);
    // x itself is recovered from the free coordinates.
    Vector free(ops.observed_free() + ops.missing_free());
    free << obs.reduced, ops.v2.transpose() * x_m;
    CHECK((ops.phi_map * free - ops.gamma_map * inst.b2 - inst.x).norm() < 1e-9);
  }
}

TEST_CASE("experiment topology has a full-rank missing block") {
  const auto topo = experiment_topology();
  const auto ops = compute_reduction_operators(topo.interconnection_block(), 1, 5);
  CHECK(ops.rank == 3);
  CHECK(ops.w1.cols() == 0);
  CHECK((ops.w2.cwiseAbs() - Matrix::Identity(1, 1)).norm() < 1e-15);
}
