#include <doctest.h>

#include <cmath>

#include "instances.hpp"
#include "netid/error.hpp"
#include "netid/indirect.hpp"

using namespace netid;

namespace {

Polynomial padded(const Polynomial& p, std::size_t size) {
  std::vector<double> c(size - p.coeffs.size(), 0.0);
  c.insert(c.end(), p.coeffs.begin(), p.coeffs.end());
  return Polynomial(c);
}

double max_coeff_gap(const Polynomial& a, const Polynomial& b) {
  const std::size_t size = std::max(a.coeffs.size(), b.coeffs.size());
  const auto pa = padded(a, size), pb = padded(b, size);
  double gap = 0.0;
  for (std::size_t i = 0; i < size; ++i) gap = std::max(gap, std::abs(pa.coeffs[i] - pb.coeffs[i]));
  return gap;
}

/// u3 from Abar u3 = sum Bbar_i r_i with zero initial conditions.
Vector filter_closed_loop(const ClosedLoopModel& cl, const Matrix& r) {
  const std::size_t deg = cl.abar.degree();
  const Polynomial* b[3] = {&cl.bbar1, &cl.bbar2, &cl.bbar3};
  Vector u(r.rows());
  for (Eigen::Index k = 0; k < r.rows(); ++k) {
    double acc = 0.0;
    for (std::size_t j = 1; j <= deg; ++j) {
      if (k >= static_cast<Eigen::Index>(j)) acc -= cl.abar.coeffs[j] * u(k - static_cast<Eigen::Index>(j));
    }
    for (int i = 0; i < 3; ++i) {
      const auto pb = padded(*b[i], deg + 1);
      for (std::size_t j = 0; j <= deg; ++j) {
        if (k >= static_cast<Eigen::Index>(j)) acc += pb.coeffs[j] * r(k - static_cast<Eigen::Index>(j), i);
      }
    }
    u(k) = acc;
  }
  return u;
}

}  // namespace

TEST_CASE("closed-loop polynomials of the benchmark") {
  const auto topo = experiment_topology();
  const auto theta = experiment_theta(0.5);
  const auto cl = closed_loop_polynomials(theta, topo);
  CHECK(cl.abar.degree() == 6);
  CHECK(cl.bbar1.degree() == 6);
  CHECK(cl.bbar2.degree() == 6);
  CHECK(cl.bbar3.degree() == 6);
  CHECK(cl.abar.is_monic());

  const auto models = experiment_models(0.5);
  const double g1 = models[0].b_poly()(1.0) / models[0].a_poly()(1.0);
  const double g3 = models[2].b_poly()(1.0) / models[2].a_poly()(1.0);
  CHECK(cl.bbar3(1.0) / cl.abar(1.0) == doctest::Approx(1.0 / (1.0 - g1 * g3)).epsilon(1e-12));
}

TEST_CASE("dead first block opens the loop") {
  const auto topo = experiment_topology();
  auto models = experiment_models(0.5);
  models[0].b = {0.0, 0.0, 0.0};
  const auto cl = closed_loop_polynomials(pack_theta(models), topo);
  CHECK(trim_leading(cl.bbar1).is_zero());
  CHECK(trim_leading(cl.bbar2).is_zero());
  const Polynomial open = poly_mul(poly_mul(models[0].a_poly(), models[1].a_poly()), models[2].a_poly());
  CHECK(max_coeff_gap(cl.abar, open) < 1e-14);
}

TEST_CASE("other topologies are rejected") {
  try {
    closed_loop_polynomials(ParameterVector::Zero(6), netid::testing::two_block_loop({"y1"}));
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kUnsupportedTopology);
  }
  auto armax = experiment_topology();
  armax.orders[0].nc = 1;
  CHECK_THROWS_AS(require_benchmark_topology(armax), Error);
}

TEST_CASE("high-order regression recovers noiseless closed-loop data") {
  CHECK(high_order_arx_parameter_count(6) == 27);
  // A coprime degree-6 model: stable Abar, numerators without shared roots.
  ClosedLoopModel cl;
  const std::vector<Complex> poles{{0.9, 0.0}, {0.6, 0.3}, {0.6, -0.3}, {0.2, 0.0}, {-0.4, 0.0}, {0.5, 0.0}};
  cl.abar = poly_from_roots(poles, 1.0);
  cl.bbar1 = Polynomial{0.0, 0.3, -0.1, 0.05, 0.02, -0.01, 0.004};
  cl.bbar2 = Polynomial{0.0, 0.0, 0.2, 0.1, -0.05, 0.01, 0.002};
  cl.bbar3 = Polynomial{1.0, -0.7, 0.2, 0.1, -0.03, 0.01, 0.001};
  SignalRng rng(3);
  Matrix r(400, 3);
  for (Eigen::Index k = 0; k < 400; ++k) {
    for (int i = 0; i < 3; ++i) r(k, i) = rng.rademacher();
  }
  const auto est = estimate_high_order_arx(filter_closed_loop(cl, r), r, 6);
  CHECK(max_coeff_gap(est.abar, cl.abar) < 1e-6);
  CHECK(max_coeff_gap(est.bbar1, cl.bbar1) < 1e-6);
  CHECK(max_coeff_gap(est.bbar2, cl.bbar2) < 1e-6);
  CHECK(max_coeff_gap(est.bbar3, cl.bbar3) < 1e-6);
}

TEST_CASE("high-order regression reproduces the benchmark closed-loop responses") {
  // The benchmark polynomials share the root exp(-Ts/2) (blocks 2 and 3
  // have a common pole), so only the ratios are identifiable.
  const auto cl = closed_loop_polynomials(experiment_theta(0.5), experiment_topology());
  SignalRng rng(4);
  Matrix r(500, 3);
  for (Eigen::Index k = 0; k < 500; ++k) {
    for (int i = 0; i < 3; ++i) r(k, i) = rng.rademacher();
  }
  const auto est = estimate_high_order_arx(filter_closed_loop(cl, r), r, 6);
  const auto w = logspace(1e-2, 6.0, 50);
  const Polynomial* truth[3] = {&cl.bbar1, &cl.bbar2, &cl.bbar3};
  const Polynomial* fitted[3] = {&est.bbar1, &est.bbar2, &est.bbar3};
  for (int i = 0; i < 3; ++i) {
    const auto a = freq_response(*truth[i], cl.abar, w, 0.5);
    const auto b = freq_response(*fitted[i], est.abar, w, 0.5);
    for (std::size_t k = 0; k < w.size(); ++k) CHECK(std::abs(a.magnitude_db[k] - b.magnitude_db[k]) < 1e-4);
  }
}

TEST_CASE("high-order regression edge cases") {
  const auto zero = estimate_high_order_arx(Vector::Zero(100), Matrix::Zero(100, 3), 6);
  CHECK(zero.abar.coeffs[0] == 1.0);
  for (std::size_t j = 1; j < zero.abar.coeffs.size(); ++j) CHECK(zero.abar.coeffs[j] == 0.0);
  CHECK(zero.bbar2.is_zero());
  try {
    estimate_high_order_arx(Vector::Zero(48), Matrix::Zero(48, 3), 6);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kInvalidInput);
  }
}

TEST_CASE("numerator stabilization") {
  const Polynomial one = stabilize_numerator(Polynomial{1.0, -2.0});
  REQUIRE(one.coeffs.size() == 1);
  CHECK(one.coeffs[0] == doctest::Approx(-1.0));

  const Polynomial two = stabilize_numerator(poly_mul(Polynomial{1.0, -2.0}, Polynomial{1.0, -0.5}));
  REQUIRE(two.coeffs.size() == 2);
  CHECK(two.coeffs[0] == doctest::Approx(-1.0));
  CHECK(two.coeffs[1] == doctest::Approx(0.5));

  const Polynomial inside{2.0, -0.5, 0.06};
  CHECK(stabilize_numerator(inside).coeffs == inside.coeffs);

  try {
    stabilize_numerator(Polynomial{0.0});
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kInvalidInput);
  }
}

TEST_CASE("common root cancellation") {
  const Polynomial num = poly_mul(Polynomial{1.0, -0.5}, Polynomial{2.0, -0.4});
  const Polynomial den = poly_mul(Polynomial{1.0, -0.5}, Polynomial{1.0, -0.9});
  const auto g = cancel_common_roots(num, den);
  REQUIRE(g.num.degree() == 1);
  REQUIRE(g.den.degree() == 1);
  CHECK(g.den.is_monic());
  CHECK(g.den.coeffs[1] == doctest::Approx(-0.9));
  CHECK(g.num.coeffs[0] == doctest::Approx(2.0));
  CHECK(g.num.coeffs[1] == doctest::Approx(-0.4));

  // A triple root shared by both sides cancels despite its numerical split.
  const Polynomial triple = poly_mul(poly_mul(Polynomial{1.0, -0.3}, Polynomial{1.0, -0.3}),
                                     Polynomial{1.0, -0.3});
  const auto h = cancel_common_roots(poly_mul(triple, Polynomial{1.0, 0.2}),
                                     poly_mul(triple, Polynomial{1.0, -0.7}));
  CHECK(h.den.degree() == 1);

  CHECK_THROWS_AS(cancel_common_roots(Polynomial{1.0}, Polynomial{0.0}), Error);
}

TEST_CASE("subsystems recovered exactly from the true closed loop") {
  const auto models = experiment_models(0.5);
  const auto cl = closed_loop_polynomials(experiment_theta(0.5), experiment_topology());
  const auto rec = recover_subsystems(cl);
  REQUIRE(rec.size() == 3);
  const auto w = logspace(1e-2, 3.14159 / 0.5, 50);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto truth = freq_response(models[i].b_poly(), models[i].a_poly(), w, 0.5);
    const auto est = freq_response(rec[i].num, rec[i].den, w, 0.5);
    for (std::size_t k = 0; k < w.size(); ++k) {
      CHECK(std::abs(truth.magnitude_db[k] - est.magnitude_db[k]) < 1e-8);
      CHECK(std::abs(truth.phase_deg[k] - est.phase_deg[k]) < 1e-8);
    }
    const auto back = to_subsystem_model(rec[i]);
    CHECK(back.orders() == experiment_topology().orders[i]);
  }
}

TEST_CASE("round trip holds for random stable benchmark parameters") {
  std::mt19937_64 rng(8);
  const auto topo = experiment_topology();
  const auto w = logspace(1e-2, 3.0, 50);
  for (int trial = 0; trial < 5; ++trial) {
    const auto theta = netid::testing::random_stable_theta(topo, rng);
    const auto models = unpack_theta(theta, topo);
    const auto rec = recover_subsystems(closed_loop_polynomials(theta, topo));
    for (std::size_t i = 0; i < 3; ++i) {
      const auto truth = freq_response(models[i].b_poly(), models[i].a_poly(), w, 1.0);
      const auto est = freq_response(rec[i].num, rec[i].den, w, 1.0);
      for (std::size_t k = 0; k < w.size(); ++k) {
        CHECK(std::abs(truth.magnitude_db[k] - est.magnitude_db[k]) < 1e-8);
      }
    }
  }
}

TEST_CASE("unstable zeros of the first closed-loop numerator") {
  ClosedLoopModel cl;
  cl.abar = Polynomial{1.0, -0.5, 0.06};
  cl.bbar1 = poly_mul(Polynomial{1.0, -2.0}, Polynomial{0.0, 1.0});
  cl.bbar2 = Polynomial{0.0, 0.1, 0.05};
  cl.bbar3 = Polynomial{1.0, -0.2, 0.01};
  const auto raw = recover_subsystems(cl, false);
  CHECK_FALSE(is_stable_poly(raw[1].den));
  CHECK_FALSE(is_stable_poly(raw[2].den));
  const auto fixed = recover_subsystems(cl, true);
  CHECK(is_stable_poly(fixed[1].den));
  CHECK(is_stable_poly(fixed[2].den));

  cl.bbar2 = Polynomial{0.0, 0.0, 0.0};
  CHECK(trim_leading(recover_subsystems(cl, false)[1].num).is_zero());
}

TEST_CASE("improper estimates are truncated") {
  const RationalModel g{Polynomial{0.5, 1.0, 0.2}, Polynomial{1.0, -0.5}};
  const auto m = to_subsystem_model(g);
  CHECK(m.a.size() == 1);
  CHECK(m.b.size() == 2);
  CHECK(m.b[0] == 1.0);
  CHECK(m.b[1] == 0.2);
}

TEST_CASE("order reduction keeps an exact second-order model") {
  const auto models = experiment_models(0.5);
  for (const auto& m : models) {
    // Multiply by a common stable factor to raise the order.
    const RationalModel high{poly_mul(m.b_poly(), Polynomial{1.0, -0.3}),
                             poly_mul(m.a_poly(), Polynomial{1.0, -0.3})};
    const auto red = reduce_order(high, 2, 2);
    for (std::size_t j = 0; j < 2; ++j) CHECK(red.a[j] == doctest::Approx(m.a[j]).epsilon(1e-6));
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(red.b[j] - m.b[j]) < 1e-6);
  }
}

TEST_CASE("order reduction returns a stable model") {
  const RationalModel unstable{Polynomial{0.0, 1.0, 0.0}, Polynomial{1.0, -1.6, 0.8}};
  // Roots 0.8 +- 0.4i lie inside; scale them out of the disc.
  const RationalModel outside{Polynomial{0.0, 1.0, 0.0}, Polynomial{1.0, -2.4, 1.8}};
  CHECK(is_stable_poly(unstable.den));
  CHECK_FALSE(is_stable_poly(outside.den));
  const auto red = reduce_order(outside, 2, 2);
  CHECK(is_stable_poly(red.a_poly()));
  const double dc_before = outside.num(1.0) / outside.den(1.0);
  CHECK(red.b_poly()(1.0) / red.a_poly()(1.0) == doctest::Approx(dc_before).epsilon(1e-6));
}

TEST_CASE("indirect pipeline on benchmark data") {
  const auto topo = experiment_topology();
  const auto data = generate_dataset(topo, experiment_theta(0.5), 500, 0.1, 1);
  const auto res = indirect_identify(topo, data);
  CHECK(res.theta_init.size() == topo.theta_size());
  CHECK(res.recovered.size() == 3);
  CHECK(res.reduced.size() == 3);
  for (const auto& m : res.reduced) CHECK(is_stable_poly(m.a_poly()));
  CHECK(res.unstable_bbar1_zeros >= 0);

  const auto hidden = generate_dataset(experiment_topology({"y1"}), experiment_theta(0.5), 500, 0.1, 1);
  CHECK_THROWS_AS(indirect_identify(experiment_topology({"y1"}), hidden), Error);
}
