#pragma once

#include <array>
#include <cmath>

namespace netid {

/// Forward-mode dual number carrying up to `N` directional derivatives.
template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  static Dual variable(double value, int slot) {
    Dual x(value);
    x.d[static_cast<std::size_t>(slot)] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (int i = 0; i < N; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
    v = q;
    return *this;
  }
  Dual operator-() const {
    Dual r = *this;
    r.v = -v;
    for (int i = 0; i < N; ++i) r.d[i] = -d[i];
    return r;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
  friend Dual operator/(Dual a, const Dual& b) { return a /= b; }

  /// a += s * b with a plain scalar s.
  void add_scaled(double s, const Dual& b) {
    v += s * b.v;
    for (int i = 0; i < N; ++i) d[i] += s * b.d[i];
  }
};

template <int N>
Dual<N> sqrt(const Dual<N>& x) {
  Dual<N> r(std::sqrt(x.v));
  const double k = r.v > 0.0 ? 0.5 / r.v : 0.0;
  for (int i = 0; i < N; ++i) r.d[i] = k * x.d[i];
  return r;
}

template <int N>
Dual<N> log(const Dual<N>& x) {
  Dual<N> r(std::log(x.v));
  const double k = 1.0 / x.v;
  for (int i = 0; i < N; ++i) r.d[i] = k * x.d[i];
  return r;
}

template <int N>
Dual<N> abs(const Dual<N>& x) {
  return x.v < 0.0 ? -x : x;
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
  return x.v;
}

inline void add_scaled(double& a, double s, double b) { a += s * b; }
template <int N>
void add_scaled(Dual<N>& a, double s, const Dual<N>& b) {
  a.add_scaled(s, b);
}

}  // namespace netid
