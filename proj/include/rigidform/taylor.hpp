#pragma once

// Truncated univariate Taylor arithmetic.
//
// A Taylor<N> holds the coefficients c[0..N] of f(s0 + e) = sum c[k] e^k.
// Evaluating a curve formula on Taylor<3> seeded with (s0, 1, 0, 0) yields
// the value and the first three derivatives at s0 exactly (up to rounding),
// which is how the catalog gets closed-form derivatives for every family
// without hand-writing them.

#include <array>
#include <cmath>
#include <cstddef>

namespace rigidform {

template <std::size_t N>
struct Taylor {
  std::array<double, N + 1> c{};

  constexpr Taylor() = default;
  constexpr Taylor(double v) { c[0] = v; }  // NOLINT: implicit by design of the arithmetic

  static Taylor variable(double s0) {
    Taylor t(s0);
    if constexpr (N >= 1) t.c[1] = 1.0;
    return t;
  }

  double value() const { return c[0]; }

  // k-th derivative at the expansion point.
  double derivative(std::size_t k) const {
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i) f *= static_cast<double>(i);
    return c[k] * f;
  }

  Taylor operator-() const {
    Taylor r;
    for (std::size_t k = 0; k <= N; ++k) r.c[k] = -c[k];
    return r;
  }
  Taylor& operator+=(const Taylor& o) {
    for (std::size_t k = 0; k <= N; ++k) c[k] += o.c[k];
    return *this;
  }
  Taylor& operator-=(const Taylor& o) {
    for (std::size_t k = 0; k <= N; ++k) c[k] -= o.c[k];
    return *this;
  }
  Taylor& operator*=(const Taylor& o) { return *this = *this * o; }
  Taylor& operator/=(const Taylor& o) { return *this = *this / o; }

  friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
  friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }

  friend Taylor operator*(const Taylor& a, const Taylor& b) {
    Taylor r;
    for (std::size_t k = 0; k <= N; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j <= k; ++j) acc += a.c[j] * b.c[k - j];
      r.c[k] = acc;
    }
    return r;
  }

  friend Taylor operator/(const Taylor& a, const Taylor& b) {
    Taylor r;
    for (std::size_t k = 0; k <= N; ++k) {
      double acc = a.c[k];
      for (std::size_t j = 1; j <= k; ++j) acc -= b.c[j] * r.c[k - j];
      r.c[k] = acc / b.c[0];
    }
    return r;
  }

  friend bool operator<(const Taylor& a, const Taylor& b) { return a.c[0] < b.c[0]; }
};

// sin and cos share one recurrence.
template <std::size_t N>
void sincos(const Taylor<N>& u, Taylor<N>& s, Taylor<N>& co) {
  s = Taylor<N>(std::sin(u.c[0]));
  co = Taylor<N>(std::cos(u.c[0]));
  for (std::size_t k = 1; k <= N; ++k) {
    double as = 0.0, ac = 0.0;
    for (std::size_t j = 1; j <= k; ++j) {
      const double ju = static_cast<double>(j) * u.c[j];
      as += ju * co.c[k - j];
      ac += ju * s.c[k - j];
    }
    s.c[k] = as / static_cast<double>(k);
    co.c[k] = -ac / static_cast<double>(k);
  }
}

template <std::size_t N>
Taylor<N> sin(const Taylor<N>& u) {
  Taylor<N> s, co;
  sincos(u, s, co);
  return s;
}

template <std::size_t N>
Taylor<N> cos(const Taylor<N>& u) {
  Taylor<N> s, co;
  sincos(u, s, co);
  return co;
}

// x^a for x(s0) > 0, from the identity y' x = a x' y.
template <std::size_t N>
Taylor<N> pow(const Taylor<N>& x, double a) {
  Taylor<N> y(std::pow(x.c[0], a));
  for (std::size_t k = 1; k <= N; ++k) {
    double acc = 0.0;
    for (std::size_t j = 1; j <= k; ++j) acc += a * static_cast<double>(j) * x.c[j] * y.c[k - j];
    for (std::size_t j = 1; j < k; ++j) acc -= static_cast<double>(j) * y.c[j] * x.c[k - j];
    y.c[k] = acc / (static_cast<double>(k) * x.c[0]);
  }
  return y;
}

template <std::size_t N>
Taylor<N> sqrt(const Taylor<N>& x) {
  return pow(x, 0.5);
}

inline double value_of(double x) { return x; }
template <std::size_t N>
double value_of(const Taylor<N>& x) {
  return x.value();
}

}  // namespace rigidform
