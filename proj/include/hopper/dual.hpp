// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

/// Forward-mode automatic differentiation with fixed-width dual numbers.
///
/// `Dual<double, N>` carries a value and N directional derivatives. Nesting
/// (`Dual<Dual<double, N>, N>`) yields exact second derivatives, which the
/// transcription uses for Lagrangian Hessians of the node dynamics.

#include <array>
#include <cmath>
#include <type_traits>

namespace hopper::ad {

template <typename T, int N>
struct Dual {
  T v{};
  std::array<T, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit by design of AD
  template <typename U = T>
    requires(!std::is_same_v<U, double>)
  constexpr Dual(const T& value) : v(value) {}  // NOLINT

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
    const T inv = 1.0 / o.v;
    v *= inv;
    for (int i = 0; i < N; ++i) d[i] = (d[i] - v * o.d[i]) * inv;
    return *this;
  }
};

template <typename T>
struct IsDual : std::false_type {};
template <typename T, int N>
struct IsDual<Dual<T, N>> : std::true_type {};

/// Innermost double value of a (possibly nested) dual.
inline double value_of(double x) { return x; }
template <typename T, int N>
double value_of(const Dual<T, N>& x) {
  return value_of(x.v);
}

/// Seeds variable `i` of a first-order dual.
template <int N>
Dual<double, N> variable(double value, int i) {
  Dual<double, N> x(value);
  x.d[i] = 1.0;
  return x;
}

/// Seeds variable `i` of a second-order (nested) dual.
template <int N>
Dual<Dual<double, N>, N> variable2(double value, int i) {
  Dual<Dual<double, N>, N> x;
  x.v = variable<N>(value, i);
  x.d[i] = Dual<double, N>(1.0);
  return x;
}

template <typename T, int N>
Dual<T, N> operator-(const Dual<T, N>& a) {
  Dual<T, N> r;
  r.v = -a.v;
  for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}

template <typename T, int N>
Dual<T, N> operator+(Dual<T, N> a, const Dual<T, N>& b) {
  return a += b;
}
template <typename T, int N>
Dual<T, N> operator-(Dual<T, N> a, const Dual<T, N>& b) {
  return a -= b;
}
template <typename T, int N>
Dual<T, N> operator*(const Dual<T, N>& a, const Dual<T, N>& b) {
  Dual<T, N> r;
  r.v = a.v * b.v;
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
template <typename T, int N>
Dual<T, N> operator/(Dual<T, N> a, const Dual<T, N>& b) {
  return a /= b;
}

// Mixed arithmetic with plain doubles.
template <typename T, int N>
Dual<T, N> operator+(Dual<T, N> a, double b) {
  a.v += b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator+(double a, Dual<T, N> b) {
  b.v += a;
  return b;
}
template <typename T, int N>
Dual<T, N> operator-(Dual<T, N> a, double b) {
  a.v -= b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator-(double a, const Dual<T, N>& b) {
  Dual<T, N> r = -b;
  r.v += a;
  return r;
}
template <typename T, int N>
Dual<T, N> operator*(Dual<T, N> a, double b) {
  a.v *= b;
  for (int i = 0; i < N; ++i) a.d[i] *= b;
  return a;
}
template <typename T, int N>
Dual<T, N> operator*(double a, Dual<T, N> b) {
  return b * a;
}
template <typename T, int N>
Dual<T, N> operator/(Dual<T, N> a, double b) {
  return a * (1.0 / b);
}
template <typename T, int N>
Dual<T, N> operator/(double a, const Dual<T, N>& b) {
  return Dual<T, N>(a) / b;
}

template <typename T, int N>
bool operator<(const Dual<T, N>& a, const Dual<T, N>& b) {
  return value_of(a) < value_of(b);
}
template <typename T, int N>
bool operator>(const Dual<T, N>& a, const Dual<T, N>& b) {
  return value_of(a) > value_of(b);
}

template <typename T, int N>
Dual<T, N> sin(const Dual<T, N>& a) {
  using std::cos;
  using std::sin;
  Dual<T, N> r;
  r.v = sin(a.v);
  const T c = cos(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = c * a.d[i];
  return r;
}
template <typename T, int N>
Dual<T, N> cos(const Dual<T, N>& a) {
  using std::cos;
  using std::sin;
  Dual<T, N> r;
  r.v = cos(a.v);
  const T s = -sin(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = s * a.d[i];
  return r;
}
template <typename T, int N>
Dual<T, N> sqrt(const Dual<T, N>& a) {
  using std::sqrt;
  Dual<T, N> r;
  r.v = sqrt(a.v);
  const T g = 0.5 / r.v;
  for (int i = 0; i < N; ++i) r.d[i] = g * a.d[i];
  return r;
}
template <typename T, int N>
Dual<T, N> abs(const Dual<T, N>& a) {
  return value_of(a) < 0.0 ? -a : a;
}

}  // namespace hopper::ad
