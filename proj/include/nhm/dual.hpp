#pragma once

// Forward-mode dual numbers. Dual<T> nests (Dual<Dual<double>>) so that
// mixed second partials are available where a first-order pass is not enough.

#include <cmath>
#include <type_traits>

namespace nhm {

template <class T>
struct Dual {
  T v{};  // value
  T d{};  // derivative along the seeded direction

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value), d(0.0) {}  // NOLINT(implicit)
  constexpr Dual(T value, T deriv) : v(value), d(deriv) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
  Dual& operator/=(const Dual& o) { *this = *this / o; return *this; }

  friend Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
  friend Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.v * b.d + a.d * b.v}; }
  friend Dual operator/(const Dual& a, const Dual& b) {
    T q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
  }
  friend Dual operator+(const Dual& a, double b) { return {a.v + b, a.d}; }
  friend Dual operator+(double a, const Dual& b) { return {a + b.v, b.d}; }
  friend Dual operator-(const Dual& a, double b) { return {a.v - b, a.d}; }
  friend Dual operator-(double a, const Dual& b) { return {a - b.v, -b.d}; }
  friend Dual operator*(const Dual& a, double b) { return {a.v * b, a.d * b}; }
  friend Dual operator*(double a, const Dual& b) { return {a * b.v, a * b.d}; }
  friend Dual operator/(const Dual& a, double b) { return {a.v / b, a.d / b}; }
  friend Dual operator/(double a, const Dual& b) { return Dual(a) / b; }
};

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual<double>>;

/// Innermost real value of a (possibly nested) dual.
inline double value_of(double x) { return x; }
template <class T>
double value_of(const Dual<T>& x) { return value_of(x.v); }

/// First-order derivative part, flattened to double (outermost seed).
template <class T>
double derivative_of(const Dual<T>& x) { return value_of(x.d); }

template <class T>
Dual<T> sin(const Dual<T>& a) { using std::sin; using std::cos; return {sin(a.v), cos(a.v) * a.d}; }
template <class T>
Dual<T> cos(const Dual<T>& a) { using std::sin; using std::cos; return {cos(a.v), -(sin(a.v) * a.d)}; }
template <class T>
Dual<T> tan(const Dual<T>& a) {
  using std::tan;
  T t = tan(a.v);
  return {t, (1.0 + t * t) * a.d};
}
template <class T>
Dual<T> exp(const Dual<T>& a) { using std::exp; T e = exp(a.v); return {e, e * a.d}; }
template <class T>
Dual<T> log(const Dual<T>& a) { using std::log; return {log(a.v), a.d / a.v}; }
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  T s = sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
template <class T>
Dual<T> abs(const Dual<T>& a) { return value_of(a.v) < 0.0 ? -a : a; }

/// a^n for integer n.
template <class S>
S ipow(const S& a, int n) {
  if (n == 0) return S(1.0);
  if (n < 0) return S(1.0) / ipow(a, -n);
  S result(1.0);
  S base = a;
  while (n > 0) {
    if (n & 1) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

/// a^c for a real constant exponent, a > 0.
inline double rpow(double a, double c) { return std::pow(a, c); }
template <class T>
Dual<T> rpow(const Dual<T>& a, double c) {
  T p = rpow(a.v, c);
  return {p, c * rpow(a.v, c - 1.0) * a.d};
}

}  // namespace nhm
