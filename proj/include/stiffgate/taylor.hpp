#pragma once

// Second-order forward (Taylor-mode) arithmetic in a single time variable.
//
// A Taylor2 carries a value together with its first and second derivative
// with respect to time. Seeding the independent variable as (t, 1, 0) and
// constants as (c, 0, 0) makes every composed expression carry its exact
// time derivatives. Components use the derivative convention (d2 is f'', not
// f''/2).

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace stiffgate {

template <typename T>
struct Taylor2 {
  T val{};
  T d1{};
  T d2{};

  constexpr Taylor2() = default;
  constexpr Taylor2(T v) : val(v) {}  // NOLINT: constants promote implicitly
  constexpr Taylor2(T v, T first, T second) : val(v), d1(first), d2(second) {}

  static constexpr Taylor2 variable(T t) { return {t, T(1), T(0)}; }
  static constexpr Taylor2 constant(T c) { return {c, T(0), T(0)}; }

  constexpr Taylor2& operator+=(const Taylor2& o) {
    val += o.val;
    d1 += o.d1;
    d2 += o.d2;
    return *this;
  }
  constexpr Taylor2& operator-=(const Taylor2& o) {
    val -= o.val;
    d1 -= o.d1;
    d2 -= o.d2;
    return *this;
  }
};

using Taylor = Taylor2<double>;

template <typename T>
constexpr Taylor2<T> operator-(const Taylor2<T>& a) {
  return {-a.val, -a.d1, -a.d2};
}

template <typename T>
constexpr Taylor2<T> operator+(Taylor2<T> a, const Taylor2<T>& b) {
  return a += b;
}
template <typename T>
constexpr Taylor2<T> operator-(Taylor2<T> a, const Taylor2<T>& b) {
  return a -= b;
}
template <typename T>
constexpr Taylor2<T> operator+(Taylor2<T> a, T c) {
  a.val += c;
  return a;
}
template <typename T>
constexpr Taylor2<T> operator+(T c, Taylor2<T> a) {
  a.val += c;
  return a;
}
template <typename T>
constexpr Taylor2<T> operator-(Taylor2<T> a, T c) {
  a.val -= c;
  return a;
}
template <typename T>
constexpr Taylor2<T> operator-(T c, const Taylor2<T>& a) {
  return {c - a.val, -a.d1, -a.d2};
}

template <typename T>
constexpr Taylor2<T> operator*(const Taylor2<T>& a, const Taylor2<T>& b) {
  return {a.val * b.val, a.d1 * b.val + a.val * b.d1,
          a.d2 * b.val + T(2) * a.d1 * b.d1 + a.val * b.d2};
}
template <typename T>
constexpr Taylor2<T> operator*(const Taylor2<T>& a, T c) {
  return {a.val * c, a.d1 * c, a.d2 * c};
}
template <typename T>
constexpr Taylor2<T> operator*(T c, const Taylor2<T>& a) {
  return a * c;
}

template <typename T>
Taylor2<T> operator/(const Taylor2<T>& a, const Taylor2<T>& b) {
  if (b.val == T(0)) throw std::domain_error("Taylor2: division by zero");
  const T y = a.val / b.val;
  const T y1 = (a.d1 - y * b.d1) / b.val;
  const T y2 = (a.d2 - T(2) * y1 * b.d1 - y * b.d2) / b.val;
  return {y, y1, y2};
}
template <typename T>
Taylor2<T> operator/(const Taylor2<T>& a, T c) {
  if (c == T(0)) throw std::domain_error("Taylor2: division by zero");
  return {a.val / c, a.d1 / c, a.d2 / c};
}
template <typename T>
Taylor2<T> operator/(T c, const Taylor2<T>& b) {
  return Taylor2<T>(c) / b;
}

/// Chain rule for a scalar function given f(x), f'(x), f''(x) at x.val.
template <typename T>
constexpr Taylor2<T> compose(const Taylor2<T>& x, T f0, T f1, T f2) {
  return {f0, f1 * x.d1, f2 * x.d1 * x.d1 + f1 * x.d2};
}

// Numerically stable scalar helpers shared by every scalar type.
namespace scalar {

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Inverse of softplus for y > 0: log(e^y - 1), evaluated without overflow.
inline double softplus_inverse(double y) {
  if (!(y > 0.0)) throw std::domain_error("softplus_inverse: argument must be positive");
  return y + std::log(-std::expm1(-y));
}

}  // namespace scalar

template <typename T>
Taylor2<T> exp(const Taylor2<T>& x) {
  const T e = std::exp(x.val);
  return compose(x, e, e, e);
}

template <typename T>
Taylor2<T> log(const Taylor2<T>& x) {
  if (!(x.val > T(0))) throw std::domain_error("Taylor2: log of non-positive value");
  const T inv = T(1) / x.val;
  return compose(x, std::log(x.val), inv, -inv * inv);
}

template <typename T>
Taylor2<T> sin(const Taylor2<T>& x) {
  const T s = std::sin(x.val), c = std::cos(x.val);
  return compose(x, s, c, -s);
}

template <typename T>
Taylor2<T> cos(const Taylor2<T>& x) {
  const T s = std::sin(x.val), c = std::cos(x.val);
  return compose(x, c, -s, -c);
}

template <typename T>
Taylor2<T> tanh(const Taylor2<T>& x) {
  const T h = std::tanh(x.val);
  const T dh = T(1) - h * h;
  return compose(x, h, dh, T(-2) * h * dh);
}

template <typename T>
Taylor2<T> sigmoid(const Taylor2<T>& x) {
  const T s = scalar::sigmoid(x.val);
  const T ds = s * (T(1) - s);
  return compose(x, s, ds, ds * (T(1) - T(2) * s));
}

template <typename T>
Taylor2<T> softplus(const Taylor2<T>& x) {
  const T s = scalar::sigmoid(x.val);
  return compose(x, scalar::softplus(x.val), s, s * (T(1) - s));
}

/// Power with a constant exponent.
template <typename T>
Taylor2<T> pow(const Taylor2<T>& x, T p) {
  if (x.val == T(0) && p < T(2))
    throw std::domain_error("Taylor2: pow derivative undefined at zero base");
  const T f0 = std::pow(x.val, p);
  const T f1 = p * std::pow(x.val, p - T(1));
  const T f2 = p * (p - T(1)) * std::pow(x.val, p - T(2));
  return compose(x, f0, f1, f2);
}

/// Power with a variable exponent, x^y = exp(y log x).
template <typename T>
Taylor2<T> pow(const Taylor2<T>& x, const Taylor2<T>& y) {
  return exp(y * log(x));
}

template <typename T>
Taylor2<T> atan2(const Taylor2<T>& y, const Taylor2<T>& x) {
  const T q = x.val * x.val + y.val * y.val;
  if (q == T(0)) throw std::domain_error("Taylor2: atan2 at the origin");
  const T z1 = (x.val * y.d1 - y.val * x.d1) / q;
  const T dq = T(2) * (x.val * x.d1 + y.val * y.d1);
  const T z2 = ((x.val * y.d2 - y.val * x.d2) - z1 * dq) / q;
  return {std::atan2(y.val, x.val), z1, z2};
}

template <typename T>
std::ostream& operator<<(std::ostream& os, const Taylor2<T>& x) {
  return os << '(' << x.val << ", " << x.d1 << ", " << x.d2 << ')';
}

}  // namespace stiffgate
