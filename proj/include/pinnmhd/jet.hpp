#ifndef PINNMHD_JET_HPP
#define PINNMHD_JET_HPP

// Truncated Taylor arithmetic used by the field model.
//
//  Jet2<T>   value plus first and second derivative along one scalar seed
//            (the radial coordinate); propagated through the networks.
//  Dual3<T>  value plus gradient in the three flux coordinates (s, theta,
//            zeta); used inside the field kernel so that the partial
//            derivatives of the covariant field needed by the current come
//            out of the same expressions that compute the field.
//
// Both are generic over the underlying scalar so that they can ride on top
// of the reverse-mode `Var`.

#include <array>
#include <cmath>
#include <stdexcept>
#include <type_traits>

#include "pinnmhd/reverse.hpp"

namespace pinnmhd::ad {

template <class T>
struct Jet2 {
  T value{0.0};
  T d1{0.0};
  T d2{0.0};

  Jet2() = default;
  Jet2(double c) : value(c) {}  // NOLINT: constant lift
  Jet2(const T& v, const T& first, const T& second)
      : value(v), d1(first), d2(second) {}

  Jet2& operator+=(const Jet2& o) { return *this = *this + o; }
  Jet2& operator-=(const Jet2& o) { return *this = *this - o; }
  Jet2& operator*=(const Jet2& o) { return *this = *this * o; }

  friend Jet2 operator+(const Jet2& a, const Jet2& b) {
    return {a.value + b.value, a.d1 + b.d1, a.d2 + b.d2};
  }
  friend Jet2 operator-(const Jet2& a, const Jet2& b) {
    return {a.value - b.value, a.d1 - b.d1, a.d2 - b.d2};
  }
  friend Jet2 operator-(const Jet2& a) { return {-a.value, -a.d1, -a.d2}; }
  friend Jet2 operator*(const Jet2& a, const Jet2& b) {
    return {a.value * b.value, a.d1 * b.value + a.value * b.d1,
            a.d2 * b.value + 2.0 * (a.d1 * b.d1) + a.value * b.d2};
  }
  friend Jet2 operator/(const Jet2& a, const Jet2& b) {
    if (value_of(b.value) == 0.0)
      throw std::domain_error("Jet2 division by zero-valued jet");
    const T q = a.value / b.value;
    const T q1 = (a.d1 - q * b.d1) / b.value;
    const T q2 = (a.d2 - 2.0 * (q1 * b.d1) - q * b.d2) / b.value;
    return {q, q1, q2};
  }

  // Scaling by a plain scalar of the underlying type.
  template <class S>
    requires std::is_convertible_v<S, T> && (!std::is_same_v<S, Jet2>)
  friend Jet2 operator*(const S& scale, const Jet2& a) {
    const T s(scale);
    return {s * a.value, s * a.d1, s * a.d2};
  }
  template <class S>
    requires std::is_convertible_v<S, T> && (!std::is_same_v<S, Jet2>)
  friend Jet2 operator*(const Jet2& a, const S& scale) {
    return scale * a;
  }
};

// Lifts the seed variable: value x, unit first derivative.
template <class T = double>
Jet2<T> jet_lift(double x) {
  return Jet2<T>(T(x), T(1.0), T(0.0));
}

namespace detail {
// Composes a scalar function with a jet, given g(u), g'(u), g''(u).
template <class T>
Jet2<T> compose(const Jet2<T>& u, const T& g, const T& dg, const T& ddg) {
  return {g, dg * u.d1, ddg * (u.d1 * u.d1) + dg * u.d2};
}
}  // namespace detail

template <class T>
Jet2<T> tanh(const Jet2<T>& u) {
  using std::tanh;
  const T t = tanh(u.value);
  const T dt = 1.0 - t * t;
  return detail::compose(u, t, dt, -2.0 * (t * dt));
}

template <class T>
Jet2<T> sqrt(const Jet2<T>& u) {
  using std::sqrt;
  const T r = sqrt(u.value);
  const T dr = 0.5 / r;
  return detail::compose(u, r, dr, -0.5 * dr / u.value);
}

// Integer power with exact derivatives, including at u = 0.
template <class T>
Jet2<T> pow(const Jet2<T>& u, int k) {
  if (k == 0) return Jet2<T>(1.0);
  T p_km2(1.0);
  for (int i = 0; i < k - 2; ++i) p_km2 = p_km2 * u.value;
  const T p_km1 = k >= 2 ? p_km2 * u.value : T(1.0);
  const T p_k = p_km1 * u.value;
  const T dg = double(k) * p_km1;
  const T ddg = k >= 2 ? double(k) * double(k - 1) * p_km2 : T(0.0);
  return detail::compose(u, p_k, dg, ddg);
}

template <class T>
struct Dual3 {
  T value{0.0};
  std::array<T, 3> grad{T(0.0), T(0.0), T(0.0)};

  Dual3() = default;
  Dual3(double c) : value(c) {}  // NOLINT: constant lift
  Dual3(const T& v, const T& ds, const T& dt, const T& dz)
      : value(v), grad{ds, dt, dz} {}

  const T& operator[](int i) const { return grad[i]; }

  friend Dual3 operator+(const Dual3& a, const Dual3& b) {
    return {a.value + b.value, a.grad[0] + b.grad[0], a.grad[1] + b.grad[1],
            a.grad[2] + b.grad[2]};
  }
  friend Dual3 operator-(const Dual3& a, const Dual3& b) {
    return {a.value - b.value, a.grad[0] - b.grad[0], a.grad[1] - b.grad[1],
            a.grad[2] - b.grad[2]};
  }
  friend Dual3 operator-(const Dual3& a) {
    return {-a.value, -a.grad[0], -a.grad[1], -a.grad[2]};
  }
  friend Dual3 operator*(const Dual3& a, const Dual3& b) {
    return {a.value * b.value, a.grad[0] * b.value + a.value * b.grad[0],
            a.grad[1] * b.value + a.value * b.grad[1],
            a.grad[2] * b.value + a.value * b.grad[2]};
  }
  friend Dual3 operator/(const Dual3& a, const Dual3& b) {
    const T inv = 1.0 / b.value;
    const T q = a.value * inv;
    return {q, (a.grad[0] - q * b.grad[0]) * inv,
            (a.grad[1] - q * b.grad[1]) * inv,
            (a.grad[2] - q * b.grad[2]) * inv};
  }
  template <class S>
    requires std::is_convertible_v<S, T> && (!std::is_same_v<S, Dual3>)
  friend Dual3 operator*(const S& scale, const Dual3& a) {
    const T s(scale);
    return {s * a.value, s * a.grad[0], s * a.grad[1], s * a.grad[2]};
  }
};

}  // namespace pinnmhd::ad

#endif  // PINNMHD_JET_HPP
