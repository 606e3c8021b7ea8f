#pragma once

// Forward-mode dual numbers with a fixed number of tangent directions.
//
// The likelihood engine is templated on its scalar type. Instantiated with
// `double` it evaluates values; instantiated with `Dual<D>` it carries D
// directional derivatives through the same code path. Gradients with more
// than D components are assembled by seeding the directions in chunks.

#include <array>
#include <cmath>
#include <cstddef>

namespace lmte {

template <std::size_t D>
struct Dual {
  double v = 0.0;
  std::array<double, D> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit promotion from constants

  static Dual variable(double value, std::size_t direction) {
    Dual x(value);
    x.d[direction] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t i = 0; i < D; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t i = 0; i < D; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t i = 0; i < D; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (std::size_t i = 0; i < D; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
    v = q;
    return *this;
  }
  Dual& operator*=(double c) {
    v *= c;
    for (auto& x : d) x *= c;
    return *this;
  }
};

template <std::size_t D> Dual<D> operator+(Dual<D> a, const Dual<D>& b) { return a += b; }
template <std::size_t D> Dual<D> operator-(Dual<D> a, const Dual<D>& b) { return a -= b; }
template <std::size_t D> Dual<D> operator*(Dual<D> a, const Dual<D>& b) { return a *= b; }
template <std::size_t D> Dual<D> operator/(Dual<D> a, const Dual<D>& b) { return a /= b; }
template <std::size_t D> Dual<D> operator+(Dual<D> a, double b) { a.v += b; return a; }
template <std::size_t D> Dual<D> operator+(double b, Dual<D> a) { a.v += b; return a; }
template <std::size_t D> Dual<D> operator-(Dual<D> a, double b) { a.v -= b; return a; }
template <std::size_t D> Dual<D> operator*(Dual<D> a, double b) { return a *= b; }
template <std::size_t D> Dual<D> operator*(double b, Dual<D> a) { return a *= b; }
template <std::size_t D> Dual<D> operator/(Dual<D> a, double b) { return a *= (1.0 / b); }

template <std::size_t D>
Dual<D> operator-(double b, const Dual<D>& a) {
  Dual<D> r;
  r.v = b - a.v;
  for (std::size_t i = 0; i < D; ++i) r.d[i] = -a.d[i];
  return r;
}

template <std::size_t D>
Dual<D> operator-(const Dual<D>& a) {
  return 0.0 - a;
}

template <std::size_t D>
Dual<D> operator/(double b, const Dual<D>& a) {
  Dual<D> r;
  r.v = b / a.v;
  const double f = -r.v / a.v;
  for (std::size_t i = 0; i < D; ++i) r.d[i] = f * a.d[i];
  return r;
}

namespace detail {
template <std::size_t D>
Dual<D> chain(const Dual<D>& a, double value, double slope) {
  Dual<D> r;
  r.v = value;
  for (std::size_t i = 0; i < D; ++i) r.d[i] = slope * a.d[i];
  return r;
}
}  // namespace detail

template <std::size_t D>
Dual<D> exp(const Dual<D>& a) {
  const double e = std::exp(a.v);
  return detail::chain(a, e, e);
}

template <std::size_t D>
Dual<D> log(const Dual<D>& a) {
  return detail::chain(a, std::log(a.v), 1.0 / a.v);
}

template <std::size_t D>
Dual<D> log1p(const Dual<D>& a) {
  return detail::chain(a, std::log1p(a.v), 1.0 / (1.0 + a.v));
}

template <std::size_t D>
Dual<D> sqrt(const Dual<D>& a) {
  const double s = std::sqrt(a.v);
  return detail::chain(a, s, 0.5 / s);
}

template <std::size_t D> bool operator<(const Dual<D>& a, const Dual<D>& b) { return a.v < b.v; }
template <std::size_t D> bool operator>(const Dual<D>& a, const Dual<D>& b) { return a.v > b.v; }

// Scalar-generic helpers so templated code can inspect values uniformly.
inline double value_of(double x) { return x; }
template <std::size_t D>
double value_of(const Dual<D>& x) {
  return x.v;
}

template <class S>
S expit(const S& x) {
  using std::exp;
  if (value_of(x) >= 0.0) {
    S e = exp(-x);
    return 1.0 / (1.0 + e);
  }
  S e = exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline constexpr std::size_t kDualWidth = 8;
using GradDual = Dual<kDualWidth>;

}  // namespace lmte
