#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "rieszfield/error.hpp"

namespace rieszfield {

inline double gamma_fn(double x) {
  if (!(x > 0.0)) throw ValidationError("gamma_fn: argument must be positive");
  return std::tgamma(x);
}

inline double log_gamma(double x) {
  if (!(x > 0.0)) throw ValidationError("log_gamma: argument must be positive");
  return std::lgamma(x);
}

/// Arithmetic-geometric mean of two positive numbers.
inline double agm(double a, double b) {
  for (int it = 0; it < 64 && std::abs(a - b) > 1e-16 * a; ++it) {
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  return 0.5 * (a + b);
}

/// Complementary modulus sqrt(1 - k^2), computed without cancellation near k = 1.
inline double complementary_modulus(double k) { return std::sqrt((1.0 - k) * (1.0 + k)); }

/// Complete elliptic integral of the first kind K(k) for modulus k in [0,1).
inline double complete_elliptic_K(double k) {
  if (!(k >= 0.0 && k < 1.0)) throw ValidationError("complete_elliptic_K: modulus must lie in [0,1)");
  return std::numbers::pi / (2.0 * agm(1.0, complementary_modulus(k)));
}

template <typename T>
struct JacobiTriple {
  T sn;
  T cn;
  T dn;
};

/// sn, cn, dn of a real argument by the descending Landen (AGM) scheme.
inline JacobiTriple<double> jacobi_elliptic(double u, double k) {
  if (!(k >= 0.0 && k < 1.0)) throw ValidationError("jacobi_elliptic: modulus must lie in [0,1)");
  if (k == 0.0) return {std::sin(u), std::cos(u), 1.0};
  const double kp = complementary_modulus(k);
  std::array<double, 32> a{}, c{};
  a[0] = 1.0;
  double b = kp;
  c[0] = k;
  int n = 0;
  while (std::abs(c[static_cast<std::size_t>(n)]) > 1e-17 && n < 31) {
    const double an = 0.5 * (a[static_cast<std::size_t>(n)] + b);
    const double cn = 0.5 * (a[static_cast<std::size_t>(n)] - b);
    b = std::sqrt(a[static_cast<std::size_t>(n)] * b);
    ++n;
    a[static_cast<std::size_t>(n)] = an;
    c[static_cast<std::size_t>(n)] = cn;
  }
  double phi = std::ldexp(a[static_cast<std::size_t>(n)] * u, n);
  for (int m = n; m > 0; --m)
    phi = 0.5 * (phi + std::asin(c[static_cast<std::size_t>(m)] * std::sin(phi) / a[static_cast<std::size_t>(m)]));
  const double sn = std::sin(phi);
  const double cn = std::cos(phi);
  // dn^2 = k'^2 + k^2 cn^2 avoids the cancellation in 1 - k^2 sn^2.
  const double dn = std::sqrt(kp * kp + k * k * cn * cn);
  return {sn, cn, dn};
}

/// sn, cn, dn of a complex argument, assembled from real evaluations at
/// modulus k (real part) and the complementary modulus (imaginary part).
inline JacobiTriple<std::complex<double>> jacobi_elliptic(std::complex<double> u, double k) {
  if (!(k >= 0.0 && k < 1.0)) throw ValidationError("jacobi_elliptic: modulus must lie in [0,1)");
  const auto [s, c, d] = jacobi_elliptic(u.real(), k);
  const double kp = complementary_modulus(k);
  if (kp >= 1.0) {
    // k == 0: circular functions.
    const auto z = std::sin(u), w = std::cos(u);
    return {z, w, {1.0, 0.0}};
  }
  const auto [s1, c1, d1] = jacobi_elliptic(u.imag(), kp);
  const double k2 = k * k;
  const double denom = c1 * c1 + k2 * s * s * s1 * s1;
  if (denom == 0.0) throw NumericError("jacobi_elliptic: argument is a pole");
  return {{s * d1 / denom, c * d * s1 * c1 / denom},
          {c * c1 / denom, -s * d * s1 * d1 / denom},
          {d * c1 * d1 / denom, -k2 * s * c * s1 / denom}};
}

}  // namespace rieszfield
