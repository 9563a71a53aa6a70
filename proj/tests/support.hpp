#pragma once

// Independent reference implementations used only as test oracles.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rieszfield/numerics/fft.hpp"
#include "rieszfield/numerics/sparse.hpp"

namespace test {

using rieszfield::ComplexGrid;
using rieszfield::DenseMatrix;
using rieszfield::Vector;

/// Gaussian elimination with partial pivoting.
inline Vector gaussian_elimination(DenseMatrix a, Vector b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = k;
    for (Eigen::Index i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (a(p, k) == 0.0) throw std::runtime_error("singular");
    a.row(k).swap(a.row(p));
    std::swap(b[k], b[p]);
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (Eigen::Index j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  Vector x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (Eigen::Index j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

/// O(n^4) direct evaluation of the 2D DFT.
inline ComplexGrid naive_dft_2d(const ComplexGrid& g) {
  const auto rows = g.rows(), cols = g.cols();
  ComplexGrid out(rows, cols);
  for (Eigen::Index p = 0; p < rows; ++p)
    for (Eigen::Index q = 0; q < cols; ++q) {
      std::complex<double> s = 0.0;
      for (Eigen::Index j = 0; j < rows; ++j)
        for (Eigen::Index k = 0; k < cols; ++k) {
          const double phase = -2.0 * std::numbers::pi *
                               (static_cast<double>(p * j) / static_cast<double>(rows) +
                                static_cast<double>(q * k) / static_cast<double>(cols));
          s += g(j, k) * std::polar(1.0, phase);
        }
      out(p, q) = s;
    }
  return out;
}

/// K(k) = int_0^{pi/2} (1 - k^2 sin^2 t)^{-1/2} dt by the trapezoid rule on
/// the full period, which converges geometrically for this analytic integrand.
inline double elliptic_k_trapezoid(double k) {
  const int n = 20000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * i / n;
    const double st = std::sin(t);
    s += 1.0 / std::sqrt(1.0 - k * k * st * st);
  }
  return s * (2.0 * std::numbers::pi / n) / 4.0;
}

/// y_n = sum_{k<=n} h_k z_{n-k}, computed directly.
inline std::vector<double> naive_causal_convolution(const std::vector<double>& h, const std::vector<double>& z) {
  std::vector<double> y(z.size(), 0.0);
  for (std::size_t n = 0; n < z.size(); ++n)
    for (std::size_t k = 0; k <= n; ++k) y[n] += h[k] * z[n - k];
  return y;
}

}  // namespace test
