#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "rieszfield/error.hpp"
#include "rieszfield/mesh.hpp"
#include "rieszfield/numerics/fft.hpp"
#include "rieszfield/numerics/random.hpp"
#include "rieszfield/numerics/sparse.hpp"

namespace rieszfield {

inline void check_hurst(double h) {
  if (!(h > 0.0 && h < 1.0)) throw ValidationError("Hurst parameter must lie in (0,1)");
}

/// Covariance of fractional Brownian motion, (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.
inline double fbm_covariance(double s, double t, double hurst) {
  check_hurst(hurst);
  if (s < 0.0 || t < 0.0) throw ValidationError("fbm_covariance: times must be non-negative");
  const double p = 2.0 * hurst;
  return 0.5 * (std::pow(s, p) + std::pow(t, p) - std::pow(std::abs(t - s), p));
}

/// Covariance of the fractional Brownian surface.
inline double fbs_covariance(Point2 x, Point2 y, double hurst) {
  check_hurst(hurst);
  const double p = 2.0 * hurst;
  const Point2 origin{};
  return 0.5 * (std::pow(distance(x, origin), p) + std::pow(distance(y, origin), p) - std::pow(distance(x, y), p));
}

/// Autocovariance at lag n of increments of fBm over steps of length h.
inline double fgn_autocovariance(long n, double h, double hurst) {
  check_hurst(hurst);
  if (n < 0) throw ValidationError("fgn_autocovariance: lag must be non-negative");
  if (!(h > 0.0)) throw ValidationError("fgn_autocovariance: step must be positive");
  const double p = 2.0 * hurst;
  const double k = static_cast<double>(n);
  if (n == 0) return std::pow(h, p);
  return 0.5 * std::pow(h, p) * (std::pow(k + 1.0, p) + std::pow(k - 1.0, p) - 2.0 * std::pow(k, p));
}

/// Fractional integration order beta (= alpha/2) and series length.
struct HoskingSpec {
  double beta = 0.5;
  std::size_t length = 1024;

  void validate() const {
    // beta = 0 (white noise) is accepted as the degenerate end of the family.
    if (!(beta >= 0.0 && beta <= 2.0)) throw ValidationError("Hosking order beta must lie in [0, 2]");
    if (length < 8) throw ValidationError("Hosking series length must be at least 8");
    if (!is_power_of_two(length)) throw ValidationError("Hosking series length must be a power of two");
  }
};

/// Power-series coefficients of (1 - w)^{-beta}.
inline std::vector<double> hosking_impulse(double beta, std::size_t n) {
  std::vector<double> h(n, 0.0);
  if (n == 0) return h;
  h[0] = 1.0;
  for (std::size_t k = 1; k < n; ++k) h[k] = h[k - 1] * (beta + static_cast<double>(k) - 1.0) / static_cast<double>(k);
  return h;
}

/// Causal convolution y_n = sum_{k<=n} h_k z_{n-k}, computed with zero-padded
/// transforms of twice the input length.
inline std::vector<double> causal_convolve(const std::vector<double>& h, const std::vector<double>& z) {
  if (h.size() != z.size()) throw ValidationError("causal_convolve: lengths differ");
  const std::size_t n = z.size();
  if (n == 0) return {};
  std::size_t padded = 1;
  while (padded < 2 * n) padded <<= 1;
  std::vector<std::complex<double>> a(padded), b(padded);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = h[i];
    b[i] = z[i];
  }
  a = dft_1d(std::move(a), Direction::Forward);
  b = dft_1d(std::move(b), Direction::Forward);
  for (std::size_t i = 0; i < padded; ++i) a[i] *= b[i];
  a = dft_1d(std::move(a), Direction::Inverse);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i].real();
  return y;
}

inline std::vector<double> hosking_filter(const HoskingSpec& spec, const std::vector<double>& z) {
  spec.validate();
  if (z.size() != spec.length) throw ValidationError("hosking_filter: input length does not match the spec");
  return causal_convolve(hosking_impulse(spec.beta, spec.length), z);
}

/// One realization of 1/f^{2 beta} noise of length spec.length.
inline std::vector<double> hosking_sample(const HoskingSpec& spec, GaussianStream& stream) {
  spec.validate();
  std::vector<double> z(spec.length);
  for (auto& v : z) v = stream.next();
  return hosking_filter(spec, z);
}

/// Lower Cholesky factor of a dense covariance. A diagonal jitter of
/// 1e-12 trace/n is added only if the plain factorization fails.
class CholeskySampler {
public:
  explicit CholeskySampler(const DenseMatrix& covariance) {
    if (covariance.rows() != covariance.cols()) throw ValidationError("covariance must be square");
    const Eigen::Index n = covariance.rows();
    if (n == 0) throw ValidationError("covariance is empty");
    const DenseMatrix sym = 0.5 * (covariance + covariance.transpose());
    Eigen::LLT<DenseMatrix> llt(sym);
    if (llt.info() != Eigen::Success) {
      jitter_ = 1e-12 * sym.trace() / static_cast<double>(n);
      llt.compute(sym + jitter_ * DenseMatrix::Identity(n, n));
      if (llt.info() != Eigen::Success) throw NumericError("covariance is indefinite beyond the permitted jitter");
    }
    factor_ = llt.matrixL();
  }

  double jitter() const noexcept { return jitter_; }
  const DenseMatrix& factor() const noexcept { return factor_; }

  Vector apply(const Vector& z) const {
    if (z.size() != factor_.rows()) throw ValidationError("noise vector does not match the covariance");
    return factor_.triangularView<Eigen::Lower>() * z;
  }

  Vector sample(GaussianStream& stream) const { return apply(stream.draw(factor_.rows())); }

private:
  DenseMatrix factor_;
  double jitter_ = 0.0;
};

inline Vector cholesky_sample(const DenseMatrix& covariance, GaussianStream& stream) {
  return CholeskySampler(covariance).sample(stream);
}

/// Covariance matrix of fGn with unit steps, length n.
inline DenseMatrix fgn_covariance_matrix(std::size_t n, double hurst) {
  DenseMatrix c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          fgn_autocovariance(static_cast<long>(i > j ? i - j : j - i), 1.0, hurst);
  return c;
}

}  // namespace rieszfield
