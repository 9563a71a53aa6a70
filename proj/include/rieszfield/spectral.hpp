#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>

#include "rieszfield/error.hpp"
#include "rieszfield/fem.hpp"
#include "rieszfield/numerics/eigen.hpp"
#include "rieszfield/numerics/random.hpp"
#include "rieszfield/numerics/sparse.hpp"

namespace rieszfield {

/// How the constant (zero-eigenvalue) mode of a pure Neumann problem is
/// handled. DropZeroMode omits it; PinAtOrigin subtracts each mode's value at
/// `origin`, forcing X(origin) = 0; Reject raises an error.
struct NeumannPolicy {
  enum class Kind { Reject, DropZeroMode, PinAtOrigin };
  Kind kind = Kind::DropZeroMode;
  Point2 origin{};

  static NeumannPolicy reject() { return {Kind::Reject, {}}; }
  static NeumannPolicy drop_zero_mode() { return {Kind::DropZeroMode, {}}; }
  static NeumannPolicy pin_at(Point2 origin) { return {Kind::PinAtOrigin, origin}; }
};

/// Parameters of a Riesz field X_H on a bounded domain. The boundary
/// conditions live in the FemSystem the spec is used with.
struct RieszFieldSpec {
  double hurst = 0.5;
  int dimension = 2;
  std::optional<Eigen::Index> truncation;  // mode count K; empty = default
  NeumannPolicy neumann{};

  /// Exponent gamma = d/4 + H/2 applied to the eigenvalues in sample paths.
  double exponent() const { return dimension / 4.0 + hurst / 2.0; }

  void validate() const {
    if (!(hurst > 0.0 && hurst < 1.0)) throw ValidationError("Hurst parameter must lie in (0,1)");
    if (dimension != 1 && dimension != 2) throw ValidationError("dimension must be 1 or 2");
    if (truncation && *truncation < 1) throw ValidationError("truncation must be at least one mode");
  }
};

/// Nodal values of one realization over every mesh vertex, with provenance.
struct SamplePath {
  Vector values;
  std::string method;
  std::uint64_t seed = 0;
  RieszFieldSpec spec;
  std::map<std::string, double> diagnostics;
};

/// Sum_k lambda_k^{-exponent} v_k zeta_k over the columns of `eig`.
inline Vector spectral_coefficients(const EigenDecomposition& eig, double exponent, const Vector& zeta) {
  if (zeta.size() != eig.size()) throw ValidationError("one normal variate per mode is required");
  Vector weights(eig.size());
  for (Eigen::Index k = 0; k < eig.size(); ++k) weights[k] = std::pow(eig.eigenvalues[k], -exponent) * zeta[k];
  return eig.eigenvectors * weights;
}

/// Weyl-law estimate of sum_{k>K} lambda_k^{-(d/2+H)} for a domain of measure
/// `measure`, using lambda_k ~ 4 pi k / |D| (d=2) or (pi k / |D|)^2 (d=1).
inline double weyl_tail_estimate(double measure, int dimension, double hurst, Eigen::Index kept, Eigen::Index total) {
  const double power = dimension / 2.0 + hurst;
  double tail = 0.0;
  for (Eigen::Index k = kept + 1; k <= total; ++k) {
    const double kk = static_cast<double>(k);
    const double lambda = dimension == 2 ? 4.0 * std::numbers::pi * kk / measure
                                         : std::pow(std::numbers::pi * kk / measure, 2.0);
    tail += std::pow(lambda, -power);
  }
  return tail;
}

/**
 * Truncated eigen-expansion sampler. The pencil is diagonalized once at
 * construction; each sample then costs one sparse triangular product and a
 * dense n-by-K product.
 *
 * The stream is consumed as a nodal vector z; the modal coefficients are
 * zeta = V^T R z with M = R R^T, which are i.i.d. standard normal because
 * R^T V has orthonormal columns. The same z fed to CimSampler produces the
 * same path up to quadrature error.
 *
 * Holds a reference to `system`, which must outlive the sampler.
 */
class SpectralSampler {
public:
  SpectralSampler(const FemSystem& system, const RieszFieldSpec& spec) : system_(&system), spec_(spec) {
    spec_.validate();
    if (spec_.dimension != system.dimension) throw ValidationError("field dimension does not match the mesh");
    const Eigen::Index n = system.size();
    const Eigen::Index k = std::min(n, spec_.truncation.value_or(n <= kDenseEigenLimit ? n : 2000));
    eig_ = laplace_eigenpairs(system, k);
    mass_factor_.compute(system.mass);

    const double gamma = spec_.exponent();
    const double largest = eig_.eigenvalues[eig_.size() - 1];
    weights_ = Vector::Zero(eig_.size());
    for (Eigen::Index i = 0; i < eig_.size(); ++i) {
      const double lambda = eig_.eigenvalues[i];
      const bool zero_mode = system.pure_neumann ? i == 0 : lambda <= 1e-12 * largest;
      if (zero_mode) {
        if (!system.pure_neumann)
          throw NumericError("zero eigenvalue on a system with Dirichlet or Robin conditions");
        if (spec_.neumann.kind == NeumannPolicy::Kind::Reject)
          throw ValidationError("pure Neumann problem: zero mode included without a Neumann policy");
        continue;
      }
      weights_[i] = std::pow(lambda, -gamma);
    }

    basis_ = eig_.eigenvectors;
    if (system.pure_neumann && spec_.neumann.kind == NeumannPolicy::Kind::PinAtOrigin) {
      const Vector e = point_functional(system, spec_.neumann.origin);
      const Vector at_origin = basis_.transpose() * e;
      basis_.rowwise() -= at_origin.transpose();
    }
    if (k < n) tail_ = weyl_tail_estimate(system.measure(), spec_.dimension, spec_.hurst, k, n);
  }

  const EigenDecomposition& eigenpairs() const noexcept { return eig_; }
  Eigen::Index modes() const noexcept { return eig_.size(); }
  /// Weyl estimate of the neglected covariance trace; zero when untruncated.
  double truncation_tail() const noexcept { return tail_; }

  /// Free-node coefficients for an explicit nodal normal vector z.
  Vector coefficients(const Vector& z) const {
    if (z.size() != system_->size()) throw ValidationError("noise vector does not match free nodes");
    const Vector zeta = eig_.eigenvectors.transpose() * mass_factor_.apply_factor(z);
    return basis_ * weights_.cwiseProduct(zeta);
  }

  SamplePath sample(GaussianStream& stream) const {
    SamplePath path;
    path.seed = stream.seed();
    path.method = "eig";
    path.spec = spec_;
    path.values = system_->expand(coefficients(stream.draw(system_->size())));
    path.diagnostics["modes"] = static_cast<double>(eig_.size());
    path.diagnostics["truncation_tail"] = tail_;
    return path;
  }

  /// Covariance of the free-node coefficients, V_K diag(lambda^{-2 gamma}) V_K^T.
  DenseMatrix covariance() const {
    const DenseMatrix scaled = basis_ * weights_.asDiagonal();
    DenseMatrix c = scaled * scaled.transpose();
    return 0.5 * (c + c.transpose());
  }

private:
  const FemSystem* system_;
  RieszFieldSpec spec_;
  EigenDecomposition eig_;
  CholeskyFactor mass_factor_;
  DenseMatrix basis_;
  Vector weights_;
  double tail_ = 0.0;
};

inline SamplePath sample_spectral(const FemSystem& system, const RieszFieldSpec& spec, GaussianStream& stream) {
  return SpectralSampler(system, spec).sample(stream);
}

inline DenseMatrix covariance_spectral(const FemSystem& system, const RieszFieldSpec& spec) {
  return SpectralSampler(system, spec).covariance();
}

/// max |C_cD - c^{2H} C_D| / max |C_D| for two systems on meshes that differ
/// only by the scale factor c.
inline double scale_covariance_check(const FemSystem& base, const FemSystem& scaled, const RieszFieldSpec& spec, double c) {
  if (base.size() != scaled.size() || base.vertex_count() != scaled.vertex_count() || base.free_nodes != scaled.free_nodes)
    throw ValidationError("scale_covariance_check: systems have different connectivity");
  const auto* mb = std::get_if<Mesh>(&base.domain);
  const auto* ms = std::get_if<Mesh>(&scaled.domain);
  if (mb && ms && mb->triangles() != ms->triangles())
    throw ValidationError("scale_covariance_check: systems have different connectivity");
  const DenseMatrix cb = covariance_spectral(base, spec);
  const DenseMatrix cs = covariance_spectral(scaled, spec);
  const double factor = std::pow(c, 2.0 * spec.hurst);
  return (cs - factor * cb).cwiseAbs().maxCoeff() / cb.cwiseAbs().maxCoeff();
}

}  // namespace rieszfield
