#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <thread>
#include <vector>

#include "rieszfield/error.hpp"
#include "rieszfield/fem.hpp"
#include "rieszfield/numerics/eigen.hpp"
#include "rieszfield/numerics/special.hpp"
#include "rieszfield/numerics/sparse.hpp"
#include "rieszfield/spectral.hpp"

namespace rieszfield {

/**
 * Quadrature for f(A) = (1/2 pi i) \oint f(z) (zI - A)^{-1} dz on a contour
 * around [lambda_min, lambda_max] that avoids (-inf, 0]:
 *
 *     f(A) ~ sum_j weights[j] f(nodes[j]) (nodes[j] I - A)^{-1}.
 *
 * Node j and node N-1-j are complex conjugates; for odd N the middle node is
 * real.
 */
struct ContourQuadrature {
  std::vector<Complex> nodes;
  std::vector<Complex> weights;
  int count = 0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;

  /// Number of distinct resolvents after conjugate pairing, ceil(N/2).
  int distinct_nodes() const { return (count + 1) / 2; }

  /// The quadrature applied to a scalar lambda: sum_j w_j f(xi_j)/(xi_j - lambda).
  Complex apply_scalar(const std::function<Complex(Complex)>& f, double lambda) const {
    Complex sum = 0.0;
    for (int j = 0; j < count; ++j)
      sum += weights[static_cast<std::size_t>(j)] * f(nodes[static_cast<std::size_t>(j)]) /
             (nodes[static_cast<std::size_t>(j)] - lambda);
    return sum;
  }
};

/**
 * Conformal-map quadrature for functions analytic in C \ (-inf, 0].
 *
 * The rectangle [-K, K] x [0, K'] is carried onto the upper half plane by
 * sn(t | k) and then by the Moebius map z = sqrt(m M) (1/k + s)/(1/k - s),
 * with k = (sqrt(M/m) - 1)/(sqrt(M/m) + 1); the bottom edge lands on [m, M]
 * and the top edge on (-inf, 0]. Reflection makes the region between the two
 * slits a periodic strip of width 4K, i.e. an annulus, and the trapezoid rule
 * is applied on its middle line Im t = K'/2.
 */
inline ContourQuadrature build_quadrature(double lambda_min, double lambda_max, int n) {
  if (!(lambda_min > 0.0) || !(lambda_max >= lambda_min) || !std::isfinite(lambda_max))
    throw ValidationError("build_quadrature: need 0 < lambda_min <= lambda_max");
  if (n < 4) throw ValidationError("build_quadrature: at least 4 nodes required");
  ContourQuadrature q;
  q.count = n;
  q.lambda_min = lambda_min;
  q.lambda_max = lambda_max;
  double lo = lambda_min, hi = lambda_max;
  if (hi < 1.01 * lo) {
    // A (near-)point spectrum degenerates the map; any enclosing interval works.
    const double mid = std::sqrt(lo * hi);
    lo = mid / 1.005;
    hi = mid * 1.005;
  }
  const double ratio = std::sqrt(hi / lo);
  const double k = (ratio - 1.0) / (ratio + 1.0);
  const double big_k = complete_elliptic_K(k);
  const double big_kp = complete_elliptic_K(complementary_modulus(k));
  const double scale = std::sqrt(lo * hi);
  const double step = 4.0 * big_k / n;
  const Complex two_pi_i(0.0, 2.0 * std::numbers::pi);
  for (int j = 0; j < n; ++j) {
    const Complex t(-big_k + (j + 0.5) * step, 0.5 * big_kp);
    const auto [sn, cn, dn] = jacobi_elliptic(t, k);
    const Complex denom = 1.0 / k - sn;
    const Complex xi = scale * (1.0 / k + sn) / denom;
    const Complex dxi = scale * (2.0 / k) * cn * dn / (denom * denom);
    // Increasing Re t runs clockwise around [m, M]; flip to counter-clockwise.
    q.nodes.push_back(xi);
    q.weights.push_back(-step * dxi / two_pi_i);
  }
  // Enforce exact conjugate symmetry so paired sums are exactly real.
  for (int j = 0; j < n / 2; ++j) {
    const auto jj = static_cast<std::size_t>(j), mirror = static_cast<std::size_t>(n - 1 - j);
    q.nodes[mirror] = std::conj(q.nodes[jj]);
    q.weights[mirror] = std::conj(q.weights[jj]);
  }
  if (n % 2 == 1) {
    const auto mid = static_cast<std::size_t>(n / 2);
    q.nodes[mid] = q.nodes[mid].real();
    q.weights[mid] = q.weights[mid].real();
  }
  return q;
}

/// z - (1^T M z / 1^T M 1) 1: removes the constant mode M-orthogonally.
inline Vector neumann_deflate(const FemSystem& system, const Vector& z) {
  const Vector m_one = system.mass * Vector::Ones(system.size());
  return z - (m_one.dot(z) / m_one.sum()) * Vector::Ones(system.size());
}

struct CimOptions {
  /// Worker threads for the per-node factorizations and solves.
  int threads = 1;
  /// Overrides the estimated spectral interval when set.
  std::optional<SpectralInterval> interval;
};

/**
 * Contour-integral sampler computing X = A^{-gamma} y with A = M^{-1} L via
 *
 *     X ~ Re sum_j w_j xi_j^{-gamma} (xi_j M - L)^{-1} M y,
 *
 * one complex sparse LU per conjugate pair of nodes. The LU factors are built
 * once in the constructor and reused for every sample and for covariance.
 * No eigendecomposition is performed; only the extremal eigenvalue estimates
 * that set the contour.
 *
 * For pure Neumann systems the right-hand side is deflated against the
 * constant mode and the contour is built on [lambda_2, lambda_max].
 *
 * Holds a reference to `system`, which must outlive the sampler.
 */
class CimSampler {
public:
  CimSampler(const FemSystem& system, const RieszFieldSpec& spec, int n, CimOptions options = {})
      : system_(&system), spec_(spec), options_(options) {
    spec_.validate();
    if (spec_.dimension != system.dimension) throw ValidationError("field dimension does not match the mesh");
    if (system.pure_neumann && spec_.neumann.kind == NeumannPolicy::Kind::Reject)
      throw ValidationError("pure Neumann problem requires a Neumann policy");
    interval_ = options.interval ? *options.interval
                                 : spectral_interval(system.stiffness, system.mass, system.pure_neumann);
    quadrature_ = build_quadrature(interval_.lambda_min, interval_.lambda_max, n);
    mass_factor_.compute(system.mass);
    m_one_ = system.mass * Vector::Ones(system.size());
    if (system.pure_neumann && spec_.neumann.kind == NeumannPolicy::Kind::PinAtOrigin)
      pin_ = point_functional(system, spec_.neumann.origin);

    const int distinct = quadrature_.distinct_nodes();
    factors_.resize(static_cast<std::size_t>(distinct));
    const ComplexSparseMatrix mass_c = system.mass.cast<Complex>();
    const ComplexSparseMatrix stiff_c = system.stiffness.cast<Complex>();
    for_each_node([&](int j) {
      const Complex xi = quadrature_.nodes[static_cast<std::size_t>(j)];
      try {
        factors_[static_cast<std::size_t>(j)].compute(xi * mass_c - stiff_c);
      } catch (const NumericError& e) {
        throw NumericError("factorization at quadrature node xi_" + std::to_string(j) + " = (" + std::to_string(xi.real()) +
                           ", " + std::to_string(xi.imag()) + ") failed: " + e.what());
      }
    });
  }

  const ContourQuadrature& quadrature() const noexcept { return quadrature_; }
  const SpectralInterval& interval() const noexcept { return interval_; }

  /// Quadrature sum over all N nodes for a real right-hand side b = M y and
  /// function f(xi) = xi^{-exponent}. Conjugate nodes reuse the conjugated
  /// solution, so only ceil(N/2) solves are made; the imaginary part of the
  /// result measures how far the rule is from conjugate symmetry.
  ComplexVector resolvent_sum(const Vector& rhs, double exponent) const {
    const auto solutions = solve_all(rhs);
    ComplexVector sum = ComplexVector::Zero(rhs.size());
    const int n = quadrature_.count;
    for (int j = 0; j < n; ++j) {
      const int owner = std::min(j, n - 1 - j);
      const ComplexVector x = j == owner ? solutions[static_cast<std::size_t>(owner)]
                                         : ComplexVector(solutions[static_cast<std::size_t>(owner)].conjugate());
      sum += term(j, exponent) * x;
    }
    return sum;
  }

  /// A^{-exponent} applied through its right-hand side b = M y (deflated for
  /// pure Neumann systems); pairs are combined as 2 Re(.) directly.
  Vector apply_rhs(const Vector& rhs, double exponent) const {
    Vector b = rhs;
    if (system_->pure_neumann) b -= (b.sum() / m_one_.sum()) * m_one_;
    const auto solutions = solve_all(b);
    Vector out = Vector::Zero(b.size());
    const int n = quadrature_.count;
    for (int j = 0; j < quadrature_.distinct_nodes(); ++j) {
      const double mult = (j == n - 1 - j) ? 1.0 : 2.0;
      out += mult * (term(j, exponent) * solutions[static_cast<std::size_t>(j)]).real();
    }
    return out;
  }

  /// A^{-gamma} y for free-node coefficients y.
  Vector apply_negative_power(const Vector& y) const { return apply_rhs(system_->mass * y, spec_.exponent()); }

  /// Free-node coefficients for an explicit nodal normal vector z; the load
  /// is M y = R z with y ~ N(0, M^{-1}), matching SpectralSampler.
  Vector coefficients(const Vector& z) const {
    if (z.size() != system_->size()) throw ValidationError("noise vector does not match free nodes");
    Vector x = apply_rhs(mass_factor_.apply_factor(z), spec_.exponent());
    if (pin_) x.array() -= pin_->dot(x);
    return x;
  }

  SamplePath sample(GaussianStream& stream) const {
    SamplePath path;
    path.seed = stream.seed();
    path.method = "cim";
    path.spec = spec_;
    path.values = system_->expand(coefficients(stream.draw(system_->size())));
    path.diagnostics["quadrature_nodes"] = quadrature_.count;
    path.diagnostics["lambda_min"] = interval_.lambda_min;
    path.diagnostics["lambda_max"] = interval_.lambda_max;
    return path;
  }

  /// Covariance A^{-2 gamma} M^{-1} of the free-node coefficients, built
  /// column by column from the cached factorizations.
  DenseMatrix covariance() const {
    const Eigen::Index n = system_->size();
    if (n > 1500) throw ValidationError("CIM covariance is limited to 1500 free nodes; use the spectral method");
    DenseMatrix c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) c.col(i) = apply_rhs(Vector::Unit(n, i), 2.0 * spec_.exponent());
    if (pin_) {
      const Vector p = *pin_;
      const DenseMatrix left = c - Vector::Ones(n) * (p.transpose() * c);
      c = left - (left * p) * Vector::Ones(n).transpose();
    }
    return 0.5 * (c + c.transpose());
  }

private:
  Complex term(int j, double exponent) const {
    const Complex xi = quadrature_.nodes[static_cast<std::size_t>(j)];
    return quadrature_.weights[static_cast<std::size_t>(j)] * std::pow(xi, -exponent);
  }

  std::vector<ComplexVector> solve_all(const Vector& rhs) const {
    std::vector<ComplexVector> out(factors_.size());
    const ComplexVector b = rhs.cast<Complex>();
    for_each_node([&](int j) { out[static_cast<std::size_t>(j)] = factors_[static_cast<std::size_t>(j)].solve(b); });
    return out;
  }

  template <typename Fn>
  void for_each_node(Fn&& fn) const {
    const int count = quadrature_.distinct_nodes();
    const int workers = std::clamp(options_.threads, 1, count);
    if (workers == 1) {
      for (int j = 0; j < count; ++j) fn(j);
      return;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (int j = w; j < count; j += workers) fn(j);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    pool.clear();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  const FemSystem* system_;
  RieszFieldSpec spec_;
  CimOptions options_;
  SpectralInterval interval_;
  ContourQuadrature quadrature_;
  CholeskyFactor mass_factor_;
  Vector m_one_;
  std::optional<Vector> pin_;
  std::vector<SparseLUFactor<Complex>> factors_;
};

inline SamplePath sample_cim(const FemSystem& system, const RieszFieldSpec& spec, GaussianStream& stream, int n) {
  return CimSampler(system, spec, n).sample(stream);
}

}  // namespace rieszfield
