#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "rieszfield/error.hpp"
#include "rieszfield/numerics/counters.hpp"
#include "rieszfield/numerics/random.hpp"
#include "rieszfield/numerics/sparse.hpp"

namespace rieszfield {

/// Eigenpairs of the pencil L v = lambda M v, eigenvalues ascending, columns
/// of `eigenvectors` M-orthonormal.
struct EigenDecomposition {
  Vector eigenvalues;
  DenseMatrix eigenvectors;
  bool m_orthonormal = true;

  Eigen::Index size() const { return eigenvalues.size(); }
};

/// Pencils up to this order are diagonalized densely.
inline constexpr Eigen::Index kDenseEigenLimit = 3000;

namespace detail {

inline double trace_ratio(const SparseMatrix& l, const SparseMatrix& m) {
  return l.diagonal().sum() / m.diagonal().sum();
}

/// ||L v - lambda M v||_2 for each column.
inline Vector pencil_residuals(const SparseMatrix& l, const SparseMatrix& m, const Vector& lambda, const DenseMatrix& v) {
  Vector out(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) out[k] = (l * v.col(k) - lambda[k] * (m * v.col(k))).norm();
  return out;
}

inline bool residual_ok(double residual, double lambda, double scale) {
  return residual <= 1e-8 * std::max(std::abs(lambda), 1e-10 * scale);
}

inline EigenDecomposition dense_generalized_eigen(const SparseMatrix& l, const SparseMatrix& m, Eigen::Index count) {
  const DenseMatrix ld = DenseMatrix(l).selfadjointView<Eigen::Lower>();
  const DenseMatrix md = DenseMatrix(m).selfadjointView<Eigen::Lower>();
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> solver(ld, md, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  ++counters().full_eigendecompositions;
  if (solver.info() != Eigen::Success) throw NumericError("generalized_eigen: dense solver failed (M not positive definite?)");
  EigenDecomposition out;
  out.eigenvalues = solver.eigenvalues().head(count);
  out.eigenvectors = solver.eigenvectors().leftCols(count);
  return out;
}

/// Lowest `count` eigenpairs by Rayleigh-Ritz on a block Krylov space of the
/// shift-inverted operator (L + tau M)^{-1} M, with full M-orthogonalization.
inline EigenDecomposition shift_invert_eigen(const SparseMatrix& l, const SparseMatrix& m, Eigen::Index count) {
  const Eigen::Index n = l.rows();
  const double tau = 1e-6 * trace_ratio(l, m);
  const SparseMatrix shifted = l + tau * m;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> factor(shifted);
  ++counters().real_factorizations;
  if (factor.info() != Eigen::Success) throw NumericError("generalized_eigen: shifted factorization failed");

  const Eigen::Index block = std::min<Eigen::Index>(8, n);
  const Eigen::Index cap = std::min<Eigen::Index>(n, 3 * count + 16 * block + 64);
  DenseMatrix q(n, cap), mq(n, cap);
  Eigen::Index filled = 0;

  GaussianStream stream(0x5EEDull + static_cast<std::uint64_t>(n));
  DenseMatrix pending(n, block);
  for (Eigen::Index j = 0; j < block; ++j) pending.col(j) = stream.draw(n);

  auto append = [&](Vector w) {
    for (int pass = 0; pass < 2; ++pass) {
      if (filled > 0) {
        const Vector h = mq.leftCols(filled).transpose() * w;
        w -= q.leftCols(filled) * h;
      }
    }
    const Vector mw = m * w;
    const double norm = std::sqrt(std::max(w.dot(mw), 0.0));
    if (norm < 1e-10 || filled >= cap) return false;
    q.col(filled) = w / norm;
    mq.col(filled) = mw / norm;
    ++filled;
    return true;
  };

  Eigen::Index next_check = std::min(cap, std::max<Eigen::Index>(2 * count + 2 * block, count + 24));
  Eigen::Index block_start = 0;
  for (Eigen::Index j = 0; j < block; ++j) append(pending.col(j));

  const double scale = trace_ratio(l, m);
  Vector last_residuals;
  while (true) {
    const Eigen::Index block_end = filled;
    for (Eigen::Index j = block_start; j < block_end && filled < cap; ++j) {
      const Vector w = factor.solve(Vector(mq.col(j)));
      append(w);
    }
    block_start = block_end;
    const bool exhausted = filled == block_end || filled >= cap;
    if (filled < next_check && !exhausted) continue;

    const DenseMatrix qb = q.leftCols(filled);
    DenseMatrix t = qb.transpose() * (l * qb);
    t = 0.5 * (t + t.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<DenseMatrix> ritz(t);
    const Eigen::Index have = std::min(count, filled);
    EigenDecomposition out;
    out.eigenvalues = ritz.eigenvalues().head(have);
    out.eigenvectors = qb * ritz.eigenvectors().leftCols(have);
    last_residuals = pencil_residuals(l, m, out.eigenvalues, out.eigenvectors);
    bool converged = have == count;
    for (Eigen::Index k = 0; k < have && converged; ++k)
      converged = residual_ok(last_residuals[k], out.eigenvalues[k], scale);
    if (converged) return out;
    if (exhausted) break;
    next_check = std::min(cap, filled + std::max<Eigen::Index>(filled / 4, 2 * block));
  }
  std::ostringstream msg;
  msg << "generalized_eigen: no convergence after " << filled << " Krylov vectors; residual norms:";
  for (Eigen::Index k = 0; k < last_residuals.size(); ++k) msg << ' ' << last_residuals[k];
  throw NumericError(msg.str());
}

/// Lanczos with full M-reorthogonalization for an operator that is
/// self-adjoint in the M inner product. Returns the largest Ritz value and
/// its Ritz vector. `project` (optional) is applied to every new vector.
struct RitzPair {
  double value = 0.0;
  Vector vector;
};

inline RitzPair lanczos_largest(const std::function<Vector(const Vector&)>& op, const SparseMatrix& m, Eigen::Index steps,
                                const std::function<void(Vector&)>& project, std::uint64_t seed) {
  const Eigen::Index n = m.rows();
  steps = std::min(steps, n);
  DenseMatrix q(n, steps), mq(n, steps);
  DenseMatrix t = DenseMatrix::Zero(steps, steps);
  GaussianStream stream(seed);
  Vector w = stream.draw(n);
  Eigen::Index filled = 0;
  for (Eigen::Index j = 0; j <= steps; ++j) {
    if (project) project(w);
    if (filled > 0) {
      for (int pass = 0; pass < 2; ++pass) {
        const Vector h = mq.leftCols(filled).transpose() * w;
        if (pass == 0 && j > 0) t.col(j - 1).head(filled) = h;
        w -= q.leftCols(filled) * h;
      }
    }
    const Vector mw = m * w;
    const double beta = std::sqrt(std::max(w.dot(mw), 0.0));
    if (j > 0 && j < steps) {
      t(j, j - 1) = beta;
    }
    if (j == steps || beta < 1e-12) break;
    q.col(filled) = w / beta;
    mq.col(filled) = mw / beta;
    ++filled;
    w = op(Vector(q.col(filled - 1)));
  }
  const DenseMatrix tb = t.topLeftCorner(filled, filled);
  const DenseMatrix sym = 0.5 * (tb + tb.transpose());
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sym);
  RitzPair out;
  out.value = es.eigenvalues()[filled - 1];
  out.vector = q.leftCols(filled) * es.eigenvectors().col(filled - 1);
  return out;
}

}  // namespace detail

/**
 * First `count` eigenpairs of L v = lambda M v (all when `count` is empty),
 * ascending and M-orthonormal. L must be symmetric positive semi-definite and
 * M symmetric positive definite. Pencils of order <= kDenseEigenLimit are
 * solved densely; larger ones by shift-invert block Krylov iteration, with
 * residuals ||L v - lambda M v||_2 <= 1e-8 lambda.
 */
inline EigenDecomposition generalized_eigen(const SparseMatrix& l, const SparseMatrix& m,
                                            std::optional<Eigen::Index> count = std::nullopt) {
  if (l.rows() != l.cols() || m.rows() != m.cols() || l.rows() != m.rows())
    throw ValidationError("generalized_eigen: L and M must be square and of equal size");
  const Eigen::Index n = l.rows();
  const Eigen::Index k = count.value_or(n);
  if (k < 1 || k > n) throw ValidationError("generalized_eigen: requested mode count out of range");
  EigenDecomposition out;
  if (n <= kDenseEigenLimit) {
    out = detail::dense_generalized_eigen(l, m, k);
  } else {
    ++counters().partial_eigendecompositions;
    out = detail::shift_invert_eigen(l, m, k);
  }
  const double scale = std::max(std::abs(out.eigenvalues[out.size() - 1]), 1.0);
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (out.eigenvalues[i] < -1e-10 * scale)
      throw NumericError("generalized_eigen: negative eigenvalue " + std::to_string(out.eigenvalues[i]) +
                         " (L not positive semi-definite)");
  return out;
}

/// Enclosing interval for the spectrum of the pencil (L, M).
struct SpectralInterval {
  double lambda_min = 0.0;
  double lambda_max = 0.0;

  double condition() const { return lambda_max / lambda_min; }
};

/// Upper bound 4 max_i (sum_j |L_ij|) / (sum_j M_ij). It is rigorous for P1
/// mass matrices, whose consistent mass dominates a quarter of the lumped one.
inline double gershgorin_upper_bound(const SparseMatrix& l, const SparseMatrix& m) {
  Vector abs_row = Vector::Zero(l.rows());
  Vector mass_row = Vector::Zero(m.rows());
  for (int k = 0; k < l.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(l, k); it; ++it) abs_row[it.row()] += std::abs(it.value());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) mass_row[it.row()] += it.value();
  double bound = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) bound = std::max(bound, abs_row[i] / mass_row[i]);
  return 4.0 * bound;
}

/// Rayleigh quotient after `iterations` steps of power iteration on M^{-1} L;
/// a lower estimate of the largest eigenvalue.
inline double power_iteration_lambda_max(const SparseMatrix& l, const SparseMatrix& m, int iterations = 50) {
  const CholeskyFactor mass(m);
  GaussianStream stream(0xB0B0ull);
  Vector v = stream.draw(l.rows());
  double rayleigh = 0.0;
  for (int it = 0; it < iterations; ++it) {
    v = mass.solve(l * v);
    v /= std::sqrt(v.dot(m * v));
    rayleigh = v.dot(l * v);
  }
  return rayleigh;
}

/**
 * Interval [lambda_min, lambda_max] enclosing the spectrum of the pencil,
 * from extremal Lanczos Ritz values corrected by their residual bounds and
 * widened by 2%. With `deflate_constant` the constant vector is projected
 * out, so lambda_min estimates the smallest nonzero eigenvalue of a pure
 * Neumann pencil.
 */
inline SpectralInterval spectral_interval(const SparseMatrix& l, const SparseMatrix& m, bool deflate_constant = false) {
  const Eigen::Index n = l.rows();
  if (n == 0) throw ValidationError("spectral_interval: empty pencil");
  ++counters().extremal_estimates;
  const CholeskyFactor mass(m);

  std::function<void(Vector&)> project;
  if (deflate_constant) {
    const Vector m_one = m * Vector::Ones(n);
    const double total = m_one.sum();
    project = [m_one, total](Vector& v) { v.array() -= m_one.dot(v) / total; };
  }

  auto m_inverse_norm = [&](const Vector& r) { return std::sqrt(std::max(r.dot(mass.solve(r)), 0.0)); };
  const Eigen::Index steps = std::min<Eigen::Index>(n, 80);

  const auto top = detail::lanczos_largest([&](const Vector& v) { return mass.solve(l * v); }, m, steps, project, 0xA11CEull);
  const Vector ytop = top.vector;
  const double top_residual = m_inverse_norm(l * ytop - top.value * (m * ytop));
  double lambda_max = 1.02 * (top.value + top_residual);
  if (n <= 2) lambda_max = std::max(lambda_max, top.value);

  const double tau = deflate_constant ? 1e-6 * detail::trace_ratio(l, m) : 0.0;
  const SparseMatrix shifted = l + tau * m;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> factor(shifted);
  ++counters().real_factorizations;
  if (factor.info() != Eigen::Success) throw NumericError("spectral_interval: pencil is not definite");
  const auto low = detail::lanczos_largest([&](const Vector& v) { Vector w = factor.solve(m * v); return w; }, m, steps,
                                           project, 0xB0Bull);
  if (!(low.value > 0.0)) throw NumericError("spectral_interval: pencil is singular");
  const Vector ylow = low.vector;
  const double ritz_min = 1.0 / low.value - tau;
  const double low_residual = m_inverse_norm(l * ylow - ritz_min * (m * ylow));
  double lambda_min = 0.98 * (ritz_min - low_residual);
  if (!(lambda_min > 1e-12 * lambda_max)) {
    // Residual correction swamped the estimate; fall back to the Ritz value.
    lambda_min = 0.9 * ritz_min;
  }
  if (!(lambda_min > 1e-12 * lambda_max))
    throw NumericError("spectral_interval: pencil is singular (deflate the constant mode)");
  return {lambda_min, lambda_max};
}

}  // namespace rieszfield
