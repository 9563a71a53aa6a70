#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "rieszfield/error.hpp"
#include "rieszfield/numerics/counters.hpp"

namespace rieszfield {

using Complex = std::complex<double>;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using DenseMatrix = Eigen::MatrixXd;

template <typename Scalar>
using SparseMatrixT = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;
using SparseMatrix = SparseMatrixT<double>;
using ComplexSparseMatrix = SparseMatrixT<Complex>;

/// True when |a_ij - a_ji| <= tol * max(|a_ij|, 1) for every stored entry.
template <typename Scalar>
bool is_symmetric(const SparseMatrixT<Scalar>& a, double tol = 1e-14) {
  if (a.rows() != a.cols()) return false;
  const SparseMatrixT<Scalar> t = a.transpose();
  const SparseMatrixT<Scalar> diff = a - t;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (typename SparseMatrixT<Scalar>::InnerIterator it(diff, k); it; ++it) {
      const double ref = std::max(std::abs(a.coeff(it.row(), it.col())), 1.0);
      if (std::abs(it.value()) > tol * ref) return false;
    }
  return true;
}

/// Restricts a square matrix to the rows/columns listed in `keep` (in order).
template <typename Scalar>
SparseMatrixT<Scalar> restrict_to(const SparseMatrixT<Scalar>& a, const std::vector<int>& keep) {
  std::vector<int> map(static_cast<std::size_t>(a.rows()), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) map[static_cast<std::size_t>(keep[i])] = static_cast<int>(i);
  std::vector<Eigen::Triplet<Scalar>> entries;
  entries.reserve(static_cast<std::size_t>(a.nonZeros()));
  for (int k = 0; k < a.outerSize(); ++k)
    for (typename SparseMatrixT<Scalar>::InnerIterator it(a, k); it; ++it) {
      const int r = map[static_cast<std::size_t>(it.row())], c = map[static_cast<std::size_t>(it.col())];
      if (r >= 0 && c >= 0) entries.emplace_back(r, c, it.value());
    }
  SparseMatrixT<Scalar> out(static_cast<int>(keep.size()), static_cast<int>(keep.size()));
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

/**
 * Direct sparse LU factorization (COLAMD ordering) with a residual-checked
 * solve. Real and complex instantiations are used for the mass/stiffness
 * solves and the shifted pencils of the contour quadrature respectively.
 */
template <typename Scalar>
class SparseLUFactor {
public:
  using Matrix = SparseMatrixT<Scalar>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  SparseLUFactor() = default;
  explicit SparseLUFactor(const Matrix& a) { compute(a); }

  void compute(const Matrix& a) {
    if (a.rows() != a.cols()) throw ValidationError("sparse_solve: matrix is not square");
    matrix_ = a;
    matrix_.makeCompressed();
    lu_ = std::make_unique<Eigen::SparseLU<Matrix, Eigen::COLAMDOrdering<int>>>();
    lu_->analyzePattern(matrix_);
    lu_->factorize(matrix_);
    if constexpr (std::is_same_v<Scalar, Complex>)
      ++counters().complex_factorizations;
    else
      ++counters().real_factorizations;
    if (lu_->info() != Eigen::Success) {
      // Eigen reports the offending column at the end of its message.
      const std::string msg = lu_->lastErrorMessage();
      const auto digits = msg.find_last_not_of("0123456789");
      const std::string index = digits + 1 < msg.size() ? msg.substr(digits + 1) : "?";
      throw NumericError("sparse_solve: singular pivot at index " + index);
    }
  }

  Eigen::Index size() const { return matrix_.rows(); }

  Vec solve(const Vec& b) const {
    if (!lu_) throw NumericError("sparse_solve: solve before factorization");
    if (b.size() != matrix_.rows()) throw ValidationError("sparse_solve: right-hand side has wrong length");
    if constexpr (std::is_same_v<Scalar, Complex>) ++counters().complex_solves;
    Vec x = lu_->solve(b);
    const double bnorm = b.norm();
    for (int refine = 0; refine < 3; ++refine) {
      const Vec r = b - matrix_ * x;
      if (r.norm() <= 1e-10 * bnorm) return x;
      x += lu_->solve(r);
    }
    if ((b - matrix_ * x).norm() > 1e-10 * bnorm)
      throw NumericError("sparse_solve: residual above tolerance after refinement");
    return x;
  }

private:
  Matrix matrix_;
  std::unique_ptr<Eigen::SparseLU<Matrix, Eigen::COLAMDOrdering<int>>> lu_;
};

/// One-shot direct solve of A x = b.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sparse_solve(const SparseMatrixT<Scalar>& a,
                                                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b) {
  return SparseLUFactor<Scalar>(a).solve(b);
}

/// Sparse Cholesky M = R R^T of a symmetric positive definite matrix, exposing
/// products with R and R^T (R = P^T L for the fill-reducing permutation P).
class CholeskyFactor {
public:
  CholeskyFactor() = default;
  explicit CholeskyFactor(const SparseMatrix& m) { compute(m); }

  void compute(const SparseMatrix& m) {
    llt_ = std::make_unique<Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>>(m);
    ++counters().real_factorizations;
    if (llt_->info() != Eigen::Success) throw NumericError("Cholesky factorization failed: matrix not positive definite");
  }

  /// R z
  Vector apply_factor(const Vector& z) const {
    const Vector lz = llt_->matrixL() * z;
    return llt_->permutationPinv() * lz;
  }

  /// Solves M x = b.
  Vector solve(const Vector& b) const { return llt_->solve(b); }

  /// Solves R^T x = z.
  Vector solve_factor_transpose(const Vector& z) const {
    const Vector w = llt_->matrixU().solve(z);
    return llt_->permutationPinv() * w;
  }

private:
  std::unique_ptr<Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>> llt_;
};

}  // namespace rieszfield
