#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "rieszfield/error.hpp"

namespace rieszfield {

enum class Direction { Forward, Inverse };

/// Row-major complex grid, rows x cols.
using ComplexGrid = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace detail {

// FFTW's planner is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline void run_fftw(int rank, const int* dims, std::complex<double>* data, Direction dir) {
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft(rank, dims, reinterpret_cast<fftw_complex*>(data), reinterpret_cast<fftw_complex*>(data),
                         dir == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  if (plan == nullptr) throw NumericError("FFTW failed to create a plan");
  fftw_execute(plan);
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace detail

/// Unnormalized forward transform (X_k = sum_n x_n e^{-2 pi i kn/N}); the
/// inverse carries the 1/N factor so that inverse(forward(x)) == x.
inline std::vector<std::complex<double>> dft_1d(std::vector<std::complex<double>> data, Direction dir) {
  if (!is_power_of_two(data.size())) throw ValidationError("dft_1d: length must be a power of two");
  const int n = static_cast<int>(data.size());
  detail::run_fftw(1, &n, data.data(), dir);
  if (dir == Direction::Inverse)
    for (auto& v : data) v /= static_cast<double>(n);
  return data;
}

inline ComplexGrid dft_2d(ComplexGrid grid, Direction dir) {
  if (!is_power_of_two(static_cast<std::size_t>(grid.rows())) || !is_power_of_two(static_cast<std::size_t>(grid.cols())))
    throw ValidationError("dft_2d: dimensions must be powers of two");
  const int dims[2] = {static_cast<int>(grid.rows()), static_cast<int>(grid.cols())};
  detail::run_fftw(2, dims, grid.data(), dir);
  if (dir == Direction::Inverse) grid /= static_cast<double>(grid.size());
  return grid;
}

}  // namespace rieszfield
