#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rieszfield/error.hpp"
#include "rieszfield/mesh.hpp"
#include "rieszfield/numerics/fft.hpp"
#include "rieszfield/numerics/sparse.hpp"
#include "rieszfield/spectral.hpp"

namespace rieszfield {

/// Regular grid with nodes at (x0 + i dx, y0 + j dy), 0 <= i < nx, 0 <= j < ny.
/// For a domain of width W sampled by nx points dx = W / nx, so the last
/// column sits one spacing short of the far edge (periodic convention).
struct Grid {
  int nx = 0;
  int ny = 0;
  double x0 = 0.0;
  double y0 = 0.0;
  double dx = 1.0;
  double dy = 1.0;

  Point2 point(int i, int j) const { return {x0 + i * dx, y0 + j * dy}; }

  static Grid covering(const Mesh& mesh, int nx, int ny) {
    if (mesh.vertex_count() == 0) throw ValidationError("grid over an empty mesh");
    if (nx < 1 || ny < 1 || !is_power_of_two(static_cast<std::size_t>(nx)) || !is_power_of_two(static_cast<std::size_t>(ny)))
      throw ValidationError("grid dimensions must be powers of two");
    const auto [lo, hi] = mesh.bounding_box();
    return {nx, ny, lo.x, lo.y, (hi.x - lo.x) / nx, (hi.y - lo.y) / ny};
  }
};

/// Grid values (ny rows by nx columns) with a coverage mask; points outside
/// the domain hold 0 and mask false.
struct GridField {
  Grid grid;
  DenseMatrix values;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;

  double coverage() const { return mask.cast<double>().mean(); }
};

/**
 * P1 interpolation from mesh vertices to a regular grid. Point location is a
 * brute-force barycentric scan done once; each field then costs a few
 * multiply-adds per grid point.
 */
class GridInterpolator {
public:
  GridInterpolator(const Mesh& mesh, int nx, int ny) : grid_(Grid::covering(mesh, nx, ny)), vertex_count_(mesh.vertex_count()) {
    const auto [lo, hi] = mesh.bounding_box();
    const double tol = 1e-10 * std::max(hi.x - lo.x, hi.y - lo.y);
    stencils_.resize(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const auto loc = mesh.locate(grid_.point(i, j), tol);
        if (!loc) continue;
        const auto& t = mesh.triangles()[static_cast<std::size_t>(loc->triangle)];
        auto& s = stencils_[index(i, j)];
        s.inside = true;
        for (int c = 0; c < 3; ++c) {
          s.vertex[c] = t[c];
          s.weight[c] = loc->barycentric[c];
        }
      }
  }

  const Grid& grid() const noexcept { return grid_; }

  GridField apply(const Vector& nodal) const {
    if (static_cast<std::size_t>(nodal.size()) != vertex_count_)
      throw ValidationError("nodal vector does not match the mesh");
    GridField out{grid_, DenseMatrix::Zero(grid_.ny, grid_.nx),
                  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(grid_.ny, grid_.nx, false)};
    for (int j = 0; j < grid_.ny; ++j)
      for (int i = 0; i < grid_.nx; ++i) {
        const auto& s = stencils_[index(i, j)];
        if (!s.inside) continue;
        out.mask(j, i) = true;
        out.values(j, i) = s.weight[0] * nodal[s.vertex[0]] + s.weight[1] * nodal[s.vertex[1]] + s.weight[2] * nodal[s.vertex[2]];
      }
    return out;
  }

private:
  struct Stencil {
    bool inside = false;
    int vertex[3] = {0, 0, 0};
    double weight[3] = {0.0, 0.0, 0.0};
  };

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(grid_.nx) + static_cast<std::size_t>(i);
  }

  Grid grid_;
  std::size_t vertex_count_;
  std::vector<Stencil> stencils_;
};

inline GridField interpolate_to_grid(const Mesh& mesh, const SamplePath& path, int nx, int ny) {
  return GridInterpolator(mesh, nx, ny).apply(path.values);
}

/// FFT bin index -> signed frequency in cycles per unit length.
inline double fft_frequency(int k, int n, double spacing) {
  const int signed_k = k < (n + 1) / 2 ? k : k - n;
  return signed_k / (n * spacing);
}

/// Separable cosine (Hann) taper, optional apodization before transforming.
inline DenseMatrix hann_taper(int ny, int nx) {
  auto w = [](int k, int n) { return 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / n); };
  DenseMatrix t(ny, nx);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) t(j, i) = w(j, ny) * w(i, nx);
  return t;
}

/// Realization-averaged |DFT|^2 of grid fields; power(j, i) belongs to
/// frequencies (fx[i], fy[j]).
struct Periodogram2D {
  int nx = 0;
  int ny = 0;
  std::vector<double> fx;
  std::vector<double> fy;
  DenseMatrix power;
  std::size_t realizations = 0;
};

/// Accumulates realizations one at a time so large Monte-Carlo runs need not
/// hold every grid in memory. Adding in a fixed order gives a deterministic sum.
class PeriodogramAccumulator {
public:
  explicit PeriodogramAccumulator(bool taper = false) : taper_(taper) {}

  void add(const DenseMatrix& values, const Grid& grid) {
    if (count_ == 0) {
      grid_ = grid;
      sum_ = DenseMatrix::Zero(values.rows(), values.cols());
      if (taper_) window_ = hann_taper(static_cast<int>(values.rows()), static_cast<int>(values.cols()));
    } else if (values.rows() != sum_.rows() || values.cols() != sum_.cols()) {
      throw ValidationError("periodogram: grid dimensions differ between realizations");
    }
    ComplexGrid g = (taper_ ? DenseMatrix(values.cwiseProduct(window_)) : values).cast<std::complex<double>>();
    g = dft_2d(std::move(g), Direction::Forward);
    sum_ += g.cwiseAbs2();
    ++count_;
  }

  void add(const GridField& field) { add(field.values, field.grid); }

  Periodogram2D result() const {
    if (count_ == 0) throw ValidationError("periodogram needs at least one realization");
    Periodogram2D p;
    p.ny = static_cast<int>(sum_.rows());
    p.nx = static_cast<int>(sum_.cols());
    p.power = sum_ / static_cast<double>(count_);
    p.realizations = count_;
    for (int i = 0; i < p.nx; ++i) p.fx.push_back(fft_frequency(i, p.nx, grid_.dx));
    for (int j = 0; j < p.ny; ++j) p.fy.push_back(fft_frequency(j, p.ny, grid_.dy));
    return p;
  }

private:
  bool taper_;
  Grid grid_;
  DenseMatrix sum_;
  DenseMatrix window_;
  std::size_t count_ = 0;
};

inline Periodogram2D periodogram(const std::vector<GridField>& fields, bool taper = false) {
  PeriodogramAccumulator acc(taper);
  for (const auto& f : fields) acc.add(f);
  return acc.result();
}

/// Sampled curve (f, log10 S(f)).
struct Curve {
  std::vector<double> frequency;
  std::vector<double> log10_value;
  std::vector<std::size_t> counts;
};

/**
 * Azimuthal mean of log10 PSD in equal-width bins of |xi| covering
 * (0, f_max], f_max being the smaller Nyquist frequency of the two axes.
 * Bin centers are reported; the DC bin, frequencies beyond f_max and
 * non-positive power entries are skipped, as are empty bins.
 */
inline Curve radial_average(const Periodogram2D& p, int n_bins) {
  if (n_bins < 4) throw ValidationError("radial_average: at least 4 bins are required");
  const double nyq_x = std::abs(p.fx.size() > 1 ? p.fx[p.fx.size() / 2] : 0.0);
  const double nyq_y = std::abs(p.fy.size() > 1 ? p.fy[p.fy.size() / 2] : 0.0);
  const double f_max = std::min(nyq_x, nyq_y);
  if (!(f_max > 0.0)) throw ValidationError("radial_average: periodogram has no non-zero frequencies");
  const double width = f_max / n_bins;
  std::vector<double> sum(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(n_bins), 0);
  for (int j = 0; j < p.ny; ++j)
    for (int i = 0; i < p.nx; ++i) {
      if (i == 0 && j == 0) continue;
      const double r = std::hypot(p.fx[static_cast<std::size_t>(i)], p.fy[static_cast<std::size_t>(j)]);
      if (r > f_max * (1.0 + 1e-12) || r <= 0.0) continue;
      const double s = p.power(j, i);
      if (!(s > 0.0)) continue;
      const auto b = std::min(static_cast<std::size_t>(r / width), static_cast<std::size_t>(n_bins - 1));
      sum[b] += std::log10(s);
      ++count[b];
    }
  Curve c;
  for (std::size_t b = 0; b < sum.size(); ++b) {
    if (count[b] == 0) continue;
    c.frequency.push_back((static_cast<double>(b) + 0.5) * width);
    c.log10_value.push_back(sum[b] / static_cast<double>(count[b]));
    c.counts.push_back(count[b]);
  }
  return c;
}

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // root-mean-square residual in log10 units
  double slope_stderr = 0.0;
  std::size_t points = 0;
};

/// Least squares of log10 S against log10 f over f_min <= f <= f_max.
inline PowerLawFit fit_power_law(const Curve& curve, double f_min,
                                 double f_max = std::numeric_limits<double>::infinity()) {
  if (curve.frequency.size() != curve.log10_value.size()) throw ValidationError("fit_power_law: malformed curve");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < curve.frequency.size(); ++i) {
    const double f = curve.frequency[i];
    if (f < f_min || f > f_max || !(f > 0.0)) continue;
    xs.push_back(std::log10(f));
    ys.push_back(curve.log10_value[i]);
  }
  if (xs.size() < 5) throw ValidationError("fit_power_law: fewer than 5 points above the cutoff");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("fit_power_law: frequencies are not distinct");
  PowerLawFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    rss += e * e;
  }
  fit.residual = std::sqrt(rss / n);
  fit.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
  fit.points = xs.size();
  return fit;
}

/// Fit over the central `decades` decades of the curve's frequency range, in
/// log10 f.
inline PowerLawFit fit_middle_decades(const Curve& curve, double decades) {
  if (curve.frequency.empty()) throw ValidationError("fit_middle_decades: empty curve");
  const auto [lo, hi] = std::minmax_element(curve.frequency.begin(), curve.frequency.end());
  const double center = 0.5 * (std::log10(*lo) + std::log10(*hi));
  return fit_power_law(curve, std::pow(10.0, center - 0.5 * decades), std::pow(10.0, center + 0.5 * decades));
}

/// One-sided periodogram of real series: |DFT_k|^2 averaged over series, for
/// k = 1 .. n/2, as a curve over f = k / n (cycles per sample).
inline Curve periodogram_1d(const std::vector<std::vector<double>>& series) {
  if (series.empty()) throw ValidationError("periodogram needs at least one realization");
  const std::size_t n = series.front().size();
  std::vector<double> sum(n / 2 + 1, 0.0);
  for (const auto& s : series) {
    if (s.size() != n) throw ValidationError("periodogram: series lengths differ");
    std::vector<std::complex<double>> a(s.begin(), s.end());
    a = dft_1d(std::move(a), Direction::Forward);
    for (std::size_t k = 0; k <= n / 2; ++k) sum[k] += std::norm(a[k]);
  }
  Curve c;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double s = sum[k] / static_cast<double>(series.size());
    if (!(s > 0.0)) continue;
    c.frequency.push_back(static_cast<double>(k) / static_cast<double>(n));
    c.log10_value.push_back(std::log10(s));
    c.counts.push_back(series.size());
  }
  return c;
}

struct CovarianceEstimate {
  Vector covariance;
  Vector standard_error;
  std::size_t paths = 0;
  bool degenerate = false;  // zero sample variance at the reference vertex
};

/// Unbiased sample covariance of X(ref) with X(v) for every vertex v. The
/// standard error of each entry uses the fourth-moment estimate
/// sqrt((mean(d_ref^2 d_v^2) - c^2) / R).
inline CovarianceEstimate sample_covariance_at(const std::vector<SamplePath>& paths, Eigen::Index ref_vertex) {
  if (paths.size() < 100) throw ValidationError("sample_covariance_at: at least 100 paths are required");
  const Eigen::Index n = paths.front().values.size();
  for (const auto& p : paths)
    if (p.values.size() != n) throw ValidationError("sample_covariance_at: paths come from different meshes");
  if (ref_vertex < 0 || ref_vertex >= n) throw ValidationError("sample_covariance_at: reference vertex out of range");
  const auto r = static_cast<double>(paths.size());
  Vector mean = Vector::Zero(n);
  for (const auto& p : paths) mean += p.values;
  mean /= r;
  Vector cov = Vector::Zero(n), fourth = Vector::Zero(n);
  for (const auto& p : paths) {
    const Vector d = p.values - mean;
    const Vector prod = d * d[ref_vertex];
    cov += prod;
    fourth += prod.cwiseAbs2();
  }
  CovarianceEstimate est;
  est.paths = paths.size();
  est.covariance = cov / (r - 1.0);
  const Vector biased = cov / r;
  est.standard_error = ((fourth / r - biased.cwiseAbs2()).cwiseMax(0.0) / r).cwiseSqrt();
  est.degenerate = !(est.covariance[ref_vertex] > 0.0);
  return est;
}

}  // namespace rieszfield
