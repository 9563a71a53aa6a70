#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "rieszfield/error.hpp"
#include "rieszfield/mesh.hpp"
#include "rieszfield/numerics/random.hpp"
#include "rieszfield/numerics/sparse.hpp"
#include "rieszfield/numerics/special.hpp"
#include "rieszfield/spectral.hpp"

namespace rieszfield {

/// Dense all-pairs distance matrix, row-major, node_count x node_count.
struct DistanceMatrix {
  int node_count = 0;
  std::vector<double> data;

  double operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * static_cast<std::size_t>(node_count) + static_cast<std::size_t>(j)];
  }
};

/// Floyd-Warshall all-pairs shortest paths. O(n^3) time, O(n^2) memory.
inline DistanceMatrix floyd_warshall(const WeightedGraph& graph) {
  const auto n = static_cast<std::size_t>(graph.node_count);
  constexpr double inf = std::numeric_limits<double>::infinity();
  DistanceMatrix d{graph.node_count, std::vector<double>(n * n, inf)};
  for (std::size_t i = 0; i < n; ++i) d.data[i * n + i] = 0.0;
  for (const auto& e : graph.edges) {
    const auto u = static_cast<std::size_t>(e.u), v = static_cast<std::size_t>(e.v);
    d.data[u * n + v] = std::min(d.data[u * n + v], e.weight);
    d.data[v * n + u] = std::min(d.data[v * n + u], e.weight);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double* row_k = &d.data[k * n];
    for (std::size_t i = 0; i < n; ++i) {
      double* row_i = &d.data[i * n];
      const double dik = row_i[k];
      if (dik == inf) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const double via = dik + row_k[j];
        if (via < row_i[j]) row_i[j] = via;
      }
    }
  }
  return d;
}

/// Single-source Dijkstra distances.
inline std::vector<double> dijkstra(const std::vector<std::vector<std::pair<int, double>>>& adjacency, int source) {
  std::vector<double> dist(adjacency.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[static_cast<std::size_t>(source)] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [du, u] = heap.top();
    heap.pop();
    if (du > dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& [v, w] : adjacency[static_cast<std::size_t>(u)]) {
      const double alt = du + w;
      if (alt < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = alt;
        heap.emplace(alt, v);
      }
    }
  }
  return dist;
}

/// All-pairs shortest paths by Dijkstra from every source.
inline DistanceMatrix dijkstra_all_pairs(const WeightedGraph& graph) {
  const auto adjacency = graph.adjacency();
  const auto n = static_cast<std::size_t>(graph.node_count);
  DistanceMatrix d{graph.node_count, std::vector<double>(n * n)};
  for (std::size_t s = 0; s < n; ++s) {
    const auto row = dijkstra(adjacency, static_cast<int>(s));
    std::copy(row.begin(), row.end(), d.data.begin() + static_cast<std::ptrdiff_t>(s * n));
  }
  return d;
}

enum class ShortestPathAlgorithm { FloydWarshall, Dijkstra };

/// In-domain (geodesic) distances from every mesh vertex (rows) to every
/// triangle centroid (columns).
struct GeodesicTable {
  DenseMatrix distances;
};

/// Shortest paths over the edge graph extended by centroid nodes. Floyd-Warshall
/// by default; Dijkstra from each vertex gives identical distances and scales
/// better on large meshes.
inline GeodesicTable geodesic_table(const Mesh& mesh, ShortestPathAlgorithm algorithm = ShortestPathAlgorithm::FloydWarshall) {
  const WeightedGraph graph = mesh.edge_graph(true);
  if (!graph.connected()) throw ValidationError("geodesic_table: mesh graph is disconnected");
  const auto nv = static_cast<Eigen::Index>(mesh.vertex_count());
  const auto nt = static_cast<Eigen::Index>(mesh.triangle_count());
  GeodesicTable table{DenseMatrix(nv, nt)};
  if (algorithm == ShortestPathAlgorithm::FloydWarshall) {
    const auto all = floyd_warshall(graph);
    for (Eigen::Index i = 0; i < nv; ++i)
      for (Eigen::Index t = 0; t < nt; ++t) table.distances(i, t) = all(static_cast<int>(i), static_cast<int>(nv + t));
  } else {
    const auto adjacency = graph.adjacency();
    for (Eigen::Index i = 0; i < nv; ++i) {
      const auto row = dijkstra(adjacency, static_cast<int>(i));
      for (Eigen::Index t = 0; t < nt; ++t) table.distances(i, t) = row[static_cast<std::size_t>(nv + t)];
    }
  }
  return table;
}

/// Hurst parameter, constant or one value per mesh vertex; all values in (0,1).
class HurstField {
public:
  static HurstField constant(double h) {
    check(h);
    return HurstField(std::vector<double>{h}, true);
  }

  static HurstField per_vertex(std::vector<double> values) {
    for (double h : values) check(h);
    return HurstField(std::move(values), false);
  }

  static HurstField from_function(const Mesh& mesh, const std::function<double(Point2)>& fn) {
    std::vector<double> values;
    values.reserve(mesh.vertex_count());
    for (const auto& p : mesh.vertices()) values.push_back(fn(p));
    return per_vertex(std::move(values));
  }

  bool is_constant() const noexcept { return constant_; }

  double at(std::size_t vertex) const { return constant_ ? values_[0] : values_.at(vertex); }

  std::size_t size() const noexcept { return values_.size(); }

private:
  HurstField(std::vector<double> values, bool constant) : values_(std::move(values)), constant_(constant) {}

  static void check(double h) {
    if (!(h > 0.0 && h < 1.0)) throw ValidationError("Hurst values must lie in (0,1), got " + std::to_string(h));
  }

  std::vector<double> values_;
  bool constant_;
};

/// Normalizing constant c_s of the Riesz potential of order s = H + d/2,
///     c_s = Gamma((d-s)/2) / (pi^{d/2} 2^s Gamma(s/2)),  0 < s < d.
inline double riesz_constant(double hurst, int dimension) {
  const double d = dimension;
  const double s = hurst + d / 2.0;
  if (!(s > 0.0 && s < d))
    throw ValidationError("riesz_constant: order s = H + d/2 must lie in (0, d)");
  return gamma_fn((d - s) / 2.0) / (std::pow(std::numbers::pi, d / 2.0) * std::pow(2.0, s) * gamma_fn(s / 2.0));
}

/// Element noise weighting: W(triangle) ~ N(0, |triangle|) gives sqrt(area)
/// (SqrtArea); Area multiplies by |triangle| as in the displayed discretization.
enum class WeightMode { SqrtArea, Area };

/**
 * Discretized Riesz-potential field
 *
 *     X(x_i) = c_{H(x_i)+d/2} sum_m d_D(x_i, y_m)^{-d/2 + H(x_i)} w_m Z_m,
 *
 * one normal Z_m per triangle, y_m the centroid, d_D the geodesic distance.
 * The kernel matrix (vertices x triangles) is formed once.
 */
class RieszSampler {
public:
  RieszSampler(const Mesh& mesh, const GeodesicTable& table, const HurstField& hurst, WeightMode mode = WeightMode::SqrtArea,
               int dimension = 2) {
    const auto nv = static_cast<Eigen::Index>(mesh.vertex_count());
    const auto nt = static_cast<Eigen::Index>(mesh.triangle_count());
    if (table.distances.rows() != nv || table.distances.cols() != nt)
      throw ValidationError("geodesic table does not match the mesh");
    if (!hurst.is_constant() && hurst.size() != mesh.vertex_count())
      throw ValidationError("Hurst field needs one value per vertex");
    Vector weight(nt);
    for (Eigen::Index t = 0; t < nt; ++t) {
      const double area = mesh.element_area(static_cast<std::size_t>(t));
      weight[t] = mode == WeightMode::SqrtArea ? std::sqrt(area) : area;
    }
    kernel_.resize(nv, nt);
    for (Eigen::Index i = 0; i < nv; ++i) {
      const double h = hurst.at(static_cast<std::size_t>(i));
      const double c = riesz_constant(h, dimension);
      const double p = -dimension / 2.0 + h;
      for (Eigen::Index t = 0; t < nt; ++t) kernel_(i, t) = c * std::pow(table.distances(i, t), p) * weight[t];
    }
    constant_hurst_ = hurst.is_constant() ? hurst.at(0) : std::numeric_limits<double>::quiet_NaN();
    dimension_ = dimension;
  }

  /// Kernel matrix K with X = K Z.
  const DenseMatrix& kernel() const noexcept { return kernel_; }

  Vector field(const Vector& z) const {
    if (z.size() != kernel_.cols()) throw ValidationError("one normal variate per triangle is required");
    return kernel_ * z;
  }

  SamplePath sample(GaussianStream& stream) const {
    SamplePath path;
    path.seed = stream.seed();
    path.method = "riesz";
    path.spec.hurst = std::isnan(constant_hurst_) ? 0.5 : constant_hurst_;
    path.spec.dimension = dimension_;
    path.values = field(stream.draw(kernel_.cols()));
    return path;
  }

  /// K K^T: covariance of the nodal values.
  DenseMatrix covariance() const {
    DenseMatrix c = kernel_ * kernel_.transpose();
    return 0.5 * (c + c.transpose());
  }

private:
  DenseMatrix kernel_;
  double constant_hurst_ = 0.5;
  int dimension_ = 2;
};

inline SamplePath sample_riesz(const Mesh& mesh, const GeodesicTable& table, const HurstField& hurst, GaussianStream& stream,
                               WeightMode mode = WeightMode::SqrtArea) {
  return RieszSampler(mesh, table, hurst, mode).sample(stream);
}

inline DenseMatrix covariance_riesz(const Mesh& mesh, const GeodesicTable& table, const HurstField& hurst,
                                    WeightMode mode = WeightMode::SqrtArea) {
  return RieszSampler(mesh, table, hurst, mode).covariance();
}

}  // namespace rieszfield
