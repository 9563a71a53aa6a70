#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rieszfield/error.hpp"

namespace rieszfield {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point2 a, Point2 b) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }

using Triangle = std::array<int, 3>;

struct BoundaryEdge {
  std::array<int, 2> vertices{};
  int marker = 0;
};

/// Per-side markers used by generate_rectangle.
struct RectangleMarkers {
  int bottom = 1;
  int right = 2;
  int top = 3;
  int left = 4;
};

/// Undirected graph with positive edge weights, stored as an edge list.
struct WeightedGraph {
  struct Edge {
    int u = 0;
    int v = 0;
    double weight = 0.0;
  };
  int node_count = 0;
  std::vector<Edge> edges;

  std::vector<std::vector<std::pair<int, double>>> adjacency() const {
    std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(node_count));
    for (const auto& e : edges) {
      adj[static_cast<std::size_t>(e.u)].emplace_back(e.v, e.weight);
      adj[static_cast<std::size_t>(e.v)].emplace_back(e.u, e.weight);
    }
    return adj;
  }

  bool connected() const {
    if (node_count == 0) return true;
    std::vector<int> parent(static_cast<std::size_t>(node_count));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
      while (parent[static_cast<std::size_t>(a)] != a) {
        parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
        a = parent[static_cast<std::size_t>(a)];
      }
      return a;
    };
    int components = node_count;
    for (const auto& e : edges) {
      int a = find(e.u), b = find(e.v);
      if (a != b) {
        parent[static_cast<std::size_t>(a)] = b;
        --components;
      }
    }
    return components == 1;
  }
};

/// Location of a point inside a triangulation: owning triangle and its
/// barycentric coordinates with respect to the triangle's vertices.
struct PointLocation {
  int triangle = -1;
  std::array<double, 3> barycentric{};
};

/**
 * Triangulated bounded domain in the plane.
 *
 * A Mesh is only ever constructed through `Mesh::create` (or the loaders and
 * generators built on it), which validates the invariants:
 *   - every triangle has strictly positive signed area (clockwise input is
 *     reoriented and a warning recorded),
 *   - every listed boundary edge belongs to exactly one triangle, every
 *     interior edge to exactly two, and every edge with one triangle is listed,
 *   - the triangulation is connected and every vertex belongs to a triangle.
 * After construction the mesh is immutable.
 */
class Mesh {
public:
  static Mesh create(std::vector<Point2> vertices, std::vector<Triangle> triangles,
                     std::vector<BoundaryEdge> boundary) {
    Mesh mesh;
    mesh.vertices_ = std::move(vertices);
    mesh.triangles_ = std::move(triangles);
    mesh.boundary_ = std::move(boundary);
    mesh.validate();
    return mesh;
  }

  /// Builds a mesh from vertices and triangles alone. Boundary edges are the
  /// edges owned by a single triangle and all receive `marker`. Vertices not
  /// referenced by any triangle are dropped and indices compacted.
  static Mesh from_triangles(const std::vector<Point2>& vertices, const std::vector<Triangle>& triangles,
                             int marker = 1) {
    std::vector<int> remap(vertices.size(), -1);
    std::vector<Point2> used;
    std::vector<Triangle> tris;
    tris.reserve(triangles.size());
    for (const auto& t : triangles) {
      Triangle r{};
      for (int c = 0; c < 3; ++c) {
        if (t[c] < 0 || static_cast<std::size_t>(t[c]) >= vertices.size())
          throw ValidationError("dangling index " + std::to_string(t[c]));
        auto& slot = remap[static_cast<std::size_t>(t[c])];
        if (slot < 0) {
          slot = static_cast<int>(used.size());
          used.push_back(vertices[static_cast<std::size_t>(t[c])]);
        }
        r[c] = slot;
      }
      tris.push_back(r);
    }
    std::map<std::pair<int, int>, int> count;
    for (const auto& t : tris)
      for (int c = 0; c < 3; ++c) ++count[edge_key(t[c], t[(c + 1) % 3])];
    std::vector<BoundaryEdge> boundary;
    for (const auto& [key, n] : count)
      if (n == 1) boundary.push_back({{key.first, key.second}, marker});
    return create(std::move(used), std::move(tris), std::move(boundary));
  }

  const std::vector<Point2>& vertices() const noexcept { return vertices_; }
  const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const noexcept { return boundary_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t triangle_count() const noexcept { return triangles_.size(); }

  Point2 vertex(std::size_t i) const { return vertices_.at(i); }

  std::array<Point2, 3> corners(std::size_t i) const {
    const auto& t = triangles_.at(i);
    return {vertices_[static_cast<std::size_t>(t[0])], vertices_[static_cast<std::size_t>(t[1])],
            vertices_[static_cast<std::size_t>(t[2])]};
  }

  double element_area(std::size_t i) const {
    if (i >= triangles_.size()) throw ValidationError("triangle index " + std::to_string(i) + " out of range");
    auto [a, b, c] = corners(i);
    return 0.5 * std::abs(cross(b - a, c - a));
  }

  Point2 centroid(std::size_t i) const {
    if (i >= triangles_.size()) throw ValidationError("triangle index " + std::to_string(i) + " out of range");
    auto [a, b, c] = corners(i);
    return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
  }

  double total_area() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < triangles_.size(); ++i) sum += element_area(i);
    return sum;
  }

  std::pair<Point2, Point2> bounding_box() const {
    Point2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Point2 hi{-lo.x, -lo.y};
    for (const auto& p : vertices_) {
      lo.x = std::min(lo.x, p.x);
      lo.y = std::min(lo.y, p.y);
      hi.x = std::max(hi.x, p.x);
      hi.y = std::max(hi.y, p.y);
    }
    return {lo, hi};
  }

  /// Smallest ordered list of distinct markers present on the boundary.
  std::vector<int> markers() const {
    std::vector<int> out;
    for (const auto& e : boundary_) out.push_back(e.marker);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Brute-force point location. Points on shared edges resolve to the first
  /// triangle found. Returns nullopt when the point lies outside every triangle.
  std::optional<PointLocation> locate(Point2 p, double tol = 1e-12) const {
    for (std::size_t i = 0; i < triangles_.size(); ++i) {
      auto [a, b, c] = corners(i);
      const double det = cross(b - a, c - a);
      const double l1 = cross(p - a, c - a) / det;
      const double l2 = cross(b - a, p - a) / det;
      const double l0 = 1.0 - l1 - l2;
      if (l0 >= -tol && l1 >= -tol && l2 >= -tol)
        return PointLocation{static_cast<int>(i), {l0, l1, l2}};
    }
    return std::nullopt;
  }

  /// Edge graph over the mesh vertices, optionally with one extra node per
  /// triangle (index vertex_count() + t) joined to that triangle's corners.
  WeightedGraph edge_graph(bool include_centroids) const {
    WeightedGraph g;
    g.node_count = static_cast<int>(vertices_.size() + (include_centroids ? triangles_.size() : 0));
    for (const auto& [a, b] : unique_edges())
      g.edges.push_back({a, b, distance(vertices_[static_cast<std::size_t>(a)], vertices_[static_cast<std::size_t>(b)])});
    if (include_centroids) {
      for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const int node = static_cast<int>(vertices_.size() + t);
        const Point2 c = centroid(t);
        for (int v : triangles_[t])
          g.edges.push_back({v, node, distance(vertices_[static_cast<std::size_t>(v)], c)});
      }
    }
    return g;
  }

  /// Interior and boundary edges, each once, as (lower, higher) vertex pairs.
  std::vector<std::pair<int, int>> unique_edges() const {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(triangles_.size() * 3);
    for (const auto& t : triangles_)
      for (int c = 0; c < 3; ++c) edges.push_back(edge_key(t[c], t[(c + 1) % 3]));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
  }

  /// Same connectivity, coordinates multiplied by `factor`.
  Mesh scaled(double factor) const {
    if (!(factor > 0.0)) throw ValidationError("scale factor must be positive");
    Mesh out = *this;
    for (auto& p : out.vertices_) p = factor * p;
    return out;
  }

  /// Serializes in the plain-text mesh format accepted by load_mesh.
  std::string to_text() const {
    std::string out;
    char buf[96];
    out += "vertices " + std::to_string(vertices_.size()) + "\n";
    for (const auto& p : vertices_) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x, p.y);
      out += buf;
    }
    out += "triangles " + std::to_string(triangles_.size()) + "\n";
    for (const auto& t : triangles_)
      out += std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
    out += "boundary " + std::to_string(boundary_.size()) + "\n";
    for (const auto& e : boundary_)
      out += std::to_string(e.vertices[0]) + " " + std::to_string(e.vertices[1]) + " " + std::to_string(e.marker) + "\n";
    return out;
  }

  static std::pair<int, int> edge_key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

private:
  Mesh() = default;

  void validate() {
    const int nv = static_cast<int>(vertices_.size());
    if (triangles_.empty()) throw ValidationError("mesh has no triangles");
    for (const auto& p : vertices_)
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ValidationError("non-finite vertex coordinate");

    for (std::size_t i = 0; i < triangles_.size(); ++i) {
      auto& t = triangles_[i];
      for (int v : t)
        if (v < 0 || v >= nv)
          throw ValidationError("dangling index " + std::to_string(v) + " in triangle " + std::to_string(i));
      if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
        throw ValidationError("repeated vertex in triangle " + std::to_string(i));
      auto [a, b, c] = corners(i);
      const double signed_area = 0.5 * cross(b - a, c - a);
      const double scale = std::max({distance(a, b), distance(b, c), distance(c, a)});
      if (std::abs(signed_area) <= 1e-14 * scale * scale)
        throw ValidationError("degenerate (zero-area) triangle " + std::to_string(i));
      if (signed_area < 0) {
        std::swap(t[1], t[2]);
        warnings_.push_back("triangle " + std::to_string(i) + " was clockwise; reoriented");
      }
    }

    std::map<std::pair<int, int>, int> owners;
    for (const auto& t : triangles_)
      for (int c = 0; c < 3; ++c) ++owners[edge_key(t[c], t[(c + 1) % 3])];
    for (const auto& [key, n] : owners)
      if (n > 2)
        throw ValidationError("non-manifold edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                              ") shared by " + std::to_string(n) + " triangles");

    std::map<std::pair<int, int>, int> listed;
    for (std::size_t i = 0; i < boundary_.size(); ++i) {
      const auto& e = boundary_[i];
      for (int v : e.vertices)
        if (v < 0 || v >= nv)
          throw ValidationError("dangling index " + std::to_string(v) + " in boundary edge " + std::to_string(i));
      if (e.marker < 0) throw ValidationError("negative marker on boundary edge " + std::to_string(i));
      const auto key = edge_key(e.vertices[0], e.vertices[1]);
      auto it = owners.find(key);
      if (it == owners.end() || it->second != 1)
        throw ValidationError("boundary edge " + std::to_string(i) + " does not belong to exactly one triangle");
      if (++listed[key] > 1) throw ValidationError("boundary edge " + std::to_string(i) + " listed twice");
    }
    for (const auto& [key, n] : owners)
      if (n == 1 && !listed.contains(key))
        throw ValidationError("boundary edge (" + std::to_string(key.first) + "," + std::to_string(key.second) +
                              ") carries no marker");

    std::vector<int> parent(static_cast<std::size_t>(nv));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
      while (parent[static_cast<std::size_t>(a)] != a) a = parent[static_cast<std::size_t>(a)] =
                                                            parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      return a;
    };
    std::vector<char> used(static_cast<std::size_t>(nv), 0);
    for (const auto& t : triangles_) {
      for (int v : t) used[static_cast<std::size_t>(v)] = 1;
      parent[static_cast<std::size_t>(find(t[0]))] = find(t[1]);
      parent[static_cast<std::size_t>(find(t[1]))] = find(t[2]);
    }
    for (int v = 0; v < nv; ++v)
      if (!used[static_cast<std::size_t>(v)]) throw ValidationError("vertex " + std::to_string(v) + " belongs to no triangle");
    const int root = find(0);
    for (int v = 1; v < nv; ++v)
      if (find(v) != root) throw ValidationError("mesh is not connected (vertex " + std::to_string(v) + ")");
  }

  std::vector<Point2> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<BoundaryEdge> boundary_;
  std::vector<std::string> warnings_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses the plain-text mesh format:
///
///     # comment
///     vertices <n>
///     <x> <y>
///     triangles <m>
///     <i> <j> <k>
///     boundary <b>
///     <i> <j> <marker>
///
/// Blank lines and lines starting with '#' are ignored.
inline Mesh load_mesh(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    ++lineno;
    auto line = detail::trim(text.substr(pos, nl - pos));
    if (!line.empty() && line.front() != '#') lines.emplace_back(lineno, std::string(line));
    pos = nl + 1;
  }

  std::size_t cursor = 0;
  auto header = [&](const std::string& keyword) -> std::size_t {
    if (cursor >= lines.size())
      throw ParseError(lineno, "expected '" + keyword + " <count>' before end of input");
    const auto& [no, line] = lines[cursor++];
    std::istringstream in(line);
    std::string word;
    long long count = -1;
    std::string extra;
    if (!(in >> word) || word != keyword || !(in >> count) || count < 0 || (in >> extra))
      throw ParseError(no, "expected '" + keyword + " <count>'");
    return static_cast<std::size_t>(count);
  };
  auto record = [&](const std::string& what) -> std::pair<std::size_t, std::istringstream> {
    if (cursor >= lines.size()) throw ParseError(lineno, "unexpected end of input while reading " + what);
    const auto& [no, line] = lines[cursor++];
    return {no, std::istringstream(line)};
  };
  auto finish = [](std::istringstream& in, std::size_t no, const std::string& what) {
    std::string extra;
    if (in.fail() || (in >> extra)) throw ParseError(no, "malformed " + what + " record");
  };

  std::vector<Point2> vertices(header("vertices"));
  for (auto& p : vertices) {
    auto [no, in] = record("vertices");
    in >> p.x >> p.y;
    finish(in, no, "vertex");
  }
  std::vector<Triangle> triangles(header("triangles"));
  for (auto& t : triangles) {
    auto [no, in] = record("triangles");
    in >> t[0] >> t[1] >> t[2];
    finish(in, no, "triangle");
  }
  std::vector<BoundaryEdge> boundary(header("boundary"));
  for (auto& e : boundary) {
    auto [no, in] = record("boundary");
    in >> e.vertices[0] >> e.vertices[1] >> e.marker;
    finish(in, no, "boundary");
  }
  if (cursor != lines.size()) throw ParseError(lines[cursor].first, "trailing content after boundary section");
  return Mesh::create(std::move(vertices), std::move(triangles), std::move(boundary));
}

/// Regular nx-by-ny grid on [0,width]x[0,height], each cell split along its
/// southwest-northeast diagonal. Vertex (i,j) has index j*(nx+1)+i.
inline Mesh generate_rectangle(int nx, int ny, double width, double height, RectangleMarkers markers = {}) {
  if (nx < 1 || ny < 1) throw ValidationError("cell counts must be at least 1");
  if (!(width > 0.0) || !(height > 0.0)) throw ValidationError("rectangle extents must be positive");
  const int stride = nx + 1;
  std::vector<Point2> vertices;
  vertices.reserve(static_cast<std::size_t>(stride * (ny + 1)));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) vertices.push_back({width * i / nx, height * j / ny});
  std::vector<Triangle> triangles;
  triangles.reserve(static_cast<std::size_t>(2 * nx * ny));
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = j * stride + i, v10 = v00 + 1, v01 = v00 + stride, v11 = v01 + 1;
      triangles.push_back({v00, v10, v11});
      triangles.push_back({v00, v11, v01});
    }
  }
  std::vector<BoundaryEdge> boundary;
  for (int i = 0; i < nx; ++i) boundary.push_back({{i, i + 1}, markers.bottom});
  for (int j = 0; j < ny; ++j) boundary.push_back({{j * stride + nx, (j + 1) * stride + nx}, markers.right});
  for (int i = nx; i > 0; --i) boundary.push_back({{ny * stride + i, ny * stride + i - 1}, markers.top});
  for (int j = ny; j > 0; --j) boundary.push_back({{j * stride, (j - 1) * stride}, markers.left});
  return Mesh::create(std::move(vertices), std::move(triangles), std::move(boundary));
}

/// Interval [0, length] split into `cells` equal elements; used for the
/// one-dimensional finite-element path.
struct IntervalMesh {
  std::vector<double> nodes;
  int left_marker = 1;
  int right_marker = 2;

  std::size_t vertex_count() const noexcept { return nodes.size(); }
  double length() const { return nodes.back() - nodes.front(); }
};

inline IntervalMesh generate_interval(int cells, double length, int left_marker = 1, int right_marker = 2) {
  if (cells < 1) throw ValidationError("interval needs at least one cell");
  if (!(length > 0.0)) throw ValidationError("interval length must be positive");
  if (left_marker == right_marker) throw ValidationError("interval end markers must differ");
  IntervalMesh mesh;
  mesh.left_marker = left_marker;
  mesh.right_marker = right_marker;
  mesh.nodes.resize(static_cast<std::size_t>(cells) + 1);
  for (int i = 0; i <= cells; ++i) mesh.nodes[static_cast<std::size_t>(i)] = length * i / cells;
  return mesh;
}

/// 64-bit FNV-1a digest, used to fingerprint mesh content in run manifests.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace rieszfield
