#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "rieszfield/error.hpp"
#include "rieszfield/mesh.hpp"
#include "rieszfield/numerics/eigen.hpp"
#include "rieszfield/numerics/sparse.hpp"

namespace rieszfield {

enum class BcKind { Dirichlet, Neumann, Robin };

/// Homogeneous boundary condition attached to one boundary marker. For Robin
/// conditions du/dn + gamma u = 0 with gamma >= 0.
struct BoundaryCondition {
  BcKind kind = BcKind::Neumann;
  double gamma = 0.0;

  static BoundaryCondition dirichlet() { return {BcKind::Dirichlet, 0.0}; }
  static BoundaryCondition neumann() { return {BcKind::Neumann, 0.0}; }
  static BoundaryCondition robin(double gamma) { return {BcKind::Robin, gamma}; }
};

using BoundaryConditionMap = std::map<int, BoundaryCondition>;

/// Same condition on every marker in `markers`.
inline BoundaryConditionMap uniform_bc(const std::vector<int>& markers, BoundaryCondition bc) {
  BoundaryConditionMap map;
  for (int m : markers) map[m] = bc;
  return map;
}

/**
 * Assembled P1 discretization of the negative Laplacian.
 *
 * `mass` and `stiffness` act on the free (non-Dirichlet) nodes only; vertex
 * `free_nodes[i]` owns row i. The pencil (stiffness, mass) represents the
 * discrete operator A = M^{-1} L.
 */
struct FemSystem {
  int dimension = 2;
  std::variant<IntervalMesh, Mesh> domain;
  std::vector<Point2> points;
  SparseMatrix mass;
  SparseMatrix stiffness;
  std::vector<int> free_nodes;
  std::vector<int> dirichlet_nodes;
  std::vector<int> free_index;  // vertex -> row, or -1 for Dirichlet vertices
  BoundaryConditionMap bc;
  bool pure_neumann = false;

  Eigen::Index size() const { return static_cast<Eigen::Index>(free_nodes.size()); }
  std::size_t vertex_count() const { return points.size(); }

  /// Domain measure (area in 2D, length in 1D).
  double measure() const {
    if (const auto* mesh = std::get_if<Mesh>(&domain)) return mesh->total_area();
    return std::get<IntervalMesh>(domain).length();
  }

  /// Free-node coefficients -> values at every vertex (Dirichlet vertices 0).
  Vector expand(const Vector& coefficients) const {
    if (coefficients.size() != size()) throw ValidationError("coefficient vector does not match free nodes");
    Vector full = Vector::Zero(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < free_nodes.size(); ++i)
      full[free_nodes[i]] = coefficients[static_cast<Eigen::Index>(i)];
    return full;
  }

  /// Values at every vertex -> free-node coefficients.
  Vector restrict_nodal(const Vector& nodal) const {
    Vector out(size());
    for (std::size_t i = 0; i < free_nodes.size(); ++i) out[static_cast<Eigen::Index>(i)] = nodal[free_nodes[i]];
    return out;
  }
};

namespace detail {

inline void check_bc_map(const std::vector<int>& markers, const BoundaryConditionMap& bc) {
  for (int m : markers)
    if (!bc.contains(m)) throw ValidationError("boundary marker " + std::to_string(m) + " has no boundary condition");
  for (const auto& [m, cond] : bc) {
    if (std::find(markers.begin(), markers.end(), m) == markers.end())
      throw ValidationError("boundary condition given for marker " + std::to_string(m) + " which is not in the mesh");
    if (cond.kind == BcKind::Robin && !(cond.gamma >= 0.0 && std::isfinite(cond.gamma)))
      throw ValidationError("Robin coefficient must be finite and non-negative");
  }
}

inline void finish_system(FemSystem& sys, const std::vector<Eigen::Triplet<double>>& mass,
                          const std::vector<Eigen::Triplet<double>>& stiffness, const std::set<int>& dirichlet,
                          bool has_robin) {
  const int n = static_cast<int>(sys.points.size());
  SparseMatrix full_mass(n, n), full_stiffness(n, n);
  full_mass.setFromTriplets(mass.begin(), mass.end());
  full_stiffness.setFromTriplets(stiffness.begin(), stiffness.end());
  sys.free_index.assign(static_cast<std::size_t>(n), -1);
  for (int v = 0; v < n; ++v) {
    if (dirichlet.contains(v)) {
      sys.dirichlet_nodes.push_back(v);
    } else {
      sys.free_index[static_cast<std::size_t>(v)] = static_cast<int>(sys.free_nodes.size());
      sys.free_nodes.push_back(v);
    }
  }
  if (sys.free_nodes.empty()) throw ValidationError("every node is a Dirichlet node; nothing to solve for");
  sys.mass = restrict_to(full_mass, sys.free_nodes);
  sys.stiffness = restrict_to(full_stiffness, sys.free_nodes);
  sys.mass.makeCompressed();
  sys.stiffness.makeCompressed();
  sys.pure_neumann = dirichlet.empty() && !has_robin;
}

}  // namespace detail

/// Local P1 stiffness of a triangle from its constant barycentric gradients.
inline std::array<std::array<double, 3>, 3> local_stiffness(const std::array<Point2, 3>& p) {
  const double twice_area = cross(p[1] - p[0], p[2] - p[0]);
  // grad(phi_i) = perp(edge opposite i) / (2|T|)
  std::array<Point2, 3> g;
  for (int i = 0; i < 3; ++i) {
    const Point2 e = p[static_cast<std::size_t>((i + 2) % 3)] - p[static_cast<std::size_t>((i + 1) % 3)];
    g[static_cast<std::size_t>(i)] = {-e.y / twice_area, e.x / twice_area};
  }
  const double area = 0.5 * twice_area;
  std::array<std::array<double, 3>, 3> k{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) k[i][j] = area * (g[i].x * g[j].x + g[i].y * g[j].y);
  return k;
}

/**
 * P1 assembly on a triangle mesh with exact integration:
 * local mass (|T|/12)[[2,1,1],[1,2,1],[1,1,2]], local stiffness from constant
 * gradients, Robin edges add (gamma |e|/6)[[2,1],[1,2]] to L. Dirichlet
 * vertices are eliminated.
 */
inline FemSystem assemble(const Mesh& mesh, const BoundaryConditionMap& bc) {
  detail::check_bc_map(mesh.markers(), bc);
  FemSystem sys;
  sys.dimension = 2;
  sys.domain = mesh;
  sys.points = mesh.vertices();
  sys.bc = bc;

  std::vector<Eigen::Triplet<double>> mass, stiffness;
  mass.reserve(mesh.triangle_count() * 9);
  stiffness.reserve(mesh.triangle_count() * 9);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const auto corners = mesh.corners(t);
    const double area = mesh.element_area(t);
    const auto k = local_stiffness(corners);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        mass.emplace_back(tri[i], tri[j], area * (i == j ? 2.0 : 1.0) / 12.0);
        stiffness.emplace_back(tri[i], tri[j], k[i][j]);
      }
  }

  std::set<int> dirichlet;
  bool has_robin = false;
  for (const auto& edge : mesh.boundary_edges()) {
    const auto& cond = bc.at(edge.marker);
    const int a = edge.vertices[0], b = edge.vertices[1];
    if (cond.kind == BcKind::Dirichlet) {
      dirichlet.insert(a);
      dirichlet.insert(b);
    } else if (cond.kind == BcKind::Robin && cond.gamma > 0.0) {
      has_robin = true;
      const double c = cond.gamma * distance(mesh.vertex(static_cast<std::size_t>(a)), mesh.vertex(static_cast<std::size_t>(b))) / 6.0;
      stiffness.emplace_back(a, a, 2.0 * c);
      stiffness.emplace_back(b, b, 2.0 * c);
      stiffness.emplace_back(a, b, c);
      stiffness.emplace_back(b, a, c);
    }
  }
  detail::finish_system(sys, mass, stiffness, dirichlet, has_robin);
  return sys;
}

/// One-dimensional P1 assembly: element mass (h/6)[[2,1],[1,2]] and
/// stiffness (1/h)[[1,-1],[-1,1]]; a Robin end point adds gamma to its
/// diagonal entry of L.
inline FemSystem assemble(const IntervalMesh& mesh, const BoundaryConditionMap& bc) {
  detail::check_bc_map({mesh.left_marker, mesh.right_marker}, bc);
  if (mesh.nodes.size() < 2) throw ValidationError("interval mesh needs at least two nodes");
  FemSystem sys;
  sys.dimension = 1;
  sys.domain = mesh;
  sys.bc = bc;
  for (double x : mesh.nodes) sys.points.push_back({x, 0.0});

  std::vector<Eigen::Triplet<double>> mass, stiffness;
  for (std::size_t e = 0; e + 1 < mesh.nodes.size(); ++e) {
    const double h = mesh.nodes[e + 1] - mesh.nodes[e];
    if (!(h > 0.0)) throw ValidationError("interval nodes must be strictly increasing");
    const int a = static_cast<int>(e), b = a + 1;
    mass.emplace_back(a, a, h / 3.0);
    mass.emplace_back(b, b, h / 3.0);
    mass.emplace_back(a, b, h / 6.0);
    mass.emplace_back(b, a, h / 6.0);
    stiffness.emplace_back(a, a, 1.0 / h);
    stiffness.emplace_back(b, b, 1.0 / h);
    stiffness.emplace_back(a, b, -1.0 / h);
    stiffness.emplace_back(b, a, -1.0 / h);
  }
  std::set<int> dirichlet;
  bool has_robin = false;
  const int last = static_cast<int>(mesh.nodes.size()) - 1;
  for (auto [node, marker] : {std::pair{0, mesh.left_marker}, std::pair{last, mesh.right_marker}}) {
    const auto& cond = bc.at(marker);
    if (cond.kind == BcKind::Dirichlet) {
      dirichlet.insert(node);
    } else if (cond.kind == BcKind::Robin && cond.gamma > 0.0) {
      has_robin = true;
      stiffness.emplace_back(node, node, cond.gamma);
    }
  }
  detail::finish_system(sys, mass, stiffness, dirichlet, has_robin);
  return sys;
}

/// Eigenpairs of the discrete Laplacian pencil restricted to free nodes.
inline EigenDecomposition laplace_eigenpairs(const FemSystem& system, std::optional<Eigen::Index> k = std::nullopt) {
  if (k && *k > system.size()) throw ValidationError("laplace_eigenpairs: more modes requested than free nodes");
  return generalized_eigen(system.stiffness, system.mass, k);
}

/// Barycentric weights of point `p` over vertices of the enclosing element.
struct NodalStencil {
  std::vector<int> vertices;
  std::vector<double> weights;
};

inline NodalStencil locate_stencil(const FemSystem& system, Point2 p) {
  if (const auto* mesh = std::get_if<Mesh>(&system.domain)) {
    const auto loc = mesh->locate(p, 1e-10);
    if (!loc)
      throw ValidationError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") lies outside the mesh");
    const auto& tri = mesh->triangles()[static_cast<std::size_t>(loc->triangle)];
    return {{tri[0], tri[1], tri[2]}, {loc->barycentric[0], loc->barycentric[1], loc->barycentric[2]}};
  }
  const auto& nodes = std::get<IntervalMesh>(system.domain).nodes;
  const double span = nodes.back() - nodes.front();
  if (p.x < nodes.front() - 1e-12 * span || p.x > nodes.back() + 1e-12 * span)
    throw ValidationError("point " + std::to_string(p.x) + " lies outside the interval");
  auto it = std::upper_bound(nodes.begin(), nodes.end(), p.x);
  std::size_t right = std::clamp<std::size_t>(static_cast<std::size_t>(it - nodes.begin()), 1, nodes.size() - 1);
  const std::size_t left = right - 1;
  const double t = (p.x - nodes[left]) / (nodes[right] - nodes[left]);
  return {{static_cast<int>(left), static_cast<int>(right)}, {1.0 - t, t}};
}

/// P1 interpolation of free-node coefficients at arbitrary points inside the
/// domain; Dirichlet vertices contribute zero.
inline std::vector<double> evaluate(const FemSystem& system, const Vector& coefficients, const std::vector<Point2>& points) {
  const Vector nodal = system.expand(coefficients);
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const auto stencil = locate_stencil(system, p);
    double v = 0.0;
    for (std::size_t i = 0; i < stencil.vertices.size(); ++i) v += stencil.weights[i] * nodal[stencil.vertices[i]];
    out.push_back(v);
  }
  return out;
}

/// Row vector e with e . coefficients == field value at p.
inline Vector point_functional(const FemSystem& system, Point2 p) {
  const auto stencil = locate_stencil(system, p);
  Vector e = Vector::Zero(system.size());
  for (std::size_t i = 0; i < stencil.vertices.size(); ++i) {
    const int row = system.free_index[static_cast<std::size_t>(stencil.vertices[i])];
    if (row >= 0) e[row] += stencil.weights[i];
  }
  return e;
}

}  // namespace rieszfield
