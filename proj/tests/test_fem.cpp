#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "rieszfield/fem.hpp"

using namespace rieszfield;

namespace {

constexpr double kPi = std::numbers::pi;

const BoundaryConditionMap kAllDirichlet = uniform_bc({1, 2, 3, 4}, BoundaryCondition::dirichlet());
const BoundaryConditionMap kAllNeumann = uniform_bc({1, 2, 3, 4}, BoundaryCondition::neumann());

Mesh unit_triangle() { return Mesh::from_triangles({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, 1); }

double min_eigenvalue(const SparseMatrix& a) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es{DenseMatrix(a)};
  return es.eigenvalues()[0];
}

}  // namespace

TEST(Assemble, SingleTriangleMass) {
  const auto sys = assemble(unit_triangle(), {{1, BoundaryCondition::neumann()}});
  DenseMatrix expected(3, 3);
  expected << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  expected /= 24.0;
  EXPECT_LE((DenseMatrix(sys.mass) - expected).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Assemble, SingleTriangleStiffnessRowSums) {
  const auto sys = assemble(unit_triangle(), {{1, BoundaryCondition::neumann()}});
  const Vector rows = DenseMatrix(sys.stiffness).rowwise().sum();
  EXPECT_LE(rows.cwiseAbs().maxCoeff(), 1e-14);
  // Gradients of barycentric functions on the unit right triangle.
  DenseMatrix expected(3, 3);
  expected << 1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5;
  EXPECT_LE((DenseMatrix(sys.stiffness) - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_TRUE(sys.pure_neumann);
}

TEST(Assemble, DirichletEliminationCount) {
  const auto sys = assemble(generate_rectangle(2, 2, 1, 1), kAllDirichlet);
  ASSERT_EQ(sys.size(), 1);
  EXPECT_EQ(sys.free_nodes, std::vector<int>{4});
  EXPECT_EQ(sys.dirichlet_nodes.size(), 8u);
}

TEST(Assemble, UnmappedMarkerIsRejected) {
  EXPECT_THROW(assemble(generate_rectangle(2, 2, 1, 1), {{1, BoundaryCondition::dirichlet()}}), ValidationError);
  auto extra = kAllDirichlet;
  extra[9] = BoundaryCondition::neumann();
  EXPECT_THROW(assemble(generate_rectangle(2, 2, 1, 1), extra), ValidationError);
}

TEST(Assemble, RobinEdgeTerm) {
  // One cell; Robin only on the bottom edge (0,0)-(1,0).
  BoundaryConditionMap bc = kAllNeumann;
  bc[1] = BoundaryCondition::robin(3.0);
  const Mesh mesh = generate_rectangle(1, 1, 1, 1);
  const auto robin = assemble(mesh, bc);
  const auto neumann = assemble(mesh, kAllNeumann);
  const DenseMatrix diff = DenseMatrix(robin.stiffness) - DenseMatrix(neumann.stiffness);
  // Vertices 0 and 1 form the bottom edge of length 1.
  EXPECT_NEAR(diff(0, 0), 3.0 * 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(diff(0, 1), 3.0 / 6.0, 1e-15);
  EXPECT_NEAR(diff(1, 1), 3.0 * 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(diff.cwiseAbs().sum(), 3.0, 1e-14);
  EXPECT_FALSE(robin.pure_neumann);
  EXPECT_GT(min_eigenvalue(robin.stiffness), 0.0);
}

TEST(Assemble, RejectsNegativeRobinCoefficient) {
  BoundaryConditionMap bc = kAllNeumann;
  bc[2] = BoundaryCondition::robin(-1.0);
  EXPECT_THROW(assemble(generate_rectangle(2, 2, 1, 1), bc), ValidationError);
}

TEST(Assemble, MatrixPropertiesOnMixedConditions) {
  // Neumann left/right, Dirichlet top/bottom.
  const BoundaryConditionMap bc{{1, BoundaryCondition::dirichlet()},
                                {2, BoundaryCondition::neumann()},
                                {3, BoundaryCondition::dirichlet()},
                                {4, BoundaryCondition::neumann()}};
  const auto sys = assemble(generate_rectangle(8, 8, 1, 1), bc);
  EXPECT_TRUE(is_symmetric(sys.mass));
  EXPECT_TRUE(is_symmetric(sys.stiffness));
  EXPECT_GT(min_eigenvalue(sys.mass), 0.0);
  EXPECT_GT(min_eigenvalue(sys.stiffness), 0.0);
}

TEST(Assemble, PureNeumannKernelAndPartitionOfUnity) {
  const auto sys = assemble(generate_rectangle(7, 5, 1.4, 1.0), kAllNeumann);
  const Vector rows = sys.stiffness * Vector::Ones(sys.size());
  EXPECT_LE(rows.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(DenseMatrix(sys.mass).sum(), 1.4, 1e-10 * 1.4);
  EXPECT_GE(min_eigenvalue(sys.stiffness), -1e-10);
}

TEST(Assemble, PatchTest) {
  const Mesh mesh = generate_rectangle(6, 6, 1, 1);
  const auto sys = assemble(mesh, kAllNeumann);
  Vector affine(sys.size());
  for (Eigen::Index i = 0; i < sys.size(); ++i) {
    const Point2 p = sys.points[static_cast<std::size_t>(sys.free_nodes[static_cast<std::size_t>(i)])];
    affine[i] = 2.0 * p.x - 3.0 * p.y + 0.5;
  }
  const Vector r = sys.stiffness * affine;
  const double norm = DenseMatrix(sys.stiffness).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < sys.size(); ++i) {
    const Point2 p = sys.points[static_cast<std::size_t>(sys.free_nodes[static_cast<std::size_t>(i)])];
    const bool interior = p.x > 1e-9 && p.x < 1 - 1e-9 && p.y > 1e-9 && p.y < 1 - 1e-9;
    if (interior) EXPECT_LE(std::abs(r[i]), 1e-12 * norm);
  }
}

TEST(Eigenpairs, DirichletSquareSpectrum) {
  const auto sys = assemble(generate_rectangle(40, 40, 1, 1), kAllDirichlet);
  const auto eig = laplace_eigenpairs(sys, 4);
  const double expected[] = {2, 5, 5, 8};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(eig.eigenvalues[i], kPi * kPi * expected[i], 0.01 * kPi * kPi * expected[i]);
}

TEST(Eigenpairs, NeumannSquareConstantMode) {
  const auto sys = assemble(generate_rectangle(8, 8, 1, 1), kAllNeumann);
  const auto eig = laplace_eigenpairs(sys, 2);
  EXPECT_LE(std::abs(eig.eigenvalues[0]), 1e-8);
  const Vector v = eig.eigenvectors.col(0);
  EXPECT_LE((v.array() - v.mean()).abs().maxCoeff(), 1e-8 * std::abs(v.mean()));
}

TEST(Eigenpairs, IntervalDirichlet) {
  const IntervalMesh mesh = generate_interval(400, 1.0);
  const auto sys = assemble(mesh, {{1, BoundaryCondition::dirichlet()}, {2, BoundaryCondition::dirichlet()}});
  EXPECT_EQ(sys.size(), 399);
  const auto eig = laplace_eigenpairs(sys, 5);
  for (int k = 1; k <= 5; ++k) EXPECT_NEAR(eig.eigenvalues[k - 1], k * k * kPi * kPi, 1e-3 * k * k * kPi * kPi);
}

TEST(Eigenpairs, IntervalElementMatrices) {
  const auto sys = assemble(generate_interval(1, 2.0), {{1, BoundaryCondition::neumann()}, {2, BoundaryCondition::neumann()}});
  DenseMatrix m(2, 2), l(2, 2);
  m << 2, 1, 1, 2;
  m *= 2.0 / 6.0;
  l << 1, -1, -1, 1;
  l /= 2.0;
  EXPECT_LE((DenseMatrix(sys.mass) - m).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((DenseMatrix(sys.stiffness) - l).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Eigenpairs, TooManyModes) {
  const auto sys = assemble(generate_rectangle(2, 2, 1, 1), kAllDirichlet);
  EXPECT_THROW(laplace_eigenpairs(sys, 2), ValidationError);
}

TEST(Evaluate, ReproducesLinearFunctions) {
  const auto sys = assemble(generate_rectangle(5, 5, 1, 1), kAllNeumann);
  Vector x(sys.size());
  for (Eigen::Index i = 0; i < sys.size(); ++i) x[i] = sys.points[static_cast<std::size_t>(sys.free_nodes[static_cast<std::size_t>(i)])].x;
  const std::vector<Point2> pts{{0.13, 0.77}, {0.5, 0.5}, {0.91, 0.04}};
  const auto values = evaluate(sys, x, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(values[i], pts[i].x, 1e-12);
}

TEST(Evaluate, VertexAndCentroid) {
  const Mesh mesh = unit_triangle();
  const auto sys = assemble(mesh, {{1, BoundaryCondition::neumann()}});
  const Vector c = (Vector(3) << 1.0, 4.0, 7.0).finished();
  EXPECT_NEAR(evaluate(sys, c, {{1.0, 0.0}})[0], 4.0, 1e-14);
  EXPECT_NEAR(evaluate(sys, c, {mesh.centroid(0)})[0], 4.0, 1e-14);
}

TEST(Evaluate, DirichletNodesContributeZero) {
  const auto sys = assemble(generate_rectangle(2, 2, 1, 1), kAllDirichlet);
  const Vector c = Vector::Constant(1, 3.0);
  EXPECT_NEAR(evaluate(sys, c, {{0.5, 0.5}})[0], 3.0, 1e-14);
  EXPECT_NEAR(evaluate(sys, c, {{0.0, 0.0}})[0], 0.0, 1e-14);
  EXPECT_NEAR(evaluate(sys, c, {{0.25, 0.5}})[0], 1.5, 1e-14);
}

TEST(Evaluate, OutsideDomain) {
  const auto sys = assemble(generate_rectangle(2, 2, 1, 1), kAllNeumann);
  EXPECT_THROW(evaluate(sys, Vector::Zero(sys.size()), {{1.5, 0.5}}), ValidationError);
}
