#include <cmath>

#include <gtest/gtest.h>

#include "rieszfield/spectral.hpp"

using namespace rieszfield;

namespace {

const BoundaryConditionMap kAllDirichlet = uniform_bc({1, 2, 3, 4}, BoundaryCondition::dirichlet());
const BoundaryConditionMap kAllNeumann = uniform_bc({1, 2, 3, 4}, BoundaryCondition::neumann());

RieszFieldSpec spec_2d(double h) {
  RieszFieldSpec s;
  s.hurst = h;
  s.dimension = 2;
  return s;
}

FemSystem bridge_system(int cells) {
  return assemble(generate_interval(cells, 1.0), {{1, BoundaryCondition::dirichlet()}, {2, BoundaryCondition::dirichlet()}});
}

double min_ritz(const DenseMatrix& c) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(c);
  return es.eigenvalues()[0];
}

}  // namespace

TEST(FieldSpec, ExponentAndValidation) {
  EXPECT_DOUBLE_EQ(spec_2d(0.5).exponent(), 0.75);
  RieszFieldSpec one_d;
  one_d.dimension = 1;
  one_d.hurst = 0.5;
  EXPECT_DOUBLE_EQ(one_d.exponent(), 0.5);
  EXPECT_THROW(spec_2d(1.0).validate(), ValidationError);
  EXPECT_THROW(spec_2d(0.0).validate(), ValidationError);
  RieszFieldSpec bad = spec_2d(0.5);
  bad.truncation = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(SpectralCoefficients, HandComputation) {
  EigenDecomposition eig;
  eig.eigenvalues = (Vector(2) << 1.0, 4.0).finished();
  eig.eigenvectors = DenseMatrix::Identity(2, 2);
  const Vector x = spectral_coefficients(eig, 1.0, Vector::Ones(2));
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(x[1], 0.25);
}

TEST(SpectralSampler, DirichletRowsExactlyZero) {
  const Mesh mesh = generate_rectangle(6, 6, 1, 1);
  const auto sys = assemble(mesh, kAllDirichlet);
  GaussianStream s(7);
  const auto path = sample_spectral(sys, spec_2d(0.25), s);
  ASSERT_EQ(path.values.size(), 49);
  for (int v : sys.dirichlet_nodes) EXPECT_EQ(path.values[v], 0.0);
  EXPECT_TRUE(path.values.allFinite());
  EXPECT_EQ(path.method, "eig");
}

TEST(SpectralSampler, ModalCoefficientsAreWhite) {
  // zeta = V^T R z must have identity covariance: V^T M V = I.
  const auto sys = assemble(generate_rectangle(5, 5, 1, 1), kAllNeumann);
  const auto eig = laplace_eigenpairs(sys);
  const DenseMatrix gram = eig.eigenvectors.transpose() * (sys.mass * eig.eigenvectors);
  EXPECT_LE((gram - DenseMatrix::Identity(sys.size(), sys.size())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SpectralSampler, NeumannRejectPolicy) {
  const auto sys = assemble(generate_rectangle(4, 4, 1, 1), kAllNeumann);
  RieszFieldSpec spec = spec_2d(0.5);
  spec.neumann = NeumannPolicy::reject();
  EXPECT_THROW(SpectralSampler(sys, spec), ValidationError);
}

TEST(SpectralSampler, PinAtOriginVanishesThere) {
  const auto sys = assemble(generate_rectangle(8, 8, 1, 1), kAllNeumann);
  RieszFieldSpec spec = spec_2d(0.5);
  const Point2 origin{0.3, 0.55};
  spec.neumann = NeumannPolicy::pin_at(origin);
  const SpectralSampler sampler(sys, spec);
  GaussianStream s(3);
  const auto path = sampler.sample(s);
  const Vector coeffs = sys.restrict_nodal(path.values);
  EXPECT_LE(std::abs(evaluate(sys, coeffs, {origin})[0]), 1e-12 * path.values.cwiseAbs().maxCoeff());
  const DenseMatrix c = sampler.covariance();
  EXPECT_GE(min_ritz(c), -1e-10 * c.cwiseAbs().maxCoeff());
}

TEST(SpectralSampler, DropZeroModeIsMeanFreeAndPsd) {
  const auto sys = assemble(generate_rectangle(8, 8, 1, 1), kAllNeumann);
  const SpectralSampler sampler(sys, spec_2d(0.5));
  GaussianStream s(4);
  const Vector x = sampler.coefficients(s.draw(sys.size()));
  const Vector m_one = sys.mass * Vector::Ones(sys.size());
  EXPECT_LE(std::abs(m_one.dot(x)), 1e-12 * x.cwiseAbs().maxCoeff());
  const DenseMatrix c = sampler.covariance();
  EXPECT_GE(min_ritz(c), -1e-10 * c.cwiseAbs().maxCoeff());
}

TEST(SpectralSampler, PinAndDropDifferByLowRank) {
  const auto sys = assemble(generate_rectangle(6, 6, 1, 1), kAllNeumann);
  RieszFieldSpec pin = spec_2d(0.5);
  pin.neumann = NeumannPolicy::pin_at({0.5, 0.5});
  const DenseMatrix diff = covariance_spectral(sys, pin) - covariance_spectral(sys, spec_2d(0.5));
  Eigen::JacobiSVD<DenseMatrix> svd(diff);
  const auto sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) rank += sv[i] > 1e-10 * sv[0];
  EXPECT_LE(rank, 2);
}

TEST(CovarianceSpectral, BrownianBridge) {
  const auto sys = bridge_system(1024);
  RieszFieldSpec spec;
  spec.hurst = 0.5;
  spec.dimension = 1;
  spec.truncation = 500;
  const DenseMatrix c = covariance_spectral(sys, spec);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < sys.size(); ++i)
    for (Eigen::Index j = 0; j < sys.size(); ++j) {
      const double s = sys.points[static_cast<std::size_t>(sys.free_nodes[static_cast<std::size_t>(i)])].x;
      const double t = sys.points[static_cast<std::size_t>(sys.free_nodes[static_cast<std::size_t>(j)])].x;
      worst = std::max(worst, std::abs(c(i, j) - (std::min(s, t) - s * t)));
    }
  EXPECT_LE(worst, 1e-2);
}

TEST(CovarianceSpectral, BrownianMotion) {
  const auto sys = assemble(generate_interval(1024, 1.0), {{1, BoundaryCondition::dirichlet()}, {2, BoundaryCondition::neumann()}});
  RieszFieldSpec spec;
  spec.hurst = 0.5;
  spec.dimension = 1;
  spec.truncation = 500;
  const DenseMatrix c = covariance_spectral(sys, spec);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < sys.size(); ++i)
    for (Eigen::Index j = 0; j < sys.size(); ++j) {
      const double s = sys.points[static_cast<std::size_t>(sys.free_nodes[static_cast<std::size_t>(i)])].x;
      const double t = sys.points[static_cast<std::size_t>(sys.free_nodes[static_cast<std::size_t>(j)])].x;
      worst = std::max(worst, std::abs(c(i, j) - std::min(s, t)));
    }
  EXPECT_LE(worst, 1e-2);
}

TEST(CovarianceSpectral, SymmetricWithNonNegativeDiagonal) {
  const auto sys = assemble(generate_rectangle(7, 5, 1, 1), kAllDirichlet);
  const DenseMatrix c = covariance_spectral(sys, spec_2d(0.3));
  EXPECT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GE(c.diagonal().minCoeff(), 0.0);
}

TEST(CovarianceSpectral, TruncationMonotone) {
  const auto sys = assemble(generate_rectangle(8, 8, 1, 1), kAllDirichlet);
  Vector previous = Vector::Zero(sys.size());
  for (Eigen::Index k : {1, 5, 20, 49}) {
    RieszFieldSpec spec = spec_2d(0.5);
    spec.truncation = k;
    const Vector diag = covariance_spectral(sys, spec).diagonal();
    EXPECT_GE((diag - previous).minCoeff(), -1e-15);
    previous = diag;
  }
}

TEST(CovarianceSpectral, LowerVarianceNearDirichletSides) {
  const BoundaryConditionMap bc{{1, BoundaryCondition::dirichlet()},
                                {2, BoundaryCondition::neumann()},
                                {3, BoundaryCondition::dirichlet()},
                                {4, BoundaryCondition::neumann()}};
  const int cells = 16;
  const auto sys = assemble(generate_rectangle(cells, cells, 1, 1), bc);
  const Vector diag = covariance_spectral(sys, spec_2d(0.5)).diagonal();
  const double h = 1.0 / cells;
  double near = 0.0, interior = 0.0;
  for (Eigen::Index i = 0; i < sys.size(); ++i) {
    const Point2 p = sys.points[static_cast<std::size_t>(sys.free_nodes[static_cast<std::size_t>(i)])];
    if (p.y <= h + 1e-12 || p.y >= 1 - h - 1e-12) near = std::max(near, diag[i]);
    else interior = std::max(interior, diag[i]);
  }
  EXPECT_LE(near, interior);
}

TEST(SpectralSampler, MonteCarloMatchesCovariance) {
  const auto sys = assemble(generate_rectangle(4, 4, 1, 1), kAllDirichlet);
  const SpectralSampler sampler(sys, spec_2d(0.25));
  const DenseMatrix c = sampler.covariance();
  const int paths = 20000;
  const Eigen::Index n = sys.size();
  DenseMatrix acc = DenseMatrix::Zero(n, n);
  for (int r = 0; r < paths; ++r) {
    GaussianStream s(derive_seed(99, static_cast<std::uint64_t>(r)));
    const Vector x = sampler.coefficients(s.draw(n));
    acc += x * x.transpose();
  }
  acc /= paths;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double se = std::sqrt((c(i, i) * c(j, j) + c(i, j) * c(i, j)) / paths);
      EXPECT_LE(std::abs(acc(i, j) - c(i, j)), 5.0 * se) << i << "," << j;
    }
}

TEST(SpectralSampler, BridgeMidpointVariance) {
  const auto sys = bridge_system(64);
  RieszFieldSpec spec;
  spec.hurst = 0.5;
  spec.dimension = 1;
  const SpectralSampler sampler(sys, spec);
  const int paths = 10000;
  double sum = 0.0, sq = 0.0;
  for (int r = 0; r < paths; ++r) {
    GaussianStream s(derive_seed(5, static_cast<std::uint64_t>(r)));
    const double mid = sampler.sample(s).values[32];
    sum += mid;
    sq += mid * mid;
  }
  const double var = (sq - sum * sum / paths) / (paths - 1);
  const double se = 0.25 * std::sqrt(2.0 / (paths - 1));
  EXPECT_NEAR(var, 0.25, 3.0 * se);
}

TEST(ScaleInvariance, IdentityAndScaledMeshes) {
  const Mesh base = generate_rectangle(16, 16, 1, 1);
  const auto sys = assemble(base, kAllDirichlet);
  EXPECT_LE(scale_covariance_check(sys, sys, spec_2d(0.4), 1.0), 1e-15);
  EXPECT_LE(scale_covariance_check(sys, assemble(base.scaled(2.0), kAllDirichlet), spec_2d(0.25), 2.0), 1e-10);
  EXPECT_LE(scale_covariance_check(sys, assemble(base.scaled(0.5), kAllDirichlet), spec_2d(0.75), 0.5), 1e-10);
}

TEST(ScaleInvariance, RejectsMismatchedConnectivity) {
  const auto a = assemble(generate_rectangle(4, 4, 1, 1), kAllDirichlet);
  const auto b = assemble(generate_rectangle(5, 4, 1, 1), kAllDirichlet);
  EXPECT_THROW(scale_covariance_check(a, b, spec_2d(0.5), 1.0), ValidationError);
}

TEST(SpectralSampler, TruncatedDefaultReportsTail) {
  const auto sys = assemble(generate_rectangle(10, 10, 1, 1), kAllDirichlet);
  RieszFieldSpec spec = spec_2d(0.5);
  spec.truncation = 30;
  const SpectralSampler sampler(sys, spec);
  EXPECT_EQ(sampler.modes(), 30);
  EXPECT_GT(sampler.truncation_tail(), 0.0);
}
