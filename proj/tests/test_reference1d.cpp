#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "rieszfield/analysis.hpp"
#include "rieszfield/reference1d.hpp"
#include "rieszfield/spectral.hpp"
#include "support.hpp"

using namespace rieszfield;

TEST(FbmCovariance, ClosedFormCases) {
  for (double h : {0.1, 0.5, 0.9}) EXPECT_DOUBLE_EQ(fbm_covariance(1.0, 1.0, h), 1.0);
  EXPECT_NEAR(fbm_covariance(0.3, 0.7, 0.5), 0.3, 1e-15);
  EXPECT_EQ(fbm_covariance(0.0, 0.4, 0.7), 0.0);
  EXPECT_THROW(fbm_covariance(-1.0, 0.4, 0.7), ValidationError);
  EXPECT_THROW(fbm_covariance(1.0, 0.4, 1.0), ValidationError);
}

TEST(FbsCovariance, ClosedFormCases) {
  const Point2 x{0.3, -0.8};
  EXPECT_NEAR(fbs_covariance(x, x, 0.35), std::pow(std::hypot(0.3, 0.8), 0.7), 1e-15);
  EXPECT_EQ(fbs_covariance({0, 0}, x, 0.35), 0.0);
}

TEST(FbsCovariance, RotationInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double angle = std::numbers::pi * u(rng);
    const auto rotate = [angle](Point2 p) {
      return Point2{std::cos(angle) * p.x - std::sin(angle) * p.y, std::sin(angle) * p.x + std::cos(angle) * p.y};
    };
    const Point2 x{u(rng), u(rng)}, y{u(rng), u(rng)};
    const double h = 0.5 + 0.45 * u(rng);
    EXPECT_NEAR(fbs_covariance(rotate(x), rotate(y), h), fbs_covariance(x, y, h), 1e-12);
  }
}

TEST(FgnAutocovariance, ClosedFormCases) {
  EXPECT_DOUBLE_EQ(fgn_autocovariance(0, 1.0, 0.3), 1.0);
  for (long n : {1L, 2L, 10L}) EXPECT_NEAR(fgn_autocovariance(n, 0.5, 0.5), 0.0, 1e-15);
  EXPECT_NEAR(fgn_autocovariance(1, 1.0, 0.75), 0.5 * (std::pow(2.0, 1.5) - 2.0), 1e-15);
  EXPECT_NEAR(fgn_autocovariance(1, 1.0, 0.75), 0.41421356237309515, 1e-14);
}

TEST(FgnAutocovariance, ConsistentWithFbmIncrements) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<long> lag(0, 12);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = 2.0 * u(rng), h = 0.05 + 0.5 * u(rng), hurst = 0.05 + 0.9 * u(rng);
    const long n = lag(rng);
    const double a0 = t, a1 = t + h, b0 = t + n * h, b1 = t + (n + 1) * h;
    const double increments = fbm_covariance(a1, b1, hurst) - fbm_covariance(a1, b0, hurst) - fbm_covariance(a0, b1, hurst) +
                              fbm_covariance(a0, b0, hurst);
    EXPECT_NEAR(fgn_autocovariance(n, h, hurst), increments, 1e-12) << trial;
  }
}

TEST(HoskingImpulse, SpecialOrders) {
  for (double v : hosking_impulse(1.0, 16)) EXPECT_EQ(v, 1.0);
  const auto white = hosking_impulse(0.0, 8);
  EXPECT_EQ(white[0], 1.0);
  for (std::size_t k = 1; k < white.size(); ++k) EXPECT_EQ(white[k], 0.0);
  const auto half = hosking_impulse(0.5, 4);
  EXPECT_DOUBLE_EQ(half[1], 0.5);
  EXPECT_DOUBLE_EQ(half[2], 0.375);
  EXPECT_DOUBLE_EQ(half[3], 0.3125);
}

TEST(HoskingImpulse, MatchesBinomialSeries) {
  // (1-w)^{-beta} = sum_k Gamma(k+beta) / (Gamma(beta) k!) w^k.
  for (double beta : {0.25, 0.5, 1.5}) {
    const auto h = hosking_impulse(beta, 11);
    for (int k = 0; k <= 10; ++k) {
      const double exact = std::exp(std::lgamma(k + beta) - std::lgamma(beta) - std::lgamma(k + 1.0));
      EXPECT_NEAR(h[static_cast<std::size_t>(k)], exact, 1e-12) << beta << " " << k;
    }
  }
}

TEST(HoskingFilter, RunningSumProbe) {
  const HoskingSpec spec{1.0, 16};
  const auto y = hosking_filter(spec, std::vector<double>(16, 1.0));
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(y[i], static_cast<double>(i + 1), 1e-12);
}

TEST(HoskingFilter, MatchesNaiveConvolution) {
  GaussianStream s(3);
  for (double beta : {0.3, 0.5, 1.7}) {
    const HoskingSpec spec{beta, 64};
    std::vector<double> z(64);
    for (auto& v : z) v = s.next();
    const auto fast = hosking_filter(spec, z);
    const auto slow = test::naive_causal_convolution(hosking_impulse(beta, 64), z);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_NEAR(fast[i], slow[i], 1e-10);
  }
}

TEST(HoskingSample, WhiteNoiseIsIdentity) {
  const HoskingSpec spec{0.0, 32};
  GaussianStream a(9), b(9);
  const auto y = hosking_sample(spec, a);
  for (std::size_t i = 0; i < 32; ++i) EXPECT_NEAR(y[i], b.next(), 1e-12);
}

TEST(HoskingSpec, Validation) {
  EXPECT_THROW((HoskingSpec{0.5, 100}.validate()), ValidationError);
  EXPECT_THROW((HoskingSpec{0.5, 4}.validate()), ValidationError);
  EXPECT_THROW((HoskingSpec{2.5, 64}.validate()), ValidationError);
  EXPECT_THROW((HoskingSpec{-0.1, 64}.validate()), ValidationError);
  EXPECT_NO_THROW((HoskingSpec{2.0, 8}.validate()));
}

TEST(HoskingSample, PinkNoiseSlope) {
  const HoskingSpec spec{0.5, 1u << 14};
  std::vector<std::vector<double>> series;
  for (int r = 0; r < 100; ++r) {
    GaussianStream s(derive_seed(1, static_cast<std::uint64_t>(r)));
    series.push_back(hosking_sample(spec, s));
  }
  const auto fit = fit_middle_decades(periodogram_1d(series), 2.0);
  EXPECT_GE(fit.slope, -1.15);
  EXPECT_LE(fit.slope, -0.85);
}

TEST(CholeskySampler, IdentityPassesNoiseThrough) {
  GaussianStream a(4), b(4);
  const Vector x = cholesky_sample(DenseMatrix::Identity(5, 5), a);
  const Vector z = b.draw(5);
  EXPECT_EQ(x, z);
}

TEST(CholeskySampler, EmpiricalCorrelation) {
  DenseMatrix c(2, 2);
  c << 1.0, 0.6, 0.6, 1.0;
  const CholeskySampler sampler(c);
  GaussianStream s(12);
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 100000; ++i) {
    const Vector x = sampler.sample(s);
    sxy += x[0] * x[1];
    sxx += x[0] * x[0];
    syy += x[1] * x[1];
  }
  EXPECT_NEAR(sxy / std::sqrt(sxx * syy), 0.6, 0.01);
}

TEST(CholeskySampler, JitterAndIndefinite) {
  DenseMatrix singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  const CholeskySampler s(singular);
  EXPECT_GE(s.jitter(), 0.0);
  EXPECT_LE(s.jitter(), 1e-12);
  DenseMatrix indefinite(2, 2);
  indefinite << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(CholeskySampler{indefinite}, NumericError);
}

TEST(CholeskySampler, BridgeMidpointVariance) {
  const auto sys = assemble(generate_interval(64, 1.0), {{1, BoundaryCondition::dirichlet()}, {2, BoundaryCondition::dirichlet()}});
  RieszFieldSpec spec;
  spec.hurst = 0.5;
  spec.dimension = 1;
  const DenseMatrix c = covariance_spectral(sys, spec);
  const CholeskySampler sampler(c);
  const Eigen::Index mid = sys.free_index[32];
  const int draws = 20000;
  GaussianStream s(77);
  double sum = 0.0, sq = 0.0;
  for (int r = 0; r < draws; ++r) {
    const double v = sampler.sample(s)[mid];
    sum += v;
    sq += v * v;
  }
  const double var = (sq - sum * sum / draws) / (draws - 1);
  EXPECT_NEAR(var, 0.25, 3.0 * 0.25 * std::sqrt(2.0 / (draws - 1)));
}

TEST(FgnSynthesis, SpectralSlopeMatchesHurst) {
  const std::size_t n = 512;
  const CholeskySampler sampler(fgn_covariance_matrix(n, 0.75));
  std::vector<std::vector<double>> series;
  for (int r = 0; r < 200; ++r) {
    GaussianStream s(derive_seed(44, static_cast<std::uint64_t>(r)));
    const Vector x = sampler.sample(s);
    series.emplace_back(x.data(), x.data() + x.size());
  }
  const auto fit = fit_middle_decades(periodogram_1d(series), 2.0);
  EXPECT_NEAR(fit.slope, -0.5, 0.15);
}
