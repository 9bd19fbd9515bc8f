#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "specrcv/diffusion.hpp"
#include "specrcv/error.hpp"
#include "test_util.hpp"

using namespace specrcv;

namespace {

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::memcmp(a.data() + i, b.data() + i, sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST(IntegrateGammaSq, ClosedForms) {
  EXPECT_NEAR(integrate_gamma_sq(VolatilityProfile::constant(0.02), 0.0, 1.0), 4e-4, 1e-18);
  EXPECT_NEAR(integrate_gamma_sq(VolatilityProfile::design1(), 0.0, 1.0), 4e-4, 1e-18);
  EXPECT_NEAR(integrate_gamma_sq(VolatilityProfile::design2(), 0.0, 1.0), 9e-4, 1e-18);
  // Partial intervals of the piecewise profile.
  EXPECT_NEAR(integrate_gamma_sq(VolatilityProfile::design1(), 0.0, 0.25), 7e-4 * 0.25, 1e-18);
  EXPECT_NEAR(integrate_gamma_sq(VolatilityProfile::design1(), 0.2, 0.3),
              7e-4 * 0.05 + 1e-4 * 0.05, 1e-18);
}

TEST(IntegrateGammaSq, CosineMatchesMidpointOracle) {
  const VolatilityProfile profile = VolatilityProfile::design2();
  for (auto [a, b] : {std::pair{0.0, 0.3}, std::pair{0.1, 0.9}, std::pair{0.5, 1.0}}) {
    const auto reference = oracle::midpoint(
        [](double t) { return oracle::Complex(9e-4 + 8e-4 * std::cos(2.0 * std::numbers::pi * t)); },
        a, b);
    EXPECT_NEAR(integrate_gamma_sq(profile, a, b), reference.real(), 1e-14);
  }
}

TEST(IntegrateGammaSq, SampledMatchesMidpointOracle) {
  std::vector<double> gammas;
  for (int k = 0; k <= 64; ++k) gammas.push_back(0.02 + 0.01 * std::sin(0.1 * k));
  const VolatilityProfile profile = VolatilityProfile::sampled(gammas);
  const auto reference = oracle::midpoint(
      [&](double t) {
        const double g = profile.gamma(t);
        return oracle::Complex(g * g);
      },
      0.05, 0.95, 400000);
  const double value = integrate_gamma_sq(profile, 0.05, 0.95);
  EXPECT_NEAR(value, reference.real(), 1e-8 * std::abs(value));
}

TEST(IntegrateGammaSq, OutOfDomain) {
  try {
    integrate_gamma_sq(VolatilityProfile::constant(1.0), -0.1, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfDomain);
  }
  EXPECT_THROW(integrate_gamma_sq(VolatilityProfile::constant(1.0), 0.5, 1.5), Error);
  EXPECT_THROW(integrate_gamma_sq(VolatilityProfile::constant(1.0), 0.6, 0.5), Error);
}

TEST(VolatilityProfile, DesignPresets) {
  const VolatilityProfile d1 = VolatilityProfile::design1();
  EXPECT_NEAR(d1.gamma(0.1), std::sqrt(0.0007), 1e-15);
  EXPECT_NEAR(d1.gamma(0.5), std::sqrt(0.0001), 1e-15);
  EXPECT_NEAR(d1.gamma(0.8), std::sqrt(0.0007), 1e-15);
  EXPECT_NEAR(d1.gamma(1.0), std::sqrt(0.0007), 1e-15);
  EXPECT_NEAR(d1.gamma(0.25), std::sqrt(0.0001), 1e-15);
  EXPECT_NEAR(d1.gamma(0.75), std::sqrt(0.0007), 1e-15);
  const VolatilityProfile d2 = VolatilityProfile::design2();
  for (double t : {0.0, 0.2, 0.5, 0.77}) {
    EXPECT_NEAR(d2.gamma_sq(t), 0.0009 + 0.0008 * std::cos(2.0 * std::numbers::pi * t), 1e-16);
  }
}

TEST(VolatilityProfile, RejectsNonPositive) {
  EXPECT_THROW(VolatilityProfile::constant(0.0), Error);
  EXPECT_THROW(VolatilityProfile::cosine(1e-4, 2e-4), Error);
  EXPECT_THROW(VolatilityProfile::design1(0.0, 1.0), Error);
  EXPECT_THROW(VolatilityProfile::piecewise({0.0, 0.5, 1.0}, {0.1, -0.1}), Error);
  EXPECT_THROW(VolatilityProfile::piecewise({0.0, 0.6, 0.5, 1.0}, {0.1, 0.1, 0.1}), Error);
  EXPECT_THROW(VolatilityProfile::sampled({0.1}), Error);
}

TEST(ObservationGrid, Equispaced) {
  const ObservationGrid g = make_grid(EquispacedGrid{4});
  const std::vector<double> expected{0.0, 0.25, 0.5, 0.75, 1.0};
  ASSERT_EQ(g.times().size(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_DOUBLE_EQ(g.times()[k], expected[k]);
  EXPECT_TRUE(g.is_equispaced());
  const ObservationGrid one = ObservationGrid::equispaced(1);
  EXPECT_EQ(one.intervals(), 1u);
  EXPECT_EQ(one.times()[0], 0.0);
  EXPECT_EQ(one.times()[1], 1.0);
  EXPECT_THROW(ObservationGrid::equispaced(0), Error);
}

TEST(ObservationGrid, PoissonRespectsDurationBound) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ObservationGrid g = make_grid(PoissonGrid{1000, seed});
    EXPECT_EQ(g.intervals(), 1000u);
    EXPECT_LE(g.max_scaled_duration(), 10.0);
    EXPECT_EQ(g.times().front(), 0.0);
    EXPECT_EQ(g.times().back(), 1.0);
    for (std::size_t l = 1; l < g.times().size(); ++l) EXPECT_GT(g.times()[l], g.times()[l - 1]);
  }
}

TEST(ObservationGrid, RejectsInvalidTimes) {
  EXPECT_THROW(ObservationGrid({0.0, 0.5, 0.5, 1.0}), Error);
  EXPECT_THROW(ObservationGrid({0.1, 1.0}), Error);
  EXPECT_THROW(ObservationGrid({0.0, 0.95, 1.0}, 1.5), Error);
}

TEST(ClassCSpec, RenormalizesLambda) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix lambda = testutil::random_matrix(7, 7, seed);
    const ClassCSpec spec(7, VolatilityProfile::constant(1.0), 3.0 * lambda);
    EXPECT_NEAR(spec.normalized_icv().trace(), 7.0, 1e-9 * 7.0);
    EXPECT_FALSE(spec.lambda_is_diagonal());
  }
  const ClassCSpec identity = ClassCSpec::with_identity(5, VolatilityProfile::design1());
  EXPECT_TRUE(identity.lambda_is_diagonal());
  EXPECT_NEAR(identity.icv().trace(), 5.0 * 4e-4, 1e-15);
}

TEST(ClassCSpec, RejectsBadInputs) {
  EXPECT_THROW(ClassCSpec(3, VolatilityProfile::constant(1.0), Matrix::Identity(2, 2)), Error);
  EXPECT_THROW(ClassCSpec(2, VolatilityProfile::constant(1.0), Matrix::Zero(2, 2)), Error);
  EXPECT_THROW(ClassCSpec(2, VolatilityProfile::constant(1.0), Matrix::Identity(2, 2), {1.0}), Error);
  EXPECT_THROW(ClassCSpec(2, VolatilityProfile::constant(1.0), Matrix::Identity(2, 2), {1.0, 5.0}, 0, 2.0),
               Error);
}

TEST(ClassCSpec, DigestTracksSeed) {
  const ClassCSpec a = ClassCSpec::with_identity(3, VolatilityProfile::design1(), 1);
  EXPECT_EQ(a.digest(), ClassCSpec::with_identity(3, VolatilityProfile::design1(), 1).digest());
  EXPECT_NE(a.digest(), a.with_seed(2).digest());
  EXPECT_EQ(a.digest().size(), 64u);
}

TEST(SimulateIncrements, ConstantProfileMoments) {
  const double sigma = 0.02;
  const std::size_t p = 100;
  const std::size_t n = 10000;
  const ClassCSpec spec = ClassCSpec::with_identity(p, VolatilityProfile::constant(sigma), 7);
  const IncrementMatrix incr = simulate_increments(spec, ObservationGrid::equispaced(n));
  ASSERT_EQ(incr.n(), n);
  ASSERT_EQ(incr.p(), p);
  const double count = static_cast<double>(n * p);
  const double variance = incr.increments().squaredNorm() / count;
  const double expected = sigma * sigma / static_cast<double>(n);
  // Sample variance of N(0, s^2) has relative standard error sqrt(2 / N).
  EXPECT_LE(std::abs(variance / expected - 1.0), 0.01);
  EXPECT_LE(std::abs(variance / expected - 1.0), 4.0 * std::sqrt(2.0 / count));
}

TEST(SimulateIncrements, RowCovarianceConverges) {
  const std::size_t n = 100000;
  Matrix lambda(2, 2);
  lambda << 1.0, 0.0, 0.6, 0.8;
  const double sigma = 0.5;
  const ClassCSpec spec(2, VolatilityProfile::constant(sigma), lambda, {}, 11);
  const IncrementMatrix incr = simulate_increments(spec, ObservationGrid::equispaced(n));
  const Matrix sample = incr.increments().transpose() * incr.increments();
  const Matrix target = sigma * sigma * spec.normalized_icv().matrix();
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double se =
          std::sqrt((target(i, i) * target(j, j) + target(i, j) * target(i, j)) / static_cast<double>(n));
      EXPECT_LE(std::abs(sample(i, j) - target(i, j)), 4.0 * se) << i << "," << j;
    }
  }
}

TEST(SimulateIncrements, DriftDominatedLimit) {
  const std::vector<double> drift{0.5, -1.0, 2.0};
  const ClassCSpec spec(3, VolatilityProfile::constant(1e-12), Matrix::Identity(3, 3), drift, 3);
  const ObservationGrid grid = ObservationGrid::poisson(200, 9);
  const IncrementMatrix incr = simulate_increments(spec, grid);
  for (std::size_t l = 0; l < incr.n(); ++l) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(incr.increments()(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)),
                  drift[j] * grid.duration(l), 1e-9 * std::abs(drift[j] * grid.duration(l)) + 1e-12);
    }
  }
}

TEST(SimulateIncrements, DeterministicGivenSeed) {
  const ClassCSpec spec(4, VolatilityProfile::design2(), testutil::random_matrix(4, 4, 5), {}, 42);
  const ObservationGrid grid = ObservationGrid::poisson(300, 1);
  const IncrementMatrix a = simulate_increments(spec, grid);
  const IncrementMatrix b = simulate_increments(spec, grid);
  EXPECT_TRUE(bitwise_equal(a.increments(), b.increments()));
  EXPECT_EQ(a.spec_digest(), b.spec_digest());
  const IncrementMatrix c = simulate_increments(spec.with_seed(43), grid);
  EXPECT_FALSE(bitwise_equal(a.increments(), c.increments()));
}

TEST(SimulateIncrements, IntervalVarianceFollowsProfile) {
  // Design I: interval variance is 7e-4 / n on the outer quarters and 1e-4 / n inside.
  const std::size_t n = 1000;
  const std::size_t p = 400;
  const IncrementMatrix incr = simulate_increments(
      ClassCSpec::with_identity(p, VolatilityProfile::design1(), 5), ObservationGrid::equispaced(n));
  double outer = 0.0;
  double inner = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    const double s = incr.increments().row(static_cast<Eigen::Index>(l)).squaredNorm();
    (l < n / 4 || l >= 3 * n / 4 ? outer : inner) += s;
  }
  const double count = static_cast<double>(p * n / 2);
  EXPECT_NEAR(outer / count / (7e-4 / n), 1.0, 4.0 * std::sqrt(2.0 / count));
  EXPECT_NEAR(inner / count / (1e-4 / n), 1.0, 4.0 * std::sqrt(2.0 / count));
}

TEST(ComparatorIncrements, ConstantVolatilityWithSameIcv) {
  const std::size_t n = 2000;
  const std::size_t p = 200;
  const ClassCSpec spec = ClassCSpec::with_identity(p, VolatilityProfile::design1(), 8);
  const IncrementMatrix comparator = comparator_increments(spec, ObservationGrid::equispaced(n));
  // Every interval has variance theta / n with theta = 4e-4.
  double first = 0.0;
  double middle = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    const double s = comparator.increments().row(static_cast<Eigen::Index>(l)).squaredNorm();
    if (l < n / 4) first += s;
    if (l >= n / 4 && l < n / 2) middle += s;
  }
  const double count = static_cast<double>(p * n / 4);
  EXPECT_NEAR(first / count / (4e-4 / n), 1.0, 4.0 * std::sqrt(2.0 / count));
  EXPECT_NEAR(middle / count / (4e-4 / n), 1.0, 4.0 * std::sqrt(2.0 / count));
  EXPECT_NE(comparator.spec_digest(), spec.digest());
}

TEST(ComparatorIncrements, ConstantProfileMatchesOriginalInDistribution) {
  const std::size_t n = 5000;
  const std::size_t p = 50;
  const ClassCSpec spec = ClassCSpec::with_identity(p, VolatilityProfile::constant(0.03), 2);
  const ObservationGrid grid = ObservationGrid::equispaced(n);
  const double a = simulate_increments(spec, grid).increments().squaredNorm();
  const double b = comparator_increments(spec, grid).increments().squaredNorm();
  const double count = static_cast<double>(n * p);
  EXPECT_NEAR(a / b, 1.0, 6.0 * std::sqrt(2.0 / count));
  EXPECT_NE(a, b);  // independent Brownian draws
}
