#include <gtest/gtest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <random>

#include "tagagg/digamma.hpp"

namespace tagagg {
namespace {

TEST(Digamma, KnownValues) {
  EXPECT_NEAR(digamma(1.0), -0.5772156649015329, 1e-12);
  EXPECT_NEAR(digamma(2.0), 0.4227843350984671, 1e-12);
  EXPECT_NEAR(digamma(0.5), -1.9635100260214235, 1e-12);
}

TEST(Digamma, RecurrenceAndDifferences) {
  // psi(x + 1) = psi(x) + 1/x
  for (double x : {0.01, 0.3, 1.0, 2.5, 9.99, 10.0, 47.0}) EXPECT_NEAR(digamma(x + 1) - digamma(x), 1.0 / x, 1e-12);
  EXPECT_NEAR(digamma(3.0) - digamma(4.0), -1.0 / 3.0, 1e-12);
}

TEST(Digamma, MatchesBoostAcrossRange) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> log_x(-6.0, 9.0);
  for (int trial = 0; trial < 5000; ++trial) {
    const double x = std::pow(10.0, log_x(rng));
    const double ref = boost::math::digamma(x);
    ASSERT_NEAR(digamma(x), ref, 1e-12 * std::max(1.0, std::abs(ref))) << "x=" << x;
  }
}

TEST(Digamma, RejectsNonPositive) {
  EXPECT_THROW(digamma(0.0), std::domain_error);
  EXPECT_THROW(digamma(-1.5), std::domain_error);
}

}  // namespace
}  // namespace tagagg
