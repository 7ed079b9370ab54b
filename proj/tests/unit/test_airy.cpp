#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "atomlaser/airy.hpp"
#include "oracles.hpp"

using atomlaser::airy_ai;

namespace {

// Error scale: |Ai| for z >= 0, the modulus sqrt(Ai^2 + Bi^2) for z < 0.
double error_scale(double z) {
  if (z >= 0) return std::fabs(oracle::airy_ai_series(z));
  const double ai = oracle::airy_ai_boost(z);
  const double bi = oracle::airy_bi_boost(z);
  return std::hypot(ai, bi);
}

}  // namespace

TEST(Airy, OriginClosedForm) {
  const double expected = 1.0 / (std::pow(3.0, 2.0 / 3.0) * std::tgamma(2.0 / 3.0));
  EXPECT_NEAR(airy_ai(0.0), expected, 1e-15);
  EXPECT_NEAR(airy_ai(0.0), 0.355028053887817, 1e-15);
}

TEST(Airy, FrozenSeriesValues) {
  // Values from the 150-digit Maclaurin oracle.
  EXPECT_NEAR(oracle::airy_ai_series(1.0), 0.135292416312881416, 1e-17);
  EXPECT_NEAR(oracle::airy_ai_series(-5.0), 0.350761009024114320, 1e-17);
  EXPECT_NEAR(airy_ai(1.0), 0.135292416312881416, 1e-11 * 0.1353);
  EXPECT_NEAR(airy_ai(-5.0), 0.350761009024114320, 1e-11 * 0.3508);
}

TEST(Airy, MatchesSeriesOracleNearOrigin) {
  double worst = 0;
  for (double z = -30.0; z <= 30.0; z += 0.0371) {
    const double ref = oracle::airy_ai_series(z);
    const double err = std::fabs(airy_ai(z) - ref) / error_scale(z);
    worst = std::max(worst, err);
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Airy, MatchesBesselOracleFarField) {
  double worst = 0;
  for (double z : {-100.0, -97.3, -81.25, -64.0, -50.5, -33.3, 33.3, 50.5, 64.0, 81.25, 100.0}) {
    const double ref = oracle::airy_ai_boost(z);
    const double err = std::fabs(airy_ai(z) - ref) / error_scale(z);
    worst = std::max(worst, err);
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Airy, BranchCrossoversAreContinuous) {
  for (double edge : {-8.0, 8.0}) {
    const double below = airy_ai(std::nextafter(edge, -1e9));
    const double above = airy_ai(std::nextafter(edge, 1e9));
    EXPECT_NEAR(below, above, 1e-13 * std::max(1e-8, std::fabs(below)));
  }
}

TEST(Airy, OdeResidualByFiniteDifferences) {
  const double h = 1e-3;
  double worst = 0;
  for (double z = -20.0; z <= 10.0; z += 0.0173) {
    const double second = (airy_ai(z + h) - 2 * airy_ai(z) + airy_ai(z - h)) / (h * h);
    // Fourth-order correction term h^2/12 Ai'''' is ~1e-6 |z|^2 |Ai|; the
    // five-point stencil removes it.
    const double second5 = (-airy_ai(z + 2 * h) + 16 * airy_ai(z + h) - 30 * airy_ai(z) + 16 * airy_ai(z - h) -
                            airy_ai(z - 2 * h)) /
                           (12 * h * h);
    (void)second;
    worst = std::max(worst, std::fabs(second5 - z * airy_ai(z)));
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Airy, UnderflowsGracefully) {
  EXPECT_GT(airy_ai(100.0), 0.0);
  EXPECT_EQ(airy_ai(200.0), 0.0);
  EXPECT_EQ(airy_ai(1e300), 0.0);
}

TEST(Airy, RejectsUnresolvableNegativeArguments) {
  EXPECT_NO_THROW(airy_ai(atomlaser::kAiryMostNegativeArgument));
  try {
    airy_ai(-1e5);
    FAIL() << "expected airy-range error";
  } catch (const atomlaser::Error& e) {
    EXPECT_EQ(e.kind(), atomlaser::ErrorKind::airy_range);
  }
}
