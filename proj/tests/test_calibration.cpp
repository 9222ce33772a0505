#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>

#include "relzero/error.hpp"
#include "relzero/watermark.hpp"

namespace {

using namespace relzero;
using namespace relzero::watermark;
using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

cpp_int choose(std::int64_t n, std::int64_t r) {
  if (r < 0 || r > n) return 0;
  cpp_int out = 1;
  for (std::int64_t i = 1; i <= r; ++i) out = out * (n - r + i) / i;
  return out;
}

double exact_binomial_tail(int k, int m) {
  cpp_int num = 0;
  for (int i = std::max(m, 0); i <= k; ++i) num += choose(k, i);
  return static_cast<double>(cpp_rational(num, cpp_int(1) << k));
}

double exact_hyper_tail(int k, std::int64_t mm, int m) {
  cpp_int num = 0;
  for (int i = std::max(m, 0); i <= k; ++i) num += choose(k, i) * choose(mm - k, k - i);
  return static_cast<double>(cpp_rational(num, choose(mm, k)));
}

TEST(Calibration, BinomialHeadline) {
  const auto r = calibrate(50, 1e-3, CalibrationMode::binomial);
  EXPECT_EQ(r.threshold, 37);
  EXPECT_DOUBLE_EQ(r.tau, 0.74);
  EXPECT_NEAR(binomial_tail(50, 37), 4.7e-4, 0.05e-4);
  EXPECT_NEAR(binomial_tail(50, 36), 1.3e-3, 0.05e-3);
  EXPECT_NEAR(r.achieved_fpr, exact_binomial_tail(50, 37), 1e-12);
}

TEST(Calibration, HypergeometricHeadline) {
  const auto r = calibrate(50, 1e-3, CalibrationMode::hypergeometric, 19110);
  EXPECT_EQ(r.threshold, 3);
  EXPECT_DOUBLE_EQ(r.tau, 0.06);
  EXPECT_EQ(r.m_pairs, 19110);
  EXPECT_NEAR(hypergeometric_tail(50, 19110, 3), 3.0e-4, 0.1e-4);
  EXPECT_NEAR(hypergeometric_tail(50, 19110, 2), 7.6e-3, 0.1e-3);
}

TEST(Calibration, TailsMatchExactRationalOracle) {
  for (int k : {1, 2, 7, 50, 64}) {
    for (int m = 0; m <= k + 1; ++m) {
      EXPECT_NEAR(binomial_tail(k, m), exact_binomial_tail(k, m), 1e-12) << "k=" << k << " m=" << m;
    }
  }
  for (std::int64_t mm : {100, 1225, 19110}) {
    for (int m = 0; m <= 51; ++m) {
      EXPECT_NEAR(hypergeometric_tail(50, mm, m), exact_hyper_tail(50, mm, m), 1e-12) << "M=" << mm << " m=" << m;
    }
  }
}

TEST(Calibration, TailEndpoints) {
  EXPECT_EQ(binomial_tail(50, 0), 1.0);
  EXPECT_EQ(hypergeometric_tail(50, 19110, 0), 1.0);
  EXPECT_EQ(binomial_tail(50, 51), 0.0);
  for (int m = 1; m <= 50; ++m) EXPECT_LT(binomial_tail(50, m), binomial_tail(50, m - 1));
}

TEST(Calibration, TargetHalf) {
  EXPECT_EQ(calibrate(50, 0.5, CalibrationMode::binomial).threshold, 26);
}

TEST(Calibration, UnreachableTarget) {
  try {
    calibrate(1, 1e-3, CalibrationMode::binomial);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unreachable_target);
    EXPECT_NE(std::string(e.what()).find("unreachable target"), std::string::npos);
  }
}

TEST(Calibration, Preconditions) {
  EXPECT_THROW(calibrate(50, 0.0, CalibrationMode::binomial), Error);
  EXPECT_THROW(calibrate(50, 1.0, CalibrationMode::binomial), Error);
  EXPECT_THROW(calibrate(50, 1e-3, CalibrationMode::hypergeometric, 49), Error);
  EXPECT_THROW(calibrate(0, 1e-3, CalibrationMode::binomial), Error);
}

TEST(Calibration, MonotoneInTarget) {
  for (auto mode : {CalibrationMode::binomial, CalibrationMode::hypergeometric}) {
    int prev = 1 << 30;
    for (double target : {1e-9, 1e-6, 1e-4, 1e-3, 1e-2, 0.1, 0.5, 0.9}) {
      const auto r = calibrate(50, target, mode, 19110);
      EXPECT_LE(r.threshold, prev);
      EXPECT_LE(r.achieved_fpr, target);
      if (r.threshold > 0) {
        const double prev_tail = mode == CalibrationMode::binomial ? binomial_tail(50, r.threshold - 1)
                                                                   : hypergeometric_tail(50, 19110, r.threshold - 1);
        EXPECT_GT(prev_tail, target);  // smallest m
      }
      prev = r.threshold;
    }
  }
}

TEST(Calibration, ModeNames) {
  EXPECT_EQ(calibration_mode_from_string("binom"), CalibrationMode::binomial);
  EXPECT_EQ(calibration_mode_from_string("hyper"), CalibrationMode::hypergeometric);
  EXPECT_EQ(calibration_mode_from_string("hypergeometric"), CalibrationMode::hypergeometric);
  EXPECT_THROW(calibration_mode_from_string("normal"), Error);
}

}  // namespace
