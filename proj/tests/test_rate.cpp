#include "streamgauge/rate.hpp"

#include <gtest/gtest.h>

namespace streamgauge {
namespace {

TEST(RateSchedule, RateAtAndExpectedCount) {
  RateSchedule s;
  s.segments = {{10 * kNanosPerSecond, 840.0},
                {10 * kNanosPerSecond, 280.0},
                {10 * kNanosPerSecond, 840.0}};
  ASSERT_TRUE(s.valid());
  EXPECT_DOUBLE_EQ(s.rate_at(0), 840.0);
  EXPECT_DOUBLE_EQ(s.rate_at(10 * kNanosPerSecond), 280.0);
  EXPECT_DOUBLE_EQ(s.rate_at(25 * kNanosPerSecond), 840.0);
  EXPECT_DOUBLE_EQ(s.peak_rate(), 840.0);
  EXPECT_NEAR(s.expected_count(0, 30 * kNanosPerSecond), 8400 + 2800 + 8400, 1e-6);
  EXPECT_NEAR(s.expected_count(9 * kNanosPerSecond, 11 * kNanosPerSecond), 840 + 280, 1e-6);
  EXPECT_EQ(s.total_duration(), 30 * kNanosPerSecond);
}

TEST(RateSchedule, Validity) {
  EXPECT_FALSE(RateSchedule{}.valid());
  EXPECT_FALSE((RateSchedule{{{0, 100.0}}}).valid());
  EXPECT_FALSE((RateSchedule{{{kNanosPerSecond, 0.0}}}).valid());
  EXPECT_TRUE(RateSchedule::constant(100.0, kNanosPerSecond).valid());
}

TEST(TokenBucket, AccruesAtRateWithBurstCap) {
  TokenBucket bucket(1000.0, 10.0, 0);
  EXPECT_EQ(bucket.grab(0, 5), 0u);
  // 10 ms -> 10 tokens.
  EXPECT_EQ(bucket.grab(10 * kNanosPerMilli, 100), 10u);
  // Burst cap: a long stall still yields only 10.
  EXPECT_EQ(bucket.grab(10 * kNanosPerSecond, 100), 10u);
}

TEST(TokenBucket, NextReadyMatchesDeficit) {
  TokenBucket bucket(1000.0, 4.0, 0);
  const TimeNs ready = bucket.next_ready(0);
  EXPECT_GT(ready, 0);
  EXPECT_LE(ready, kNanosPerMilli + 1000);
  EXPECT_EQ(bucket.grab(ready, 1), 1u);
}

TEST(TokenBucket, FractionalCarryIsExactOverManyGrabs) {
  // 333 events/s sampled every millisecond: totals must track the rate.
  TokenBucket bucket(333.0, 8.0, 0);
  std::uint64_t total = 0;
  for (TimeNs t = 0; t <= 3 * kNanosPerSecond; t += kNanosPerMilli) {
    total += bucket.grab(t, 8);
  }
  EXPECT_NEAR(static_cast<double>(total), 999.0, 9.0);  // within 1%
}

}  // namespace
}  // namespace streamgauge
