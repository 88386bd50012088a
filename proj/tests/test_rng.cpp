#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "bdwalk/rng.hpp"

using namespace bdwalk;

// Reference words from an independent big-integer implementation of
// splitmix64 seeding, xoshiro256** and the stream-key rule in rng.hpp.
TEST(Xoshiro, MatchesReferenceFromSplitMixSeedZero) {
  Xoshiro256 x(0);
  EXPECT_EQ(x(), 0x99ec5f36cb75f2b4ULL);
  EXPECT_EQ(x(), 0xbf6e1f784956452aULL);
  EXPECT_EQ(x(), 0x1a5f849d4933e6e0ULL);
}

TEST(StreamKey, MatchesReferenceDerivation) {
  EXPECT_EQ(stream_key(42, StreamTag::Site, {3, 5}), 0x01c80fdefa13cd60ULL);
  EXPECT_EQ(stream_key(1, StreamTag::Replica, {0}), 0xb19672b249d3a4d4ULL);
  EXPECT_EQ(stream_key(7, StreamTag::Reference, {}), 0x04d8c0ad5970d9feULL);
  Xoshiro256 s = split_stream(42, StreamTag::Site, {3, 5});
  EXPECT_EQ(s(), 0x4ab077759b3354c5ULL);
  EXPECT_EQ(s(), 0x3a2a51f39a4ddeccULL);
  EXPECT_EQ(s(), 0x05a6db248293fea1ULL);
}

TEST(SplitStream, SameTupleSameStream) {
  Xoshiro256 a = split_stream(99, StreamTag::Xi, {7});
  Xoshiro256 b = split_stream(99, StreamTag::Xi, {7});
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a(), b());
}

TEST(SplitStream, TagsIndicesAndArityAllSeparate) {
  std::set<std::uint64_t> keys;
  for (std::uint64_t tag = 1; tag <= 13; ++tag) {
    const auto t = static_cast<StreamTag>(tag);
    keys.insert(stream_key(5, t, {}));
    keys.insert(stream_key(5, t, {0}));
    keys.insert(stream_key(5, t, {0, 0}));
    keys.insert(stream_key(5, t, {1, 0}));
    keys.insert(stream_key(5, t, {0, 1}));
  }
  EXPECT_EQ(keys.size(), 13u * 5u);
}

TEST(SplitStream, NeighbouringIndicesUncorrelated) {
  Xoshiro256 a = split_stream(3, StreamTag::Thinning, {0});
  Xoshiro256 b = split_stream(3, StreamTag::Thinning, {1});
  const int n = 10000;
  double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    const double u = a.uniform(), v = b.uniform();
    sa += u;
    sb += v;
    sab += u * v;
    saa += u * u;
    sbb += v * v;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double r = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  // |r| > 4/sqrt(n) has probability below 1e-4 under independence.
  EXPECT_LT(std::abs(r), 4.0 / std::sqrt(n));
}

TEST(Uniform, OpenIntervalAndMoments) {
  Xoshiro256 x(11);
  double s = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = x.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
  }
  EXPECT_NEAR(s / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Exponential, MeanOne) {
  Xoshiro256 x(12);
  double s = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) s += x.exponential();
  EXPECT_NEAR(s / n, 1.0, 4.0 / std::sqrt(n));
}
