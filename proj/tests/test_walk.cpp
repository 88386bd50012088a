#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "bdwalk/error.hpp"
#include "bdwalk/stats.hpp"
#include "bdwalk/walk.hpp"

using namespace bdwalk;

namespace {

const BDParams kP = BDParams::constant(0.3);

WalkPath thinning(const RateFunction& phi, StopRule stop, std::uint64_t seed,
                  const JumpDistribution& pi = JumpDistribution::symmetric_unit(1),
                  InitDistSpec init = InitDistSpec::zero()) {
  LatticeEnvironment env(pi.dimension(), kP, init, seed);
  return simulate_thinning(env, phi, pi, stop, seed);
}

// Quadratic oracle: prefix x[0..n] and suffix x[n+1..N] share no site.
std::vector<std::size_t> brute_cut_times(const std::vector<Site>& x, std::size_t N, std::size_t B) {
  std::vector<std::size_t> out;
  if (N == 0) return out;
  for (std::size_t n = 0; n + B <= N && n < N; ++n) {
    bool disjoint = true;
    for (std::size_t i = 0; i <= n && disjoint; ++i)
      for (std::size_t j = n + 1; j <= N && disjoint; ++j) disjoint = x[i] != x[j];
    if (disjoint) out.push_back(n);
  }
  return out;
}

}  // namespace

TEST(JumpDistribution, Validation) {
  EXPECT_THROW(JumpDistribution(1, {}), Error);
  EXPECT_THROW(JumpDistribution(1, {{{0, 0, 0}, 1.0}}), Error);
  EXPECT_THROW(JumpDistribution(1, {{{1, 0, 0}, 0.5}, {{-1, 0, 0}, 0.4}}), Error);
  EXPECT_THROW(JumpDistribution(1, {{{1, 1, 0}, 1.0}}), Error);
  const auto s2 = JumpDistribution::symmetric_unit(2);
  EXPECT_TRUE(s2.mean_zero());
  EXPECT_TRUE(s2.symmetric());
  EXPECT_NEAR(s2.covariance()[0][0], 0.5, 1e-15);
  EXPECT_NEAR(s2.covariance()[0][1], 0.0, 1e-15);
  const auto dr = JumpDistribution::drifted(0.7);
  EXPECT_NEAR(dr.mean()[0], 0.4, 1e-15);
  EXPECT_FALSE(dr.mean_zero());
}

TEST(JumpCount, Convention) {
  WalkPath p;
  p.tau = {0.0, 1.0, 2.5, 4.0};
  p.x = {Site{0, 0, 0}, Site{1, 0, 0}, Site{2, 0, 0}, Site{1, 0, 0}};
  EXPECT_EQ(jump_count(p, 0.5), 0u);
  EXPECT_EQ(jump_count(p, 4.0), 3u);
  EXPECT_EQ(jump_count(p, 2.4999), 1u);
  EXPECT_EQ(position_at(p, 2.5), (Site{2, 0, 0}));
}

TEST(Thinning, UnitRateGivesExponentialGaps) {
  const auto path = thinning(RateFunction::one(), StopRule::jumps(10000), 1);
  ASSERT_EQ(path.jumps(), 10000u);
  std::vector<double> gaps;
  for (std::size_t n = 1; n < path.tau.size(); ++n) gaps.push_back(path.tau[n] - path.tau[n - 1]);
  EXPECT_TRUE(ks_exponential_test(gaps, 0.01).pass);
}

TEST(Thinning, ReproducibleAndStepsFromPi) {
  const auto a = thinning(RateFunction::harmonic(), StopRule::jumps(500), 3);
  const auto b = thinning(RateFunction::harmonic(), StopRule::jumps(500), 3);
  EXPECT_EQ(a.tau, b.tau);
  EXPECT_EQ(a.x, b.x);
  for (std::size_t n = 1; n < a.x.size(); ++n) {
    const int dx = a.x[n][0] - a.x[n - 1][0];
    ASSERT_TRUE(dx == 1 || dx == -1);
  }
}

TEST(Thinning, JumpTimesDominateCandidateGaps) {
  const auto p = thinning(RateFunction::harmonic(), StopRule::jumps(2000), 4);
  for (std::size_t n = 0; n < p.jumps(); ++n) ASSERT_GE(p.tau[n + 1] - p.tau[n], p.first_candidate_gap[n]);
}

TEST(Thinning, TimeStopKeepsJumpsUpToHorizon) {
  const auto p = thinning(RateFunction::one(), StopRule::time(1000.0), 5);
  EXPECT_LE(p.tau.back(), 1000.0);
  const double rate = static_cast<double>(jump_count(p, 1000.0)) / 1000.0;
  EXPECT_GT(rate, 0.9);
  EXPECT_LT(rate, 1.1);
}

TEST(Thinning, EmbeddedChainIgnoresPhi) {
  // Destinations come from (seed, Xi, n) alone, so the embedded chains agree.
  const auto a = thinning(RateFunction::one(), StopRule::jumps(300), 6);
  const auto b = thinning(RateFunction::geometric_half(), StopRule::jumps(300), 6);
  EXPECT_EQ(a.x, b.x);
}

TEST(ClockIncrements, ExponentialUnderHarmonicPhi) {
  std::vector<double> inc;
  for (std::uint64_t r = 0; inc.size() < 10000; ++r) {
    LatticeEnvironment env(1, kP, InitDistSpec::zero(), r);
    const auto p = simulate_thinning(env, RateFunction::harmonic(), JumpDistribution::symmetric_unit(1),
                                     StopRule::jumps(10), r);
    const auto i = clock_increments(p, env, RateFunction::harmonic());
    inc.insert(inc.end(), i.begin(), i.end());
  }
  for (double v : inc) ASSERT_GT(v, 0.0);
  EXPECT_TRUE(ks_exponential_test(inc, 0.01).pass);
}

TEST(ClockIncrements, UnitPhiEqualsGaps) {
  LatticeEnvironment env(1, kP, InitDistSpec::zero(), 8);
  const auto p = simulate_thinning(env, RateFunction::one(), JumpDistribution::symmetric_unit(1),
                                   StopRule::jumps(100), 8);
  const auto inc = clock_increments(p, env, RateFunction::one());
  for (std::size_t n = 0; n < inc.size(); ++n) EXPECT_NEAR(inc[n], p.tau[n + 1] - p.tau[n], 1e-12);
  LatticeEnvironment other(1, kP, InitDistSpec::zero(), 9);
  try {
    clock_increments(p, other, RateFunction::one());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SeedMismatch);
  }
}

TEST(TimeChange, InversionExact) {
  LatticeEnvironment env(1, kP, InitDistSpec::stationary(), 10);
  const auto phi = RateFunction::harmonic();
  const auto p = simulate_timechange(env, phi, JumpDistribution::symmetric_unit(1), 500, 10);
  const auto inc = clock_increments(p, env, phi);
  ASSERT_EQ(inc.size(), p.clock_increments.size());
  for (std::size_t n = 0; n < inc.size(); ++n) ASSERT_NEAR(inc[n], p.clock_increments[n], 1e-9);
}

TEST(TimeChange, UnitPhiSumsMarks) {
  LatticeEnvironment env(1, kP, InitDistSpec::zero(), 11);
  const auto p = simulate_timechange(env, RateFunction::one(), JumpDistribution::symmetric_unit(1), 50, 11);
  double s = 0.0;
  for (std::size_t n = 0; n < 50; ++n) {
    s += p.clock_increments[n];
    EXPECT_NEAR(p.tau[n + 1], s, 1e-9);
  }
  LatticeEnvironment z(1, kP, InitDistSpec::zero(), 1);
  try {
    simulate_timechange(z, RateFunction({1.0}, 0.0), JumpDistribution::symmetric_unit(1), 5, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroRateTail);
  }
}

TEST(CutTimes, MonotonePathEveryIndex) {
  std::vector<Site> x;
  for (int i = 0; i <= 20; ++i) x.push_back(Site{i, 0, 0});
  const auto c = cut_times(x, 20, 2);
  std::vector<std::size_t> all;
  for (std::size_t n = 0; n <= 18; ++n) all.push_back(n);
  EXPECT_EQ(c.indices, all);
  EXPECT_TRUE(c.horizon_certified_only);
}

TEST(CutTimes, RevisitBlocksEarlyCuts) {
  const std::vector<Site> x{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  const auto c = cut_times(x, 7, 0);
  for (std::size_t n : c.indices) EXPECT_GT(n, 3u);
  EXPECT_EQ(c.indices, brute_cut_times(x, 7, 0));
  EXPECT_TRUE(cut_times({Site{0, 0, 0}}, 0).indices.empty());
}

TEST(CutTimes, AgreesWithBruteForceOnRandomPaths) {
  for (int d = 1; d <= 3; ++d) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto pi = d == 1 ? JumpDistribution::drifted(0.7) : JumpDistribution::symmetric_unit(d);
      const auto p = thinning(RateFunction::one(), StopRule::jumps(600), seed, pi);
      EXPECT_EQ(cut_times(p.x, 600).indices, brute_cut_times(p.x, 600, 60));
    }
  }
  const auto p = thinning(RateFunction::one(), StopRule::jumps(1000), 99, JumpDistribution::drifted(0.8));
  EXPECT_EQ(cut_times(p.x, 1000, 0).indices, brute_cut_times(p.x, 1000, 0));
}

TEST(BackwardWalk, Reindexing) {
  const std::vector<Site> x{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  EXPECT_EQ(backward_walk(x, 1), (std::vector<Site>{{0, 0, 0}}));
  EXPECT_EQ(backward_walk(x, 3), (std::vector<Site>{{0, 0, 0}, {-1, 0, 0}, {-2, 0, 0}}));
}

TEST(BackwardWalk, SymmetricSegmentLawsAgree) {
  std::vector<double> fwd, bwd;
  for (std::uint64_t r = 0; r < 10000; ++r) {
    const auto p = thinning(RateFunction::one(), StopRule::jumps(20), 1000 + r);
    const auto q = thinning(RateFunction::one(), StopRule::jumps(20), 50000 + r);
    fwd.push_back(p.x[19][0]);
    bwd.push_back(backward_walk(q.x, 20)[19][0]);
  }
  EXPECT_TRUE(ks_two_sample(fwd, bwd, 0.01).pass);
}
