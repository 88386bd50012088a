#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "bdwalk/kernels.hpp"
#include "bdwalk/rng.hpp"

using namespace bdwalk;
namespace k = bdwalk::kernels;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

std::vector<std::uint64_t> words(std::size_t n, std::uint64_t seed) {
  Xoshiro256 x(seed);
  std::vector<std::uint64_t> w(n);
  for (auto& v : w) v = x();
  return w;
}

}  // namespace

TEST(NegLogUniform, ScalarCloseToLibm) {
  auto w = words(5000, 1);
  w.push_back(0);
  w.push_back(~std::uint64_t{0});
  std::vector<double> out(w.size());
  k::scalar::neg_log_uniform(w.data(), out.data(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double ref = -std::log(k::bits_to_open_uniform(w[i]));
    ASSERT_GT(out[i], 0.0);
    ASSERT_NEAR(out[i], ref, 4e-16 * std::max(1.0, ref) + 1e-300) << i;
  }
}

TEST(NegLogUniform, VectorBitIdenticalToScalar) {
  if (!k::cpu_has_avx2()) GTEST_SKIP() << "no AVX2";
  for (std::size_t n : {0, 1, 3, 4, 5, 7, 8, 17, 1000, 1001}) {
    const auto w = words(n, 2 + n);
    std::vector<double> a(n), b(n);
    k::scalar::neg_log_uniform(w.data(), a.data(), n);
    k::avx2::neg_log_uniform(w.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) ASSERT_TRUE(same_bits(a[i], b[i])) << n << " " << i;
  }
}

TEST(KsSup, MatchesDirectFormula) {
  Xoshiro256 x(3);
  for (std::size_t n : {1, 2, 5, 8, 9, 100, 333}) {
    std::vector<double> f(n);
    for (auto& v : f) v = x.uniform();
    std::sort(f.begin(), f.end());
    double ref = 0.0;
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      ref = std::max({ref, f[i] - i / nn, (i + 1) / nn - f[i]});
    EXPECT_DOUBLE_EQ(k::scalar::ks_sup_deviation(f.data(), n), ref);
    if (k::cpu_has_avx2()) {
      EXPECT_TRUE(same_bits(k::avx2::ks_sup_deviation(f.data(), n), k::scalar::ks_sup_deviation(f.data(), n)));
    }
  }
}

TEST(KsSup, PerfectQuantilesGiveHalfStep) {
  const std::size_t n = 64;
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = (i + 0.5) / n;
  EXPECT_NEAR(k::active().ks_sup_deviation(f.data(), n), 0.5 / n, 1e-15);
}

TEST(BlockedSum, AccurateAndBitIdentical) {
  Xoshiro256 x(4);
  for (std::size_t n : {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 31, 4096, 4099}) {
    std::vector<double> v(n);
    for (auto& e : v) e = x.uniform() * 10.0 - 3.0;
    long double rs = 0, rq = 0;
    for (double e : v) {
      rs += e;
      rq += static_cast<long double>(e) * e;
    }
    double s = 0, q = 0;
    k::scalar::blocked_sum(v.data(), n, &s, &q);
    EXPECT_NEAR(s, static_cast<double>(rs), 1e-10 * std::max<std::size_t>(n, 1));
    EXPECT_NEAR(q, static_cast<double>(rq), 1e-9 * std::max<std::size_t>(n, 1));
    if (k::cpu_has_avx2()) {
      double s2 = 0, q2 = 0;
      k::avx2::blocked_sum(v.data(), n, &s2, &q2);
      EXPECT_TRUE(same_bits(s, s2)) << n;
      EXPECT_TRUE(same_bits(q, q2)) << n;
    }
  }
}

TEST(Dispatch, TablesAreConsistent) {
  EXPECT_EQ(k::table_for(k::Isa::Scalar).isa, k::Isa::Scalar);
  const auto& v = k::table_for(k::Isa::Avx2);
  EXPECT_EQ(v.isa, k::cpu_has_avx2() ? k::Isa::Avx2 : k::Isa::Scalar);
  EXPECT_EQ(k::isa_name(k::Isa::Scalar), "scalar");
  EXPECT_EQ(k::isa_name(k::Isa::Avx2), "avx2");
  const auto& a = k::active();
  EXPECT_TRUE(a.isa == k::Isa::Scalar || a.isa == k::Isa::Avx2);
}
