#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "bdwalk/bdp.hpp"
#include "bdwalk/error.hpp"

using namespace bdwalk;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::RuntimeFailure;
}

BDParams mixed() { return BDParams::validate({{0.4, 0.2, 0.35}, 0.3}); }

// Embedded-chain hitting moments of 0 by a dense solve on {1..K}, with the
// top state reflecting. Columns: E_k T_0 and E_k T_0^2.
struct Moments {
  Eigen::VectorXd h, g;
};

Moments dense_moments(const BDParams& p, int K) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(K, K);
  for (int k = 1; k <= K; ++k) {
    const double up = p.p(k), down = p.q(k);
    if (k < K) A(k - 1, k) -= up; else A(k - 1, k - 1) -= up;
    if (k > 1) A(k - 1, k - 2) -= down;
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  Moments m;
  m.h = lu.solve(Eigen::VectorXd::Ones(K));
  Eigen::VectorXd rhs(K);
  for (int k = 1; k <= K; ++k) {
    const double hu = k < K ? m.h(k) : m.h(k - 1);
    const double hd = k > 1 ? m.h(k - 2) : 0.0;
    rhs(k - 1) = 1.0 + 2.0 * (p.p(k) * hu + p.q(k) * hd);
  }
  m.g = lu.solve(rhs);
  return m;
}

// Unnormalized nu_n = R_n by the product formula, long double.
std::vector<long double> product_R(const BDParams& p, int N) {
  std::vector<long double> R(N + 1, 1.0L);
  for (int n = 1; n <= N; ++n) R[n] = R[n - 1] * p.p(n - 1) / p.q(n);
  return R;
}

// R_n = prod_{i=1}^n p_i / q_i, long double.
std::vector<long double> rho_R(const BDParams& p, int N) {
  std::vector<long double> R(N + 1, 1.0L);
  for (int n = 1; n <= N; ++n) R[n] = R[n - 1] * p.p(n) / p.q(n);
  return R;
}

}  // namespace

TEST(Validate, Examples) {
  EXPECT_DOUBLE_EQ(BDParams::constant(0.3).inf_p(), 0.3);
  EXPECT_EQ(code_of([] { BDParams::constant(0.6); }), ErrorCode::ViolatesHalf);
  EXPECT_EQ(code_of([] { BDParams::constant(0.5); }), ErrorCode::TailDivergent);
  EXPECT_EQ(code_of([] { BDParams::validate({{0.3, 0.0}, 0.3}); }), ErrorCode::ZeroInfimum);
  EXPECT_EQ(code_of([] { BDParams::validate({{1.2}, 0.3}); }), ErrorCode::OutOfRange);
  EXPECT_NO_THROW(BDParams::validate({{0.4, 0.2}, 0.2}));
}

TEST(RatioSequences, GeometricValues) {
  const auto s = ratio_sequences(BDParams::constant(0.3), 4);
  EXPECT_DOUBLE_EQ(s.R[0], 1.0);
  EXPECT_NEAR(s.R[2], 9.0 / 49.0, 1e-15);
  EXPECT_NEAR(s.S[1], 0.75, 1e-15);
}

TEST(RatioSequences, MixedTableAgainstProducts) {
  const auto p = mixed();
  const auto R = rho_R(p, 4000);
  const auto s = ratio_sequences(p, 10);
  for (std::size_t n = 0; n <= 10; ++n) {
    long double S = 0;
    for (std::size_t i = n; i < R.size(); ++i) S += R[i];
    EXPECT_NEAR(s.R[n], static_cast<double>(R[n]), 1e-15) << n;
    EXPECT_NEAR(s.S[n], static_cast<double>(S), 1e-14) << n;
  }
}

TEST(Conditions, GeometricClosedForms) {
  for (double p : {0.1, 0.3, 0.49}) {
    const double r = p / (1 - p);
    const auto bdp = BDParams::constant(p);
    EXPECT_NEAR(check_ergodic(bdp).value, r / (1 - r), 1e-12 * r / (1 - r));
    EXPECT_NEAR(check_strong_ergodic(bdp).value, r / std::pow(1 - r, 3), 1e-10 * r / std::pow(1 - r, 3));
  }
  EXPECT_NEAR(check_strong_ergodic(BDParams::constant(0.3)).value, 147.0 / 64.0, 1e-12);
  EXPECT_LT(check_strong_ergodic(BDParams::constant(0.1)).value, 0.2);
  EXPECT_TRUE(check_ergodic(BDParams::validate({{0.4}, 0.2})).holds);
}

TEST(Conditions, TableMatchesPartialSums) {
  const auto p = mixed();
  const auto nu = product_R(p, 4000);
  const auto R = rho_R(p, 4000);
  long double erg = 0, strong = 0;
  std::vector<long double> S(R.size() + 1, 0.0L);
  for (std::size_t n = R.size(); n-- > 0;) S[n] = S[n + 1] + R[n];
  for (std::size_t n = 1; n + 1 < R.size(); ++n) {
    erg += nu[n];
    strong += S[n] * S[n] / R[n];
  }
  EXPECT_NEAR(check_ergodic(p).value, static_cast<double>(erg), 1e-12);
  EXPECT_NEAR(check_strong_ergodic(p).value, static_cast<double>(strong), 1e-10);
}

TEST(Stationary, Examples) {
  EXPECT_NEAR(stationary_distribution(BDParams::constant(0.3)).pmf(0), 4.0 / 7.0, 1e-14);
  EXPECT_NEAR(stationary_distribution(BDParams::constant(0.1)).pmf(0), 8.0 / 9.0, 1e-14);
  const auto nu = stationary_distribution(BDParams::validate({{0.4}, 0.2}));
  EXPECT_NEAR(nu.pmf(0), 0.6, 1e-14);
  EXPECT_NEAR(nu.pmf(1), 0.3, 1e-14);
  EXPECT_NEAR(nu.pmf(2), 0.075, 1e-14);
}

TEST(Stationary, TableAgainstProduct) {
  const auto p = mixed();
  const auto R = product_R(p, 2000);
  long double z = 0;
  for (auto v : R) z += v;
  const auto nu = stationary_distribution(p);
  long double mean = 0;
  for (int n = 0; n < 40; ++n) EXPECT_NEAR(nu.pmf(n), static_cast<double>(R[n] / z), 1e-14) << n;
  for (std::size_t n = 0; n < R.size(); ++n) mean += n * R[n] / z;
  EXPECT_NEAR(nu.mean(), static_cast<double>(mean), 1e-12);
  EXPECT_LT(detailed_balance_defect_exact(p, nu, 30), 1e-12);
}

TEST(Stationary, QuantileInvertsCdf) {
  const auto nu = stationary_distribution(mixed());
  for (double u : {1e-9, 0.1, 0.5, 0.57, 0.9, 0.999, 1 - 1e-12}) {
    const std::size_t k = nu.quantile(u);
    EXPECT_GE(nu.cdf(k), u);
    if (k > 0) {
      EXPECT_LT(nu.cdf(k - 1), u);
    }
  }
}

TEST(Hitting, GeometricValues) {
  const auto p3 = BDParams::constant(0.3);
  for (std::size_t n : {1, 2, 10}) EXPECT_NEAR(hitting_time_mean(p3, n), 2.5, 1e-12);
  EXPECT_NEAR(hitting_time_mean(BDParams::constant(0.1), 4), 1.25, 1e-12);
  EXPECT_NEAR(stationary_mean_hitting(p3), 1.875, 1e-12);
  EXPECT_NEAR(hitting_second_moment(p3), 19.375, 1e-10);
}

TEST(Hitting, TableAgainstDenseSolve) {
  for (const auto& p : {mixed(), BDParams::constant(0.3), BDParams::validate({{0.45, 0.1}, 0.25})}) {
    const Moments m = dense_moments(p, 400);
    for (int n = 1; n <= 6; ++n) {
      const double ref = m.h(n - 1) - (n > 1 ? m.h(n - 2) : 0.0);
      EXPECT_NEAR(hitting_time_mean(p, n), ref, 1e-9) << n;
    }
    EXPECT_NEAR(hitting_second_moment(p), m.g(0), 1e-8);
    const auto nu = stationary_distribution(p);
    double e = 0.0;
    for (int k = 1; k < 400; ++k) e += nu.pmf(k) * m.h(k - 1);
    EXPECT_NEAR(stationary_mean_hitting(p), e, 1e-9);
  }
}

TEST(Modified, GeometricHalf) {
  const auto p = BDParams::constant(0.3);
  const auto phi = RateFunction::geometric_half();
  const auto chain = modified_params(p, phi);
  EXPECT_NEAR(chain.p_psi(3), 8 * 0.3, 1e-12);
  EXPECT_NEAR(chain.q_psi(3), 8 * 0.7, 1e-12);
  const auto nupsi = modified_stationary(p, phi);
  EXPECT_NEAR(nupsi.cdf(0), 11.0 / 14.0, 1e-12);
  const auto nu = stationary_distribution(p);
  for (int k = 0; k <= 50; ++k) EXPECT_GE(nupsi.cdf(k) - nu.cdf(k), -1e-12);
  for (int k = 0; k < 10; ++k) EXPECT_NEAR(nupsi.pmf(k), (11.0 / 14.0) * std::pow(3.0 / 14.0, k), 1e-13);
}

TEST(Modified, IdentityAndZeroTail) {
  const auto p = mixed();
  const auto a = modified_stationary(p, RateFunction::one());
  const auto b = stationary_distribution(p);
  for (int k = 0; k < 30; ++k) EXPECT_NEAR(a.pmf(k), b.pmf(k), 1e-14);
  const auto z = modified_stationary(BDParams::constant(0.3), RateFunction({1.0, 0.5, 0.25}, 0.0));
  EXPECT_NEAR(z.cdf(2), 1.0, 1e-14);
  EXPECT_GT(z.pmf(2), 0.0);
}

TEST(Modified, HarmonicDominatedPointwise) {
  const auto p = BDParams::constant(0.3);
  const auto phi = RateFunction::harmonic();
  const auto a = modified_stationary(p, phi);
  const auto nu = stationary_distribution(p);
  // nu^psi_n is proportional to rho^n / (n + 1), with sum -ln(1 - rho) / rho.
  const double r = 3.0 / 7.0;
  const double z = -std::log(1 - r) / r;
  for (int k = 0; k <= 50; ++k) {
    EXPECT_NEAR(a.pmf(k), std::pow(r, k) / (k + 1) / z, 1e-13);
    EXPECT_GE(a.cdf(k) - nu.cdf(k), -1e-12);
  }
}

TEST(RateFunction, Validation) {
  EXPECT_EQ(code_of([] { RateFunction({0.5}, 0.5); }), ErrorCode::OutOfRange);
  EXPECT_EQ(code_of([] { RateFunction({1.0, 1.5}, 0.5); }), ErrorCode::OutOfRange);
  EXPECT_TRUE(RateFunction::harmonic().monotone());
  EXPECT_FALSE(RateFunction({1.0, 0.5, 0.8}, 0.8).monotone());
  EXPECT_EQ(RateFunction::one().constant_value(), 1.0);
}

TEST(Simulate, OccupationOfZero) {
  const auto p = BDParams::constant(0.3);
  const double T = 1e5;
  const auto tr = simulate_bdp(p, 0, T, Xoshiro256(5));
  double at0 = 0.0, t = 0.0;
  int s = tr.initial_state;
  for (const auto& e : tr.events) {
    if (s == 0) at0 += e.time - t;
    t = e.time;
    s = e.state;
  }
  if (s == 0) at0 += T - t;
  // Standard error of the occupation fraction at this horizon is about 0.004.
  EXPECT_NEAR(at0 / T, 4.0 / 7.0, 0.012);
  const auto again = simulate_bdp(p, 0, T, Xoshiro256(5));
  ASSERT_EQ(again.events.size(), tr.events.size());
  EXPECT_EQ(again.events.back().time, tr.events.back().time);
  EXPECT_TRUE(simulate_bdp(p, 3, 0.0, Xoshiro256(1)).events.empty());
  EXPECT_EQ(simulate_bdp(p, 3, 0.0, Xoshiro256(1)).state_at(0.0), 3);
}

TEST(Simulate, StationarySamplerFractionAtZero) {
  for (double p : {0.3, 0.1}) {
    Xoshiro256 rng(8);
    const auto bdp = BDParams::constant(p);
    const int n = 100000;
    int zero = 0;
    for (int i = 0; i < n; ++i) zero += sample_stationary(bdp, rng) == 0;
    const double nu0 = (1 - 2 * p) / (1 - p);
    EXPECT_NEAR(static_cast<double>(zero) / n, nu0, 3 * std::sqrt(nu0 * (1 - nu0) / n));
  }
}

TEST(Step, BoundaryAndDirection) {
  const auto p = BDParams::constant(0.3);
  EXPECT_EQ(bd_step(p, 0, 0.1), 1);
  EXPECT_EQ(bd_step(p, 0, 0.9), 0);
  EXPECT_EQ(bd_step(p, 4, 0.29), 5);
  EXPECT_EQ(bd_step(p, 4, 0.31), 3);
}
