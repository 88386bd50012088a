#pragma once

// Birth-and-death chains on {0, 1, 2, ...} with total jump rate one.
//
// Rates are a table p_0..p_{K-1} followed by a constant tail p_n = p for
// n >= K, with q_n = 1 - p_n. Every infinite sum below is a table partial sum
// plus the closed-form geometric remainder of the constant-tail region.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bdwalk/rng.hpp"

namespace bdwalk {

struct RawParams {
  std::vector<double> p_table;
  double p_tail = 0.0;
};

class BDParams {
 public:
  /// Throws Error{OutOfRange, ViolatesHalf, ZeroInfimum, TailDivergent}.
  static BDParams validate(RawParams raw);

  static BDParams constant(double p) { return validate({{p}, p}); }

  double p(std::size_t n) const noexcept { return n < table_.size() ? table_[n] : tail_; }
  double q(std::size_t n) const noexcept { return 1.0 - p(n); }
  double rho(std::size_t n) const noexcept { return p(n) / q(n); }

  std::size_t n_tab() const noexcept { return table_.size(); }
  double p_tail() const noexcept { return tail_; }
  double tail_rho() const noexcept { return tail_ / (1.0 - tail_); }
  double inf_p() const noexcept { return inf_p_; }
  double sup_rho() const noexcept { return sup_rho_; }
  const std::vector<double>& p_table() const noexcept { return table_; }

 private:
  BDParams() = default;
  std::vector<double> table_;
  double tail_ = 0.0;
  double inf_p_ = 0.0;
  double sup_rho_ = 0.0;
};

inline BDParams validate_params(RawParams raw) { return BDParams::validate(std::move(raw)); }

/// Jump-rate function phi: table phi(0..n0-1), phi(0) = 1, then a constant
/// tail in [0, 1]. A zero tail confines the modified chain to {0..n0-1}.
class RateFunction {
 public:
  RateFunction(std::vector<double> table, double tail);

  /// phi identically 1.
  static RateFunction one() { return RateFunction({1.0}, 1.0); }
  /// phi(n) = 2^-n for n < length, constant afterwards.
  static RateFunction geometric_half(std::size_t length = 128);
  /// phi(n) = 1/(n+1) for n < length, constant afterwards.
  static RateFunction harmonic(std::size_t length = 1024);

  double operator()(std::size_t n) const noexcept { return n < table_.size() ? table_[n] : tail_; }
  double psi(std::size_t n) const noexcept { return 1.0 / (*this)(n); }

  const std::vector<double>& table() const noexcept { return table_; }
  double tail() const noexcept { return tail_; }
  bool monotone() const noexcept { return monotone_; }
  bool zero_tail() const noexcept { return tail_ == 0.0; }
  /// The common value when phi is constant everywhere.
  std::optional<double> constant_value() const noexcept { return constant_; }

 private:
  std::vector<double> table_;
  double tail_;
  bool monotone_ = true;
  std::optional<double> constant_;
};

struct RatioSequences {
  std::vector<double> rho;  ///< rho[0] unused (0), rho[n] = p_n / q_n
  std::vector<double> R;    ///< R[0] = 1
  std::vector<double> S;    ///< S[n] = sum_{i >= n} R_i
  double tail_bound = 0.0;  ///< S_{N+1}, the remainder beyond the returned range
};

/// Throws TailDivergent if the tail ratio is >= 1.
RatioSequences ratio_sequences(const BDParams& params, std::size_t N);

struct ConditionReport {
  std::string condition;
  bool holds = false;
  double value = 0.0;  ///< the sum when finite, +inf otherwise
};

ConditionReport check_ergodic(const BDParams& params);
ConditionReport check_strong_ergodic(const BDParams& params);

/// Law on {0..N} with a geometric tail of ratio `tail_ratio` beyond N
/// carrying mass `tail_mass`; tail_ratio = 0 means the support is finite.
struct DistTable {
  std::vector<double> weights;
  double tail_mass = 0.0;
  double tail_ratio = 0.0;
  double tol = 1e-12;

  std::size_t size() const noexcept { return weights.size(); }
  double pmf(std::size_t k) const noexcept;
  double cdf(std::size_t k) const noexcept;
  double mean() const noexcept;
  /// Smallest k with cdf(k) >= u, u in (0, 1); the tail is inverted analytically.
  std::size_t quantile(double u) const noexcept;
};

DistTable stationary_distribution(const BDParams& params, double mass_tol = 1e-16);

/// Detailed balance nu_n p_n = nu_{n+1} q_{n+1} re-checked in exact rational
/// arithmetic on the double table; returns the largest relative defect.
double detailed_balance_defect_exact(const BDParams& params, const DistTable& nu,
                                     std::size_t upto);

double hitting_time_mean(const BDParams& params, std::size_t n);
double hitting_second_moment(const BDParams& params);
double stationary_mean_hitting(const BDParams& params);

/// Rates of Q^psi: p^psi_n = p_n / phi(n), q^psi_n = q_n / phi(n).
struct ModifiedChain {
  BDParams base;
  RateFunction phi;
  std::optional<std::size_t> state_limit;  ///< states {0..limit-1} when phi has a zero tail

  double p_psi(std::size_t n) const noexcept;
  double q_psi(std::size_t n) const noexcept;
};

ModifiedChain modified_params(const BDParams& params, const RateFunction& phi);
DistTable modified_stationary(const BDParams& params, const RateFunction& phi,
                              double mass_tol = 1e-16);

/// Buffered Exp(1) holding times and move uniforms drawn from one stream.
class EventClock {
 public:
  struct Draw {
    double dt;
    double u;
  };

  EventClock() = default;
  explicit EventClock(Xoshiro256 rng) : rng_(rng) {}

  Draw next() {
    if (pos_ == kBatch) refill();
    const Draw d{exps_[pos_], us_[pos_]};
    ++pos_;
    return d;
  }

 private:
  static constexpr int kBatch = 16;
  void refill();

  Xoshiro256 rng_;
  int pos_ = kBatch;
  double exps_[kBatch];
  double us_[kBatch];
};

/// One transition of the chain given a move uniform.
inline int bd_step(const BDParams& params, int state, double u) noexcept {
  const int up = u < params.p(static_cast<std::size_t>(state));
  return state + up - ((up ^ 1) & static_cast<int>(state > 0));
}

struct BDEvent {
  double time;
  int state;
};

struct BDTrajectory {
  int initial_state = 0;
  std::vector<BDEvent> events;
  double end_time = 0.0;

  int state_at(double t) const noexcept;
};

/// Exact simulation on [0, t_end]. Null moves at 0 are not recorded.
BDTrajectory simulate_bdp(const BDParams& params, int init_state, double t_end, Xoshiro256 rng);

int sample_stationary(const BDParams& params, Xoshiro256& rng);
inline int sample_from(const DistTable& law, Xoshiro256& rng) {
  return static_cast<int>(law.quantile(rng.uniform()));
}

}  // namespace bdwalk
