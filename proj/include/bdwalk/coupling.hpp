#pragma once

// Coupled multi-walk constructions built on SynchronousField and a shared
// per-site field of rate-1 candidate marks.
//
// Stream use for a construction seeded with s:
//   (s, Site, key)    rate-2 environment events and the shared init uniform
//   (s, Marks, key)   candidate marks (time, acceptance uniform) at a site
//   (s, Xi, n)        destination of jump n+1, shared by every walk
//   (s, Refresh, n)   quantile-coupling uniform of the n-th refresh
//   (s, Audit, key)   audit times at a site

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "bdwalk/bdp.hpp"
#include "bdwalk/environment.hpp"
#include "bdwalk/walk.hpp"

namespace bdwalk {

/// Rate-1 Poisson marks per site, each carrying an acceptance uniform.
class MarkField {
 public:
  explicit MarkField(std::uint64_t seed) : seed_(seed) {}

  /// First accepted mark strictly after t0 at x, accepted when u < rate(time).
  /// Throws Stalled when none is accepted within `budget`.
  template <class Rate>
  double next_accepted(const Site& x, double t0, Rate&& rate, double budget = 1e6);

 private:
  struct Marks {
    Xoshiro256 rng;
    std::vector<double> time;
    std::vector<double> u;
  };
  Marks& touch(const Site& x);
  static void extend(Marks& m);

  std::uint64_t seed_;
  std::unordered_map<std::uint64_t, Marks> sites_;
};

[[noreturn]] void throw_stalled();

template <class Rate>
double MarkField::next_accepted(const Site& x, double t0, Rate&& rate, double budget) {
  Marks& m = touch(x);
  while (m.time.empty() || m.time.back() <= t0) extend(m);
  std::size_t i = static_cast<std::size_t>(
      std::upper_bound(m.time.begin(), m.time.end(), t0) - m.time.begin());
  while (true) {
    if (i == m.time.size()) extend(m);
    const double s = m.time[i];
    if (m.u[i] < rate(s)) return s;
    if (s - t0 > budget) throw_stalled();
    ++i;
  }
}

/// Law of the origin's state at the first jump time under a stationary start:
/// eta (Phi - Q) = nu and lambda_n = eta_n phi(n), solved on a reflecting
/// truncation by the tridiagonal Thomas algorithm.
DistTable first_jump_law(const BDParams& params, const RateFunction& phi);

struct RefreshEntry {
  std::size_t n;    ///< jump index of the upper walk
  Site site;        ///< site just left
  double time;      ///< upper jump time
  int before;       ///< upper state just before the refresh
  int after;        ///< the refreshed value, nu-distributed
};

struct DominationRecord {
  std::vector<double> tau;
  std::vector<double> tau_upper;
  std::vector<Site> x;
  std::vector<RefreshEntry> refreshes;
  std::size_t jump_violations = 0;   ///< count of n with tau_n > tau_upper_n
  std::size_t order_checks = 0;
  std::size_t order_violations = 0;  ///< lower > upper at an audit point
  std::size_t refresh_clamps = 0;    ///< numerical guard W >= V engaged
};

/// Throws NonMonotonePhi, InitNotDominated.
DominationRecord dominating_array(int d, const BDParams& params, const RateFunction& phi,
                                  const JumpDistribution& pi, const InitDistSpec& init,
                                  std::size_t n_jumps, std::uint64_t seed);

/// Sample of the origin's state at tau_1 under a stationary start.
std::vector<int> first_jump_environment_sample(const BDParams& params, const RateFunction& phi,
                                               std::size_t replicas, std::uint64_t seed,
                                               int workers = 1);

struct SubadditiveTable {
  std::size_t N = 0;
  /// L[m][n - m] = tau-circle^m_{n-m} - tau_m for 0 <= m <= n <= N.
  std::vector<std::vector<double>> L;
  std::vector<double> tau;
  std::size_t violations = 0;  ///< pairs with L_{0,n} < L_{0,m} + L_{m,n}

  double at(std::size_t m, std::size_t n) const { return L[m][n - m]; }
};

/// Throws NonMonotonePhi.
SubadditiveTable dominated_array(int d, const BDParams& params, const RateFunction& phi,
                                 const JumpDistribution& pi, std::size_t N, std::uint64_t seed);

struct ModelSpec {
  int d = 1;
  BDParams params = BDParams::constant(0.3);
  RateFunction phi = RateFunction::one();
  JumpDistribution pi = JumpDistribution::symmetric_unit(1);
  InitDistSpec init = InitDistSpec::zero();
};

/// Replica r of any experiment runs on master seed derive_seed(seed, Replica, r).
inline std::uint64_t replica_seed(std::uint64_t seed, std::size_t r) {
  return derive_seed(seed, StreamTag::Replica, r);
}

struct MuEstimate {
  double mu_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double half_width = 0.0;
  double level = 0.95;
  double mu_half = 0.0;       ///< same estimator at n/2, for convergence monitoring
  double mean_tau1 = 0.0;     ///< E(tau_1), reported next to mu_hat
  bool positive = false;      ///< mu_hat - half_width > 0
  std::size_t n = 0;
  std::size_t replicas = 0;
  std::vector<std::string> unmet;  ///< conditions that failed (exploratory runs only)
};

/// Plain replica mean of tau_n / n with a normal CI. Throws ConditionsUnmet
/// (listing each failed condition) unless exploratory is set.
MuEstimate estimate_mu(const ModelSpec& model, std::size_t n, std::size_t replicas,
                       std::uint64_t seed, double level = 0.95, int workers = 1,
                       bool exploratory = false);

struct MeetingRecord {
  std::vector<std::size_t> meeting_steps;  ///< total jump count at each meeting
  std::vector<double> meeting_times;
  std::size_t steps = 0;
};

struct DifferenceOptions {
  InitDistSpec initA = InitDistSpec::zero();
  InitDistSpec initB = InitDistSpec::zero();
  bool same_marks = false;
};

/// Two walks in a coalescing environment pair with their own marks and
/// destinations, run to `n_steps` total jumps. A meeting is D(s) = 0 with
/// D(s-) != 0 for D = X1 - X2.
MeetingRecord difference_walk(int d, const BDParams& params, const RateFunction& phi,
                              const JumpDistribution& pi, std::size_t n_steps, std::uint64_t seed,
                              const DifferenceOptions& opt = {});

}  // namespace bdwalk
