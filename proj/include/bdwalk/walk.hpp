#pragma once

// The particle: a continuous-time walk on Z^d whose jump rate at time t is
// phi(state of the occupied site at t).
//
// Stream use for a walk seeded with w:
//   split_stream(w, Xi, {n})        destination of jump n+1
//   split_stream(w, Thinning, {n})  candidate gaps and acceptance uniforms after jump n
//   split_stream(w, Clock, {n})     V_{n+1} for the time-change construction

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "bdwalk/bdp.hpp"
#include "bdwalk/environment.hpp"

namespace bdwalk {

class JumpDistribution {
 public:
  /// Throws InvalidJumpDistribution on empty support, a zero vector,
  /// negative probabilities or a total away from 1 by more than 1e-12.
  JumpDistribution(int d, std::vector<std::pair<Site, double>> table);

  /// Nearest-neighbour steps +-e_i with probability 1/(2d) each.
  static JumpDistribution symmetric_unit(int d);
  /// +e_1 with probability a, -e_1 with probability 1 - a (d = 1).
  static JumpDistribution drifted(double a);

  Site sample(double u) const noexcept;

  int dimension() const noexcept { return d_; }
  const std::vector<Site>& support() const noexcept { return support_; }
  const std::vector<double>& probabilities() const noexcept { return prob_; }
  const std::array<double, 3>& mean() const noexcept { return mean_; }
  const std::array<std::array<double, 3>, 3>& covariance() const noexcept { return cov_; }
  bool mean_zero() const noexcept { return mean_zero_; }
  bool symmetric() const noexcept { return symmetric_; }
  int radius() const noexcept { return radius_; }

 private:
  int d_;
  std::vector<Site> support_;
  std::vector<double> prob_;
  std::vector<double> cum_;
  std::array<double, 3> mean_{};
  std::array<std::array<double, 3>, 3> cov_{};
  bool mean_zero_ = false;
  bool symmetric_ = false;
  int radius_ = 0;
};

enum class Construction { Thinning, TimeChange };

struct WalkPath {
  int d = 1;
  std::vector<double> tau;  ///< tau[0] = 0
  std::vector<Site> x;      ///< x[0] = origin
  /// Construction B: I_n(Delta_{n+1}) = V_{n+1}, one per jump.
  std::vector<double> clock_increments;
  /// Construction A: first rate-1 candidate gap after each jump time.
  std::vector<double> first_candidate_gap;
  Construction construction = Construction::Thinning;
  std::uint64_t env_seed = 0;
  std::uint64_t walk_seed = 0;

  std::size_t jumps() const noexcept { return tau.size() - 1; }
};

struct StopRule {
  std::optional<std::size_t> n_jumps;
  std::optional<double> t_end;

  static StopRule jumps(std::size_t n) { return {n, std::nullopt}; }
  static StopRule time(double t) { return {std::nullopt, t}; }
};

/// Construction A. Throws Stalled when a sojourn outlasts `stall_budget`.
WalkPath simulate_thinning(LatticeEnvironment& env, const RateFunction& phi,
                           const JumpDistribution& pi, StopRule stop, std::uint64_t walk_seed,
                           double stall_budget = 1e6);

/// Construction B. Throws ZeroRateTail when phi has a zero tail.
WalkPath simulate_timechange(LatticeEnvironment& env, const RateFunction& phi,
                             const JumpDistribution& pi, std::size_t n_jumps,
                             std::uint64_t walk_seed);

/// Integrals of phi along the occupied site over each sojourn, replayed on a
/// fresh copy of env. Throws SeedMismatch if env's seed differs from the path's.
std::vector<double> clock_increments(const WalkPath& path, const LatticeEnvironment& env,
                                     const RateFunction& phi);

/// N_t = max{n : tau_n <= t}.
std::size_t jump_count(const WalkPath& path, double t);
/// X(t) = x_{N_t}.
Site position_at(const WalkPath& path, double t);

struct CutTimes {
  std::vector<std::size_t> indices;
  std::size_t buffer = 0;
  bool horizon_certified_only = true;
};

/// Indices n <= N - B with x[0..n] and x[n+1..N] disjoint. B defaults to N/10.
CutTimes cut_times(const std::vector<Site>& x, std::size_t N,
                   std::optional<std::size_t> buffer = std::nullopt);

/// z_l = x_{n-1-l} - x_{n-1} for 0 <= l <= n-1.
std::vector<Site> backward_walk(const std::vector<Site>& x, std::size_t n);

/// Destination draw for jump n of the walk seeded with w.
inline Site draw_step(const JumpDistribution& pi, std::uint64_t walk_seed, std::uint64_t n) {
  return pi.sample(split_stream(walk_seed, StreamTag::Xi, {n}).uniform());
}

}  // namespace bdwalk
