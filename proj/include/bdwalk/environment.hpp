#pragma once

// Lattice fields of independent birth-and-death chains, instantiated lazily.
//
// Site x draws from its own stream split_stream(seed, Site, {key(x)}): the
// first word is the initial-state uniform, the rest feed an EventClock. A
// site's trajectory from time 0 is therefore fixed by (seed, x) alone, no
// matter which other sites were read or in which order.

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bdwalk/bdp.hpp"
#include "bdwalk/rng.hpp"

namespace bdwalk {

using Site = std::array<std::int32_t, 3>;

[[noreturn]] void throw_nonmonotone();

/// Packs up to three coordinates in [-2^20, 2^20) into 63 bits.
inline std::uint64_t site_key(const Site& x) noexcept {
  constexpr std::int64_t off = std::int64_t{1} << 20;
  constexpr std::uint64_t mask = (std::uint64_t{1} << 21) - 1;
  return ((static_cast<std::uint64_t>(x[0] + off) & mask) << 42) |
         ((static_cast<std::uint64_t>(x[1] + off) & mask) << 21) |
         (static_cast<std::uint64_t>(x[2] + off) & mask);
}

inline Site operator+(const Site& a, const Site& b) noexcept {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Site operator-(const Site& a, const Site& b) noexcept {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

enum class InitKind { AllZero, Stationary, ProductTable };

struct InitDistSpec {
  InitKind kind = InitKind::AllZero;
  DistTable table;  ///< ProductTable only
  double beta = 0.0;
  double C = 1.0;

  static InitDistSpec zero() { return {}; }
  static InitDistSpec stationary() { return {InitKind::Stationary, {}, 0.0, 1.0}; }
  /// Throws InitNotExponentialTail unless P(X > n) <= C e^{-beta n} on the table.
  static InitDistSpec product(std::vector<double> weights, double beta, double C = 1.0);
};

/// Law of the initial state at one site.
DistTable init_law(const InitDistSpec& init, const BDParams& params);

class LatticeEnvironment {
 public:
  /// Throws UnsupportedDimension unless d is 1, 2 or 3.
  LatticeEnvironment(int d, BDParams params, InitDistSpec init, std::uint64_t seed);

  /// State at time t (right-continuous). Throws NonMonotoneQuery if t is
  /// earlier than the previous query at x.
  int state_at(const Site& x, double t);

  /// Time of the first event at x strictly after the last query there.
  double next_event_time(const Site& x);

  /// Integral of phi(state) over [t0, t1] at x; advances the query clock to t1.
  template <class F>
  double integrate(const Site& x, double t0, double t1, F&& phi);

  int dimension() const noexcept { return d_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const BDParams& params() const noexcept { return params_; }
  const InitDistSpec& init() const noexcept { return init_; }
  std::size_t sites_touched() const noexcept { return sites_.size(); }
  std::uint64_t events_simulated() const noexcept { return events_; }

 private:
  struct SiteState {
    int state;
    double last_query;
    double next_time;
    double next_u;
    EventClock clock;
  };

  SiteState& touch(const Site& x);
  void advance(SiteState& s, double t);

  int d_;
  BDParams params_;
  InitDistSpec init_;
  DistTable law0_;
  std::uint64_t seed_;
  std::uint64_t events_ = 0;
  std::unordered_map<std::uint64_t, SiteState> sites_;
  std::uint64_t last_key_ = ~std::uint64_t{0};
  SiteState* last_ = nullptr;
};

template <class F>
double LatticeEnvironment::integrate(const Site& x, double t0, double t1, F&& phi) {
  SiteState& s = touch(x);
  if (t0 < s.last_query) throw_nonmonotone();
  advance(s, t0);
  double acc = 0.0;
  double t = t0;
  while (s.next_time <= t1) {
    acc += phi(s.state) * (s.next_time - t);
    t = s.next_time;
    advance(s, t);
  }
  acc += phi(s.state) * (t1 - t);
  advance(s, t1);
  return acc;
}

/// How the second chain of a pair is driven.
enum class CouplingMode {
  Coalescing,   ///< independent rate-1 chains until they meet, identical afterwards
  Synchronous,  ///< one rate-2 stream of shared uniforms; monotone and coalescing
};

/// Two environments on the same sites. Initial states are quantile-coupled
/// through a shared uniform, so ordered initial laws give ordered starts.
class CoupledEnvironment {
 public:
  CoupledEnvironment(int d, BDParams params, InitDistSpec initA, InitDistSpec initB,
                     std::uint64_t seed, CouplingMode mode = CouplingMode::Coalescing);

  std::pair<int, int> state_at(const Site& x, double t);
  /// First meeting time at x if it is <= horizon. Advances x's clock to horizon.
  std::optional<double> coalescence_time(const Site& x, double horizon);

  std::size_t sites_touched() const noexcept { return sites_.size(); }
  CouplingMode mode() const noexcept { return mode_; }

 private:
  struct Pair {
    int a;
    int b;
    double last_query;
    double next_a;
    double u_a;
    double next_b;
    double u_b;
    std::optional<double> met;
    EventClock clock_a;
    EventClock clock_b;
  };

  Pair& touch(const Site& x);
  void advance(Pair& s, double t);

  int d_;
  BDParams params_;
  DistTable lawA_;
  DistTable lawB_;
  std::uint64_t seed_;
  CouplingMode mode_;
  std::unordered_map<std::uint64_t, Pair> sites_;
};

CoupledEnvironment coalescing_pair(int d, BDParams params, InitDistSpec initA, InitDistSpec initB,
                                   std::uint64_t seed);

/// Many chains over one recorded rate-2 event field (shared uniforms). Any two
/// chains are monotone and coalescing with respect to each other. Each chain
/// starts at its own time from either a quantile-coupled draw of a law (using
/// the site's shared init uniform) or a fixed state, and may be overwritten.
class SynchronousField {
 public:
  SynchronousField(int d, BDParams params, std::uint64_t seed);

  /// Registers a chain started at `start` with the given initial law.
  int add_chain(DistTable law, double start = 0.0);
  /// Registers a chain started at `start` in state `state` at every site.
  int add_fixed_chain(int state, double start);

  int state(int chain, const Site& x, double t);
  /// Sets chain's state at x from time t on (t >= its last query at x).
  void overwrite(int chain, const Site& x, double t, int new_state);

  /// Event times at x recorded so far (sorted), for audits.
  const std::vector<double>& event_times(const Site& x);
  double init_uniform(const Site& x);

  std::size_t chains() const noexcept { return chains_.size(); }

 private:
  struct ChainSpec {
    std::optional<DistTable> law;
    int fixed_state;
    double start;
  };
  struct Cursor {
    int state = 0;
    std::uint32_t index = 0;  ///< next unapplied event
    double last = 0.0;
    bool live = false;
  };
  struct SiteRec {
    double u_init;
    Xoshiro256 rng;
    std::vector<double> times;
    std::vector<double> us;
    std::vector<Cursor> cursors;
  };

  SiteRec& touch(const Site& x);
  void extend(SiteRec& s, double t);
  Cursor& cursor(int chain, SiteRec& s);
  void advance(SiteRec& s, Cursor& c, double t);

  int d_;
  BDParams params_;
  std::uint64_t seed_;
  std::vector<ChainSpec> chains_;
  std::unordered_map<std::uint64_t, SiteRec> sites_;
};

/// Rate-2 synchronous step with a shared uniform.
inline int synchronous_step(const BDParams& params, int state, double u) noexcept {
  const std::size_t s = static_cast<std::size_t>(state);
  if (u < 0.5 * params.p(s)) return state + 1;
  if (u >= 1.0 - 0.5 * params.q(s) && state > 0) return state - 1;
  return state;
}


}  // namespace bdwalk
