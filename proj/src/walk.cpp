#include "bdwalk/walk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <unordered_map>

#include "bdwalk/error.hpp"

namespace bdwalk {

JumpDistribution::JumpDistribution(int d, std::vector<std::pair<Site, double>> table) : d_(d) {
  if (d < 1 || d > 3) throw Error(ErrorCode::UnsupportedDimension, "d must be 1, 2 or 3");
  if (table.empty()) throw Error(ErrorCode::InvalidJumpDistribution, "empty support");
  double total = 0.0;
  for (const auto& [v, p] : table) {
    if (!(p >= 0.0)) throw Error(ErrorCode::InvalidJumpDistribution, "negative probability");
    if (v == Site{0, 0, 0}) throw Error(ErrorCode::InvalidJumpDistribution, "zero jump vector");
    for (int i = d; i < 3; ++i) {
      if (v[i] != 0) throw Error(ErrorCode::InvalidJumpDistribution, "coordinate beyond dimension");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidJumpDistribution, "probabilities must sum to 1");
  }
  double c = 0.0;
  for (const auto& [v, p] : table) {
    support_.push_back(v);
    prob_.push_back(p);
    c += p;
    cum_.push_back(c);
    for (int i = 0; i < 3; ++i) {
      mean_[i] += p * v[i];
      radius_ = std::max(radius_, std::abs(v[i]));
      for (int j = 0; j < 3; ++j) cov_[i][j] += p * v[i] * v[j];
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) cov_[i][j] -= mean_[i] * mean_[j];
  }
  mean_zero_ = std::all_of(mean_.begin(), mean_.end(), [](double m) { return std::abs(m) <= 1e-12; });
  symmetric_ = true;
  for (std::size_t k = 0; k < support_.size(); ++k) {
    const Site neg{-support_[k][0], -support_[k][1], -support_[k][2]};
    double mirrored = 0.0;
    double own = 0.0;
    for (std::size_t j = 0; j < support_.size(); ++j) {
      if (support_[j] == neg) mirrored += prob_[j];
      if (support_[j] == support_[k]) own += prob_[j];
    }
    symmetric_ = symmetric_ && std::abs(mirrored - own) <= 1e-12;
  }
}

JumpDistribution JumpDistribution::symmetric_unit(int d) {
  std::vector<std::pair<Site, double>> t;
  for (int i = 0; i < d; ++i) {
    Site e{0, 0, 0};
    e[i] = 1;
    t.push_back({e, 0.5 / d});
    e[i] = -1;
    t.push_back({e, 0.5 / d});
  }
  return JumpDistribution(d, std::move(t));
}

JumpDistribution JumpDistribution::drifted(double a) {
  return JumpDistribution(1, {{{1, 0, 0}, a}, {{-1, 0, 0}, 1.0 - a}});
}

Site JumpDistribution::sample(double u) const noexcept {
  const auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
  const auto k = std::min<std::size_t>(it - cum_.begin(), support_.size() - 1);
  return support_[k];
}

WalkPath simulate_thinning(LatticeEnvironment& env, const RateFunction& phi,
                           const JumpDistribution& pi, StopRule stop, std::uint64_t walk_seed,
                           double stall_budget) {
  if (!stop.n_jumps && !stop.t_end) throw Error(ErrorCode::OutOfRange, "no stopping rule");
  const bool always = phi.constant_value() == 1.0;
  WalkPath path;
  path.d = env.dimension();
  path.construction = Construction::Thinning;
  path.env_seed = env.seed();
  path.walk_seed = walk_seed;
  path.tau.push_back(0.0);
  path.x.push_back({0, 0, 0});
  if (stop.n_jumps) {
    path.tau.reserve(*stop.n_jumps + 1);
    path.x.reserve(*stop.n_jumps + 1);
  }
  double t = 0.0;
  Site here{0, 0, 0};
  for (std::uint64_t n = 0; !stop.n_jumps || n < *stop.n_jumps; ++n) {
    Xoshiro256 rng = split_stream(walk_seed, StreamTag::Thinning, {n});
    double s = t;
    bool first = true;
    while (true) {
      s += rng.exponential();
      const double u = rng.uniform();
      if (first) {
        path.first_candidate_gap.push_back(s - t);
        first = false;
      }
      if (stop.t_end && s > *stop.t_end) {
        path.first_candidate_gap.pop_back();
        return path;
      }
      if (always || u < phi(static_cast<std::size_t>(env.state_at(here, s)))) break;
      if (s - t > stall_budget) {
        throw Error(ErrorCode::Stalled, "no accepted candidate within the time budget");
      }
    }
    t = s;
    here = here + draw_step(pi, walk_seed, n);
    path.tau.push_back(t);
    path.x.push_back(here);
  }
  return path;
}

WalkPath simulate_timechange(LatticeEnvironment& env, const RateFunction& phi,
                             const JumpDistribution& pi, std::size_t n_jumps,
                             std::uint64_t walk_seed) {
  if (phi.zero_tail()) throw Error(ErrorCode::ZeroRateTail, "time change needs phi > 0");
  const bool always = phi.constant_value() == 1.0;
  WalkPath path;
  path.d = env.dimension();
  path.construction = Construction::TimeChange;
  path.env_seed = env.seed();
  path.walk_seed = walk_seed;
  path.tau.assign(1, 0.0);
  path.x.assign(1, {0, 0, 0});
  double t = 0.0;
  Site here{0, 0, 0};
  for (std::uint64_t n = 0; n < n_jumps; ++n) {
    const double V = split_stream(walk_seed, StreamTag::Clock, {n}).exponential();
    if (always) {
      t += V;
    } else {
      double remain = V;
      while (true) {
        const double rate = phi(static_cast<std::size_t>(env.state_at(here, t)));
        const double te = env.next_event_time(here);
        const double seg = rate * (te - t);
        if (seg >= remain) {
          t += remain / rate;
          break;
        }
        remain -= seg;
        t = te;
      }
    }
    here = here + draw_step(pi, walk_seed, n);
    path.tau.push_back(t);
    path.x.push_back(here);
    path.clock_increments.push_back(V);
  }
  return path;
}

std::vector<double> clock_increments(const WalkPath& path, const LatticeEnvironment& env,
                                     const RateFunction& phi) {
  if (env.seed() != path.env_seed) {
    throw Error(ErrorCode::SeedMismatch, "environment seed differs from the path's");
  }
  LatticeEnvironment replay(env.dimension(), env.params(), env.init(), env.seed());
  std::vector<double> out;
  out.reserve(path.jumps());
  auto rate = [&](int s) { return phi(static_cast<std::size_t>(s)); };
  for (std::size_t n = 0; n < path.jumps(); ++n) {
    out.push_back(replay.integrate(path.x[n], path.tau[n], path.tau[n + 1], rate));
  }
  return out;
}

std::size_t jump_count(const WalkPath& path, double t) {
  const auto it = std::upper_bound(path.tau.begin(), path.tau.end(), t);
  return static_cast<std::size_t>(it - path.tau.begin()) - 1;
}

Site position_at(const WalkPath& path, double t) { return path.x[jump_count(path, t)]; }

CutTimes cut_times(const std::vector<Site>& x, std::size_t N, std::optional<std::size_t> buffer) {
  CutTimes out;
  out.buffer = buffer.value_or(N / 10);
  if (N == 0 || x.size() < N + 1 || out.buffer > N) return out;
  std::unordered_map<std::uint64_t, std::size_t> last;
  last.reserve(N + 1);
  for (std::size_t i = 0; i <= N; ++i) last[site_key(x[i])] = i;
  std::size_t reach = 0;
  for (std::size_t n = 0; n + out.buffer <= N && n < N; ++n) {
    reach = std::max(reach, last[site_key(x[n])]);
    if (reach <= n) out.indices.push_back(n);
  }
  return out;
}

std::vector<Site> backward_walk(const std::vector<Site>& x, std::size_t n) {
  if (n == 0 || n > x.size()) throw Error(ErrorCode::OutOfRange, "backward walk needs 1 <= n <= len");
  std::vector<Site> z(n);
  const Site& anchor = x[n - 1];
  for (std::size_t l = 0; l < n; ++l) z[l] = x[n - 1 - l] - anchor;
  return z;
}

}  // namespace bdwalk
