#include "bdwalk/environment.hpp"

#include <algorithm>
#include <cmath>

#include "bdwalk/error.hpp"

namespace bdwalk {

void throw_nonmonotone() {
  throw Error(ErrorCode::NonMonotoneQuery, "query earlier than the previous one at this site");
}

InitDistSpec InitDistSpec::product(std::vector<double> weights, double beta, double C) {
  if (weights.empty()) throw Error(ErrorCode::OutOfRange, "empty initial table");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorCode::OutOfRange, "negative initial weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::OutOfRange, "initial weights must sum to 1");
  if (!(beta > 0.0) || !(C > 0.0)) {
    throw Error(ErrorCode::InitNotExponentialTail, "beta and C must be positive");
  }
  double above = total;
  for (std::size_t n = 0; n < weights.size(); ++n) {
    above -= weights[n];
    if (above > C * std::exp(-beta * static_cast<double>(n)) + 1e-15) {
      throw Error(ErrorCode::InitNotExponentialTail,
                  "P(X > " + std::to_string(n) + ") exceeds C exp(-beta n)");
    }
  }
  InitDistSpec spec;
  spec.kind = InitKind::ProductTable;
  for (double& w : weights) w /= total;
  spec.table.weights = std::move(weights);
  spec.beta = beta;
  spec.C = C;
  return spec;
}

DistTable init_law(const InitDistSpec& init, const BDParams& params) {
  switch (init.kind) {
    case InitKind::AllZero: return DistTable{{1.0}, 0.0, 0.0, 1e-12};
    case InitKind::Stationary: return stationary_distribution(params);
    case InitKind::ProductTable: return init.table;
  }
  return DistTable{{1.0}, 0.0, 0.0, 1e-12};
}

namespace {

void check_dimension(int d) {
  if (d < 1 || d > 3) throw Error(ErrorCode::UnsupportedDimension, "d must be 1, 2 or 3");
}

}  // namespace

// ---------------------------------------------------------------------------

LatticeEnvironment::LatticeEnvironment(int d, BDParams params, InitDistSpec init, std::uint64_t seed)
    : d_(d), params_(std::move(params)), init_(std::move(init)), seed_(seed) {
  check_dimension(d);
  law0_ = init_law(init_, params_);
  sites_.reserve(1024);
}

LatticeEnvironment::SiteState& LatticeEnvironment::touch(const Site& x) {
  const std::uint64_t key = site_key(x);
  if (key == last_key_) return *last_;
  auto it = sites_.find(key);
  if (it == sites_.end()) {
    Xoshiro256 rng = split_stream(seed_, StreamTag::Site, {key});
    const double u0 = rng.uniform();
    SiteState s{static_cast<int>(law0_.quantile(u0)), 0.0, 0.0, 0.0, EventClock(rng)};
    const auto d = s.clock.next();
    s.next_time = d.dt;
    s.next_u = d.u;
    it = sites_.emplace(key, s).first;
  }
  last_key_ = key;
  last_ = &it->second;
  return it->second;
}

void LatticeEnvironment::advance(SiteState& s, double t) {
  while (s.next_time <= t) {
    s.state = bd_step(params_, s.state, s.next_u);
    const auto d = s.clock.next();
    s.next_time += d.dt;
    s.next_u = d.u;
    ++events_;
  }
  if (t > s.last_query) s.last_query = t;
}

int LatticeEnvironment::state_at(const Site& x, double t) {
  SiteState& s = touch(x);
  if (t < s.last_query) throw_nonmonotone();
  advance(s, t);
  return s.state;
}

double LatticeEnvironment::next_event_time(const Site& x) { return touch(x).next_time; }

// ---------------------------------------------------------------------------

CoupledEnvironment::CoupledEnvironment(int d, BDParams params, InitDistSpec initA,
                                       InitDistSpec initB, std::uint64_t seed, CouplingMode mode)
    : d_(d), params_(std::move(params)), seed_(seed), mode_(mode) {
  check_dimension(d);
  lawA_ = init_law(initA, params_);
  lawB_ = init_law(initB, params_);
}

CoupledEnvironment::Pair& CoupledEnvironment::touch(const Site& x) {
  const std::uint64_t key = site_key(x);
  auto it = sites_.find(key);
  if (it != sites_.end()) return it->second;
  Xoshiro256 ra = split_stream(seed_, StreamTag::Site, {key});
  Xoshiro256 rb = split_stream(seed_, StreamTag::SiteB, {key});
  const double u0 = ra.uniform();
  rb.uniform();
  Pair p{static_cast<int>(lawA_.quantile(u0)),
         static_cast<int>(lawB_.quantile(u0)),
         0.0, 0.0, 0.0, 0.0, 0.0, std::nullopt, EventClock(ra), EventClock(rb)};
  if (p.a == p.b) p.met = 0.0;
  const auto da = p.clock_a.next();
  p.next_a = mode_ == CouplingMode::Synchronous ? 0.5 * da.dt : da.dt;
  p.u_a = da.u;
  const auto db = p.clock_b.next();
  p.next_b = db.dt;
  p.u_b = db.u;
  return sites_.emplace(key, p).first->second;
}

void CoupledEnvironment::advance(Pair& s, double t) {
  if (mode_ == CouplingMode::Synchronous) {
    while (s.next_a <= t) {
      s.a = synchronous_step(params_, s.a, s.u_a);
      s.b = synchronous_step(params_, s.b, s.u_a);
      if (!s.met && s.a == s.b) s.met = s.next_a;
      const auto d = s.clock_a.next();
      s.next_a += 0.5 * d.dt;
      s.u_a = d.u;
    }
  } else {
    while (true) {
      if (s.met) {
        if (s.next_a > t) break;
        s.a = bd_step(params_, s.a, s.u_a);
        s.b = s.a;
      } else {
        const double next = std::min(s.next_a, s.next_b);
        if (next > t) break;
        if (s.next_a <= s.next_b) {
          s.a = bd_step(params_, s.a, s.u_a);
        } else {
          s.b = bd_step(params_, s.b, s.u_b);
          const auto d = s.clock_b.next();
          s.next_b += d.dt;
          s.u_b = d.u;
          if (s.a == s.b) s.met = next;
          continue;
        }
        if (s.a == s.b) s.met = s.next_a;
      }
      const auto d = s.clock_a.next();
      s.next_a += d.dt;
      s.u_a = d.u;
    }
  }
  if (t > s.last_query) s.last_query = t;
}

std::pair<int, int> CoupledEnvironment::state_at(const Site& x, double t) {
  Pair& s = touch(x);
  if (t < s.last_query) throw_nonmonotone();
  advance(s, t);
  return {s.a, s.b};
}

std::optional<double> CoupledEnvironment::coalescence_time(const Site& x, double horizon) {
  Pair& s = touch(x);
  if (horizon >= s.last_query) advance(s, horizon);
  if (s.met && *s.met <= horizon) return s.met;
  return std::nullopt;
}

CoupledEnvironment coalescing_pair(int d, BDParams params, InitDistSpec initA, InitDistSpec initB,
                                   std::uint64_t seed) {
  return CoupledEnvironment(d, std::move(params), std::move(initA), std::move(initB), seed,
                            CouplingMode::Coalescing);
}

// ---------------------------------------------------------------------------

SynchronousField::SynchronousField(int d, BDParams params, std::uint64_t seed)
    : d_(d), params_(std::move(params)), seed_(seed) {
  check_dimension(d);
}

int SynchronousField::add_chain(DistTable law, double start) {
  chains_.push_back({std::move(law), 0, start});
  return static_cast<int>(chains_.size() - 1);
}

int SynchronousField::add_fixed_chain(int state, double start) {
  chains_.push_back({std::nullopt, state, start});
  return static_cast<int>(chains_.size() - 1);
}

SynchronousField::SiteRec& SynchronousField::touch(const Site& x) {
  const std::uint64_t key = site_key(x);
  auto it = sites_.find(key);
  if (it != sites_.end()) return it->second;
  SiteRec rec{0.0, split_stream(seed_, StreamTag::Site, {key}), {}, {}, {}};
  rec.u_init = rec.rng.uniform();
  return sites_.emplace(key, std::move(rec)).first->second;
}

void SynchronousField::extend(SiteRec& s, double t) {
  double last = s.times.empty() ? 0.0 : s.times.back();
  while (s.times.empty() || last <= t) {
    last += 0.5 * s.rng.exponential();
    s.times.push_back(last);
    s.us.push_back(s.rng.uniform());
  }
}

SynchronousField::Cursor& SynchronousField::cursor(int chain, SiteRec& s) {
  if (s.cursors.size() <= static_cast<std::size_t>(chain)) s.cursors.resize(chain + 1);
  Cursor& c = s.cursors[chain];
  if (!c.live) {
    const ChainSpec& spec = chains_[chain];
    c.state = spec.law ? static_cast<int>(spec.law->quantile(s.u_init)) : spec.fixed_state;
    c.last = spec.start;
    extend(s, spec.start);
    c.index = static_cast<std::uint32_t>(
        std::upper_bound(s.times.begin(), s.times.end(), spec.start) - s.times.begin());
    c.live = true;
  }
  return c;
}

void SynchronousField::advance(SiteRec& s, Cursor& c, double t) {
  extend(s, t);
  while (s.times[c.index] <= t) {
    c.state = synchronous_step(params_, c.state, s.us[c.index]);
    ++c.index;
  }
  c.last = t;
}

int SynchronousField::state(int chain, const Site& x, double t) {
  SiteRec& s = touch(x);
  Cursor& c = cursor(chain, s);
  if (t < c.last) throw_nonmonotone();
  advance(s, c, t);
  return c.state;
}

void SynchronousField::overwrite(int chain, const Site& x, double t, int new_state) {
  SiteRec& s = touch(x);
  Cursor& c = cursor(chain, s);
  if (t < c.last) throw_nonmonotone();
  advance(s, c, t);
  c.state = new_state;
}

const std::vector<double>& SynchronousField::event_times(const Site& x) { return touch(x).times; }

double SynchronousField::init_uniform(const Site& x) { return touch(x).u_init; }

}  // namespace bdwalk
