#include "bdwalk/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "bdwalk/error.hpp"
#include "bdwalk/kernels.hpp"
#include "bdwalk/parallel.hpp"

namespace bdwalk {

void throw_stalled() {
  throw Error(ErrorCode::Stalled, "no accepted mark within the time budget");
}

MarkField::Marks& MarkField::touch(const Site& x) {
  const std::uint64_t key = site_key(x);
  auto it = sites_.find(key);
  if (it != sites_.end()) return it->second;
  return sites_.emplace(key, Marks{split_stream(seed_, StreamTag::Marks, {key}), {}, {}})
      .first->second;
}

void MarkField::extend(Marks& m) {
  const double last = m.time.empty() ? 0.0 : m.time.back();
  m.time.push_back(last + m.rng.exponential());
  m.u.push_back(m.rng.uniform());
}

DistTable first_jump_law(const BDParams& params, const RateFunction& phi) {
  const DistTable nu = stationary_distribution(params);
  const std::size_t N = nu.size() + 32;
  std::vector<double> sub(N + 1, 0.0), diag(N + 1, 0.0), sup(N + 1, 0.0), rhs(N + 1, 0.0);
  for (std::size_t n = 0; n <= N; ++n) {
    diag[n] = phi(n) + (n < N ? params.p(n) : 0.0) + (n >= 1 ? params.q(n) : 0.0);
    if (n >= 1) sub[n] = -params.p(n - 1);
    if (n < N) sup[n] = -params.q(n + 1);
    rhs[n] = nu.pmf(n);
  }
  rhs[N] += nu.tail_mass > 0.0 ? 1.0 - nu.cdf(N) : 0.0;
  // Thomas forward sweep, then back substitution.
  for (std::size_t n = 1; n <= N; ++n) {
    const double w = sub[n] / diag[n - 1];
    diag[n] -= w * sup[n - 1];
    rhs[n] -= w * rhs[n - 1];
  }
  std::vector<double> eta(N + 1);
  eta[N] = rhs[N] / diag[N];
  for (std::size_t n = N; n-- > 0;) eta[n] = (rhs[n] - sup[n] * eta[n + 1]) / diag[n];
  DistTable lambda;
  lambda.weights.resize(N + 1);
  double total = 0.0;
  for (std::size_t n = 0; n <= N; ++n) {
    lambda.weights[n] = eta[n] * phi(n);
    total += lambda.weights[n];
  }
  for (double& w : lambda.weights) w /= total;
  return lambda;
}

DominationRecord dominating_array(int d, const BDParams& params, const RateFunction& phi,
                                  const JumpDistribution& pi, const InitDistSpec& init,
                                  std::size_t n_jumps, std::uint64_t seed) {
  if (!phi.monotone()) throw Error(ErrorCode::NonMonotonePhi, "phi must be non-increasing");
  const DistTable nu = stationary_distribution(params);
  const DistTable mu0 = init_law(init, params);
  for (std::size_t k = 0; k < std::max(nu.size(), mu0.size()) + 4; ++k) {
    if (mu0.cdf(k) < nu.cdf(k) - 1e-12) {
      throw Error(ErrorCode::InitNotDominated, "initial law not dominated by nu");
    }
  }
  const DistTable lambda = first_jump_law(params, phi);

  SynchronousField field(d, params, seed);
  const int lo = field.add_chain(mu0);
  const int up = field.add_chain(nu);
  const int lo_audit = field.add_chain(mu0);
  const int up_audit = field.add_chain(nu);
  MarkField marks(seed);

  DominationRecord rec;
  rec.x.push_back({0, 0, 0});
  for (std::size_t n = 0; n < n_jumps; ++n) rec.x.push_back(rec.x.back() + draw_step(pi, seed, n));

  auto rate_of = [&](int chain, const Site& x) {
    return [&, chain](double s) { return phi(static_cast<std::size_t>(field.state(chain, x, s))); };
  };

  rec.tau.push_back(0.0);
  for (std::size_t n = 0; n < n_jumps; ++n) {
    rec.tau.push_back(marks.next_accepted(rec.x[n], rec.tau.back(), rate_of(lo, rec.x[n])));
  }

  rec.tau_upper.push_back(0.0);
  for (std::size_t n = 0; n < n_jumps; ++n) {
    const Site& x = rec.x[n];
    const double s = marks.next_accepted(x, rec.tau_upper.back(), rate_of(up, x));
    const int V = field.state(up, x, s);
    const double u = split_stream(seed, StreamTag::Refresh, {n}).uniform();
    const double below = V > 0 ? lambda.cdf(static_cast<std::size_t>(V - 1)) : 0.0;
    const double w = std::min(below + u * lambda.pmf(static_cast<std::size_t>(V)), 1.0 - 1e-17);
    int W = static_cast<int>(nu.quantile(w));
    if (W < V) {
      W = V;
      ++rec.refresh_clamps;
    }
    field.overwrite(up, x, s, W);
    rec.refreshes.push_back({n, x, s, V, W});
    rec.tau_upper.push_back(s);
  }

  for (std::size_t n = 0; n <= n_jumps; ++n) {
    if (rec.tau[n] > rec.tau_upper[n]) ++rec.jump_violations;
  }

  // Replay both chains on audit copies: Poisson audit times, every jump time
  // touching the site, and both sides of each refresh.
  const double horizon = std::max(rec.tau.back(), rec.tau_upper.back());
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i <= n_jumps; ++i) {
    const Site& x = rec.x[i];
    const std::uint64_t key = site_key(x);
    if (!seen.insert(key).second) continue;
    std::vector<std::pair<double, int>> points;  // (time, refresh index or -1)
    Xoshiro256 arng = split_stream(seed, StreamTag::Audit, {key});
    for (double t = arng.exponential(); t <= horizon; t += arng.exponential()) points.push_back({t, -1});
    for (std::size_t n = 0; n <= n_jumps; ++n) {
      if (rec.x[n] == x) {
        points.push_back({rec.tau[n], -1});
        points.push_back({rec.tau_upper[n], -1});
        if (n < n_jumps) {
          points.push_back({rec.tau[n + 1], -1});
          points.push_back({rec.tau_upper[n + 1], -1});
        }
      }
    }
    for (std::size_t k = 0; k < rec.refreshes.size(); ++k) {
      if (rec.refreshes[k].site == x) points.push_back({rec.refreshes[k].time, static_cast<int>(k)});
    }
    std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && a.second < b.second);
    });
    for (const auto& [t, k] : points) {
      auto check = [&] {
        ++rec.order_checks;
        if (field.state(lo_audit, x, t) > field.state(up_audit, x, t)) ++rec.order_violations;
      };
      check();
      if (k >= 0) {
        field.overwrite(up_audit, x, t, rec.refreshes[k].after);
        check();
      }
    }
  }
  return rec;
}

std::vector<int> first_jump_environment_sample(const BDParams& params, const RateFunction& phi,
                                               std::size_t replicas, std::uint64_t seed,
                                               int workers) {
  const JumpDistribution pi = JumpDistribution::symmetric_unit(1);
  return run_replicas<int>(replicas, workers, [&](std::size_t r) {
    const std::uint64_t m = replica_seed(seed, r);
    LatticeEnvironment env(1, params, InitDistSpec::stationary(), m);
    const WalkPath path = simulate_thinning(env, phi, pi, StopRule::jumps(1), m);
    return env.state_at({0, 0, 0}, path.tau[1]);
  });
}

SubadditiveTable dominated_array(int d, const BDParams& params, const RateFunction& phi,
                                 const JumpDistribution& pi, std::size_t N, std::uint64_t seed) {
  if (!phi.monotone()) throw Error(ErrorCode::NonMonotonePhi, "phi must be non-increasing");
  SynchronousField field(d, params, seed);
  MarkField marks(seed);
  std::vector<Site> x{{0, 0, 0}};
  for (std::size_t n = 0; n < N; ++n) x.push_back(x.back() + draw_step(pi, seed, n));

  auto run_from = [&](int chain, std::size_t m, double start, std::vector<double>& times) {
    double t = start;
    times.push_back(t);
    for (std::size_t k = m; k < N; ++k) {
      const Site& site = x[k];
      t = marks.next_accepted(site, t, [&](double s) {
        return phi(static_cast<std::size_t>(field.state(chain, site, s)));
      });
      times.push_back(t);
    }
  };

  SubadditiveTable table;
  table.N = N;
  const int base = field.add_fixed_chain(0, 0.0);
  run_from(base, 0, 0.0, table.tau);
  table.L.push_back(table.tau);
  for (std::size_t m = 1; m <= N; ++m) {
    const int chain = field.add_fixed_chain(0, table.tau[m]);
    std::vector<double> restart;
    run_from(chain, m, table.tau[m], restart);
    std::vector<double> row(restart.size());
    for (std::size_t k = 0; k < restart.size(); ++k) {
      row[k] = restart[k] - table.tau[m];
      // Compared on absolute times: L_{0,n} >= L_{0,m} + L_{m,n} iff the
      // restarted walk's jump is no later than the original one.
      if (restart[k] > table.tau[m + k]) ++table.violations;
    }
    table.L.push_back(std::move(row));
  }
  return table;
}

MuEstimate estimate_mu(const ModelSpec& model, std::size_t n, std::size_t replicas,
                       std::uint64_t seed, double level, int workers, bool exploratory) {
  MuEstimate est;
  est.n = n;
  est.replicas = replicas;
  est.level = level;
  if (!check_strong_ergodic(model.params).holds) est.unmet.push_back("strongly_ergodic");
  if (!model.phi.monotone()) est.unmet.push_back("monotone_phi");
  if (!est.unmet.empty() && !exploratory) {
    std::string what;
    for (const auto& u : est.unmet) what += (what.empty() ? "" : ", ") + u;
    throw Error(ErrorCode::ConditionsUnmet, what);
  }
  if (n < 2 || replicas < 2) throw Error(ErrorCode::OutOfRange, "need n >= 2 and replicas >= 2");

  struct Row {
    double full, half, first;
  };
  const auto rows = run_replicas<Row>(replicas, workers, [&](std::size_t r) {
    const std::uint64_t m = replica_seed(seed, r);
    LatticeEnvironment env(model.d, model.params, model.init, m);
    const WalkPath path = simulate_thinning(env, model.phi, model.pi, StopRule::jumps(n), m);
    const std::size_t h = n / 2;
    return Row{path.tau[n] / static_cast<double>(n), path.tau[h] / static_cast<double>(h),
               path.tau[1]};
  });
  std::vector<double> full(replicas), half(replicas), first(replicas);
  for (std::size_t r = 0; r < replicas; ++r) {
    full[r] = rows[r].full;
    half[r] = rows[r].half;
    first[r] = rows[r].first;
  }
  const auto& k = kernels::active();
  const double R = static_cast<double>(replicas);
  double s = 0.0, ss = 0.0;
  k.blocked_sum(full.data(), replicas, &s, &ss);
  est.mu_hat = s / R;
  const double var = std::max(0.0, (ss - R * est.mu_hat * est.mu_hat) / (R - 1.0));
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
  est.half_width = z * std::sqrt(var / R);
  est.ci_lo = est.mu_hat - est.half_width;
  est.ci_hi = est.mu_hat + est.half_width;
  est.positive = est.ci_lo > 0.0;
  k.blocked_sum(half.data(), replicas, &s, &ss);
  est.mu_half = s / R;
  k.blocked_sum(first.data(), replicas, &s, &ss);
  est.mean_tau1 = s / R;
  return est;
}

MeetingRecord difference_walk(int d, const BDParams& params, const RateFunction& phi,
                              const JumpDistribution& pi, std::size_t n_steps, std::uint64_t seed,
                              const DifferenceOptions& opt) {
  CoupledEnvironment env(d, params, opt.initA, opt.initB, seed, CouplingMode::Coalescing);
  const bool always = phi.constant_value() == 1.0;
  struct Walker {
    explicit Walker(std::uint64_t s) : seed(s) {}
    std::uint64_t seed;
    Site x{0, 0, 0};
    std::uint64_t n = 0;
    Xoshiro256 rng;
    double s = 0.0;
    double u = 0.0;
    void draw() {
      s += rng.exponential();
      u = rng.uniform();
    }
    void restart() { rng = split_stream(seed, StreamTag::Thinning, {n}); }
  };
  const std::uint64_t w1 = derive_seed(seed, StreamTag::Sample, 1);
  const std::uint64_t w2 = opt.same_marks ? w1 : derive_seed(seed, StreamTag::Sample, 2);
  Walker walkers[2] = {Walker(w1), Walker(w2)};
  for (auto& w : walkers) {
    w.restart();
    w.draw();
  }
  MeetingRecord rec;
  bool apart = false;
  while (rec.steps < n_steps) {
    const double now = std::min(walkers[0].s, walkers[1].s);
    bool moved = false;
    for (int i = 0; i < 2; ++i) {
      Walker& w = walkers[i];
      if (w.s != now) continue;
      double rate = 1.0;
      if (!always) {
        const auto [a, b] = env.state_at(w.x, now);
        rate = phi(static_cast<std::size_t>(i == 0 ? a : b));
      }
      if (w.u < rate) {
        w.x = w.x + draw_step(pi, w.seed, w.n);
        ++w.n;
        ++rec.steps;
        w.restart();
        moved = true;
      }
      w.draw();
    }
    if (moved) {
      const bool together = walkers[0].x == walkers[1].x;
      if (together && apart) {
        rec.meeting_steps.push_back(rec.steps);
        rec.meeting_times.push_back(now);
      }
      apart = !together;
    }
  }
  return rec;
}

}  // namespace bdwalk
