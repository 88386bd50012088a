#include "bdwalk/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "bdwalk/error.hpp"
#include "bdwalk/parallel.hpp"
#include "bdwalk/stats.hpp"

namespace bdwalk {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error(ErrorCode::RuntimeFailure, "cannot write " + path.string());
    line(header);
  }
  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

double zq(double level) { return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level); }

struct Sink {
  fs::path data;
  json results = json::object();
  std::vector<TestReport> tests;
  std::vector<std::pair<std::string, bool>> checks;  ///< verdicts that are not TestReports
  std::ostringstream text;

  void test(TestReport r) {
    text << r.test << ": statistic " << num(r.statistic) << " critical " << num(r.critical) << " -> "
         << (r.pass ? "pass" : "fail") << '\n';
    tests.push_back(std::move(r));
  }
  void check(const std::string& name, bool ok) {
    text << name << ": " << (ok ? "pass" : "fail") << '\n';
    checks.push_back({name, ok});
  }
  bool pass() const {
    for (const auto& t : tests)
      if (!t.pass) return false;
    for (const auto& c : checks)
      if (!c.second) return false;
    return true;
  }
};

std::size_t need_jumps(const ExperimentConfig& cfg, std::size_t fallback) {
  if (cfg.stop.t_end) throw Error(ErrorCode::ConfigError, "run.stop: this subcommand needs n_jumps");
  return cfg.stop.n_jumps.value_or(fallback);
}

double need_time(const ExperimentConfig& cfg) {
  if (!cfg.stop.t_end) throw Error(ErrorCode::ConfigError, "run.stop: this subcommand needs t_end");
  return *cfg.stop.t_end;
}

bool homogeneous(const BDParams& p) {
  for (double v : p.p_table())
    if (v != p.p_tail()) return false;
  return true;
}

bool phi_bounded_below(const RateFunction& phi) {
  if (phi.tail() <= 0.0) return false;
  for (double v : phi.table())
    if (v <= 0.0) return false;
  return true;
}

bool init_dominated(const InitDistSpec& init, const BDParams& params) {
  const DistTable nu = stationary_distribution(params);
  const DistTable mu0 = init_law(init, params);
  for (std::size_t k = 0; k < std::max(nu.size(), mu0.size()) + 4; ++k)
    if (mu0.cdf(k) < nu.cdf(k) - 1e-12) return false;
  return true;
}

json mu_json(const MuEstimate& m) {
  return {{"mu_hat", m.mu_hat},       {"ci", {m.ci_lo, m.ci_hi}},   {"n", m.n},
          {"replicas", m.replicas},   {"level", m.level},          {"half_width", m.half_width},
          {"mu_half", m.mu_half},     {"mean_tau1", m.mean_tau1},  {"positive", m.positive}};
}

// mu_hat on independent replicas, at n matched to the walk's mean jump count
// unless fixed in the config.
MuEstimate mu_pipeline(const ExperimentConfig& cfg, const ModelSpec& model, double mean_jumps,
                       std::uint64_t salt) {
  const std::size_t n = cfg.analysis.mu_n.value_or(
      std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(mean_jumps))));
  const std::size_t R = cfg.analysis.mu_replicas.value_or(cfg.replicas);
  return estimate_mu(model, n, R, derive_seed(cfg.seed, StreamTag::Reference, salt),
                     cfg.analysis.level, cfg.workers, true);
}

struct TimedRun {
  Site x;
  std::size_t jumps;
  std::array<double, 3> jitter;
};

std::vector<TimedRun> run_to_time(const ModelSpec& model, double t, std::size_t R, std::uint64_t seed,
                                  int workers) {
  return run_replicas<TimedRun>(R, workers, [&](std::size_t r) {
    const std::uint64_t m = replica_seed(seed, r);
    LatticeEnvironment env(model.d, model.params, model.init, m);
    const WalkPath path = simulate_thinning(env, model.phi, model.pi, StopRule::time(t), m);
    Xoshiro256 j = split_stream(m, StreamTag::Jitter);
    TimedRun out{position_at(path, t), jump_count(path, t), {}};
    for (double& v : out.jitter) v = j.uniform() - 0.5;
    return out;
  });
}

double mean_jumps(const std::vector<TimedRun>& runs) {
  double s = 0.0;
  for (const auto& r : runs) s += static_cast<double>(r.jumps);
  return s / static_cast<double>(runs.size());
}

// ---------------------------------------------------------------- check

void run_check(const ExperimentConfig& cfg, Sink& out) {
  const auto& a = cfg.analysis;
  const BDParams& params = cfg.model.params;
  const DistTable nu = stationary_distribution(params);
  const DistTable nupsi = modified_stationary(params, cfg.model.phi);
  const auto erg = check_ergodic(params);
  const auto strong = check_strong_ergodic(params);
  out.text << "ergodic: " << (erg.holds ? "holds" : "fails") << " (sum " << num(erg.value) << ")\n";
  out.text << "strongly_ergodic: " << (strong.holds ? "holds" : "fails") << " (sum "
           << num(strong.value) << ")\n";
  out.check("ergodic", erg.holds);
  out.check("strongly_ergodic", strong.holds);
  if (homogeneous(params) && strong.holds) {
    const double rho = params.tail_rho();
    const double closed = rho / ((1.0 - rho) * (1.0 - rho) * (1.0 - rho));
    out.results["strong_sum_closed_form"] = closed;
    out.check("strong_sum_matches_geometric_form", std::abs(strong.value - closed) <= 1e-10);
  }

  double worst = std::numeric_limits<double>::infinity();
  {
    Csv csv(out.data / "stationary.csv", {"n", "nu", "nu_psi", "cdf_nu", "cdf_nu_psi"});
    for (std::size_t k = 0; k <= a.nu_psi_k_max; ++k) {
      const double diff = nupsi.cdf(k) - nu.cdf(k);
      worst = std::min(worst, diff);
      csv.line({std::to_string(k), num(nu.pmf(k)), num(nupsi.pmf(k)), num(nu.cdf(k)), num(nupsi.cdf(k))});
    }
  }
  out.results["nu_psi"] = {{"k_max", a.nu_psi_k_max},
                           {"min_cdf_difference", worst},
                           {"cdf_nu_psi_0", nupsi.cdf(0)},
                           {"cdf_nu_0", nu.cdf(0)},
                           {"monotone_phi", cfg.model.phi.monotone()}};
  if (cfg.model.phi.monotone()) out.check("nu_psi_dominated_by_nu", worst >= -1e-12);

  json hit = json::object();
  std::vector<double> Tn;
  for (std::size_t n : a.hitting_start) Tn.push_back(hitting_time_mean(params, n));
  hit["start"] = a.hitting_start;
  hit["T_n"] = Tn;
  const double S1 = hitting_second_moment(params);
  const double Enu = stationary_mean_hitting(params);
  hit["S_1"] = S1;
  hit["E_nu_T0"] = Enu;
  if (a.hitting_mc_runs > 0) {
    const auto mc = hitting_monte_carlo(params, a.hitting_start, a.hitting_mc_runs, cfg.seed);
    hit["mc"] = {{"runs", mc.runs},
                 {"T_n", mc.mean_steps},
                 {"T_n_se", mc.mean_steps_se},
                 {"E_nu_T0", mc.stationary_mean},
                 {"E_nu_T0_se", mc.stationary_mean_se},
                 {"E_1_T0_sq", mc.second_moment_from_one},
                 {"E_1_T0_sq_se", mc.second_moment_se}};
    bool ok = true;
    for (std::size_t i = 0; i < Tn.size(); ++i) ok = ok && std::abs(mc.mean_steps[i] / Tn[i] - 1.0) <= 0.02;
    out.check("hitting_mean_mc_within_2pct", ok);
    out.check("stationary_hitting_mc_within_2pct", std::abs(mc.stationary_mean / Enu - 1.0) <= 0.02);
    out.check("second_moment_mc_within_5pct", std::abs(mc.second_moment_from_one / S1 - 1.0) <= 0.05);
  }
  out.results["hitting"] = hit;
  out.results["ergodic_sum"] = erg.value;
  out.results["strong_sum"] = strong.value;
}

// ---------------------------------------------------------------- simulate

void run_simulate(const ExperimentConfig& cfg, Sink& out) {
  if (!cfg.stop.n_jumps && !cfg.stop.t_end) throw Error(ErrorCode::ConfigError, "run.stop is required");
  const ModelSpec& m = cfg.model;
  const bool B = cfg.construction == Construction::TimeChange;
  if (B && !cfg.stop.n_jumps) throw Error(ErrorCode::ConfigError, "timechange needs run.stop.n_jumps");
  struct Row {
    std::vector<double> increments;
    WalkPath path;  // replica 0 only
    double last_tau = 0.0;
    std::size_t jumps = 0;
    double inversion_error = 0.0;
    std::size_t gap_violations = 0;
    double tau_b = 0.0;  // construction B tau_n for the comparison
  };
  const auto rows = run_replicas<Row>(cfg.replicas, cfg.workers, [&](std::size_t r) {
    const std::uint64_t s = replica_seed(cfg.seed, r);
    LatticeEnvironment env(m.d, m.params, m.init, s);
    Row row;
    WalkPath path = B ? simulate_timechange(env, m.phi, m.pi, *cfg.stop.n_jumps, s)
                      : simulate_thinning(env, m.phi, m.pi, cfg.stop, s);
    row.increments = clock_increments(path, env, m.phi);
    if (B) {
      for (std::size_t i = 0; i < row.increments.size(); ++i)
        row.inversion_error = std::max(row.inversion_error, std::abs(row.increments[i] - path.clock_increments[i]));
    } else {
      for (std::size_t i = 0; i < path.jumps(); ++i)
        row.gap_violations += path.tau[i + 1] - path.tau[i] < path.first_candidate_gap[i];
    }
    if (cfg.analysis.compare_constructions && cfg.stop.n_jumps) {
      LatticeEnvironment other(m.d, m.params, m.init, s);
      const WalkPath p2 = B ? simulate_thinning(other, m.phi, m.pi, cfg.stop, s)
                            : simulate_timechange(other, m.phi, m.pi, *cfg.stop.n_jumps, s);
      row.tau_b = p2.tau.back();
    }
    row.last_tau = path.tau.back();
    row.jumps = path.jumps();
    if (r == 0) row.path = std::move(path);
    return row;
  });

  {
    const WalkPath& p = rows.front().path;
    std::vector<std::string> head{"n", "tau_n"};
    for (int i = 0; i < m.d; ++i) head.push_back("x_" + std::to_string(i + 1));
    Csv csv(out.data / "path.csv", head);
    for (std::size_t n = 0; n <= p.jumps(); ++n) {
      std::vector<std::string> cells{std::to_string(n), num(p.tau[n])};
      for (int i = 0; i < m.d; ++i) cells.push_back(std::to_string(p.x[n][i]));
      csv.line(cells);
    }
  }
  std::vector<double> pooled;
  double inv = 0.0;
  std::size_t gaps = 0;
  std::vector<double> taus, taus_b;
  for (const auto& r : rows) {
    pooled.insert(pooled.end(), r.increments.begin(), r.increments.end());
    inv = std::max(inv, r.inversion_error);
    gaps += r.gap_violations;
    taus.push_back(r.last_tau);
    taus_b.push_back(r.tau_b);
  }
  {
    Csv csv(out.data / "increments.csv", {"k", "increment"});
    for (std::size_t k = 0; k < pooled.size(); ++k) csv.line({std::to_string(k), num(pooled[k])});
  }
  out.results["construction"] = B ? "timechange" : "thinning";
  out.results["increments"] = pooled.size();
  out.results["mean_final_tau"] = std::accumulate(taus.begin(), taus.end(), 0.0) / taus.size();
  if (B) {
    out.results["max_inversion_error"] = inv;
    out.check("inversion_exact_1e-9", inv <= 1e-9);
  } else {
    out.results["gap_violations"] = gaps;
    out.check("jump_gap_at_least_first_candidate", gaps == 0);
    if (pooled.size() >= 100) out.test(ks_exponential_test(pooled, cfg.analysis.alpha));
  }
  if (cfg.analysis.compare_constructions && cfg.stop.n_jumps) {
    auto ci = [&](const std::vector<double>& x) {
      double s = 0.0, ss = 0.0;
      for (double v : x) {
        s += v;
        ss += v * v;
      }
      const double n = static_cast<double>(x.size());
      const double mean = s / n;
      const double hw = zq(0.99) * std::sqrt(std::max(0.0, (ss - n * mean * mean) / (n - 1.0)) / n);
      return std::pair<double, double>{mean - hw, mean + hw};
    };
    const auto a = ci(taus), b = ci(taus_b);
    out.results["tau_n_ci_99"] = {{"primary", {a.first, a.second}}, {"other", {b.first, b.second}}};
    out.check("constructions_agree_99", a.first <= b.second && b.first <= a.second);
  }
}

// ---------------------------------------------------------------- estimate-mu

void run_estimate_mu(const ExperimentConfig& cfg, Sink& out) {
  const std::size_t n = need_jumps(cfg, 100);
  const MuEstimate mu = estimate_mu(cfg.model, n, cfg.replicas, cfg.seed, cfg.analysis.level,
                                    cfg.workers, true);
  out.results = mu_json(mu);
  {
    Csv csv(out.data / "mu.csv", {"n", "mu_hat", "ci_lo", "ci_hi", "mu_half", "mean_tau1"});
    csv.line({std::to_string(mu.n), num(mu.mu_hat), num(mu.ci_lo), num(mu.ci_hi), num(mu.mu_half),
              num(mu.mean_tau1)});
  }
  json line = {{"mu_hat", mu.mu_hat}, {"ci", {mu.ci_lo, mu.ci_hi}}, {"n", mu.n}, {"replicas", mu.replicas}};
  out.text << line.dump() << '\n';
  out.check("mu_positive", mu.positive);
}

// ---------------------------------------------------------------- lln

void run_lln(const ExperimentConfig& cfg, Sink& out) {
  const double t = need_time(cfg);
  const ModelSpec& m = cfg.model;
  const auto runs = run_to_time(m, t, cfg.replicas, cfg.seed, cfg.workers);
  const MuEstimate mu = mu_pipeline(cfg, m, mean_jumps(runs), 1);
  std::vector<Site> pos;
  for (const auto& r : runs) pos.push_back(r.x);
  const VelocityEstimate v = lln_slope(pos, m.d, t, cfg.analysis.level);
  std::array<double, 3> target{}, hw{};
  for (int i = 0; i < m.d; ++i) {
    target[i] = m.pi.mean()[i] / mu.mu_hat;
    hw[i] = std::abs(m.pi.mean()[i]) * mu.half_width / (mu.mu_hat * mu.mu_hat);
  }
  {
    std::vector<std::string> head{"replica", "jumps"};
    for (int i = 0; i < m.d; ++i) head.push_back("x_" + std::to_string(i + 1));
    Csv csv(out.data / "positions.csv", head);
    for (std::size_t r = 0; r < runs.size(); ++r) {
      std::vector<std::string> cells{std::to_string(r), std::to_string(runs[r].jumps)};
      for (int i = 0; i < m.d; ++i) cells.push_back(std::to_string(runs[r].x[i]));
      csv.line(cells);
    }
  }
  out.results["t"] = t;
  out.results["mean_jumps"] = mean_jumps(runs);
  out.results["velocity"] = std::vector<double>(v.mean.begin(), v.mean.begin() + m.d);
  out.results["velocity_half_width"] = std::vector<double>(v.half_width.begin(), v.half_width.begin() + m.d);
  out.results["target"] = std::vector<double>(target.begin(), target.begin() + m.d);
  out.results["target_half_width"] = std::vector<double>(hw.begin(), hw.begin() + m.d);
  out.results["mu"] = mu_json(mu);
  out.check("velocity_matches_mean_step_over_mu", within_joint_ci(v, target, hw));
}

// ---------------------------------------------------------------- clt

std::vector<std::array<double, 3>> normalized(const std::vector<TimedRun>& runs, int d, double t,
                                              double mu, bool jitter) {
  std::vector<std::array<double, 3>> z(runs.size());
  const double scale = std::sqrt(t / mu);
  for (std::size_t r = 0; r < runs.size(); ++r)
    for (int i = 0; i < d; ++i) z[r][i] = (runs[r].x[i] + (jitter ? runs[r].jitter[i] : 0.0)) / scale;
  return z;
}

void run_clt(const ExperimentConfig& cfg, Sink& out) {
  const double t = need_time(cfg);
  const auto& a = cfg.analysis;
  const int d = cfg.model.d;
  auto sample = [&](const ModelSpec& model, std::uint64_t seed, std::uint64_t salt, const std::string& tag) {
    const auto runs = run_to_time(model, t, cfg.replicas, seed, cfg.workers);
    const MuEstimate mu = mu_pipeline(cfg, model, mean_jumps(runs), salt);
    auto z = normalized(runs, d, t, mu.mu_hat, a.jitter);
    std::vector<std::string> head{"replica"};
    for (int i = 0; i < d; ++i) head.push_back("z_" + std::to_string(i + 1));
    Csv csv(out.data / ("clt_" + tag + ".csv"), head);
    for (std::size_t r = 0; r < z.size(); ++r) {
      std::vector<std::string> cells{std::to_string(r)};
      for (int i = 0; i < d; ++i) cells.push_back(num(z[r][i]));
      csv.line(cells);
    }
    out.results[tag] = {{"init", to_json(model.init)}, {"mean_jumps", mean_jumps(runs)}, {"mu", mu_json(mu)}};
    TestReport rep = normality_test(z, d, cfg.model.pi.covariance(), a.alpha);
    rep.test = "normality_" + tag;
    out.test(rep);
    return z;
  };
  const auto z1 = sample(cfg.model, cfg.seed, 1, "primary");
  out.results["t"] = t;
  out.results["jitter"] = a.jitter;
  if (a.compare_init) {
    ModelSpec other = cfg.model;
    other.init = *a.compare_init;
    const auto z2 = sample(other, derive_seed(cfg.seed, StreamTag::Init, 1), 2, "compare");
    // Coordinates are compared separately at a Bonferroni-split level.
    TestReport ks;
    ks.test = "ks_two_sample_inits";
    ks.alpha = a.alpha;
    for (int i = 0; i < d; ++i) {
      std::vector<double> u, w;
      for (const auto& v : z1) u.push_back(v[i]);
      for (const auto& v : z2) w.push_back(v[i]);
      TestReport part = ks_two_sample(u, w, a.alpha / d);
      ks.statistic = std::max(ks.statistic, part.statistic);
      ks.critical = part.critical;
      ks.n = part.n;
      ks.parts.push_back(part);
    }
    ks.pass = ks.recomputed_verdict();
    out.test(ks);
  }
}

// ---------------------------------------------------------------- dominance-audit

void run_first_jump(const ExperimentConfig& cfg, Sink& out) {
  const ModelSpec& m = cfg.model;
  const auto sample = first_jump_environment_sample(m.params, m.phi, cfg.replicas, cfg.seed, cfg.workers);
  const std::size_t nd = cfg.analysis.nu_draws.value_or(cfg.replicas);
  Xoshiro256 rng = split_stream(cfg.seed, StreamTag::Reference, {0});
  std::vector<int> ref(nd);
  for (auto& v : ref) v = sample_stationary(m.params, rng);
  auto write = [&](const std::string& name, const std::vector<int>& x) {
    std::map<int, std::size_t> c;
    for (int v : x) ++c[v];
    Csv csv(out.data / name, {"value", "count"});
    for (const auto& [v, k] : c) csv.line({std::to_string(v), std::to_string(k)});
  };
  write("first_jump.csv", sample);
  write("nu_draws.csv", ref);
  const DistTable nu = stationary_distribution(m.params);
  double mean = 0.0;
  for (int v : sample) mean += v;
  out.results["first_jump_mean"] = mean / sample.size();
  out.results["nu_mean"] = nu.mean();
  out.test(dominance_test(std::vector<double>(sample.begin(), sample.end()),
                          std::vector<double>(ref.begin(), ref.end()), cfg.analysis.alpha));
  if (m.phi.constant_value()) out.test(chi_square_test(sample, nu, cfg.analysis.alpha));
}

void run_pathwise(const ExperimentConfig& cfg, Sink& out) {
  const ModelSpec& m = cfg.model;
  const auto& a = cfg.analysis;
  const std::size_t nj = need_jumps(cfg, 100);
  std::vector<std::size_t> marks;
  for (std::size_t n : {std::size_t{1}, std::size_t{10}, std::size_t{50}, std::size_t{100}})
    if (n <= nj) marks.push_back(n);
  struct Row {
    std::vector<double> tau, tau_up;
    std::size_t jump_v, order_checks, order_v, clamps;
    std::vector<int> refresh;
  };
  const auto rows = run_replicas<Row>(cfg.replicas, cfg.workers, [&](std::size_t r) {
    const auto rec = dominating_array(m.d, m.params, m.phi, m.pi, m.init, nj, replica_seed(cfg.seed, r));
    Row row{{}, {}, rec.jump_violations, rec.order_checks, rec.order_violations, rec.refresh_clamps, {}};
    for (std::size_t n : marks) {
      row.tau.push_back(rec.tau[n]);
      row.tau_up.push_back(rec.tau_upper[n]);
    }
    // Refreshes within one replica are dependent through revisited sites, so
    // only the first enters the law check.
    if (!rec.refreshes.empty()) row.refresh.push_back(rec.refreshes.front().after);
    return row;
  });
  const std::size_t TR = a.table_replicas.value_or(cfg.replicas);
  const std::size_t N = a.table_n;
  const std::size_t k = N / 2;
  struct TableRow {
    std::size_t violations, m0_mismatch;
    double L0k, Lk2k;
  };
  const std::uint64_t tseed = derive_seed(cfg.seed, StreamTag::Reference, 2);
  const auto trows = run_replicas<TableRow>(TR, cfg.workers, [&](std::size_t r) {
    const auto tab = dominated_array(m.d, m.params, m.phi, m.pi, N, replica_seed(tseed, r));
    std::size_t mis = 0;
    for (std::size_t n = 0; n <= N; ++n) mis += tab.at(0, n) != tab.tau[n];
    return TableRow{tab.violations, mis, k ? tab.at(0, k) : 0.0, k ? tab.at(k, 2 * k) : 0.0};
  });

  std::size_t jv = 0, oc = 0, ov = 0, cl = 0, sv = 0, mis = 0;
  std::vector<int> pooled;
  {
    Csv csv(out.data / "violations.csv", {"replica", "kind", "count"});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      jv += rows[r].jump_v;
      oc += rows[r].order_checks;
      ov += rows[r].order_v;
      cl += rows[r].clamps;
      pooled.insert(pooled.end(), rows[r].refresh.begin(), rows[r].refresh.end());
      if (rows[r].jump_v) csv.line({std::to_string(r), "jump_order", std::to_string(rows[r].jump_v)});
      if (rows[r].order_v) csv.line({std::to_string(r), "environment_order", std::to_string(rows[r].order_v)});
    }
    for (std::size_t r = 0; r < trows.size(); ++r) {
      sv += trows[r].violations;
      mis += trows[r].m0_mismatch;
      if (trows[r].violations) csv.line({std::to_string(r), "superadditivity", std::to_string(trows[r].violations)});
    }
  }
  {
    Csv csv(out.data / "jump_means.csv", {"n", "mean_tau", "mean_tau_upper", "se_tau", "se_tau_upper"});
    json means = json::array();
    std::vector<double> mt, mu, st, su;
    for (std::size_t i = 0; i < marks.size(); ++i) {
      std::vector<double> x, y;
      for (const auto& r : rows) {
        x.push_back(r.tau[i]);
        y.push_back(r.tau_up[i]);
      }
      auto ms = [](const std::vector<double>& v) {
        double s = 0, ss = 0;
        for (double e : v) {
          s += e;
          ss += e * e;
        }
        const double n = static_cast<double>(v.size());
        const double mean = s / n;
        return std::pair<double, double>{mean, std::sqrt(std::max(0.0, (ss - n * mean * mean) / (n - 1)) / n)};
      };
      const auto [a1, b1] = ms(x);
      const auto [a2, b2] = ms(y);
      mt.push_back(a1);
      st.push_back(b1);
      mu.push_back(a2);
      su.push_back(b2);
      csv.line({std::to_string(marks[i]), num(a1), num(a2), num(b1), num(b2)});
      means.push_back({{"n", marks[i]}, {"tau", a1}, {"tau_upper", a2}, {"tau_upper_over_n", a2 / marks[i]}});
    }
    out.results["jump_means"] = means;
    // mean(tau_n) <= mean(tau_upper_n) <= n mean(tau_upper_1), each within a 99% CI.
    bool domesp = true;
    const double z = zq(0.99);
    for (std::size_t i = 0; i < marks.size(); ++i) {
      domesp = domesp && mt[i] <= mu[i] + z * std::hypot(st[i], su[i]);
      domesp = domesp && mu[i] <= marks[i] * mu[0] + z * std::hypot(su[i], marks[i] * su[0]);
    }
    if (marks.size() > 1 && marks[0] == 1) out.check("domination_mean_chain", domesp);
  }
  out.results["jump_violations"] = jv;
  out.results["order_checks"] = oc;
  out.results["order_violations"] = ov;
  out.results["refresh_clamps"] = cl;
  out.results["refresh_samples"] = pooled.size();
  out.results["superadditivity_violations"] = sv;
  out.results["table_n"] = N;
  out.results["table_replicas"] = TR;
  out.check("zero_jump_order_violations", jv == 0);
  out.check("zero_environment_order_violations", ov == 0);
  out.check("zero_superadditivity_violations", sv == 0);
  out.check("first_row_equals_jump_times", mis == 0);
  if (pooled.size() >= 100) {
    TestReport chi = chi_square_test(pooled, stationary_distribution(m.params), a.alpha);
    chi.test = "refresh_law_chi_square";
    out.test(chi);
  }
  if (k > 0 && TR >= 100) {
    std::vector<double> x, y;
    for (const auto& r : trows) {
      x.push_back(r.L0k);
      y.push_back(r.Lk2k);
    }
    TestReport ks = ks_two_sample(x, y, a.alpha);
    ks.test = "ks_shift_stationarity";
    out.test(ks);
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    const double rho = sxy / std::sqrt(sxx * syy);
    out.results["block_correlation"] = rho;
    out.check("block_correlation_small", std::abs(rho) < 3.0 / std::sqrt(static_cast<double>(TR)));
  }
}

void run_dominance(const ExperimentConfig& cfg, Sink& out) {
  out.results["mode"] = cfg.analysis.mode;
  if (cfg.analysis.mode == "first_jump") {
    run_first_jump(cfg, out);
  } else {
    run_pathwise(cfg, out);
  }
}

// ---------------------------------------------------------------- env-window

std::string encode(const std::vector<int>& cfg) {
  std::string s;
  for (std::size_t i = 0; i < cfg.size(); ++i) s += (i ? ";" : "") + std::to_string(cfg[i]);
  return s;
}

void write_window(const fs::path& path, const WindowDistribution& w) {
  Csv csv(path, {"value", "count"});
  for (const auto& [c, k] : w.counts) csv.line({encode(c), std::to_string(k)});
}

void run_env_window(const ExperimentConfig& cfg, Sink& out) {
  const auto& a = cfg.analysis;
  const auto w = env_window_distribution(cfg.model, a.ns, a.M, cfg.replicas, cfg.seed, cfg.workers);
  for (const auto& x : w) write_window(out.data / ("window_n" + std::to_string(x.n) + ".csv"), x);
  const WindowDistribution& last = w.back();
  json tv = json::array();
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const double d = tv_distance(w[i], last);
    tv.push_back({{"n", w[i].n}, {"against", last.n}, {"tv", d}});
    out.check("tv_n" + std::to_string(w[i].n) + "_vs_n" + std::to_string(last.n), d < a.tv_max);
  }
  out.results["tv_in_n"] = tv;
  out.results["M"] = a.M;
  out.results["configurations"] = last.counts.size();
  if (a.compare_init) {
    ModelSpec other = cfg.model;
    other.init = *a.compare_init;
    const auto w2 = env_window_distribution(other, {last.n}, a.M, cfg.replicas,
                                            derive_seed(cfg.seed, StreamTag::Init, 1), cfg.workers);
    write_window(out.data / ("window_compare_n" + std::to_string(last.n) + ".csv"), w2.front());
    const double d = tv_distance(last, w2.front());
    out.results["tv_between_inits"] = d;
    out.results["compare_init"] = to_json(*a.compare_init);
    out.check("tv_between_inits", d < a.tv_max);
  }
  if (phi_bounded_below(cfg.model.phi)) {
    const auto cov = support_coverage(last, stationary_distribution(cfg.model.params),
                                      a.coverage_factor / static_cast<double>(cfg.replicas));
    json miss = json::array();
    for (const auto& c : cov.missing) miss.push_back(encode(c));
    out.results["coverage"] = {{"threshold", cov.threshold}, {"required", cov.required},
                               {"observed", cov.observed}, {"missing", miss}};
    out.check("support_coverage", cov.observed == cov.required);
  }
}

// ---------------------------------------------------------------- ladder

void run_ladder(const ExperimentConfig& cfg, Sink& out) {
  const std::size_t n = need_jumps(cfg, 1000);
  const ModelSpec& m = cfg.model;
  const long M = cfg.analysis.M;
  const auto res = run_replicas<LadderResult>(cfg.replicas, cfg.workers, [&](std::size_t r) {
    const std::uint64_t s = replica_seed(cfg.seed, r);
    LatticeEnvironment env(m.d, m.params, m.init, s);
    const WalkPath path = simulate_thinning(env, m.phi, m.pi, StopRule::jumps(n), s);
    const auto z = backward_walk(path.x, n);
    std::vector<long> z1;
    for (const auto& v : z) z1.push_back(v[0]);
    return ladder_statistics(z1, M);
  });
  std::size_t complete = 0, censored = 0;
  bool increasing = true;
  std::vector<double> lengths, overs;
  {
    Csv csv(out.data / "ladder.csv", {"replica", "step", "record_epoch", "return_epoch", "level", "length", "overshoot"});
    for (std::size_t r = 0; r < res.size(); ++r) {
      long prev = -1;
      for (std::size_t l = 0; l < res[r].steps.size(); ++l) {
        const auto& s = res[r].steps[l];
        if (s.level <= prev) increasing = false;
        prev = s.level;
        if (s.length) {
          ++complete;
          lengths.push_back(static_cast<double>(*s.length));
        }
        overs.push_back(static_cast<double>(s.overshoot));
        csv.line({std::to_string(r), std::to_string(l + 1), std::to_string(s.up),
                  s.back ? std::to_string(*s.back) : "", std::to_string(s.level),
                  s.length ? std::to_string(*s.length) : "", std::to_string(s.overshoot)});
      }
      censored += res[r].censored;
    }
  }
  std::vector<double> grid;
  for (std::size_t g = 1; g <= n; g *= 2) grid.push_back(static_cast<double>(g));
  std::vector<double> tail;
  for (double g : grid) {
    std::size_t c = 0;
    for (double v : lengths) c += v > g;
    tail.push_back(lengths.empty() ? 0.0 : static_cast<double>(c) / lengths.size());
  }
  out.results["complete_steps"] = complete;
  out.results["censored_steps"] = censored;
  out.results["length_tail"] = {{"m", grid}, {"p_hat", tail}};
  out.results["mean_overshoot"] = overs.empty() ? 0.0 : std::accumulate(overs.begin(), overs.end(), 0.0) / overs.size();
  out.check("record_levels_strictly_increase", increasing);
}

// ---------------------------------------------------------------- tails

json tail_json(const TailTable& t) {
  return {{"grid", t.grid}, {"p_hat", t.p_hat}, {"se", t.se}, {"samples", t.samples}};
}

json slope_json(const SlopeFit& f) {
  auto finite = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"slope", finite(f.slope)}, {"se", finite(f.se)}, {"ci", {finite(f.ci_lo), finite(f.ci_hi)}},
          {"points", f.points}};
}

void run_tails(const ExperimentConfig& cfg, Sink& out, bool exploratory) {
  const auto& a = cfg.analysis;
  out.results["kind"] = a.kind;
  if (a.kind == "coalescence") {
    const std::vector<double> grid = a.m_grid.empty() ? std::vector<double>{5, 10, 20, 40} : a.m_grid;
    const auto res = coalescence_tail(cfg.model.d, cfg.model.params, cfg.model.init, a.init_b, grid,
                                      cfg.replicas, cfg.seed, a.level, cfg.workers);
    Csv csv(out.data / "coalescence_tail.csv", {"m", "p_hat", "se"});
    for (std::size_t i = 0; i < grid.size(); ++i) csv.line({num(grid[i]), num(res.tail.p_hat[i]), num(res.tail.se[i])});
    out.results["tail"] = tail_json(res.tail);
    out.results["log_tail_slope"] = slope_json(res.slope);
    out.results["mean_capped"] = res.mean_capped;
    out.results["init_b"] = to_json(a.init_b);
    out.check("tail_strictly_decreasing", res.decreasing);
    out.check("log_tail_slope_negative", res.slope.points >= 2 && res.slope.ci_hi < 0.0);
  } else if (a.kind == "overshoot") {
    const std::vector<long> L = a.L_grid.empty() ? std::vector<long>{0, 10, 100} : a.L_grid;
    std::vector<std::size_t> mg;
    for (double v : a.m_grid.empty() ? std::vector<double>{16, 64, 256, 1024} : a.m_grid)
      mg.push_back(static_cast<std::size_t>(v));
    // Overshoots never exceed the step radius, so the default grid stays below it.
    std::vector<std::size_t> og = a.overshoot_grid;
    const auto radius = static_cast<std::size_t>(cfg.model.pi.radius());
    if (og.empty())
      for (std::size_t v = 1; v < std::max<std::size_t>(radius, 2); v *= 2) og.push_back(v);
    const auto res = overshoot_tails(cfg.model.pi, L, mg, og, cfg.replicas, cfg.seed, a.max_steps,
                                     exploratory, cfg.workers);
    std::vector<double> lm, lo;
    for (auto v : mg) lm.push_back(std::log(static_cast<double>(v)));
    for (auto v : og) lo.push_back(std::log(static_cast<double>(v)));
    {
      Csv csv(out.data / "passage_tails.csv", {"L", "m", "passage_plus", "passage_minus"});
      for (std::size_t i = 0; i < L.size(); ++i)
        for (std::size_t k = 0; k < mg.size(); ++k)
          csv.line({std::to_string(L[i]), std::to_string(mg[k]), num(res.passage_plus[i].p_hat[k]),
                    num(res.passage_minus[i].p_hat[k])});
    }
    {
      Csv csv(out.data / "overshoot_tails.csv", {"L", "m", "overshoot_plus", "overshoot_minus"});
      for (std::size_t i = 0; i < L.size(); ++i)
        for (std::size_t k = 0; k < og.size(); ++k)
          csv.line({std::to_string(L[i]), std::to_string(og[k]), num(res.overshoot_plus[i].p_hat[k]),
                    num(res.overshoot_minus[i].p_hat[k])});
    }
    const bool srw = cfg.model.d == 1 && cfg.model.pi.support().size() == 2 && radius == 1 &&
                     cfg.model.pi.symmetric();
    json rows = json::array();
    for (std::size_t i = 0; i < L.size(); ++i) {
      std::vector<double> scaled;
      for (std::size_t k = 0; k < mg.size(); ++k)
        scaled.push_back(std::sqrt(static_cast<double>(mg[k])) * res.passage_plus[i].p_hat[k]);
      json row = {{"L", L[i]},
                  {"passage_plus", tail_json(res.passage_plus[i])},
                  {"passage_minus", tail_json(res.passage_minus[i])},
                  {"overshoot_plus", tail_json(res.overshoot_plus[i])},
                  {"overshoot_minus", tail_json(res.overshoot_minus[i])},
                  {"sqrt_m_passage_plus", scaled},
                  {"passage_plus_loglog_slope",
                   slope_json(fit_log_tail(lm, res.passage_plus[i].p_hat, res.passage_plus[i].samples, a.level))},
                  {"overshoot_plus_loglog_slope",
                   slope_json(fit_log_tail(lo, res.overshoot_plus[i].p_hat, res.overshoot_plus[i].samples, a.level))}};
      if (srw && L[i] == 0) {
        json exact = json::array();
        bool agree = true, band = true;
        const double z = zq(0.999);
        for (std::size_t k = 0; k < mg.size(); ++k) {
          const double e = srw_no_ascent_probability(mg[k]);
          exact.push_back(e);
          const double se = std::sqrt(e * (1.0 - e) / static_cast<double>(res.passage_plus[i].samples));
          agree = agree && std::abs(res.passage_plus[i].p_hat[k] - e) <= z * se;
          band = band && scaled[k] >= 0.3 && scaled[k] <= 1.5;
        }
        row["exact_passage_plus"] = exact;
        out.check("passage_matches_reflection_law", agree);
        out.check("sqrt_m_passage_in_band", band);
      }
      rows.push_back(row);
    }
    out.results["rows"] = rows;
    out.results["censored"] = res.censored;
    out.results["max_steps"] = res.max_steps;
    out.results["sup_overshoot"] = tail_json(res.sup_overshoot);
    if (radius <= 1) {
      // Unit steps land exactly one past the level.
      bool unit = true;
      for (double p : res.sup_overshoot.p_hat) unit = unit && p == 0.0;
      out.check("unit_overshoot", unit);
    } else {
      const SlopeFit f = fit_log_tail(lo, res.sup_overshoot.p_hat, res.sup_overshoot.samples, a.level);
      out.results["sup_overshoot_loglog_slope"] = slope_json(f);
      out.check("overshoot_slope_at_most_minus_one", f.points >= 2 && f.ci_hi <= -1.0);
    }
  } else {
    std::vector<std::size_t> L;
    for (long v : a.L_grid.empty() ? std::vector<long>{4, 8, 16, 32} : a.L_grid) L.push_back(static_cast<std::size_t>(v));
    const auto res = interval_max_tail(cfg.model.params, L, a.rates, cfg.replicas, cfg.seed, cfg.workers);
    Csv csv(out.data / "interval_max.csv", {"L", "threshold", "rate", "p_hat", "se"});
    json rows = json::array();
    for (const auto& row : res.rows) {
      for (std::size_t k = 0; k < row.rate.size(); ++k)
        csv.line({std::to_string(row.L), num(row.threshold), num(row.rate[k]), num(row.p_hat[k]), num(row.se[k])});
      rows.push_back({{"L", row.L}, {"threshold", row.threshold}, {"rate", row.rate},
                      {"p_hat", row.p_hat}, {"se", row.se}});
    }
    out.results["rows"] = rows;
    out.results["slope_vs_log_L_squared"] = slope_json(res.slope);
    out.check("strictly_decreasing_in_L", res.decreasing_in_L);
    out.check("nonincreasing_in_rate", res.nonincreasing_in_rate);
    out.check("log_p_slope_negative", res.slope.points >= 2 && res.slope.ci_hi < 0.0);
  }
}

}  // namespace

json evaluate_conditions(const std::string& command, const ExperimentConfig& cfg,
                         std::vector<std::string>& unmet) {
  const ModelSpec& m = cfg.model;
  const auto erg = check_ergodic(m.params);
  const auto strong = check_strong_ergodic(m.params);
  const bool mean_zero = m.pi.mean_zero();
  const bool transient = m.d >= 3 || !mean_zero;
  const bool cond4 = phi_bounded_below(m.phi);
  json c = {{"ergodic", {{"holds", erg.holds}, {"value", erg.value}}},
            {"strongly_ergodic", {{"holds", strong.holds}, {"value", strong.value}}},
            {"monotone_phi", m.phi.monotone()},
            {"homogeneous_params", homogeneous(m.params)},
            {"pi", {{"mean_zero", mean_zero}, {"symmetric", m.pi.symmetric()}, {"radius", m.pi.radius()},
                    {"finite_support", true}}},
            {"phi_bounded_below", cond4},
            {"init_exponential_tail", true}};
  std::vector<std::string> need;
  if (command == "estimate-mu" || command == "lln" || command == "clt" || command == "dominance-audit") {
    need = {"strongly_ergodic", "monotone_phi"};
  }
  if (command == "clt") {
    need.push_back("mean_zero_pi");
    if (m.d == 2) need.push_back("symmetric_pi");
  }
  if (command == "dominance-audit" && cfg.analysis.mode == "pathwise") {
    c["init_dominated_by_nu"] = init_dominated(m.init, m.params);
    need.push_back("init_dominated_by_nu");
  }
  if (command == "env-window") {
    c["window"] = {{"nonzero_mean", !mean_zero},
                   {"moment_2_plus", true},
                   {"transient_bounded", transient},
                   {"convergence_claim", true},
                   {"absolute_continuity_claim", cond4}};
    need.push_back("homogeneous_params");
  }
  if (command == "tails") {
    if (cfg.analysis.kind == "overshoot") need.push_back("mean_zero_pi");
    if (cfg.analysis.kind == "coalescence") need.push_back("homogeneous_params");
  }
  auto holds = [&](const std::string& k) {
    if (k == "strongly_ergodic") return strong.holds;
    if (k == "monotone_phi") return m.phi.monotone();
    if (k == "mean_zero_pi") return mean_zero;
    if (k == "symmetric_pi") return m.pi.symmetric();
    if (k == "homogeneous_params") return homogeneous(m.params);
    if (k == "init_dominated_by_nu") return c["init_dominated_by_nu"].get<bool>();
    return true;
  };
  for (const auto& k : need)
    if (!holds(k)) unmet.push_back(k);
  c["required"] = need;
  return c;
}

Outcome run_experiment(const std::string& command, const ExperimentConfig& cfg, const RunOptions& opt) {
  Outcome o;
  fs::create_directories(opt.out / "data");
  json summary = {{"schema", kConfigSchema}, {"command", command}, {"seed", cfg.seed},
                  {"replicas", cfg.replicas}, {"config", cfg.raw}};
  summary["conditions"] = evaluate_conditions(command, cfg, o.unmet);
  summary["unmet"] = o.unmet;
  summary["exploratory"] = !o.unmet.empty();
  auto write = [&] {
    std::ofstream f(opt.out / "summary.json");
    f << summary.dump(2) << '\n';
  };
  if (!o.unmet.empty() && !opt.exploratory) {
    o.refused = true;
    summary["verdict"] = "refused";
    write();
    o.summary = summary;
    for (const auto& u : o.unmet) o.report += "condition unmet: " + u + "\n";
    return o;
  }
  Sink sink;
  sink.data = opt.out / "data";
  if (command == "check") {
    run_check(cfg, sink);
  } else if (command == "simulate") {
    run_simulate(cfg, sink);
  } else if (command == "estimate-mu") {
    run_estimate_mu(cfg, sink);
  } else if (command == "lln") {
    run_lln(cfg, sink);
  } else if (command == "clt") {
    run_clt(cfg, sink);
  } else if (command == "dominance-audit") {
    run_dominance(cfg, sink);
  } else if (command == "env-window") {
    run_env_window(cfg, sink);
  } else if (command == "ladder") {
    run_ladder(cfg, sink);
  } else if (command == "tails") {
    run_tails(cfg, sink, opt.exploratory);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown subcommand " + command);
  }
  summary["results"] = sink.results;
  summary["tests"] = json::array();
  for (const auto& t : sink.tests) summary["tests"].push_back(to_json(t));
  summary["checks"] = json::object();
  for (const auto& [k, v] : sink.checks) summary["checks"][k] = v ? "pass" : "fail";
  o.pass = sink.pass();
  summary["verdict"] = o.pass ? "pass" : "fail";
  write();
  o.summary = summary;
  o.report = sink.text.str();
  if (!o.unmet.empty()) o.report += "exploratory run: preconditions unmet\n";
  return o;
}

}  // namespace bdwalk
