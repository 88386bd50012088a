#include "bdwalk/stats.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "bdwalk/error.hpp"
#include "bdwalk/parallel.hpp"

namespace bdwalk {

namespace {

double normal_quantile(double level) {
  return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
}

struct MeanSe {
  double mean;
  double se;
};

MeanSe mean_se(const std::vector<double>& x) {
  const auto& k = kernels::active();
  double s = 0.0, ss = 0.0;
  k.blocked_sum(x.data(), x.size(), &s, &ss);
  const double n = static_cast<double>(x.size());
  const double m = s / n;
  const double var = n > 1 ? std::max(0.0, (ss - n * m * m) / (n - 1.0)) : 0.0;
  return {m, std::sqrt(var / n)};
}

// Empirical CDFs of two sorted samples evaluated at every point of their union.
template <class F>
void walk_union(const std::vector<double>& a, const std::vector<double>& b, F&& visit) {
  std::size_t i = 0, j = 0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() || j < b.size()) {
    double x;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) {
      x = a[i];
    } else {
      x = b[j];
    }
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    visit(static_cast<double>(i) / na, static_cast<double>(j) / nb);
  }
}

}  // namespace

void throw_sample_too_small(std::size_t n, std::size_t need) {
  throw Error(ErrorCode::SampleTooSmall,
              "sample of " + std::to_string(n) + " below the minimum " + std::to_string(need));
}

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> sample, std::string provenance)
    : values_(std::move(sample)), provenance_(std::move(provenance)) {
  std::sort(values_.begin(), values_.end());
}

double EmpiricalDistribution::cdf(double x) const noexcept {
  if (values_.empty()) return 0.0;
  const auto it = std::upper_bound(values_.begin(), values_.end(), x);
  return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
}

std::vector<std::pair<double, std::size_t>> EmpiricalDistribution::counts() const {
  std::vector<std::pair<double, std::size_t>> out;
  for (double v : values_) {
    if (out.empty() || out.back().first != v) out.push_back({v, 0});
    ++out.back().second;
  }
  return out;
}

nlohmann::json to_json(const TestReport& r) {
  nlohmann::json j = {{"test", r.test},      {"statistic", r.statistic},
                      {"critical", r.critical}, {"alpha", r.alpha},
                      {"verdict", r.pass ? "pass" : "fail"}, {"n", r.n}};
  if (!r.parts.empty()) {
    j["parts"] = nlohmann::json::array();
    for (const auto& p : r.parts) j["parts"].push_back(to_json(p));
  }
  return j;
}

double ks_critical(double alpha, double n_effective) {
  return std::sqrt(-0.5 * std::log(0.5 * alpha)) / std::sqrt(n_effective);
}

TestReport ks_exponential_test(std::vector<double> sample, double alpha) {
  return ks_test(
      std::move(sample), [](double x) { return x <= 0.0 ? 0.0 : -std::expm1(-x); }, alpha,
      "ks_exponential");
}

TestReport ks_normal_test(std::vector<double> sample, double alpha) {
  return ks_test(
      std::move(sample), [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }, alpha,
      "ks_normal");
}

TestReport ks_two_sample(std::vector<double> a, std::vector<double> b, double alpha) {
  if (a.size() < 100) throw_sample_too_small(a.size(), 100);
  if (b.size() < 100) throw_sample_too_small(b.size(), 100);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double D = 0.0;
  walk_union(a, b, [&](double fa, double fb) { D = std::max(D, std::abs(fa - fb)); });
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  TestReport r;
  r.test = "ks_two_sample";
  r.statistic = D;
  r.critical = ks_critical(alpha, na * nb / (na + nb));
  r.alpha = alpha;
  r.n = {a.size(), b.size()};
  r.pass = r.recomputed_verdict();
  return r;
}

TestReport chi_square_test(const std::vector<int>& sample, const DistTable& law, double alpha) {
  if (sample.size() < 100) throw_sample_too_small(sample.size(), 100);
  const double n = static_cast<double>(sample.size());
  // Cells 0..last-1 are single states; cell `last` is {k >= last}.
  std::size_t last = 0;
  while (n * law.pmf(last) >= 5.0 && n * (1.0 - law.cdf(last)) >= 5.0) ++last;
  std::vector<double> observed(last + 1, 0.0);
  for (int v : sample) observed[std::min<std::size_t>(static_cast<std::size_t>(v), last)] += 1.0;
  double stat = 0.0;
  for (std::size_t k = 0; k <= last; ++k) {
    const double e = n * (k < last ? law.pmf(k) : 1.0 - (last ? law.cdf(last - 1) : 0.0));
    stat += (observed[k] - e) * (observed[k] - e) / e;
  }
  TestReport r;
  r.test = "chi_square";
  r.statistic = stat;
  r.alpha = alpha;
  r.n = {sample.size(), last + 1};
  if (last == 0) {
    r.critical = 0.0;
  } else {
    const boost::math::chi_squared chi(static_cast<double>(last));
    r.critical = boost::math::quantile(boost::math::complement(chi, alpha));
  }
  r.pass = r.recomputed_verdict();
  return r;
}

TestReport dominance_test(std::vector<double> lower, std::vector<double> upper, double alpha) {
  if (lower.size() < 100) throw_sample_too_small(lower.size(), 100);
  if (upper.size() < 100) throw_sample_too_small(upper.size(), 100);
  std::sort(lower.begin(), lower.end());
  std::sort(upper.begin(), upper.end());
  double stat = -std::numeric_limits<double>::infinity();
  walk_union(lower, upper, [&](double fl, double fu) { stat = std::max(stat, fu - fl); });
  const double dkw = std::log(2.0 / alpha) / 2.0;
  TestReport r;
  r.test = "dominance";
  r.statistic = stat;
  r.critical = std::sqrt(dkw / static_cast<double>(lower.size())) +
               std::sqrt(dkw / static_cast<double>(upper.size()));
  r.alpha = alpha;
  r.n = {lower.size(), upper.size()};
  r.pass = r.recomputed_verdict();
  return r;
}

TestReport normality_test(const std::vector<std::array<double, 3>>& sample, int d,
                          const std::array<std::array<double, 3>, 3>& sigma, double alpha) {
  if (sample.size() < 1000) throw_sample_too_small(sample.size(), 1000);
  Eigen::MatrixXd S(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) S(i, j) = sigma[i][j];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
  const Eigen::VectorXd lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  std::vector<int> keep;
  for (int i = 0; i < d; ++i)
    if (lambda(i) > 1e-12 * scale) keep.push_back(i);
  if (keep.empty()) throw Error(ErrorCode::SingularSigma, "covariance has no positive direction");

  std::vector<int> coords;
  for (int i = 0; i < d; ++i)
    if (sigma[i][i] > 1e-12 * scale) coords.push_back(i);
  const std::size_t k = coords.size() + 1;
  const double a = alpha / static_cast<double>(k);

  TestReport r;
  r.test = "normality";
  r.alpha = alpha;
  r.n = {sample.size()};
  for (int i : coords) {
    std::vector<double> z(sample.size());
    const double sd = std::sqrt(sigma[i][i]);
    for (std::size_t s = 0; s < sample.size(); ++s) z[s] = sample[s][i] / sd;
    TestReport part = ks_normal_test(std::move(z), a);
    part.test = "ks_normal_coord" + std::to_string(i + 1);
    r.parts.push_back(std::move(part));
  }
  const Eigen::MatrixXd V = eig.eigenvectors();
  std::vector<double> r2(sample.size());
  for (std::size_t s = 0; s < sample.size(); ++s) {
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x(i) = sample[s][i];
    const Eigen::VectorXd y = V.transpose() * x;
    double acc = 0.0;
    for (int i : keep) acc += y(i) * y(i) / lambda(i);
    r2[s] = acc;
  }
  const boost::math::chi_squared chi(static_cast<double>(keep.size()));
  TestReport radial = ks_test(
      std::move(r2), [&](double x) { return x <= 0.0 ? 0.0 : boost::math::cdf(chi, x); }, a,
      "ks_chi_square_radius");
  r.parts.push_back(std::move(radial));

  r.statistic = 0.0;
  for (const auto& p : r.parts) r.statistic = std::max(r.statistic, p.statistic);
  r.critical = ks_critical(a, static_cast<double>(sample.size()));
  r.pass = r.recomputed_verdict();
  return r;
}

VelocityEstimate lln_slope(const std::vector<Site>& positions, int d, double t, double level) {
  VelocityEstimate v;
  v.d = d;
  v.level = level;
  v.replicas = positions.size();
  const double z = normal_quantile(level);
  for (int i = 0; i < d; ++i) {
    std::vector<double> x(positions.size());
    for (std::size_t r = 0; r < positions.size(); ++r) x[r] = positions[r][i] / t;
    const MeanSe m = mean_se(x);
    v.mean[i] = m.mean;
    v.half_width[i] = z * m.se;
  }
  return v;
}

bool within_joint_ci(const VelocityEstimate& v, const std::array<double, 3>& target,
                     const std::array<double, 3>& target_half_width) {
  for (int i = 0; i < v.d; ++i) {
    const double hw = std::hypot(v.half_width[i], target_half_width[i]);
    if (std::abs(v.mean[i] - target[i]) > hw) return false;
  }
  return true;
}

double WindowDistribution::frequency(const std::vector<int>& config) const {
  const auto it = counts.find(config);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(replicas);
}

std::vector<Site> WindowDistribution::offsets(int d, int M) {
  std::vector<Site> out;
  const int lo1 = d >= 2 ? -M : 0, lo2 = d >= 3 ? -M : 0;
  for (int a = -M; a <= M; ++a)
    for (int b = lo1; b <= -lo1; ++b)
      for (int c = lo2; c <= -lo2; ++c) out.push_back({a, b, c});
  return out;
}

std::vector<WindowDistribution> env_window_distribution(const ModelSpec& model,
                                                        const std::vector<std::size_t>& ns, int M,
                                                        std::size_t replicas, std::uint64_t seed,
                                                        int workers) {
  if (ns.empty() || !std::is_sorted(ns.begin(), ns.end()) || ns.front() < 1) {
    throw Error(ErrorCode::OutOfRange, "window jump indices must be sorted and >= 1");
  }
  const std::vector<Site> offs = WindowDistribution::offsets(model.d, M);
  using Windows = std::vector<std::vector<int>>;
  const auto rows = run_replicas<Windows>(replicas, workers, [&](std::size_t r) {
    const std::uint64_t m = replica_seed(seed, r);
    LatticeEnvironment env(model.d, model.params, model.init, m);
    const WalkPath path = simulate_thinning(env, model.phi, model.pi, StopRule::jumps(ns.back()), m);
    // Replayed on a fresh copy: per-site trajectories depend only on (seed, site),
    // and window queries then run forward in time at every site.
    LatticeEnvironment replay(model.d, model.params, model.init, m);
    Windows w;
    for (std::size_t n : ns) {
      std::vector<int> cfg(offs.size());
      for (std::size_t k = 0; k < offs.size(); ++k) {
        cfg[k] = replay.state_at(path.x[n - 1] + offs[k], path.tau[n]);
      }
      w.push_back(std::move(cfg));
    }
    return w;
  });
  std::vector<WindowDistribution> out(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    out[i].M = M;
    out[i].d = model.d;
    out[i].n = ns[i];
    out[i].replicas = replicas;
    for (const auto& w : rows) ++out[i].counts[w[i]];
  }
  return out;
}

WindowDistribution restrict_window(const WindowDistribution& w, int M) {
  const auto big = WindowDistribution::offsets(w.d, w.M);
  const auto small = WindowDistribution::offsets(w.d, M);
  std::vector<std::size_t> pick;
  for (const auto& s : small) pick.push_back(static_cast<std::size_t>(
                                  std::find(big.begin(), big.end(), s) - big.begin()));
  WindowDistribution out = w;
  out.M = M;
  out.counts.clear();
  for (const auto& [cfg, c] : w.counts) {
    std::vector<int> sub;
    for (std::size_t i : pick) sub.push_back(cfg[i]);
    out.counts[sub] += c;
  }
  return out;
}

double tv_distance(const WindowDistribution& a, const WindowDistribution& b) {
  double acc = 0.0;
  for (const auto& [cfg, c] : a.counts) acc += std::abs(a.frequency(cfg) - b.frequency(cfg));
  for (const auto& [cfg, c] : b.counts)
    if (!a.counts.count(cfg)) acc += b.frequency(cfg);
  return 0.5 * acc;
}

double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
    acc += std::abs((i < a.size() ? a[i] : 0.0) - (i < b.size() ? b[i] : 0.0));
  }
  return 0.5 * acc;
}

CoverageReport support_coverage(const WindowDistribution& w, const DistTable& nu,
                                double threshold) {
  CoverageReport rep;
  rep.threshold = threshold;
  const std::size_t k = WindowDistribution::offsets(w.d, w.M).size();
  std::vector<int> cfg(k);
  // Depth-first over configurations; the product only shrinks as states grow.
  auto visit = [&](auto&& self, std::size_t i, double mass) -> void {
    if (i == k) {
      ++rep.required;
      if (w.counts.count(cfg)) {
        ++rep.observed;
      } else {
        rep.missing.push_back(cfg);
      }
      return;
    }
    for (int s = 0;; ++s) {
      const double next = mass * nu.pmf(static_cast<std::size_t>(s));
      if (next < threshold) break;
      cfg[i] = s;
      self(self, i + 1, next);
    }
  };
  visit(visit, 0, 1.0);
  return rep;
}

LadderResult ladder_statistics(const std::vector<long>& z, long M) {
  LadderResult res;
  long level = M;
  std::size_t from = 1;
  long running_max = z.empty() ? 0 : std::labs(z[0]);
  std::size_t scanned = 1;  // running_max covers |z_0..z_{scanned-1}|
  while (true) {
    std::size_t up = from;
    while (up < z.size() && std::labs(z[up]) <= level) ++up;
    if (up >= z.size()) break;
    LadderStep step;
    step.up = up;
    step.level = level;
    step.overshoot = std::labs(z[up]) - level;
    const long zu = z[up];
    std::size_t back = up + 1;
    while (back < z.size() && !(zu > 0 ? z[back] < zu : z[back] > zu)) ++back;
    if (back >= z.size()) {
      res.steps.push_back(step);
      ++res.censored;
      res.complete = false;
      break;
    }
    step.back = back;
    step.length = back - up;
    res.steps.push_back(step);
    for (; scanned < back; ++scanned) running_max = std::max(running_max, std::labs(z[scanned]));
    level = running_max;
    from = back;
  }
  return res;
}

SlopeFit fit_log_tail(const std::vector<double>& x, const std::vector<double>& p_hat,
                      std::size_t samples, double level) {
  std::vector<double> xs, ys, ws;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = p_hat[i];
    if (p <= 0.0 || p >= 1.0) continue;
    xs.push_back(x[i]);
    ys.push_back(std::log(p));
    ws.push_back(static_cast<double>(samples) * p / (1.0 - p));
  }
  SlopeFit fit;
  fit.points = xs.size();
  if (xs.size() < 2) {
    fit.slope = std::numeric_limits<double>::quiet_NaN();
    fit.se = fit.ci_lo = fit.ci_hi = fit.slope;
    return fit;
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sw += ws[i];
    sx += ws[i] * xs[i];
    sy += ws[i] * ys[i];
  }
  const double xb = sx / sw, yb = sy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += ws[i] * (xs[i] - xb) * (xs[i] - xb);
    sxy += ws[i] * (xs[i] - xb) * (ys[i] - yb);
  }
  fit.slope = sxy / sxx;
  fit.se = std::sqrt(1.0 / sxx);
  const double z = normal_quantile(level);
  fit.ci_lo = fit.slope - z * fit.se;
  fit.ci_hi = fit.slope + z * fit.se;
  return fit;
}

namespace {

TailTable tail_from(const std::vector<double>& grid, const std::vector<std::size_t>& exceed,
                    std::size_t samples) {
  TailTable t;
  t.grid = grid;
  t.samples = samples;
  for (std::size_t c : exceed) {
    const double p = samples ? static_cast<double>(c) / static_cast<double>(samples) : 0.0;
    t.p_hat.push_back(p);
    t.se.push_back(samples ? std::sqrt(p * (1.0 - p) / static_cast<double>(samples)) : 0.0);
  }
  return t;
}

}  // namespace

OvershootTails overshoot_tails(const JumpDistribution& pi, const std::vector<long>& L_grid,
                               const std::vector<std::size_t>& m_grid,
                               const std::vector<std::size_t>& o_grid, std::size_t replicas,
                               std::uint64_t seed, std::size_t max_steps, bool exploratory,
                               int workers) {
  if (!exploratory && std::abs(pi.mean()[0]) > 1e-12) {
    throw Error(ErrorCode::ConditionsUnmet, "mean_zero: jump law has nonzero mean");
  }
  const std::size_t nL = L_grid.size();
  struct Crossing {
    std::vector<std::optional<std::size_t>> t_plus, t_minus;
    std::vector<long> over_plus, over_minus;
  };
  const auto rows = run_replicas<Crossing>(replicas, workers, [&](std::size_t r) {
    Xoshiro256 rng = split_stream(seed, StreamTag::Sample, {r});
    Crossing c{std::vector<std::optional<std::size_t>>(nL), std::vector<std::optional<std::size_t>>(nL),
               std::vector<long>(nL, 0), std::vector<long>(nL, 0)};
    std::size_t open = 2 * nL;
    long y = 0;
    for (std::size_t n = 1; n <= max_steps && open > 0; ++n) {
      y -= pi.sample(rng.uniform())[0];
      for (std::size_t i = 0; i < nL; ++i) {
        if (!c.t_plus[i] && y > L_grid[i]) {
          c.t_plus[i] = n;
          c.over_plus[i] = y - L_grid[i];
          --open;
        }
        if (!c.t_minus[i] && y < -L_grid[i]) {
          c.t_minus[i] = n;
          c.over_minus[i] = -L_grid[i] - y;
          --open;
        }
      }
    }
    return c;
  });

  OvershootTails out;
  out.L_grid = L_grid;
  out.m_grid = m_grid;
  out.o_grid = o_grid;
  out.max_steps = max_steps;
  const std::vector<double> grid(m_grid.begin(), m_grid.end());
  const std::vector<double> ogrid(o_grid.begin(), o_grid.end());
  for (const auto& c : rows) {
    bool all = true;
    for (std::size_t i = 0; i < nL; ++i) all = all && c.t_plus[i] && c.t_minus[i];
    if (!all) ++out.censored;
  }
  for (std::size_t i = 0; i < nL; ++i) {
    std::vector<std::size_t> tp(m_grid.size(), 0), tm(m_grid.size(), 0);
    std::vector<std::size_t> op(o_grid.size(), 0), om(o_grid.size(), 0);
    std::size_t np = 0, nm = 0;
    for (const auto& c : rows) {
      for (std::size_t k = 0; k < m_grid.size(); ++k) {
        if (!c.t_plus[i] || *c.t_plus[i] > m_grid[k]) ++tp[k];
        if (!c.t_minus[i] || *c.t_minus[i] > m_grid[k]) ++tm[k];
      }
      for (std::size_t k = 0; k < o_grid.size(); ++k) {
        if (c.t_plus[i] && c.over_plus[i] > static_cast<long>(o_grid[k])) ++op[k];
        if (c.t_minus[i] && c.over_minus[i] > static_cast<long>(o_grid[k])) ++om[k];
      }
      np += c.t_plus[i].has_value();
      nm += c.t_minus[i].has_value();
    }
    out.passage_plus.push_back(tail_from(grid, tp, replicas));
    out.passage_minus.push_back(tail_from(grid, tm, replicas));
    out.overshoot_plus.push_back(tail_from(ogrid, op, np));
    out.overshoot_minus.push_back(tail_from(ogrid, om, nm));
  }
  out.sup_overshoot.grid = ogrid;
  out.sup_overshoot.samples = replicas;
  for (std::size_t k = 0; k < o_grid.size(); ++k) {
    double p = 0.0, se = 0.0;
    for (const auto* side : {&out.overshoot_plus, &out.overshoot_minus}) {
      for (const auto& t : *side) {
        if (t.p_hat[k] > p) {
          p = t.p_hat[k];
          se = t.se[k];
        }
        out.sup_overshoot.samples = std::min(out.sup_overshoot.samples, t.samples);
      }
    }
    out.sup_overshoot.p_hat.push_back(p);
    out.sup_overshoot.se.push_back(se);
  }
  return out;
}

double srw_no_ascent_probability(std::size_t m) {
  // P(max_{k<=m} S_k <= 0) = C(m, floor(m/2)) / 2^m, evaluated in logs.
  const double mm = static_cast<double>(m);
  const double h = std::floor(mm / 2.0);
  return std::exp(std::lgamma(mm + 1.0) - std::lgamma(h + 1.0) - std::lgamma(mm - h + 1.0) -
                  mm * std::log(2.0));
}

IntervalMaxResult interval_max_tail(const BDParams& params, const std::vector<std::size_t>& L_grid,
                                    const std::vector<double>& rates, std::size_t replicas,
                                    std::uint64_t seed, int workers) {
  if (rates.empty()) throw Error(ErrorCode::OutOfRange, "at least one rate is required");
  for (std::size_t L : L_grid)
    if (L < 2) throw Error(ErrorCode::OutOfRange, "L must be >= 2");
  const double rate_min = *std::min_element(rates.begin(), rates.end());
  const DistTable nu = stationary_distribution(params);

  IntervalMaxResult res;
  res.replicas = replicas;
  for (std::size_t li = 0; li < L_grid.size(); ++li) {
    const std::size_t L = L_grid[li];
    const double thr = std::pow(std::log(static_cast<double>(L)), 2.0);
    const double shape = std::pow(static_cast<double>(L), 3.0);
    using Hits = std::vector<unsigned char>;
    const auto rows = run_replicas<Hits>(replicas, workers, [&](std::size_t r) {
      Xoshiro256 rng = split_stream(seed, StreamTag::Sample, {li, r});
      const double G = std::gamma_distribution<double>(shape, 1.0)(rng);
      const double t_max = G / rate_min;
      const auto N = std::poisson_distribution<std::uint64_t>(t_max)(rng);
      int state = sample_from(nu, rng);
      std::optional<std::uint64_t> K;
      if (state > thr) {
        K = 0;
      } else {
        for (std::uint64_t k = 1; k <= N; ++k) {
          state = bd_step(params, state, rng.uniform());
          if (state > thr) {
            K = k;
            break;
          }
        }
      }
      Hits h(rates.size(), 0);
      if (!K) return h;
      double s_k = 0.0;
      if (*K > 0) {
        // K-th of N uniform event times on [0, t_max].
        const double a = std::gamma_distribution<double>(static_cast<double>(*K), 1.0)(rng);
        const double b =
            std::gamma_distribution<double>(static_cast<double>(N - *K + 1), 1.0)(rng);
        s_k = t_max * a / (a + b);
      }
      for (std::size_t i = 0; i < rates.size(); ++i) h[i] = s_k <= G / rates[i];
      return h;
    });
    IntervalMaxRow row;
    row.L = L;
    row.threshold = thr;
    row.rate = rates;
    for (std::size_t i = 0; i < rates.size(); ++i) {
      std::size_t c = 0;
      for (const auto& h : rows) c += h[i];
      const double p = static_cast<double>(c) / static_cast<double>(replicas);
      row.p_hat.push_back(p);
      row.se.push_back(std::sqrt(p * (1.0 - p) / static_cast<double>(replicas)));
    }
    res.rows.push_back(std::move(row));
  }
  res.decreasing_in_L = true;
  for (std::size_t i = 1; i < res.rows.size(); ++i)
    for (std::size_t k = 0; k < rates.size(); ++k)
      if (!(res.rows[i].p_hat[k] < res.rows[i - 1].p_hat[k])) res.decreasing_in_L = false;
  std::vector<std::size_t> order(rates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return rates[a] < rates[b]; });
  res.nonincreasing_in_rate = true;
  for (const auto& row : res.rows)
    for (std::size_t k = 1; k < order.size(); ++k)
      if (row.p_hat[order[k]] > row.p_hat[order[k - 1]]) res.nonincreasing_in_rate = false;
  std::vector<double> x, p;
  for (const auto& row : res.rows) {
    x.push_back(row.threshold);
    p.push_back(row.p_hat[0]);
  }
  res.slope = fit_log_tail(x, p, replicas, 0.95);
  return res;
}

CoalescenceTail coalescence_tail(int d, const BDParams& params, const InitDistSpec& initA,
                                 const InitDistSpec& initB, const std::vector<double>& m_grid,
                                 std::size_t replicas, std::uint64_t seed, double level,
                                 int workers) {
  const double horizon = *std::max_element(m_grid.begin(), m_grid.end());
  const auto times = run_replicas<double>(replicas, workers, [&](std::size_t r) {
    CoupledEnvironment env(d, params, initA, initB, replica_seed(seed, r), CouplingMode::Coalescing);
    const auto t = env.coalescence_time({0, 0, 0}, horizon);
    return t ? *t : std::numeric_limits<double>::infinity();
  });
  std::vector<std::size_t> exceed(m_grid.size(), 0);
  double capped = 0.0;
  for (double t : times) {
    for (std::size_t k = 0; k < m_grid.size(); ++k) exceed[k] += t > m_grid[k];
    capped += std::min(t, horizon);
  }
  CoalescenceTail out;
  out.tail = tail_from(m_grid, exceed, replicas);
  out.slope = fit_log_tail(m_grid, out.tail.p_hat, replicas, level);
  out.decreasing = true;
  for (std::size_t k = 1; k < m_grid.size(); ++k)
    if (!(out.tail.p_hat[k] < out.tail.p_hat[k - 1])) out.decreasing = false;
  out.mean_capped = capped / static_cast<double>(replicas);
  return out;
}

HittingMonteCarlo hitting_monte_carlo(const BDParams& params, const std::vector<std::size_t>& start,
                                      std::size_t runs, std::uint64_t seed) {
  HittingMonteCarlo h;
  h.start = start;
  h.runs = runs;
  auto steps_down = [&](int from, int to, Xoshiro256& rng) {
    std::uint64_t k = 0;
    int s = from;
    while (s > to) {
      s = bd_step(params, s, rng.uniform());
      ++k;
    }
    return static_cast<double>(k);
  };
  std::vector<double> x(runs);
  for (std::size_t i = 0; i < start.size(); ++i) {
    if (start[i] < 1) throw Error(ErrorCode::OutOfRange, "hitting start must be >= 1");
    Xoshiro256 rng = split_stream(seed, StreamTag::Sample, {1, start[i]});
    const int n = static_cast<int>(start[i]);
    for (std::size_t r = 0; r < runs; ++r) x[r] = steps_down(n, n - 1, rng);
    const MeanSe m = mean_se(x);
    h.mean_steps.push_back(m.mean);
    h.mean_steps_se.push_back(m.se);
  }
  {
    Xoshiro256 rng = split_stream(seed, StreamTag::Sample, {2});
    for (std::size_t r = 0; r < runs; ++r) x[r] = steps_down(sample_stationary(params, rng), 0, rng);
    const MeanSe m = mean_se(x);
    h.stationary_mean = m.mean;
    h.stationary_mean_se = m.se;
  }
  {
    Xoshiro256 rng = split_stream(seed, StreamTag::Sample, {3});
    for (std::size_t r = 0; r < runs; ++r) {
      const double t = steps_down(1, 0, rng);
      x[r] = t * t;
    }
    const MeanSe m = mean_se(x);
    h.second_moment_from_one = m.mean;
    h.second_moment_se = m.se;
  }
  return h;
}

}  // namespace bdwalk
