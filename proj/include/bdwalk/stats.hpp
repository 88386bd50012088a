#pragma once

// Estimators and hypothesis tests over simulation output.
//
// Every test returns a TestReport whose verdict is `statistic <= critical`,
// so the verdict can always be recomputed from the stored fields.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bdwalk/bdp.hpp"
#include "bdwalk/coupling.hpp"
#include "bdwalk/environment.hpp"
#include "bdwalk/kernels.hpp"
#include "bdwalk/walk.hpp"

namespace bdwalk {

/// Sorted sample with a tag naming the experiment that produced it.
class EmpiricalDistribution {
 public:
  EmpiricalDistribution() = default;
  EmpiricalDistribution(std::vector<double> sample, std::string provenance);

  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::string& provenance() const noexcept { return provenance_; }
  /// Fraction of the sample <= x.
  double cdf(double x) const noexcept;
  /// (value, count) pairs in increasing value order.
  std::vector<std::pair<double, std::size_t>> counts() const;

 private:
  std::vector<double> values_;
  std::string provenance_;
};

struct TestReport {
  std::string test;
  double statistic = 0.0;
  double critical = 0.0;
  double alpha = 0.0;
  bool pass = false;
  std::vector<std::size_t> n;
  std::vector<TestReport> parts;  ///< sub-tests, when the test is a composite

  bool recomputed_verdict() const noexcept { return statistic <= critical; }
};

nlohmann::json to_json(const TestReport& r);

/// Asymptotic one-sample KS critical value sqrt(-ln(alpha/2)/2) / sqrt(n).
double ks_critical(double alpha, double n_effective);

/// One-sample KS against a continuous CDF. Throws SampleTooSmall below 100.
template <class Cdf>
TestReport ks_test(std::vector<double> sample, Cdf&& cdf, double alpha, std::string name);

TestReport ks_exponential_test(std::vector<double> sample, double alpha);
TestReport ks_normal_test(std::vector<double> sample, double alpha);
TestReport ks_two_sample(std::vector<double> a, std::vector<double> b, double alpha);

/// Pearson chi-square goodness of fit of integer-valued data against `law`.
/// Cells are k = 0, 1, ... merged from the top until every expected count is
/// at least 5; the last cell collects the upper tail.
TestReport chi_square_test(const std::vector<int>& sample, const DistTable& law, double alpha);

/// Statistic max_k (F_upper(k) - F_lower(k)); consistent with lower <= upper
/// iff it stays below the sum of the two DKW half-widths.
TestReport dominance_test(std::vector<double> lower, std::vector<double> upper, double alpha);

/// Per-coordinate KS against N(0, Sigma_ii) and KS of squared Mahalanobis
/// radii against chi-square(rank), Bonferroni-combined. Degenerate directions
/// of Sigma are dropped; a zero Sigma throws SingularSigma.
TestReport normality_test(const std::vector<std::array<double, 3>>& sample, int d,
                          const std::array<std::array<double, 3>, 3>& sigma, double alpha);

struct VelocityEstimate {
  int d = 1;
  std::array<double, 3> mean{};
  std::array<double, 3> half_width{};
  double level = 0.99;
  std::size_t replicas = 0;
};

/// Componentwise mean of X(t)/t with a normal CI.
VelocityEstimate lln_slope(const std::vector<Site>& positions, int d, double t, double level);

/// Whether |a - b| <= sqrt(hw_a^2 + hw_b^2) in every coordinate.
bool within_joint_ci(const VelocityEstimate& v, const std::array<double, 3>& target,
                     const std::array<double, 3>& target_half_width);

struct WindowDistribution {
  int M = 0;
  int d = 1;
  std::size_t n = 0;  ///< jump index
  std::size_t replicas = 0;
  std::map<std::vector<int>, std::size_t> counts;

  double frequency(const std::vector<int>& config) const;
  /// Window offsets in encoding order: lexicographic over the box |x_i| <= M.
  static std::vector<Site> offsets(int d, int M);
};

/// Windows of the environment seen right before jumps `ns` (same replicas).
std::vector<WindowDistribution> env_window_distribution(const ModelSpec& model,
                                                        const std::vector<std::size_t>& ns, int M,
                                                        std::size_t replicas, std::uint64_t seed,
                                                        int workers = 1);

/// Marginal of a window law on the smaller box of radius `M`.
WindowDistribution restrict_window(const WindowDistribution& w, int M);

double tv_distance(const WindowDistribution& a, const WindowDistribution& b);
/// Half L1 distance between two pmf tables indexed from 0.
double tv_distance(const std::vector<double>& a, const std::vector<double>& b);

struct CoverageReport {
  std::size_t required = 0;  ///< configurations with product-nu probability >= threshold
  std::size_t observed = 0;
  double threshold = 0.0;
  std::vector<std::vector<int>> missing;
};

/// Checks every window configuration with product-nu mass >= threshold appears.
CoverageReport support_coverage(const WindowDistribution& w, const DistTable& nu,
                                double threshold);

struct LadderStep {
  std::size_t up = 0;                  ///< record epoch
  std::optional<std::size_t> back;     ///< return epoch, absent when censored
  long level = 0;                      ///< the record level being exceeded
  long overshoot = 0;                  ///< |z_up| - level
  std::optional<std::size_t> length;   ///< back - up
};

struct LadderResult {
  std::vector<LadderStep> steps;  ///< complete steps, then at most one censored step
  std::size_t censored = 0;
  bool complete = true;           ///< false when the horizon cut off a step
};

LadderResult ladder_statistics(const std::vector<long>& z, long M);

struct SlopeFit {
  double slope = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t points = 0;
};

/// Weighted least squares of ln p_hat against x with binomial delta-method
/// weights; points with p_hat = 0 are dropped.
SlopeFit fit_log_tail(const std::vector<double>& x, const std::vector<double>& p_hat,
                      std::size_t samples, double level);

struct TailTable {
  std::vector<double> grid;
  std::vector<double> p_hat;
  std::vector<double> se;
  std::size_t samples = 0;
};

struct OvershootTails {
  std::vector<long> L_grid;
  std::vector<std::size_t> m_grid;        ///< passage-time grid
  std::vector<std::size_t> o_grid;        ///< overshoot grid
  std::vector<TailTable> passage_plus;    ///< P(T+_L > m), one per L
  std::vector<TailTable> passage_minus;   ///< P(T-_L > m)
  std::vector<TailTable> overshoot_plus;  ///< P(y_{T+_L} - L > m) over runs that crossed
  std::vector<TailTable> overshoot_minus;
  TailTable sup_overshoot;                ///< max over L and both sides, pointwise in m
  std::size_t censored = 0;               ///< runs without both crossings by max_steps
  std::size_t max_steps = 0;
};

/// Backward walk y with steps -xi from 0. Throws ConditionsUnmet unless pi
/// is mean zero (in coordinate 1) or `exploratory` is set.
OvershootTails overshoot_tails(const JumpDistribution& pi, const std::vector<long>& L_grid,
                               const std::vector<std::size_t>& m_grid,
                               const std::vector<std::size_t>& o_grid, std::size_t replicas,
                               std::uint64_t seed, std::size_t max_steps = 100000,
                               bool exploratory = false, int workers = 1);

/// Exact P(S_1 <= 0, ..., S_m <= 0) for the simple symmetric walk.
double srw_no_ascent_probability(std::size_t m);

struct IntervalMaxRow {
  std::size_t L = 0;
  double threshold = 0.0;
  std::vector<double> rate;
  std::vector<double> p_hat;
  std::vector<double> se;
};

struct IntervalMaxResult {
  std::vector<IntervalMaxRow> rows;
  std::size_t replicas = 0;
  bool decreasing_in_L = false;    ///< strictly, at every rate
  bool nonincreasing_in_rate = false;
  SlopeFit slope;                  ///< ln P_hat against (ln L)^2 at the first rate
};

/// P(max of a stationary chain over [0, T] > (ln L)^2), T a sum of L^3
/// Exp(rate) times. All rates share one interval of base length per replica.
IntervalMaxResult interval_max_tail(const BDParams& params, const std::vector<std::size_t>& L_grid,
                                    const std::vector<double>& rates, std::size_t replicas,
                                    std::uint64_t seed, int workers = 1);

struct CoalescenceTail {
  TailTable tail;           ///< P(T_0 > m)
  SlopeFit slope;           ///< ln P_hat against m
  bool decreasing = false;  ///< strictly over the grid
  double mean_capped = 0.0; ///< mean of min(T_0, horizon)
};

CoalescenceTail coalescence_tail(int d, const BDParams& params, const InitDistSpec& initA,
                                 const InitDistSpec& initB, const std::vector<double>& m_grid,
                                 std::size_t replicas, std::uint64_t seed, double level,
                                 int workers = 1);

struct HittingMonteCarlo {
  std::vector<std::size_t> start;       ///< states n for the T_n estimates
  std::vector<double> mean_steps;       ///< embedded steps from n to n - 1
  std::vector<double> mean_steps_se;
  double stationary_mean = 0.0;         ///< E_nu(T_0) in embedded steps
  double stationary_mean_se = 0.0;
  double second_moment_from_one = 0.0;  ///< E_1(T_0^2)
  double second_moment_se = 0.0;
  std::size_t runs = 0;
};

HittingMonteCarlo hitting_monte_carlo(const BDParams& params, const std::vector<std::size_t>& start,
                                      std::size_t runs, std::uint64_t seed);

[[noreturn]] void throw_sample_too_small(std::size_t n, std::size_t need);

template <class Cdf>
TestReport ks_test(std::vector<double> sample, Cdf&& cdf, double alpha, std::string name) {
  if (sample.size() < 100) throw_sample_too_small(sample.size(), 100);
  std::sort(sample.begin(), sample.end());
  std::vector<double> f(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) f[i] = cdf(sample[i]);
  TestReport r;
  r.test = std::move(name);
  r.statistic = kernels::active().ks_sup_deviation(f.data(), f.size());
  r.critical = ks_critical(alpha, static_cast<double>(sample.size()));
  r.alpha = alpha;
  r.n = {sample.size()};
  r.pass = r.recomputed_verdict();
  return r;
}

}  // namespace bdwalk
