#include "bdwalk/bdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

#include "bdwalk/error.hpp"
#include "bdwalk/kernels.hpp"

namespace bdwalk {

namespace {

void check_probability(double p, const char* where) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(ErrorCode::OutOfRange, std::string(where) + " outside [0, 1]");
  }
  if (p == 0.0) throw Error(ErrorCode::ZeroInfimum, std::string(where) + " is zero");
  if (p > 0.5) throw Error(ErrorCode::ViolatesHalf, std::string(where) + " exceeds 1/2");
}

// Law with weights w_0 = 1, w_{n+1} = w_n * ratio(n), where ratio(n) = r for
// n >= geo_from. With finite_size set the support is {0..finite_size-1}.
template <class Ratio>
DistTable build_law(Ratio ratio, std::size_t geo_from, double r,
                    std::optional<std::size_t> finite_size, double mass_tol) {
  std::vector<double> w{1.0};
  const std::size_t head = finite_size ? *finite_size : geo_from + 1;
  while (w.size() < head) w.push_back(w.back() * ratio(w.size() - 1));
  DistTable law;
  double z = 0.0;
  for (double v : w) z += v;
  if (!finite_size) {
    z += w.back() * r / (1.0 - r);
    constexpr std::size_t kMaxTable = 1u << 20;
    while (w.back() * r / (1.0 - r) / z >= mass_tol && w.size() < kMaxTable) {
      w.push_back(w.back() * r);
    }
    law.tail_mass = w.back() * r / (1.0 - r) / z;
    law.tail_ratio = r;
  }
  for (double& v : w) v /= z;
  law.weights = std::move(w);
  return law;
}

// T_n for n = 1..K+1, with T_n = 1/(q - p) for n >= K.
std::vector<double> hitting_means_head(const BDParams& params) {
  const std::size_t K = params.n_tab();
  const double c = 1.0 / (1.0 - 2.0 * params.p_tail());
  std::vector<double> T(K + 2, c);
  for (std::size_t m = K - 1; m >= 1; --m) T[m] = 1.0 / params.q(m) + params.rho(m) * T[m + 1];
  T[0] = std::numeric_limits<double>::quiet_NaN();
  return T;
}

}  // namespace

BDParams BDParams::validate(RawParams raw) {
  if (raw.p_table.empty()) throw Error(ErrorCode::OutOfRange, "empty birth-rate table");
  for (double p : raw.p_table) check_probability(p, "table entry");
  check_probability(raw.p_tail, "tail value");
  if (raw.p_tail >= 0.5) {
    throw Error(ErrorCode::TailDivergent, "tail value 1/2 gives tail ratio 1");
  }
  BDParams out;
  out.table_ = std::move(raw.p_table);
  out.tail_ = raw.p_tail;
  out.inf_p_ = std::min(*std::min_element(out.table_.begin(), out.table_.end()), out.tail_);
  out.sup_rho_ = out.tail_rho();
  for (std::size_t n = 0; n < out.table_.size(); ++n) out.sup_rho_ = std::max(out.sup_rho_, out.rho(n));
  return out;
}

RateFunction::RateFunction(std::vector<double> table, double tail)
    : table_(std::move(table)), tail_(tail) {
  if (table_.empty()) throw Error(ErrorCode::OutOfRange, "empty phi table");
  if (table_[0] != 1.0) throw Error(ErrorCode::OutOfRange, "phi(0) must equal 1");
  for (double v : table_) {
    if (v == 0.0) throw Error(ErrorCode::ZeroRateInsideSupport, "phi vanishes inside its table");
    if (!(v > 0.0 && v <= 1.0)) throw Error(ErrorCode::OutOfRange, "phi table entry outside (0, 1]");
  }
  if (!(tail_ >= 0.0 && tail_ <= 1.0)) throw Error(ErrorCode::OutOfRange, "phi tail outside [0, 1]");
  for (std::size_t n = 1; n < table_.size(); ++n) monotone_ = monotone_ && table_[n] <= table_[n - 1];
  monotone_ = monotone_ && tail_ <= table_.back();
  const bool flat = std::all_of(table_.begin(), table_.end(), [&](double v) { return v == tail_; });
  if (flat) constant_ = tail_;
}

RateFunction RateFunction::geometric_half(std::size_t length) {
  std::vector<double> t(length);
  for (std::size_t n = 0; n < length; ++n) t[n] = std::ldexp(1.0, -static_cast<int>(n));
  const double tail = t.back();
  return RateFunction(std::move(t), tail);
}

RateFunction RateFunction::harmonic(std::size_t length) {
  std::vector<double> t(length);
  for (std::size_t n = 0; n < length; ++n) t[n] = 1.0 / static_cast<double>(n + 1);
  const double tail = t.back();
  return RateFunction(std::move(t), tail);
}

RatioSequences ratio_sequences(const BDParams& params, std::size_t N) {
  const double r = params.tail_rho();
  if (!(r < 1.0)) throw Error(ErrorCode::TailDivergent, "tail ratio >= 1");
  const std::size_t K = params.n_tab();
  const std::size_t top = std::max(N + 1, K);
  RatioSequences out;
  out.rho.assign(top + 1, 0.0);
  out.R.assign(top + 1, 1.0);
  out.S.assign(top + 1, 0.0);
  for (std::size_t n = 1; n <= top; ++n) {
    out.rho[n] = params.rho(n);
    out.R[n] = out.R[n - 1] * out.rho[n];
  }
  for (std::size_t n = top + 1; n-- > 0;) {
    out.S[n] = (n + 1 >= K) ? out.R[n] / (1.0 - r) : out.R[n] + out.S[n + 1];
  }
  out.tail_bound = out.S[N + 1];
  out.rho.resize(N + 1);
  out.R.resize(N + 1);
  out.S.resize(N + 1);
  return out;
}

ConditionReport check_ergodic(const BDParams& params) {
  const double r = params.tail_rho();
  ConditionReport rep{"ergodic", r < 1.0, std::numeric_limits<double>::infinity()};
  if (!rep.holds) return rep;
  const std::size_t K = params.n_tab();
  double a = 1.0;
  double sum = 0.0;
  for (std::size_t n = 1; n <= K; ++n) {
    a *= params.p(n - 1) / params.q(n);
    if (n < K) sum += a;
  }
  rep.value = sum + a / (1.0 - r);
  return rep;
}

ConditionReport check_strong_ergodic(const BDParams& params) {
  const double r = params.tail_rho();
  ConditionReport rep{"strongly_ergodic", r < 1.0, std::numeric_limits<double>::infinity()};
  if (!rep.holds) return rep;
  const std::size_t K = params.n_tab();
  const std::size_t n0 = std::max<std::size_t>(1, K - 1);
  const auto seq = ratio_sequences(params, n0);
  double sum = 0.0;
  for (std::size_t n = 1; n < n0; ++n) sum += seq.S[n] * seq.S[n] / seq.R[n];
  rep.value = sum + seq.S[n0] / ((1.0 - r) * (1.0 - r));
  return rep;
}

double DistTable::pmf(std::size_t k) const noexcept {
  if (k < weights.size()) return weights[k];
  if (tail_ratio == 0.0) return 0.0;
  const double j = static_cast<double>(k - weights.size());
  return tail_mass * (1.0 - tail_ratio) * std::pow(tail_ratio, j);
}

double DistTable::cdf(std::size_t k) const noexcept {
  if (k < weights.size()) {
    double c = 0.0;
    for (std::size_t i = 0; i <= k; ++i) c += weights[i];
    return std::min(c, 1.0);
  }
  if (tail_ratio == 0.0) return 1.0;
  const double j = static_cast<double>(k + 1 - weights.size());
  return 1.0 - tail_mass * std::pow(tail_ratio, j);
}

double DistTable::mean() const noexcept {
  double m = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) m += static_cast<double>(k) * weights[k];
  if (tail_ratio > 0.0) {
    m += tail_mass * (static_cast<double>(weights.size() - 1) + 1.0 / (1.0 - tail_ratio));
  }
  return m;
}

std::size_t DistTable::quantile(double u) const noexcept {
  double c = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    c += weights[k];
    if (u <= c) return k;
  }
  const std::size_t last = weights.size() - 1;
  if (tail_ratio == 0.0 || tail_mass <= 0.0) return last;
  const double v = std::min((u - c) / tail_mass, 1.0);
  if (v >= 1.0) return last + 1 + static_cast<std::size_t>(std::log(0x1.0p-53) / std::log(tail_ratio));
  const double j = std::ceil(std::log1p(-v) / std::log(tail_ratio));
  return last + static_cast<std::size_t>(std::max(1.0, j));
}

DistTable stationary_distribution(const BDParams& params, double mass_tol) {
  if (!check_ergodic(params).holds) throw Error(ErrorCode::NotErgodic, "no stationary law");
  auto ratio = [&](std::size_t n) { return params.p(n) / params.q(n + 1); };
  return build_law(ratio, params.n_tab(), params.tail_rho(), std::nullopt, mass_tol);
}

double detailed_balance_defect_exact(const BDParams& params, const DistTable& nu,
                                     std::size_t upto) {
  using boost::multiprecision::cpp_rational;
  double worst = 0.0;
  const std::size_t n_max = std::min(upto, nu.size() - 1);
  for (std::size_t n = 0; n < n_max; ++n) {
    const cpp_rational pn(params.p(n));
    const cpp_rational qn1 = cpp_rational(1) - cpp_rational(params.p(n + 1));
    const cpp_rational lhs = cpp_rational(nu.weights[n]) * pn;
    const cpp_rational rhs = cpp_rational(nu.weights[n + 1]) * qn1;
    if (lhs == 0) continue;
    cpp_rational rel = (lhs - rhs) / lhs;
    if (rel < 0) rel = -rel;
    worst = std::max(worst, static_cast<double>(rel));
  }
  return worst;
}

double hitting_time_mean(const BDParams& params, std::size_t n) {
  if (!check_ergodic(params).holds) throw Error(ErrorCode::NotErgodic, "hitting mean diverges");
  if (n == 0) throw Error(ErrorCode::OutOfRange, "hitting mean needs n >= 1");
  if (n >= params.n_tab()) return 1.0 / (1.0 - 2.0 * params.p_tail());
  return hitting_means_head(params)[n];
}

double hitting_second_moment(const BDParams& params) {
  if (!check_strong_ergodic(params).holds) {
    throw Error(ErrorCode::NotStronglyErgodic, "second moment infinite");
  }
  const std::size_t K = params.n_tab();
  const auto T = hitting_means_head(params);
  const auto seq = ratio_sequences(params, K);
  auto sigma = [&](std::size_t l) {
    const double s = 1.0 + 2.0 * params.p(l) * (T[l] + T[l + 1] + T[l] * T[l + 1]);
    return s / params.q(l);
  };
  double sum = 0.0;
  for (std::size_t l = 1; l < K; ++l) sum += sigma(l) * seq.R[l - 1];
  return sum + sigma(K) * seq.S[K - 1];
}

double stationary_mean_hitting(const BDParams& params) {
  if (!check_strong_ergodic(params).holds) {
    throw Error(ErrorCode::NotStronglyErgodic, "stationary mean hitting time infinite");
  }
  const std::size_t K = params.n_tab();
  const double r = params.tail_rho();
  const auto T = hitting_means_head(params);
  const double c = T[K];
  // Unnormalized nu and partial sums A_n = T_1 + ... + T_n.
  double w = 1.0;
  double z = 1.0;
  double A = 0.0;
  double acc = 0.0;
  for (std::size_t n = 1; n <= K; ++n) {
    w *= params.p(n - 1) / params.q(n);
    A += T[n];
    if (n < K) {
      acc += w * A;
      z += w;
    }
  }
  acc += w * (A / (1.0 - r) + c * r / ((1.0 - r) * (1.0 - r)));
  z += w / (1.0 - r);
  return acc / z;
}

double ModifiedChain::p_psi(std::size_t n) const noexcept {
  if (state_limit && n + 1 >= *state_limit) return 0.0;
  return base.p(n) / phi(n);
}

double ModifiedChain::q_psi(std::size_t n) const noexcept {
  if (n == 0 || (state_limit && n >= *state_limit)) return 0.0;
  return base.q(n) / phi(n);
}

ModifiedChain modified_params(const BDParams& params, const RateFunction& phi) {
  for (double v : phi.table()) {
    if (v == 0.0) throw Error(ErrorCode::ZeroRateInsideSupport, "phi vanishes inside support");
  }
  ModifiedChain out{params, phi, std::nullopt};
  if (phi.zero_tail()) out.state_limit = phi.table().size();
  return out;
}

DistTable modified_stationary(const BDParams& params, const RateFunction& phi, double mass_tol) {
  const ModifiedChain chain = modified_params(params, phi);
  auto ratio = [&](std::size_t n) { return chain.p_psi(n) / chain.q_psi(n + 1); };
  const std::size_t geo_from = std::max(params.n_tab(), phi.table().size());
  const double r = params.tail_rho();
  if (!chain.state_limit && !(r < 1.0)) {
    throw Error(ErrorCode::NotErgodicModified, "modified chain not positive recurrent");
  }
  return build_law(ratio, geo_from, r, chain.state_limit, mass_tol);
}

void EventClock::refill() {
  std::uint64_t raw[2 * kBatch];
  for (auto& w : raw) w = rng_();
  kernels::active().neg_log_uniform(raw, exps_, kBatch);
  for (int i = 0; i < kBatch; ++i) us_[i] = kernels::bits_to_open_uniform(raw[kBatch + i]);
  pos_ = 0;
}

int BDTrajectory::state_at(double t) const noexcept {
  auto it = std::upper_bound(events.begin(), events.end(), t,
                             [](double v, const BDEvent& e) { return v < e.time; });
  return it == events.begin() ? initial_state : std::prev(it)->state;
}

BDTrajectory simulate_bdp(const BDParams& params, int init_state, double t_end, Xoshiro256 rng) {
  BDTrajectory traj;
  traj.initial_state = init_state;
  traj.end_time = t_end;
  EventClock clock(rng);
  double t = 0.0;
  int state = init_state;
  while (true) {
    const auto d = clock.next();
    t += d.dt;
    if (t > t_end) break;
    const int next = bd_step(params, state, d.u);
    if (next != state) {
      state = next;
      traj.events.push_back({t, state});
    }
  }
  return traj;
}

int sample_stationary(const BDParams& params, Xoshiro256& rng) {
  return sample_from(stationary_distribution(params), rng);
}

}  // namespace bdwalk
