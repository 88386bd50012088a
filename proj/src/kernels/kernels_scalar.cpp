#include <bit>
#include <cstdint>

#include "bdwalk/kernels.hpp"
#include "log_constants.hpp"

namespace bdwalk::kernels::scalar {

namespace {

double neg_log_one(std::uint64_t raw) {
  using namespace detail;
  const double u = std::bit_cast<double>((raw >> 12) | 0x3FF0000000000000ULL) - 1.0 + 0x1.0p-53;
  const std::uint64_t ub = std::bit_cast<std::uint64_t>(u);
  std::uint64_t biased = ub >> 52;
  double m = std::bit_cast<double>((ub & 0x000FFFFFFFFFFFFFULL) | 0x3FF0000000000000ULL);
  if (m > kSqrt2) {
    m = m * 0.5;
    biased += 1;
  }
  const double e = static_cast<double>(biased) - 1023.0;
  const double s = (m - 1.0) / (m + 1.0);
  const double z = s * s;
  double p = kLogCoeff[kLogTerms - 1];
  for (int k = kLogTerms - 2; k >= 0; --k) p = p * z + kLogCoeff[k];
  const double r = (2.0 * s) * p;
  return -((e * kLn2Hi) + ((e * kLn2Lo) + r));
}

}  // namespace

void neg_log_uniform(const std::uint64_t* bits, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = neg_log_one(bits[i]);
}

double ks_sup_deviation(const double* f, std::size_t n) {
  const double dn = static_cast<double>(n);
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double di = static_cast<double>(i);
    const double below = f[i] - di / dn;
    const double above = (di + 1.0) / dn - f[i];
    best = below > best ? below : best;
    best = above > best ? above : best;
  }
  return best;
}

void blocked_sum(const double* x, std::size_t n, double* sum, double* sumsq) {
  double s[4] = {0.0, 0.0, 0.0, 0.0};
  double q[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (int j = 0; j < 4; ++j) {
      const double v = x[i + j];
      s[j] = s[j] + v;
      q[j] = q[j] + v * v;
    }
  }
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  double total_sq = (q[0] + q[1]) + (q[2] + q[3]);
  for (; i < n; ++i) {
    total = total + x[i];
    total_sq = total_sq + x[i] * x[i];
  }
  *sum = total;
  *sumsq = total_sq;
}

}  // namespace bdwalk::kernels::scalar
