// Compiled with -mavx2 (and without -mfma) when the compiler supports it.

#include "bdwalk/kernels.hpp"
#include "log_constants.hpp"

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace bdwalk::kernels::avx2 {

#if defined(__AVX2__)

namespace {

inline __m256d neg_log4(__m256i raw) {
  using namespace detail;
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256d one = _mm256_set1_pd(1.0);

  __m256d u = _mm256_castsi256_pd(_mm256_or_si256(_mm256_srli_epi64(raw, 12), one_bits));
  u = _mm256_add_pd(_mm256_sub_pd(u, one), _mm256_set1_pd(0x1.0p-53));

  const __m256i ub = _mm256_castpd_si256(u);
  __m256i biased = _mm256_srli_epi64(ub, 52);
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(ub, mant_mask), one_bits));
  const __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(kSqrt2), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  biased = _mm256_sub_epi64(biased, _mm256_castpd_si256(big));

  // Exact int64 -> double for values below 2^52.
  const __m256i magic_bits = _mm256_set1_epi64x(0x4330000000000000LL);
  const __m256d magic = _mm256_castsi256_pd(magic_bits);
  __m256d e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(biased, magic_bits)), magic);
  e = _mm256_sub_pd(e, _mm256_set1_pd(1023.0));

  const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d z = _mm256_mul_pd(s, s);
  __m256d p = _mm256_set1_pd(kLogCoeff[kLogTerms - 1]);
  for (int k = kLogTerms - 2; k >= 0; --k) {
    p = _mm256_add_pd(_mm256_mul_pd(p, z), _mm256_set1_pd(kLogCoeff[k]));
  }
  const __m256d r = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(2.0), s), p);
  const __m256d hi = _mm256_mul_pd(e, _mm256_set1_pd(kLn2Hi));
  const __m256d lo = _mm256_add_pd(_mm256_mul_pd(e, _mm256_set1_pd(kLn2Lo)), r);
  return _mm256_sub_pd(_mm256_setzero_pd(), _mm256_add_pd(hi, lo));
}

}  // namespace

void neg_log_uniform(const std::uint64_t* bits, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256i raw = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bits + i));
    _mm256_storeu_pd(out + i, neg_log4(raw));
  }
  if (i < n) scalar::neg_log_uniform(bits + i, out + i, n - i);
}

double ks_sup_deviation(const double* f, std::size_t n) {
  const __m256d dn = _mm256_set1_pd(static_cast<double>(n));
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d step = _mm256_set1_pd(4.0);
  __m256d idx = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
  __m256d best = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d fv = _mm256_loadu_pd(f + i);
    const __m256d below = _mm256_sub_pd(fv, _mm256_div_pd(idx, dn));
    const __m256d above = _mm256_sub_pd(_mm256_div_pd(_mm256_add_pd(idx, one), dn), fv);
    best = _mm256_max_pd(best, _mm256_max_pd(below, above));
    idx = _mm256_add_pd(idx, step);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, best);
  double result = 0.0;
  for (double v : lanes) result = v > result ? v : result;
  const double dnn = static_cast<double>(n);
  for (; i < n; ++i) {
    const double di = static_cast<double>(i);
    const double below = f[i] - di / dnn;
    const double above = (di + 1.0) / dnn - f[i];
    result = below > result ? below : result;
    result = above > result ? above : result;
  }
  return result;
}

void blocked_sum(const double* x, std::size_t n, double* sum, double* sumsq) {
  __m256d s = _mm256_setzero_pd();
  __m256d q = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    s = _mm256_add_pd(s, v);
    q = _mm256_add_pd(q, _mm256_mul_pd(v, v));
  }
  alignas(32) double sl[4];
  alignas(32) double ql[4];
  _mm256_store_pd(sl, s);
  _mm256_store_pd(ql, q);
  double total = (sl[0] + sl[1]) + (sl[2] + sl[3]);
  double total_sq = (ql[0] + ql[1]) + (ql[2] + ql[3]);
  for (; i < n; ++i) {
    total = total + x[i];
    total_sq = total_sq + x[i] * x[i];
  }
  *sum = total;
  *sumsq = total_sq;
}

#else  // no AVX2 at compile time: forward to the reference.

void neg_log_uniform(const std::uint64_t* bits, double* out, std::size_t n) {
  scalar::neg_log_uniform(bits, out, n);
}
double ks_sup_deviation(const double* f, std::size_t n) { return scalar::ks_sup_deviation(f, n); }
void blocked_sum(const double* x, std::size_t n, double* sum, double* sumsq) {
  scalar::blocked_sum(x, n, sum, sumsq);
}

#endif

}  // namespace bdwalk::kernels::avx2
