#pragma once

// Data-parallel inner loops with a scalar reference and an AVX2 variant.
//
// Both variants perform the same IEEE operations in the same order (no FMA
// contraction), so their outputs are bitwise identical. The active variant is
// chosen once at startup: BDWALK_KERNELS=scalar|avx2|auto, default auto.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace bdwalk::kernels {

enum class Isa { Scalar, Avx2 };

/// out[i] = -log(u_i) with u_i = ((bits[i] >> 12) + 0.5) * 2^-52, so out[i] > 0.
using NegLogUniformFn = void (*)(const std::uint64_t* bits, double* out, std::size_t n);

/// Given sorted model-CDF values f[0..n), returns max_i max(f_i - i/n, (i+1)/n - f_i).
using KsSupFn = double (*)(const double* f, std::size_t n);

/// Four-lane blocked sum and sum of squares.
using BlockedSumFn = void (*)(const double* x, std::size_t n, double* sum, double* sumsq);

struct KernelTable {
  Isa isa;
  NegLogUniformFn neg_log_uniform;
  KsSupFn ks_sup_deviation;
  BlockedSumFn blocked_sum;
};

namespace scalar {
void neg_log_uniform(const std::uint64_t* bits, double* out, std::size_t n);
double ks_sup_deviation(const double* f, std::size_t n);
void blocked_sum(const double* x, std::size_t n, double* sum, double* sumsq);
}  // namespace scalar

namespace avx2 {
void neg_log_uniform(const std::uint64_t* bits, double* out, std::size_t n);
double ks_sup_deviation(const double* f, std::size_t n);
void blocked_sum(const double* x, std::size_t n, double* sum, double* sumsq);
}  // namespace avx2

bool cpu_has_avx2() noexcept;

/// Table for a specific ISA. Requesting Avx2 on a CPU without it yields Scalar.
const KernelTable& table_for(Isa isa) noexcept;

/// The process-wide active table.
const KernelTable& active() noexcept;

std::string_view isa_name(Isa isa) noexcept;

/// Converts the 52 high bits of a raw word into a uniform on (0, 1).
inline double bits_to_open_uniform(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

}  // namespace bdwalk::kernels
