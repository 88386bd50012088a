#include <cstdlib>
#include <string_view>

#include "bdwalk/kernels.hpp"

namespace bdwalk::kernels {

namespace {

constexpr KernelTable kScalar{Isa::Scalar, &scalar::neg_log_uniform, &scalar::ks_sup_deviation,
                              &scalar::blocked_sum};
constexpr KernelTable kAvx2{Isa::Avx2, &avx2::neg_log_uniform, &avx2::ks_sup_deviation,
                            &avx2::blocked_sum};

const KernelTable& select_from_env() {
  const char* raw = std::getenv("BDWALK_KERNELS");
  const std::string_view choice = raw ? raw : "auto";
  if (choice == "scalar") return kScalar;
  return table_for(Isa::Avx2);
}

}  // namespace

bool cpu_has_avx2() noexcept {
#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
  static const bool has = __builtin_cpu_supports("avx2");
  return has;
#else
  return false;
#endif
}

const KernelTable& table_for(Isa isa) noexcept {
  if (isa == Isa::Avx2 && cpu_has_avx2()) return kAvx2;
  return kScalar;
}

const KernelTable& active() noexcept {
  static const KernelTable& chosen = select_from_env();
  return chosen;
}

std::string_view isa_name(Isa isa) noexcept {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

}  // namespace bdwalk::kernels
