#pragma once

// Counter-based stream splitting.
//
// Every random stream in the toolkit is an xoshiro256** generator whose
// 256-bit state is derived from (master seed, purpose tag, index tuple):
//
//   h = mix(master ^ 0x9E3779B97F4A7C15)
//   h = mix(h ^ mix(tag + 0xD1B54A32D192ED03))
//   h = mix(h ^ len(indices))
//   for i, v in enumerate(indices): h = mix(h ^ mix(v + (i + 2) * 0x9E3779B97F4A7C15))
//   state[k] = splitmix64 sequence seeded with h, k = 0..3
//
// where mix is the splitmix64 finalizer. Only 64-bit unsigned arithmetic is
// involved, so the derivation is bit-exact on every platform.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace bdwalk {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  Xoshiro256() : Xoshiro256(0) {}
  explicit Xoshiro256(std::uint64_t seed) noexcept {
    SplitMix64 sm(seed);
    for (auto& w : s_) w = sm.next();
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard exponential by inversion.
  double exponential() noexcept { return -std::log(uniform()); }

  bool operator==(const Xoshiro256& other) const noexcept { return s_ == other.s_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> s_{};
};

/// Purpose tags. Distinct tags never share a stream.
enum class StreamTag : std::uint64_t {
  Replica = 1,
  Site = 2,
  Xi = 3,
  Thinning = 4,
  Clock = 5,
  Refresh = 6,
  Marks = 7,
  Init = 8,
  Audit = 9,
  Jitter = 10,
  SiteB = 11,
  Sample = 12,
  Reference = 13,
};

std::uint64_t stream_key(std::uint64_t master, StreamTag tag,
                         std::initializer_list<std::uint64_t> indices) noexcept;

/// Deterministic stream for (master, tag, indices).
Xoshiro256 split_stream(std::uint64_t master, StreamTag tag,
                        std::initializer_list<std::uint64_t> indices = {}) noexcept;

/// Derived 64-bit sub-seed, used to hand one replica its own master seed.
inline std::uint64_t derive_seed(std::uint64_t master, StreamTag tag, std::uint64_t index) noexcept {
  return stream_key(master, tag, {index});
}

}  // namespace bdwalk
