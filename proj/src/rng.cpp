#include "bdwalk/rng.hpp"

namespace bdwalk {

std::uint64_t stream_key(std::uint64_t master, StreamTag tag,
                         std::initializer_list<std::uint64_t> indices) noexcept {
  constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;
  std::uint64_t h = mix64(master ^ golden);
  h = mix64(h ^ mix64(static_cast<std::uint64_t>(tag) + 0xD1B54A32D192ED03ULL));
  h = mix64(h ^ static_cast<std::uint64_t>(indices.size()));
  std::uint64_t position = 2;
  for (std::uint64_t v : indices) {
    h = mix64(h ^ mix64(v + position * golden));
    ++position;
  }
  return h;
}

Xoshiro256 split_stream(std::uint64_t master, StreamTag tag,
                        std::initializer_list<std::uint64_t> indices) noexcept {
  return Xoshiro256(stream_key(master, tag, indices));
}

}  // namespace bdwalk
