#pragma once

// Deterministic random number generation. All draws are produced by an
// explicit xoshiro256++ engine seeded through splitmix64, so streams are
// reproducible bit-for-bit across platforms and independent of the standard
// library's distribution implementations. Substreams are derived from
// (seed, name, index) keys, which makes block-parallel generation give the
// same output as sequential generation.

#include <cstdint>
#include <string_view>

#include "causalglm/special.hpp"

namespace causalglm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_name(std::string_view s) {
  // FNV-1a 64-bit.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t mix_u64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t state = a ^ (0x9E3779B97F4A7C15ULL + (b << 6) + (b >> 2));
  std::uint64_t out = splitmix64(state);
  state ^= b;
  return out ^ splitmix64(state);
}

// Key for a named substream, e.g. per SCM node and row block, or per
// bootstrap replicate. Stable across runs and thread schedules.
inline std::uint64_t substream_key(std::uint64_t seed, std::string_view name,
                                   std::uint64_t index) {
  return mix_u64(mix_u64(seed, hash_name(name)), index);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform draw strictly inside (0, 1).
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() { return normal_quantile(next_unit()); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
};

}  // namespace causalglm
