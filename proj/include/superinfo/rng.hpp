#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string_view>

#include "superinfo/errors.hpp"

namespace superinfo {

namespace detail {

inline uint64_t splitmix64_next(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t rotl64(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

/// FNV-1a over a byte string; used to derive named sub-stream seeds.
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// xoshiro256++ generator with splitmix64 seed expansion.
///
/// The state update and the 64-bit -> [0,1) double mapping are fixed so that
/// any implementation of the same recipe reproduces streams bit-for-bit:
///   state: four u64 words filled by successive splitmix64 outputs
///   next:  rotl(s0+s3,23)+s0, then the xoshiro256 linear engine step
///   next_double: (next() >> 11) * 2^-53
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = detail::splitmix64_next(sm);
  }

  /// Independent stream derived from a master seed and a stream name.
  static Rng stream(uint64_t master_seed, std::string_view name) {
    return Rng(master_seed ^ detail::fnv1a64(name));
  }

  uint64_t next_u64() {
    const uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1), 53 mantissa bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n) via the multiply-shift reduction (no modulo
  /// bias worth caring about at these stream lengths, and no rejection loop,
  /// so the number of raw draws per call is fixed).
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double uniform(double lo, double hi) {
    if (lo > hi) throw DomainError("rng uniform: lo > hi");
    return lo + (hi - lo) * next_double();
  }

  /// Box-Muller transform, cosine branch only. Each call consumes exactly two
  /// raw u64 draws; nothing is cached, so the full generator state is the
  /// four xoshiro words.
  double normal(double mean, double std) {
    if (std < 0) throw DomainError("rng normal: std < 0");
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 == 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + std * (r * std::cos(2.0 * 3.14159265358979323846 * u2));
  }

  /// Raw 32-byte state, little-endian word order (checkpoint payload).
  std::array<uint8_t, 32> save_state() const {
    std::array<uint8_t, 32> out{};
    for (int i = 0; i < 4; ++i) {
      uint64_t w = state_[i];
      for (int b = 0; b < 8; ++b) {
        out[static_cast<size_t>(i * 8 + b)] = static_cast<uint8_t>(w & 0xff);
        w >>= 8;
      }
    }
    return out;
  }

  void load_state(const std::array<uint8_t, 32>& bytes) {
    for (int i = 0; i < 4; ++i) {
      uint64_t w = 0;
      for (int b = 7; b >= 0; --b) {
        w = (w << 8) | bytes[static_cast<size_t>(i * 8 + b)];
      }
      state_[i] = w;
    }
  }

  bool operator==(const Rng& other) const { return state_ == other.state_; }

 private:
  std::array<uint64_t, 4> state_{};
};

}  // namespace superinfo
