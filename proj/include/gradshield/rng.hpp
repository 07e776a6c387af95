#pragma once

#include "gradshield/common.hpp"

#include <array>
#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

namespace gradshield {

// xoshiro256** (Blackman & Vigna) seeded through splitmix64.
//
// The standard library's engines/distributions are implementation-defined,
// which would break the bitwise-reproducibility contracts of seeded runs.
// This generator and every conversion below are fully specified here, so a
// seed pins the exact draw sequence on any platform. All randomness in the
// repository flows from explicit seeds through this class.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // splitmix64 expansion of the seed into the 256-bit state.
    std::uint64_t x = seed;
    for (auto& word : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      word = z ^ (z >> 31);
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53 (double) / 24 (float) significant bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  float next_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

  template <class S>
  S next_unit();

  template <class S>
  S uniform(S lo, S hi) {
    return lo + (hi - lo) * next_unit<S>();
  }

  // Uniform in [0, n), n >= 1. Multiply-shift bounding (no modulo).
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Independent child stream; advances this generator by one draw.
  Rng split() { return Rng(next_u64()); }

  // Stage-named seed derivation, independent of call order.
  static std::uint64_t derive_seed(std::uint64_t base, std::string_view stage) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
    for (char c : stage) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return base ^ h;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_;
};

template <>
inline float Rng::next_unit<float>() { return next_float(); }
template <>
inline double Rng::next_unit<double>() { return next_double(); }

// In-place Fisher-Yates shuffle.
template <class T>
void fisher_yates(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Identity permutation of length n, then shuffled.
inline std::vector<Index> shuffled_indices(Index n, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  fisher_yates(idx, rng);
  return idx;
}

}  // namespace gradshield
