#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <vector>

#include "shiftbench/errors.hpp"

namespace shiftbench {

// 64-bit FNV-1a. Used for role tags, spec digests and artifact digests.
inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ull;

inline constexpr uint64_t fnv1a64(std::string_view data, uint64_t h = kFnvOffset) {
  for (char c : data) {
    h ^= static_cast<uint8_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a64(std::span<const uint8_t> data, uint64_t h = kFnvOffset) {
  for (uint8_t b : data) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

// SplitMix64 finalizer (Vigna). The published mixer behind seed derivation.
inline constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline constexpr uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Full SplitMix64 step: advances `state` and returns the next output.
inline constexpr uint64_t splitmix64_next(uint64_t& state) {
  state += kGolden;
  return mix64(state);
}

// Child stream seed for (master seed, role tag). Chaining calls derives
// deeper streams: derive_seed(derive_seed(m, a), b).
inline constexpr uint64_t derive_seed(uint64_t master, uint64_t tag) {
  return mix64(master + kGolden * (tag + 1));
}

template <typename... Tags>
inline constexpr uint64_t derive_seed(uint64_t master, uint64_t tag, Tags... rest) {
  return derive_seed(derive_seed(master, tag), rest...);
}

// Minimal PCG32 (O'Neill, pcg32 variant: 64-bit state, 32-bit output).
// Reference vector: seeded with (42, 54) the first outputs are
// a15c02b7 7b47f409 ba1d3330 83d2f293 bfa4784b cbed606e.
class Pcg32 {
 public:
  Pcg32() : Pcg32(0x853c49e6748fea9bull, 0xda3e39cb94b95bdbull) {}

  Pcg32(uint64_t initstate, uint64_t initseq) { seed(initstate, initseq); }

  // Seeds state and stream from one 64-bit value via SplitMix64.
  explicit Pcg32(uint64_t seed_value) {
    uint64_t s = seed_value;
    uint64_t a = splitmix64_next(s);
    uint64_t b = splitmix64_next(s);
    seed(a, b);
  }

  void seed(uint64_t initstate, uint64_t initseq) {
    state_ = 0;
    inc_ = (initseq << 1) | 1u;
    next_u32();
    state_ += initstate;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18) ^ old) >> 27);
    uint32_t rot = static_cast<uint32_t>(old >> 59);
    return (xorshifted >> rot) | (xorshifted << ((32 - rot) & 31));
  }

  uint64_t next_u64() {
    uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased integer in [0, bound) via Lemire's multiply-then-reject method.
  uint64_t bounded(uint64_t bound) {
    if (bound == 0) throw RangeError("bounded(0) is undefined");
    unsigned __int128 m =
        static_cast<unsigned __int128>(next_u64()) * bound;
    auto lo = static_cast<uint64_t>(m);
    if (lo < bound) {
      uint64_t threshold = (0 - bound) % bound;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
  uint64_t inc_;
};

// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& items, Pcg32& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.bounded(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Draws k distinct elements from `items` (uniform, order random), leaving
// `items` partially permuted. Returns the chosen elements.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> items, size_t k, Pcg32& rng) {
  if (k > items.size())
    throw InsufficientDataError("cannot draw " + std::to_string(k) + " from " +
                                std::to_string(items.size()));
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + static_cast<size_t>(rng.bounded(items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  return items;
}

}  // namespace shiftbench
