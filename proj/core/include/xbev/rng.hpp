// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace xbev {

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// Counter-based SplitMix64 stream. The i-th draw (0-based) of a stream with
// key `k` is
//
//   splitmix64_mix(k + (i + 1) * 0x9E3779B97F4A7C15)   (mod 2^64)
//
// so any language can reproduce it bit-exactly from (key, counter). Uniform
// doubles use the top 53 bits: (u64 >> 11) * 2^-53, giving [0, 1).
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept {
    ++counter_;
    return splitmix64_mix(key_ + counter_ * kGolden);
  }

  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; consumes two draws per call.
  double normal() noexcept;

  std::uint64_t below(std::uint64_t bound) noexcept {
    return bound == 0 ? 0 : next_u64() % bound;
  }

  // Independent sub-stream derived from this stream's key.
  CounterRng fork(std::uint64_t stream) const noexcept {
    return CounterRng(splitmix64_mix(key_ ^ splitmix64_mix(stream + kGolden)));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace xbev
