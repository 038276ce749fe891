#pragma once

// Counter-based random streams.
//
// A stream is keyed by (seed, purpose); draw i of a stream is a pure function
// of (key, i), so any sample can be regenerated without replaying earlier
// draws and results do not depend on evaluation order. The mixer is the
// SplitMix64 finalizer applied to key + i * golden_gamma.

#include <cstdint>
#include <string_view>

namespace stiffgate {

enum class StreamPurpose : std::uint64_t {
  Init = 0x696e6974,         // "init"
  Collocation = 0x636f6c6c,  // "coll"
};

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class CounterStream {
 public:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  constexpr CounterStream(std::uint64_t seed, StreamPurpose purpose)
      : key_(splitmix64_mix(splitmix64_mix(seed + kGamma) ^ static_cast<std::uint64_t>(purpose))) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const {
    return splitmix64_mix(key_ + (counter + 1) * kGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  constexpr double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace stiffgate
