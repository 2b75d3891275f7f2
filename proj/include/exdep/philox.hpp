#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// A block of four 32-bit words is a pure function of (key, counter), so any
// draw can be addressed directly by its logical coordinates.

#include <array>
#include <cmath>
#include <cstdint>

namespace exdep {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57;
  static constexpr std::uint32_t kW0 = 0x9E3779B9;
  static constexpr std::uint32_t kW1 = 0xBB67AE85;
};

/// Uniform draws addressed by (seed, stream, a, b). `stream` separates
/// independent uses of one seed (simulation, path search, ...).
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed, std::uint32_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  /// Two independent doubles in the open interval (0, 1) for coordinate (a, b).
  std::array<double, 2> uniform_pair(std::uint64_t a, std::uint32_t b) const {
    const auto out = Philox4x32::block(
        {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), b, stream_}, key_);
    return {to_open_unit(out[0], out[1]), to_open_unit(out[2], out[3])};
  }

  double uniform(std::uint64_t a, std::uint32_t b) const { return uniform_pair(a, b)[0]; }

  /// Uniform integer in [0, bound) for coordinate (a, b); bound > 0.
  std::uint64_t below(std::uint64_t bound, std::uint64_t a, std::uint32_t b) const {
    return static_cast<std::uint64_t>(std::floor(uniform(a, b) * static_cast<double>(bound))) %
           bound;
  }

 private:
  static double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    // 53 random bits, shifted by half a step so 0 and 1 are never produced.
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  Philox4x32::Key key_;
  std::uint32_t stream_;
};

}  // namespace exdep
