#pragma once

#include <cmath>
#include <cstdint>

#include "atomscope/units.hpp"

// Counter-based random streams. Every draw is a pure function of
// (seed, key..., counter), so Monte Carlo results do not depend on worker
// count or evaluation order. Streams are forked by hashing keys into the
// state; draws hash a counter on top.

namespace atomscope::rng {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Substream {
 public:
  explicit constexpr Substream(std::uint64_t seed)
      : state_(splitmix64(seed ^ 0x243f6a8885a308d3ULL)) {}

  // Derive an independent child stream for a named index (site, shot, stage).
  constexpr Substream fork(std::uint64_t key) const {
    Substream s(0);
    s.state_ = splitmix64(state_ + splitmix64(key + 0x452821e638d01377ULL));
    return s;
  }

  constexpr std::uint64_t word(std::uint64_t counter) const {
    return splitmix64(state_ ^ splitmix64(counter + 0x13198a2e03707344ULL));
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(word(counter) >> 11) * 0x1.0p-53;
  }

  bool bernoulli(std::uint64_t counter, double p) const {
    return uniform(counter) < p;
  }

  // Standard normal via Box-Muller; consumes counters 2c and 2c+1.
  double normal(std::uint64_t counter) const {
    // shift into (0,1) so log() is finite
    double u1 = (static_cast<double>(word(2 * counter) >> 11) + 0.5) * 0x1.0p-53;
    double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(units::two_pi * u2);
  }

 private:
  std::uint64_t state_;
};

// Named stages so substreams for different purposes never collide.
namespace stage {
inline constexpr std::uint64_t loading = 1;
inline constexpr std::uint64_t transport = 2;
inline constexpr std::uint64_t geometry = 3;
inline constexpr std::uint64_t heating = 4;
inline constexpr std::uint64_t position = 5;
inline constexpr std::uint64_t velocity = 6;
inline constexpr std::uint64_t bootstrap = 7;
inline constexpr std::uint64_t noise = 8;
}  // namespace stage

}  // namespace atomscope::rng
