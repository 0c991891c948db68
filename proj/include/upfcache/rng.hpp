#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace upfcache {

// Thin wrapper over mt19937_64 with portable transforms; the std::
// distributions are implementation-defined and would break bit-exact replay
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  /// Uniform in [0, 1) with 53 bits.
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), Lemire's nearly-divisionless method.
  std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m = (unsigned __int128)eng_() * bound;
    auto low = std::uint64_t(m);
    if (low < bound) {
      const std::uint64_t threshold = -bound % bound;
      while (low < threshold) {
        m = (unsigned __int128)eng_() * bound;
        low = std::uint64_t(m);
      }
    }
    return std::uint64_t(m >> 64);
  }

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace upfcache
