#pragma once

#include <cmath>
#include <cstdint>

namespace blocksim {

// SplitMix64. Fully specified generator so seeded streams are identical
// across standard libraries; the distribution helpers below avoid the
// implementation-defined std::*_distribution classes for the same reason.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform01_open_low() { return 1.0 - uniform01(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return r % n;
  }

  double exponential(double rate) { return -std::log(uniform01_open_low()) / rate; }

  // Box-Muller standard normal.
  double standard_normal() {
    const double u1 = uniform01_open_low();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t state_;
};

// Decorrelates a (seed, id) pair into a fresh stream seed, so per-record
// draws are order-independent.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t id) {
  SplitMix64 s(id * 0x9e3779b97f4a7c15ULL + 0x1b873593ULL);
  return seed ^ s.next();
}

}  // namespace blocksim
