#pragma once

#include <cmath>
#include <cstdint>

// Deterministic, platform-independent RNG streams. std::uniform_real_distribution
// is implementation-defined, so doubles are produced by hand from raw 64-bit
// output; this keeps byte-identical reproducibility across compilers.

namespace nqs {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** (Blackman/Vigna), seeded through splitmix64.
class RngStream {
 public:
  RngStream() : RngStream(0) {}

  explicit RngStream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).  Rejection-free modulo bias is irrelevant for the
  // tiny n used here (symmetry-group picks), but keep it unbiased anyway.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller on deterministic uniforms.
  double next_normal() {
    double u1 = next_double();
    while (u1 <= 0x1.0p-60) u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Derives an independent stream from a master seed and up to four tags
// (experiment phase, time step, optimizer iteration, sample index).  Streams
// depend only on the tags, never on worker partitioning, so estimates are
// identical for any worker count up to floating-point reassociation.
inline RngStream derive_stream(std::uint64_t master, std::uint64_t a = 0,
                               std::uint64_t b = 0, std::uint64_t c = 0,
                               std::uint64_t d = 0) {
  std::uint64_t sm = master;
  std::uint64_t key = splitmix64(sm);
  sm ^= a + 0x9e3779b97f4a7c15ULL;
  key ^= splitmix64(sm);
  sm ^= b + 0xc2b2ae3d27d4eb4fULL;
  key ^= splitmix64(sm);
  sm ^= c + 0x165667b19e3779f9ULL;
  key ^= splitmix64(sm);
  sm ^= d + 0x27d4eb2f165667c5ULL;
  key ^= splitmix64(sm);
  return RngStream(key);
}

}  // namespace nqs
