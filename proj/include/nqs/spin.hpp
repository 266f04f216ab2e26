#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace nqs {

// A spin-1/2 configuration on up to 64 sites, packed so that site 0 occupies
// the most significant bit of the n-bit word.  With that layout the packed
// word doubles as the basis index used by the dense oracle:
//   index(sigma) = sum_i bit_i * 2^(n-1-i).
// Spin values follow s_i = 1 - 2*bit_i (bit 0 = up = +1).
struct SpinConfig {
  std::uint64_t bits = 0;
  int n_sites = 0;

  SpinConfig() = default;
  SpinConfig(std::uint64_t bits_, int n_sites_) : bits(bits_), n_sites(n_sites_) {}

  int bit(int site) const { return static_cast<int>((bits >> (n_sites - 1 - site)) & 1u); }
  int spin(int site) const { return 1 - 2 * bit(site); }
  std::uint64_t index() const { return bits; }

  SpinConfig flipped(int site) const {
    return SpinConfig(bits ^ (std::uint64_t{1} << (n_sites - 1 - site)), n_sites);
  }

  static std::uint64_t flip_mask(int site, int n_sites) {
    return std::uint64_t{1} << (n_sites - 1 - site);
  }

  std::vector<int> spins() const {
    std::vector<int> out(n_sites);
    for (int i = 0; i < n_sites; ++i) out[i] = spin(i);
    return out;
  }
};

inline int config_bit(std::uint64_t bits, int site, int n_sites) {
  return static_cast<int>((bits >> (n_sites - 1 - site)) & 1u);
}

inline double config_spin(std::uint64_t bits, int site, int n_sites) {
  return 1.0 - 2.0 * config_bit(bits, site, n_sites);
}

}  // namespace nqs
