#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nqs/spin.hpp"

namespace nqs {

enum class Boundary { open, periodic };

// Rectangular spin-1/2 lattice, sites numbered row-major (site = r*cols + c).
// Bonds are nearest-neighbor pairs, horizontal bonds first then vertical,
// row-major within each group; periodic wrap bonds are skipped along a
// dimension of size <= 2 so no bond appears twice.
struct Lattice {
  int rows = 0;
  int cols = 0;
  Boundary boundary = Boundary::open;
  std::vector<std::array<int, 2>> bonds;

  int n_sites() const { return rows * cols; }
};

Lattice build_lattice(int rows, int cols, Boundary boundary);

struct Couplings {
  double J = 0.0;
  double g = 0.0;
};

// Transverse-field critical coupling g_c/J for the square-lattice model.
inline constexpr double k_gc_square = 3.044;
// For a single chain (rows == 1 or cols == 1) the critical point is g = J.
inline constexpr double k_gc_chain = 1.0;

enum class Protocol { constant, sudden, linear_ramp };

// Time-dependent couplings. "linear_ramp" is the critical quench
// J(t) = J0*(1 - t/tau_q), g(t) = g0*(1 + t/tau_q) on the domain [0, tau_q];
// "sudden" holds (J0, g_final) for all t >= 0 (the pre-quench state is
// prepared, not evolved); "constant" holds (J0, g0).
struct QuenchSchedule {
  Protocol protocol = Protocol::constant;
  double J0 = 1.0;
  double g0 = 0.0;
  double g_final = 0.0;
  double tau_q = 0.0;

  static QuenchSchedule constant(double J, double g);
  static QuenchSchedule sudden(double J, double g_final);
  static QuenchSchedule linear_ramp(double J0, double g0, double tau_q);

  Couplings at(double t) const;
  // Largest |g| over the schedule domain; used by relative time-step policies.
  double g_scale() const;
  double t_end_hint() const;  // tau_q for ramps, +inf otherwise
};

// One row of the Hamiltonian in the computational basis: the configurations
// sigma' with <sigma|H|sigma'> != 0 and their (real) matrix elements.
// H = -J sum_<mn> sz_m sz_n + g sum_m sx_m, so there is one diagonal entry
// and one entry per single spin flip with amplitude g.
struct ConnectedEntry {
  std::uint64_t config = 0;
  double amplitude = 0.0;
};

// Deterministic-order accumulator used to merge duplicate target
// configurations. Entries keep first-insertion order so downstream sums are
// reproducible.
template <class Scalar>
class ConnAccumulator {
 public:
  void clear() {
    items_.clear();
    index_.clear();
  }
  void add(std::uint64_t config, Scalar amplitude) {
    auto [it, inserted] = index_.try_emplace(config, items_.size());
    if (inserted) {
      items_.push_back({config, amplitude});
    } else {
      items_[it->second].second += amplitude;
    }
  }
  const std::vector<std::pair<std::uint64_t, Scalar>>& items() const { return items_; }
  std::vector<std::pair<std::uint64_t, Scalar>>& items() { return items_; }

 private:
  std::vector<std::pair<std::uint64_t, Scalar>> items_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

// Row sigma of H(J, g): diagonal entry first, then one entry per flipped site
// (row-major site order). Flip entries are omitted when g == 0.
void connected_elements(const Lattice& lat, double J, double g, std::uint64_t sigma,
                        std::vector<ConnectedEntry>& out);

double ising_diagonal(const Lattice& lat, std::uint64_t sigma);

// Row sigma of the operator product H(f_0) H(f_1) ... H(f_{m-1}), where the
// leftmost factor f_0 is the one applied last to a ket. Duplicate targets are
// merged; an empty factor list yields the identity row {(sigma, 1)}.
void product_connected_elements(const Lattice& lat, std::span<const Couplings> factors,
                                std::uint64_t sigma,
                                ConnAccumulator<double>& out,
                                ConnAccumulator<double>& scratch);

}  // namespace nqs
