#include "nqs/lattice.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace nqs {

Lattice build_lattice(int rows, int cols, Boundary boundary) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("lattice dimensions must be >= 1");
  if (rows * cols > 64) throw std::invalid_argument("lattice exceeds 64 sites");
  Lattice lat;
  lat.rows = rows;
  lat.cols = cols;
  lat.boundary = boundary;
  const bool wrap_cols = boundary == Boundary::periodic && cols > 2;
  const bool wrap_rows = boundary == Boundary::periodic && rows > 2;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) lat.bonds.push_back({r * cols + c, r * cols + c + 1});
    if (wrap_cols) lat.bonds.push_back({r * cols + cols - 1, r * cols});
  }
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c < cols; ++c) lat.bonds.push_back({r * cols + c, (r + 1) * cols + c});
  }
  if (wrap_rows) {
    for (int c = 0; c < cols; ++c) lat.bonds.push_back({(rows - 1) * cols + c, c});
  }
  return lat;
}

QuenchSchedule QuenchSchedule::constant(double J, double g) {
  QuenchSchedule s;
  s.protocol = Protocol::constant;
  s.J0 = J;
  s.g0 = g;
  return s;
}

QuenchSchedule QuenchSchedule::sudden(double J, double g_final) {
  QuenchSchedule s;
  s.protocol = Protocol::sudden;
  s.J0 = J;
  s.g_final = g_final;
  return s;
}

QuenchSchedule QuenchSchedule::linear_ramp(double J0, double g0, double tau_q) {
  if (tau_q <= 0) throw std::invalid_argument("ramp duration must be positive");
  QuenchSchedule s;
  s.protocol = Protocol::linear_ramp;
  s.J0 = J0;
  s.g0 = g0;
  s.tau_q = tau_q;
  return s;
}

Couplings QuenchSchedule::at(double t) const {
  if (!(t >= -1e-12)) throw std::domain_error("schedule time precedes t = 0");
  switch (protocol) {
    case Protocol::constant:
      return {J0, g0};
    case Protocol::sudden:
      return {J0, g_final};
    case Protocol::linear_ramp: {
      if (t > tau_q * (1.0 + 1e-12)) throw std::domain_error("schedule time exceeds ramp end");
      const double x = std::min(t, tau_q) / tau_q;
      return {J0 * (1.0 - x), g0 * (1.0 + x)};
    }
  }
  throw std::logic_error("unknown protocol");
}

double QuenchSchedule::g_scale() const {
  switch (protocol) {
    case Protocol::constant:
      return std::abs(g0);
    case Protocol::sudden:
      return std::abs(g_final);
    case Protocol::linear_ramp:
      return std::abs(g0) * 2.0;
  }
  return 0.0;
}

double QuenchSchedule::t_end_hint() const {
  return protocol == Protocol::linear_ramp ? tau_q
                                           : std::numeric_limits<double>::infinity();
}

double ising_diagonal(const Lattice& lat, std::uint64_t sigma) {
  const int n = lat.n_sites();
  double sum = 0.0;
  for (const auto& b : lat.bonds) {
    sum += config_spin(sigma, b[0], n) * config_spin(sigma, b[1], n);
  }
  return sum;
}

void connected_elements(const Lattice& lat, double J, double g, std::uint64_t sigma,
                        std::vector<ConnectedEntry>& out) {
  const int n = lat.n_sites();
  out.clear();
  out.push_back({sigma, -J * ising_diagonal(lat, sigma)});
  if (g != 0.0) {
    for (int i = 0; i < n; ++i) {
      out.push_back({sigma ^ SpinConfig::flip_mask(i, n), g});
    }
  }
}

void product_connected_elements(const Lattice& lat, std::span<const Couplings> factors,
                                std::uint64_t sigma, ConnAccumulator<double>& out,
                                ConnAccumulator<double>& scratch) {
  out.clear();
  out.add(sigma, 1.0);
  if (factors.empty()) return;
  const int n = lat.n_sites();
  ConnAccumulator<double>* cur = &out;
  ConnAccumulator<double>* next = &scratch;
  for (const Couplings& f : factors) {
    next->clear();
    for (const auto& [config, amp] : cur->items()) {
      if (amp == 0.0) continue;
      // Diagonal piece inline; flips expanded explicitly to avoid re-deriving
      // the row vector for every factor.
      const double diag = -f.J * ising_diagonal(lat, config);
      if (diag != 0.0) next->add(config, amp * diag);
      if (f.g != 0.0) {
        for (int i = 0; i < n; ++i) {
          next->add(config ^ SpinConfig::flip_mask(i, n), amp * f.g);
        }
      }
    }
    std::swap(cur, next);
  }
  if (cur != &out) {
    out.clear();
    for (const auto& [config, amp] : cur->items()) out.add(config, amp);
  }
}

}  // namespace nqs
