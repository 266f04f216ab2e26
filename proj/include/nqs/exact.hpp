#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "nqs/lattice.hpp"

namespace nqs {

// Hard cap on exact-oracle system size: the state vector alone is 16 MiB of
// complex doubles at 20 sites and every matrix-free apply touches all of it.
inline constexpr int k_dense_site_cap = 20;

struct DenseState {
  int n_sites = 0;
  Eigen::VectorXcd amps;

  double norm() const { return amps.norm(); }
};

DenseState make_dense_state(int n_sites);

void check_dense_cap(int n_sites);

// Per-basis-state sum over bonds of s_m * s_n at unit J; the Hamiltonian
// diagonal is -J times this table.
std::vector<double> ising_diagonal_table(const Lattice& lat);

// out = H(J, g) * in, matrix-free (diagonal table + single-flip gathers).
void apply_hamiltonian(const Lattice& lat, const std::vector<double>& diag_table,
                       double J, double g, const Eigen::VectorXcd& in,
                       Eigen::VectorXcd& out);
void apply_hamiltonian(const Lattice& lat, const std::vector<double>& diag_table,
                       double J, double g, const Eigen::VectorXd& in,
                       Eigen::VectorXd& out);

struct GroundStateResult {
  double energy = 0.0;
  Eigen::VectorXcd state;
  double residual = 0.0;
  int matvecs = 0;
};

// Lowest eigenpair by restarted Lanczos with full reorthogonalization inside
// each Krylov block. Matrix-free; deterministic for a fixed seed.
GroundStateResult ground_state(const Lattice& lat, double J, double g,
                               double tol = 1e-10, std::uint64_t seed = 7);

// Integrates i d/dt psi = H(t) psi from t0 to t1 with an embedded
// Dormand-Prince 5(4) pair and PI step-size control. This code path is the
// referee for the variational propagators and shares nothing with them.
DenseState exact_evolve(const Lattice& lat, const QuenchSchedule& schedule,
                        const DenseState& psi0, double t0, double t1,
                        double tol = 1e-10);

// |<a|b>|^2 / (<a|a><b|b>)
double fidelity(const DenseState& a, const DenseState& b);

std::complex<double> dense_expectation(const Lattice& lat,
                                       const std::vector<double>& diag_table,
                                       double J, double g, const DenseState& psi);

// Builds the full 2^N amplitude vector of any ansatz exposing
// log_psi_batch(configs, out). Subject to the dense-site cap.
template <class Ansatz>
DenseState enumerate_ansatz(const Ansatz& ansatz) {
  const int n = ansatz.n_sites();
  check_dense_cap(n);
  const std::size_t dim = std::size_t{1} << n;
  std::vector<std::uint64_t> configs(dim);
  for (std::size_t i = 0; i < dim; ++i) configs[i] = i;
  Eigen::VectorXcd logs(dim);
  ansatz.log_psi_batch(configs, logs);
  DenseState out = make_dense_state(n);
  for (std::size_t i = 0; i < dim; ++i) out.amps[i] = std::exp(logs[i]);
  return out;
}

}  // namespace nqs
