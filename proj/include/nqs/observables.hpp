#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nqs/ansatz.hpp"
#include "nqs/lattice.hpp"
#include "nqs/local.hpp"
#include "nqs/spin.hpp"

namespace nqs {

// Per-step measurement bundle. Means are over the sample batch (or exact when
// an explicit weight vector was used, in which case the standard errors are
// zero). sx/sz are per-site, zz is averaged over nearest-neighbor bonds.
// energy keeps its imaginary part as a sanity diagnostic; it should vanish
// within sampling noise for a Hermitian operator.
struct ObservableSnapshot {
  double time = 0.0;
  std::complex<double> energy{0.0, 0.0};
  double energy_se = 0.0;
  double sx = 0.0;
  double sx_se = 0.0;
  double zz = 0.0;
  double zz_se = 0.0;
  double sz = 0.0;
  double sz_se = 0.0;
  double injected_energy = std::numeric_limits<double>::quiet_NaN();
  double injected_energy_density = std::numeric_limits<double>::quiet_NaN();
  long n_samples = 0;
};

template <SampledAnsatz A>
void hamiltonian_local_values(const A& psi, const Lattice& lat, double j, double g,
                              std::span<const std::uint64_t> sigmas,
                              const Eigen::VectorXcd& logs, int n_workers,
                              Eigen::VectorXcd& out) {
  local_operator_values(psi, lat, Couplings{j, g}, sigmas, logs, n_workers, out);
}

namespace detail {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe weighted_mean_se(const Eigen::VectorXd& values,
                               const Eigen::VectorXd& weights) {
  MeanSe r;
  const auto n = values.size();
  if (n == 0) return r;
  if (weights.size() > 0) {
    r.mean = weights.dot(values) / weights.sum();
    return r;  // exact weights: no sampling error to report
  }
  r.mean = values.mean();
  if (n > 1) {
    const double var = (values.array() - r.mean).square().sum() / double(n - 1);
    r.se = std::sqrt(var / double(n));
  }
  return r;
}

}  // namespace detail

// Measures the standard bundle on an explicit configuration set. `logs` must
// hold log psi for each row of `sigmas` (normalized, as the ansatz returns).
// Empty `weights` treats rows as Monte Carlo samples; otherwise rows are
// weighted exactly (e.g. Born probabilities over a full enumeration) and the
// standard errors are zero. `e0` enables the injected-energy fields.
template <SampledAnsatz A>
ObservableSnapshot measure(const A& psi, const Lattice& lat, double j, double g,
                           double time, std::span<const std::uint64_t> sigmas,
                           const Eigen::VectorXcd& logs,
                           const Eigen::VectorXd& weights, int n_workers,
                           std::optional<double> e0 = std::nullopt) {
  ObservableSnapshot snap;
  snap.time = time;
  const auto batch = static_cast<Eigen::Index>(sigmas.size());
  snap.n_samples = batch;
  if (batch == 0) return snap;
  const int n = lat.n_sites();
  const double n_bonds = std::max<std::size_t>(lat.bonds.size(), 1);

  Eigen::VectorXcd e_loc(batch);
  hamiltonian_local_values(psi, lat, j, g, sigmas, logs, n_workers, e_loc);
  Eigen::VectorXcd x_loc(batch);
  local_operator_values(psi, lat, Couplings{0.0, 1.0}, sigmas, logs, n_workers, x_loc);

  Eigen::VectorXd zz(batch), sz(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    zz[b] = ising_diagonal(lat, sigmas[static_cast<std::size_t>(b)]) / n_bonds;
    const int down = std::popcount(sigmas[static_cast<std::size_t>(b)]);
    sz[b] = double(n - 2 * down) / double(n);
  }

  auto er = detail::weighted_mean_se(Eigen::VectorXd(e_loc.real()), weights);
  auto ei = detail::weighted_mean_se(Eigen::VectorXd(e_loc.imag()), weights);
  snap.energy = {er.mean, ei.mean};
  snap.energy_se = std::hypot(er.se, ei.se);
  auto sx = detail::weighted_mean_se(Eigen::VectorXd(x_loc.real() / double(n)), weights);
  snap.sx = sx.mean;
  snap.sx_se = sx.se;
  auto zr = detail::weighted_mean_se(zz, weights);
  snap.zz = zr.mean;
  snap.zz_se = zr.se;
  auto szr = detail::weighted_mean_se(sz, weights);
  snap.sz = szr.mean;
  snap.sz_se = szr.se;

  if (e0.has_value()) {
    snap.injected_energy = snap.energy.real() - *e0;
    snap.injected_energy_density = snap.injected_energy / double(n);
  }
  return snap;
}

// Exact measurement by Born-weighted enumeration of every configuration.
// Intended for small systems (the 2^N state list is materialized).
template <SampledAnsatz A>
ObservableSnapshot measure_enumerated(const A& psi, const Lattice& lat, double j,
                                      double g, double time, int n_workers,
                                      std::optional<double> e0 = std::nullopt) {
  const int n = lat.n_sites();
  const std::uint64_t space = std::uint64_t(1) << n;
  std::vector<std::uint64_t> configs(space);
  for (std::uint64_t c = 0; c < space; ++c) configs[c] = c;
  Eigen::VectorXcd logs(static_cast<Eigen::Index>(space));
  psi.log_psi_batch(configs, logs);
  Eigen::VectorXd weights = (2.0 * logs.real().array()).exp();
  weights /= weights.sum();
  return measure(psi, lat, j, g, time, configs, logs, weights, n_workers, e0);
}

}  // namespace nqs
