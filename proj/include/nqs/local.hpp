#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/propagator.hpp"
#include "nqs/threading.hpp"

namespace nqs {

// Batched local values of an operator given as realized product terms:
//   out[b] = sum_mu <sigma_b| Op |mu> * psi(mu) / exp(denom_logs[b]).
// Rows are expanded per sample; target configurations are deduplicated across
// the whole batch (on small lattices the union is a large fraction of the
// space) and evaluated in one forward pass, which is where the time goes.
// Per-sample work is independent and the deduplication scan is ordered, so
// the result does not depend on the worker count.
template <class A>
void local_values_batch(const A& psi, const Lattice& lat,
                        std::span<const RealizedTerm> terms,
                        std::span<const std::uint64_t> sigmas,
                        const Eigen::VectorXcd& denom_logs, int n_workers,
                        Eigen::VectorXcd& out) {
  const int batch = static_cast<int>(sigmas.size());
  out.resize(batch);
  if (batch == 0) return;

  std::vector<std::vector<std::pair<std::uint64_t, std::complex<double>>>> rows(batch);
  run_partitioned(batch, n_workers, [&](int, std::int64_t lo, std::int64_t hi) {
    ConnAccumulator<std::complex<double>> acc;
    ConnAccumulator<double> wa, wb;
    for (std::int64_t b = lo; b < hi; ++b) {
      expand_local_row(lat, terms, sigmas[b], acc, wa, wb);
      rows[b] = acc.items();
    }
  });

  std::vector<std::int64_t> offsets(batch + 1, 0);
  for (int b = 0; b < batch; ++b)
    offsets[b + 1] = offsets[b] + static_cast<std::int64_t>(rows[b].size());
  std::vector<std::int64_t> target_index(offsets[batch]);
  std::vector<std::uint64_t> targets;
  targets.reserve(offsets[batch]);
  {
    std::unordered_map<std::uint64_t, std::int64_t> seen;
    seen.reserve(static_cast<std::size_t>(offsets[batch]));
    for (int b = 0; b < batch; ++b) {
      for (std::size_t k = 0; k < rows[b].size(); ++k) {
        auto [it, inserted] =
            seen.try_emplace(rows[b][k].first, static_cast<std::int64_t>(targets.size()));
        if (inserted) targets.push_back(rows[b][k].first);
        target_index[offsets[b] + static_cast<std::int64_t>(k)] = it->second;
      }
    }
  }

  const std::int64_t n_targets = static_cast<std::int64_t>(targets.size());
  Eigen::VectorXcd target_logs(n_targets);
  run_partitioned(n_targets, n_workers, [&](int, std::int64_t lo, std::int64_t hi) {
    if (lo == hi) return;
    Eigen::VectorXcd part;
    psi.log_psi_batch(
        std::span<const std::uint64_t>(targets.data() + lo, static_cast<std::size_t>(hi - lo)),
        part);
    target_logs.segment(lo, hi - lo) = part;
  });

  run_partitioned(batch, n_workers, [&](int, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t b = lo; b < hi; ++b) {
      std::complex<double> acc = 0.0;
      for (std::size_t k = 0; k < rows[b].size(); ++k) {
        const std::int64_t idx = target_index[offsets[b] + static_cast<std::int64_t>(k)];
        acc += rows[b][k].second * std::exp(target_logs[idx] - denom_logs[b]);
      }
      out[b] = acc;
    }
  });
}

// Local operator values with numerator and denominator taken from the same
// state (the estimator used for energies and other observables).
template <class A>
void local_operator_values(const A& psi, const Lattice& lat, const Couplings& cpl,
                           std::span<const std::uint64_t> sigmas,
                           const Eigen::VectorXcd& logs, int n_workers,
                           Eigen::VectorXcd& out) {
  std::vector<RealizedTerm> terms(1);
  terms[0].coeff = 1.0;
  terms[0].factors = {cpl};
  local_values_batch(psi, lat, terms, sigmas, logs, n_workers, out);
}

}  // namespace nqs
