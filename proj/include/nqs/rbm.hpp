#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/rng.hpp"

namespace nqs {

// Restricted Boltzmann machine wavefunction with complex parameters,
//   log psi(sigma) = sum_k a_k s_k + sum_j ln 2 cosh(b_j + sum_k W_jk s_k),
// where s_k = +-1 are the spins of sigma. The map is holomorphic in every
// parameter, so derivatives with respect to the real and imaginary components
// come in (O_k, i O_k) pairs.
//
// The engine-facing parameter vector is real with interleaved components
// [Re t_0, Im t_0, Re t_1, ...] in block order a (visible), b (hidden), W
// (row-major, W_jk at j*N+k). Unlike the recurrent ansatz this state is not
// normalized and has no ancestral sampler; amplitudes are normalized against
// an enumerated partition sum, and sample_batch draws from the enumerated
// Born distribution by inverse CDF. Both are capped at the dense-enumeration
// site limit.
class RbmAnsatz {
 public:
  RbmAnsatz(int n_sites, int alpha);

  int n_sites() const { return n_sites_; }
  int n_hidden() const { return n_hidden_; }
  int n_params() const { return static_cast<int>(params_.size()); }
  int n_complex_params() const { return n_sites_ + n_hidden_ + n_hidden_ * n_sites_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  void init_random(RngStream& stream, double scale = 0.01);

  struct BatchCache {
    int batch = 0;
  };

  // Normalized log amplitudes (the partition sum is enumerated per call).
  void log_psi_batch(std::span<const std::uint64_t> configs, Eigen::VectorXcd& out,
                     BatchCache* cache = nullptr) const;
  std::complex<double> log_psi(std::uint64_t config) const;

  void sample_batch(std::span<RngStream> streams, std::vector<std::uint64_t>& configs,
                    Eigen::VectorXcd& log_psis, BatchCache* cache = nullptr) const;

  // Real-split derivative rows: column 2k holds d log psi / d Re t_k, column
  // 2k+1 holds d log psi / d Im t_k = i * (column 2k). Additive constants from
  // the enumerated normalization are omitted; every consumer works with
  // covariances, which are shift-invariant.
  void log_derivatives_batch(std::span<const std::uint64_t> configs,
                             const BatchCache& cache, RowMatrixXd& o_re,
                             RowMatrixXd& o_im) const;

  // Holomorphic derivatives (columns = complex parameters).
  void holomorphic_derivatives(std::span<const std::uint64_t> configs,
                               Eigen::MatrixXcd& o) const;

 private:
  Eigen::VectorXcd complex_params() const;
  // Unnormalized log amplitudes.
  void raw_log_psi(std::span<const std::uint64_t> configs, Eigen::VectorXcd& out) const;
  double log_norm() const;  // ln sum_sigma |psi(sigma)|^2

  int n_sites_;
  int n_hidden_;
  Eigen::VectorXd params_;
};

}  // namespace nqs
