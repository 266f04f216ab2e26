#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "nqs/ansatz.hpp"
#include "nqs/lattice.hpp"
#include "nqs/local.hpp"

namespace nqs {

// Covariance statistics of the log-derivatives: the geometric tensor
//   S_{kk'} = <O*_k O_k'> - <O*_k><O_k'>
// and the force vector
//   F_k = <O*_k E_loc> - <O*_k><E_loc>,
// both over the Born distribution of the current state (or an explicit
// weight vector when enumerating).
struct QgtEstimate {
  Eigen::MatrixXcd s;
  Eigen::VectorXcd f;
  std::complex<double> mean_energy{0.0, 0.0};
  double total_weight = 0.0;
  long sample_count = 0;
};

// Streaming builder so large sample sets can be folded in fixed-size chunks
// without materializing the full derivative matrix. add() accepts the split
// real/imaginary derivative rows produced by the ansatz backward pass.
class QgtAccumulator {
 public:
  explicit QgtAccumulator(int n_params);

  // o_re/o_im: chunk of per-sample derivative rows (chunk_size x n_params).
  // weights: per-row weights; empty means unit weight for every row.
  void add(const RowMatrixXd& o_re, const RowMatrixXd& o_im,
           const Eigen::VectorXcd& e_loc,
           const Eigen::VectorXd& weights = Eigen::VectorXd());

  QgtEstimate finalize() const;

 private:
  Eigen::MatrixXcd ss_;
  Eigen::VectorXcd so_;
  Eigen::VectorXcd sf_;
  std::complex<double> se_{0.0, 0.0};
  double wsum_ = 0.0;
  long count_ = 0;
};

enum class SpectrumMode {
  // Eigenvalues of the Hermitian part of S, descending.
  full,
  // Magnitudes of the eigenvalues of the skew-symmetric Im(S), descending.
  // This is the operator actually inverted for real-parameter dynamics.
  imaginary_part,
};

Eigen::VectorXd qgt_spectrum(const Eigen::MatrixXcd& s, SpectrumMode mode);

// Summary statistics used to compare conditioning across ansatz families.
// flatness_ratio is lambda_max / lambda_median; top_half_max_log_gap is the
// largest log10 drop between consecutive eigenvalues within the top half of
// the spectrum. Values below lambda_max * 1e-16 are clamped before taking
// ratios so sampling noise around zero cannot produce infinite gaps.
struct SpectrumStats {
  double lambda_max = 0.0;
  double lambda_median = 0.0;
  double flatness_ratio = 0.0;
  double top_half_max_log_gap = 0.0;
};

SpectrumStats spectrum_stats(const Eigen::VectorXd& descending);

// One stochastic-reconfiguration update. The complex branch solves
//   (S + lambda_reg * 1) theta_dot = -i F,
// the real branch solves the imaginary-part split of the same equation,
//   Im(S) theta_dot = -Re(F),
// which is the system relevant for ansaetze with real parameters. Singular
// or ill-conditioned systems fall back to an eigenvalue/SVD pseudo-inverse;
// a residual beyond failure_tol marks the result as failed instead of
// throwing, so callers can log the defect and decide how to proceed.
struct SrSolveResult {
  Eigen::VectorXcd theta_dot;
  Eigen::VectorXd theta_dot_real;
  bool used_pseudo_inverse = false;
  bool failed = false;
  std::string failure_reason;
  double residual = 0.0;      // |A x - rhs| / max(|rhs|, tiny)
  double update_ratio = 0.0;  // |theta_dot| / max(|theta|, tiny)
};

SrSolveResult sr_step_complex(const QgtEstimate& est, double lambda_reg,
                              const Eigen::VectorXcd& theta,
                              double failure_tol = 1e-3);

SrSolveResult sr_step_real(const QgtEstimate& est, double svd_cutoff,
                           const Eigen::VectorXd& theta,
                           double failure_tol = 1e-3);

// Builds the geometric tensor for an ansatz over an explicit configuration
// set (samples or a full enumeration). Derivative rows are produced and
// folded chunk by chunk; local energies are evaluated once over the whole
// set so the cross-sample target dedup in local_values_batch can help.
template <SampledAnsatz A>
QgtEstimate estimate_qgt(const A& psi, const Lattice& lat,
                         const Couplings& hamiltonian,
                         std::span<const std::uint64_t> sigmas,
                         const Eigen::VectorXcd& logs,
                         const Eigen::VectorXd& weights, int n_workers,
                         int chunk_size = 4096) {
  const auto batch = static_cast<std::ptrdiff_t>(sigmas.size());
  Eigen::VectorXcd e_loc(batch);
  local_operator_values(psi, lat, hamiltonian, sigmas, logs, n_workers, e_loc);

  QgtAccumulator acc(static_cast<int>(psi.n_params()));
  RowMatrixXd o_re, o_im;
  for (std::ptrdiff_t start = 0; start < batch;) {
    const auto len = std::min<std::ptrdiff_t>(chunk_size, batch - start);
    auto part = sigmas.subspan(static_cast<std::size_t>(start),
                               static_cast<std::size_t>(len));
    typename A::BatchCache cache;
    Eigen::VectorXcd chunk_logs(len);
    psi.log_psi_batch(part, chunk_logs, &cache);
    psi.log_derivatives_batch(part, cache, o_re, o_im);
    Eigen::VectorXd w;
    if (weights.size() > 0) w = weights.segment(start, len);
    acc.add(o_re, o_im, e_loc.segment(start, len), w);
    start += len;
  }
  return acc.finalize();
}

}  // namespace nqs
