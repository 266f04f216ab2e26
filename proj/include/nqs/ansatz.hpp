#pragma once

#include <Eigen/Dense>
#include <complex>
#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "nqs/rng.hpp"

namespace nqs {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Anything the variational engine can drive: normalized wavefunction with
// direct (ancestral) sampling and per-sample log-derivatives.
template <class A>
concept SampledAnsatz = requires(const A& a, std::span<const std::uint64_t> cfgs,
                                 Eigen::VectorXcd& logs, std::span<RngStream> streams,
                                 std::vector<std::uint64_t>& out_cfgs,
                                 typename A::BatchCache& cache, RowMatrixXd& o_re,
                                 RowMatrixXd& o_im) {
  { a.n_sites() } -> std::convertible_to<int>;
  { a.n_params() } -> std::convertible_to<int>;
  a.log_psi_batch(cfgs, logs);
  a.sample_batch(streams, out_cfgs, logs, &cache);
  a.log_derivatives_batch(cfgs, cache, o_re, o_im);
};

// Recurrent autoregressive wavefunction over spin-1/2 configurations in
// row-major site order:
//   psi(sigma) = prod_i A_i(sigma_i | sigma_<i) * exp(i phi_i(sigma_i | sigma_<i))
// with a gated recurrent cell
//   z_i = logistic(W_z [h_{i-1}; x_i] - b_z)
//   r_i = logistic(W_r [h_{i-1}; x_i] - b_r)
//   hc_i = tanh(W_c [r_i . h_{i-1}; x_i] + b_c)
//   h_i = (1 - z_i) . h_{i-1} + z_i . hc_i
// where x_i is the one-hot encoding of sigma_{i-1} (zero vector at the first
// site) and h_0 = 0. Heads read the post-update state h_i:
//   A_i = sqrt(softmax(U_A h_i + b_A)),  phi_i = pi * softsign(U_p h_i + b_p).
// All parameters are real; sqrt-softmax moduli make the state unit-norm by
// construction and sampling is exact ancestral sampling.
class GruAnsatz {
 public:
  GruAnsatz(int n_sites, int d_h);

  static int param_count(int d_h) { return 3 * d_h * (d_h + 2) + 3 * d_h + 4 * d_h + 4; }

  // Zero parameters: every conditional is uniform with zero phase, i.e. the
  // equal-amplitude product state (the x-polarized product state in the z
  // basis up to the field-sign convention).
  static GruAnsatz paramagnetic_product(int n_sites, int d_h);
  // Large output bias pinning every site to the given bit (0 = up).
  static GruAnsatz pinned_uniform(int n_sites, int d_h, int bit, double bias = 25.0);

  int n_sites() const { return n_sites_; }
  int hidden_dim() const { return d_h_; }
  int n_params() const { return static_cast<int>(params_.size()); }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  // Small random start for variational ground-state searches. When sign_init
  // is set, the down-spin phase bias is seeded deep into the softsign tail so
  // the initial state carries the (-1)^{#down} sign structure of the
  // transverse-field ground state with +g flip amplitudes.
  void init_random(RngStream& stream, double scale = 0.02, bool sign_init = false,
                   double sign_bias = 400.0);

  struct BatchCache {
    int batch = 0;
    std::vector<Eigen::MatrixXd> h;        // n_sites+1 entries, h[0] = 0
    std::vector<Eigen::MatrixXd> z, r, hc;  // n_sites entries each
    std::vector<Eigen::MatrixXd> p, sphi;   // 2 x B per site
  };

  void log_psi_batch(std::span<const std::uint64_t> configs, Eigen::VectorXcd& out,
                     BatchCache* cache = nullptr) const;
  std::complex<double> log_psi(std::uint64_t config) const;

  // Ancestral sampling; streams.size() samples are drawn, one stream per
  // sample so results do not depend on batch partitioning.
  void sample_batch(std::span<RngStream> streams, std::vector<std::uint64_t>& configs,
                    Eigen::VectorXcd& log_psis, BatchCache* cache = nullptr) const;

  // Per-sample d log psi / d theta_k at the cached forward pass, split into
  // real and imaginary parts (rows = samples, cols = parameters).
  void log_derivatives_batch(std::span<const std::uint64_t> configs,
                             const BatchCache& cache, RowMatrixXd& o_re,
                             RowMatrixXd& o_im) const;

  struct SiteConditional {
    double modulus[2];
    double phase[2];
  };
  std::vector<SiteConditional> conditionals(std::uint64_t config) const;

  // Flat-parameter layout offsets (row-major weight blocks).
  struct Layout {
    int d_h = 0;
    int wc = 0, wz = 0, wr = 0;
    int bc = 0, bz = 0, br = 0;
    int ua = 0, up = 0, ba = 0, bp = 0;
    int total = 0;
  };
  const Layout& layout() const { return layout_; }

 private:
  // Shared forward driver: evaluates the given configs when `configs` is
  // non-empty, otherwise draws one sample per stream into *sampled.
  void forward(std::span<const std::uint64_t> configs, std::span<RngStream> streams,
               std::vector<std::uint64_t>* sampled, Eigen::VectorXcd& out,
               BatchCache* cache) const;

  int n_sites_;
  int d_h_;
  Layout layout_;
  Eigen::VectorXd params_;
};

}  // namespace nqs
