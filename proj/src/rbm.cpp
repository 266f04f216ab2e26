#include "nqs/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nqs/exact.hpp"
#include "nqs/spin.hpp"

namespace nqs {

namespace {

using cplx = std::complex<double>;

// ln 2 cosh(z), stable for large |Re z|.
inline cplx ln2cosh(cplx z) {
  if (z.real() < 0.0) z = -z;
  const cplx w = std::exp(-2.0 * z);
  return z + std::log(1.0 + w);
}

// tanh(z) without overflow in the intermediate exponentials.
inline cplx safe_tanh(cplx z) {
  if (z.real() >= 0.0) {
    const cplx w = std::exp(-2.0 * z);
    return (1.0 - w) / (1.0 + w);
  }
  const cplx w = std::exp(2.0 * z);
  return (w - 1.0) / (w + 1.0);
}

constexpr int kEnumChunk = 1 << 13;

}  // namespace

RbmAnsatz::RbmAnsatz(int n_sites, int alpha) : n_sites_(n_sites), n_hidden_(alpha * n_sites) {
  if (n_sites < 1 || n_sites > k_dense_site_cap)
    throw std::invalid_argument("RbmAnsatz: site count outside enumerable range");
  if (alpha < 1) throw std::invalid_argument("RbmAnsatz: hidden density must be positive");
  params_ = Eigen::VectorXd::Zero(2 * n_complex_params());
}

void RbmAnsatz::init_random(RngStream& stream, double scale) {
  for (Eigen::Index i = 0; i < params_.size(); ++i)
    params_[i] = scale * stream.next_normal();
}

Eigen::VectorXcd RbmAnsatz::complex_params() const {
  const int pc = n_complex_params();
  Eigen::VectorXcd out(pc);
  for (int k = 0; k < pc; ++k) out[k] = cplx(params_[2 * k], params_[2 * k + 1]);
  return out;
}

void RbmAnsatz::raw_log_psi(std::span<const std::uint64_t> configs,
                            Eigen::VectorXcd& out) const {
  const int batch = static_cast<int>(configs.size());
  const int n = n_sites_;
  const int m = n_hidden_;
  out.resize(batch);
  if (batch == 0) return;

  const Eigen::VectorXcd theta = complex_params();
  Eigen::Map<const Eigen::VectorXcd> a(theta.data(), n);
  Eigen::Map<const Eigen::VectorXcd> b(theta.data() + n, m);
  Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
      theta.data() + n + m, m, n);

  Eigen::MatrixXd spins(n, kEnumChunk);
  Eigen::MatrixXcd angles(m, kEnumChunk);
  for (int lo = 0; lo < batch; lo += kEnumChunk) {
    const int cols = std::min(kEnumChunk, batch - lo);
    for (int c = 0; c < cols; ++c)
      for (int k = 0; k < n; ++k) spins(k, c) = config_spin(configs[lo + c], k, n);
    angles.leftCols(cols).noalias() = w * spins.leftCols(cols);
    angles.leftCols(cols).colwise() += b;
    for (int c = 0; c < cols; ++c) {
      cplx acc = 0.0;
      for (int k = 0; k < n; ++k) acc += a[k] * spins(k, c);
      for (int j = 0; j < m; ++j) acc += ln2cosh(angles(j, c));
      out[lo + c] = acc;
    }
  }
}

double RbmAnsatz::log_norm() const {
  check_dense_cap(n_sites_);
  const std::uint64_t total = std::uint64_t{1} << n_sites_;
  std::vector<std::uint64_t> cfgs(kEnumChunk);
  Eigen::VectorXcd logs;
  double maxre = -std::numeric_limits<double>::infinity();
  std::vector<double> res;
  res.reserve(total);
  for (std::uint64_t lo = 0; lo < total; lo += kEnumChunk) {
    const int cols = static_cast<int>(std::min<std::uint64_t>(kEnumChunk, total - lo));
    for (int c = 0; c < cols; ++c) cfgs[c] = lo + c;
    raw_log_psi(std::span<const std::uint64_t>(cfgs.data(), cols), logs);
    for (int c = 0; c < cols; ++c) {
      res.push_back(logs[c].real());
      maxre = std::max(maxre, logs[c].real());
    }
  }
  double z = 0.0;
  for (double r : res) z += std::exp(2.0 * (r - maxre));
  return 2.0 * maxre + std::log(z);
}

void RbmAnsatz::log_psi_batch(std::span<const std::uint64_t> configs,
                              Eigen::VectorXcd& out, BatchCache* cache) const {
  raw_log_psi(configs, out);
  const double half_ln_z = 0.5 * log_norm();
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] -= half_ln_z;
  if (cache) cache->batch = static_cast<int>(configs.size());
}

std::complex<double> RbmAnsatz::log_psi(std::uint64_t config) const {
  Eigen::VectorXcd out;
  const std::uint64_t cfgs[1] = {config};
  log_psi_batch(std::span<const std::uint64_t>(cfgs, 1), out);
  return out[0];
}

void RbmAnsatz::sample_batch(std::span<RngStream> streams,
                             std::vector<std::uint64_t>& configs,
                             Eigen::VectorXcd& log_psis, BatchCache* cache) const {
  check_dense_cap(n_sites_);
  const std::uint64_t total = std::uint64_t{1} << n_sites_;
  std::vector<std::uint64_t> all(total);
  for (std::uint64_t i = 0; i < total; ++i) all[i] = i;
  Eigen::VectorXcd logs;
  raw_log_psi(all, logs);

  double maxre = -std::numeric_limits<double>::infinity();
  for (std::uint64_t i = 0; i < total; ++i) maxre = std::max(maxre, logs[i].real());
  std::vector<double> cdf(total);
  double acc = 0.0;
  for (std::uint64_t i = 0; i < total; ++i) {
    acc += std::exp(2.0 * (logs[i].real() - maxre));
    cdf[i] = acc;
  }
  const double half_ln_z = 0.5 * (2.0 * maxre + std::log(acc));

  const int batch = static_cast<int>(streams.size());
  configs.resize(batch);
  log_psis.resize(batch);
  for (int c = 0; c < batch; ++c) {
    const double x = streams[c].next_double() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), x);
    const std::uint64_t idx =
        it == cdf.end() ? total - 1 : static_cast<std::uint64_t>(it - cdf.begin());
    configs[c] = idx;
    log_psis[c] = logs[idx] - half_ln_z;
  }
  if (cache) cache->batch = batch;
}

void RbmAnsatz::holomorphic_derivatives(std::span<const std::uint64_t> configs,
                                        Eigen::MatrixXcd& o) const {
  const int batch = static_cast<int>(configs.size());
  const int n = n_sites_;
  const int m = n_hidden_;
  o.resize(batch, n_complex_params());
  if (batch == 0) return;

  const Eigen::VectorXcd theta = complex_params();
  Eigen::Map<const Eigen::VectorXcd> b(theta.data() + n, m);
  Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
      theta.data() + n + m, m, n);

  Eigen::VectorXd spins(n);
  Eigen::VectorXcd angles(m);
  for (int c = 0; c < batch; ++c) {
    for (int k = 0; k < n; ++k) spins[k] = config_spin(configs[c], k, n);
    angles.noalias() = w * spins;
    angles += b;
    for (int k = 0; k < n; ++k) o(c, k) = spins[k];
    for (int j = 0; j < m; ++j) {
      const cplx t = safe_tanh(angles[j]);
      o(c, n + j) = t;
      for (int k = 0; k < n; ++k) o(c, n + m + j * n + k) = t * spins[k];
    }
  }
}

void RbmAnsatz::log_derivatives_batch(std::span<const std::uint64_t> configs,
                                      const BatchCache& cache, RowMatrixXd& o_re,
                                      RowMatrixXd& o_im) const {
  if (static_cast<int>(configs.size()) != cache.batch)
    throw std::invalid_argument("log_derivatives_batch: cache/config size mismatch");
  Eigen::MatrixXcd o;
  holomorphic_derivatives(configs, o);
  const int batch = static_cast<int>(configs.size());
  const int pc = n_complex_params();
  o_re.resize(batch, 2 * pc);
  o_im.resize(batch, 2 * pc);
  for (int c = 0; c < batch; ++c) {
    for (int k = 0; k < pc; ++k) {
      const cplx v = o(c, k);
      o_re(c, 2 * k) = v.real();
      o_im(c, 2 * k) = v.imag();
      o_re(c, 2 * k + 1) = -v.imag();
      o_im(c, 2 * k + 1) = v.real();
    }
  }
}

}  // namespace nqs
