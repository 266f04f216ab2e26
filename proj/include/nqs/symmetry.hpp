#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/lattice.hpp"
#include "nqs/rng.hpp"
#include "nqs/spin.hpp"

namespace nqs {

// One lattice symmetry: a site permutation optionally composed with a global
// spin flip. Site i of the image reads site perm[i] of the source.
struct SymmetryOp {
  std::vector<int> perm;
  bool flip = false;

  std::uint64_t apply(std::uint64_t config, int n_sites) const {
    std::uint64_t out = 0;
    for (int i = 0; i < n_sites; ++i) {
      int bit = config_bit(config, perm[i], n_sites);
      if (flip) bit ^= 1;
      if (bit) out |= std::uint64_t{1} << (n_sites - 1 - i);
    }
    return out;
  }
};

// Builds the closure of the named generators on a rows x cols lattice.
// Recognized names: "z2" (global spin flip), "reflect_x" (mirror columns),
// "reflect_y" (mirror rows). The identity is always included.
std::vector<SymmetryOp> build_symmetry_group(const Lattice& lat,
                                             std::span<const std::string> generators);

// Wraps a sampled ansatz into its symmetry-projected cousin:
//   |psi_s(sigma)|^2 = mean_g |psi(g sigma)|^2
//   arg psi_s(sigma) = arg sum_g psi(g sigma)
// Probabilities stay normalized (each term is a relabeling of a normalized
// distribution), and sampling stays direct: draw from the inner state, then
// apply a uniformly random group element.
template <class Inner>
class SymmetrizedAnsatz {
 public:
  SymmetrizedAnsatz(Inner inner, std::vector<SymmetryOp> group)
      : inner_(std::move(inner)), group_(std::move(group)) {
    if (group_.empty()) throw std::invalid_argument("SymmetrizedAnsatz: empty group");
  }

  int n_sites() const { return inner_.n_sites(); }
  int n_params() const { return inner_.n_params(); }
  Eigen::VectorXd& params() { return inner_.params(); }
  const Eigen::VectorXd& params() const { return inner_.params(); }
  const Inner& inner() const { return inner_; }
  Inner& inner() { return inner_; }
  int group_order() const { return static_cast<int>(group_.size()); }

  struct BatchCache {
    int batch = 0;
    std::vector<std::uint64_t> orbit;       // batch * |G| configs, g fastest
    Eigen::VectorXcd orbit_logs;            // inner log psi on the orbit
    typename Inner::BatchCache inner_cache;
  };

  void log_psi_batch(std::span<const std::uint64_t> configs, Eigen::VectorXcd& out,
                     BatchCache* cache = nullptr) const {
    BatchCache local;
    BatchCache& c = cache ? *cache : local;
    expand_orbit(configs, c);
    combine(c, out);
  }

  std::complex<double> log_psi(std::uint64_t config) const {
    Eigen::VectorXcd out;
    const std::uint64_t cfgs[1] = {config};
    log_psi_batch(std::span<const std::uint64_t>(cfgs, 1), out);
    return out[0];
  }

  void sample_batch(std::span<RngStream> streams, std::vector<std::uint64_t>& configs,
                    Eigen::VectorXcd& log_psis, BatchCache* cache = nullptr) const {
    Eigen::VectorXcd inner_logs;
    inner_.sample_batch(streams, configs, inner_logs, nullptr);
    const int g = group_order();
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const auto pick = static_cast<std::size_t>(streams[i].next_below(g));
      configs[i] = group_[pick].apply(configs[i], n_sites());
    }
    BatchCache local;
    BatchCache& c = cache ? *cache : local;
    expand_orbit(configs, c);
    combine(c, log_psis);
  }

  // Symmetrized log-derivatives from the inner per-orbit derivatives:
  //   Re O_s = sum_g p_g Re O(g sigma) / sum_g p_g
  //   Im O_s = Im[ sum_g psi_g O(g sigma) / sum_g psi_g ]
  // (the real part differentiates ln |psi_s|, the imaginary part the phase of
  // the amplitude mean).
  void log_derivatives_batch(std::span<const std::uint64_t> configs,
                             const BatchCache& cache, RowMatrixXd& o_re,
                             RowMatrixXd& o_im) const {
    const int batch = static_cast<int>(configs.size());
    if (batch != cache.batch)
      throw std::invalid_argument("log_derivatives_batch: cache/config size mismatch");
    const int g = group_order();
    const int np = n_params();

    typename Inner::BatchCache icache = cache.inner_cache;
    RowMatrixXd ire, iim;
    inner_.log_derivatives_batch(cache.orbit, icache, ire, iim);

    o_re.setZero(batch, np);
    o_im.setZero(batch, np);
    for (int b = 0; b < batch; ++b) {
      // Stable relative weights within the orbit.
      double m = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < g; ++k)
        m = std::max(m, cache.orbit_logs[b * g + k].real());
      double psum = 0.0;
      std::complex<double> amp_sum = 0.0;
      for (int k = 0; k < g; ++k) {
        const std::complex<double> lg = cache.orbit_logs[b * g + k];
        const double p = std::exp(2.0 * (lg.real() - m));
        psum += p;
        amp_sum += std::exp(lg - std::complex<double>(m, 0.0));
      }
      for (int k = 0; k < g; ++k) {
        const std::complex<double> lg = cache.orbit_logs[b * g + k];
        const double p = std::exp(2.0 * (lg.real() - m)) / psum;
        const std::complex<double> aw =
            std::exp(lg - std::complex<double>(m, 0.0)) /
            (amp_sum == std::complex<double>(0.0) ? std::complex<double>(1.0) : amp_sum);
        const int row = b * g + k;
        for (int j = 0; j < np; ++j) {
          const std::complex<double> oin(ire(row, j), iim(row, j));
          o_re(b, j) += p * oin.real();
          o_im(b, j) += (aw * oin).imag();
        }
      }
    }
  }

 private:
  void expand_orbit(std::span<const std::uint64_t> configs, BatchCache& c) const {
    const int batch = static_cast<int>(configs.size());
    const int g = group_order();
    c.batch = batch;
    c.orbit.resize(static_cast<std::size_t>(batch) * g);
    for (int b = 0; b < batch; ++b)
      for (int k = 0; k < g; ++k)
        c.orbit[static_cast<std::size_t>(b) * g + k] =
            group_[k].apply(configs[b], n_sites());
    inner_.log_psi_batch(c.orbit, c.orbit_logs, &c.inner_cache);
  }

  void combine(const BatchCache& c, Eigen::VectorXcd& out) const {
    const int g = group_order();
    out.resize(c.batch);
    for (int b = 0; b < c.batch; ++b) {
      double m = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < g; ++k)
        m = std::max(m, c.orbit_logs[b * g + k].real());
      double psum = 0.0;
      std::complex<double> amp = 0.0;
      for (int k = 0; k < g; ++k) {
        const std::complex<double> lg = c.orbit_logs[b * g + k];
        psum += std::exp(2.0 * (lg.real() - m));
        amp += std::exp(lg - std::complex<double>(m, 0.0));
      }
      const double log_mod = m + 0.5 * std::log(psum / g);
      const double phase = amp == std::complex<double>(0.0) ? 0.0 : std::arg(amp);
      out[b] = std::complex<double>(log_mod, phase);
    }
  }

  Inner inner_;
  std::vector<SymmetryOp> group_;
};

}  // namespace nqs
