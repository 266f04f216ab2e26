#include "nqs/ansatz.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "nqs/spin.hpp"

namespace nqs {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

constexpr double kPi = 3.14159265358979323846;

inline double softsign(double x) { return x / (1.0 + std::abs(x)); }
inline double softsign_deriv(double x) {
  const double d = 1.0 + std::abs(x);
  return 1.0 / (d * d);
}

}  // namespace

GruAnsatz::GruAnsatz(int n_sites, int d_h) : n_sites_(n_sites), d_h_(d_h) {
  if (n_sites < 1 || n_sites > 64) throw std::invalid_argument("GruAnsatz: site count out of range");
  if (d_h < 1) throw std::invalid_argument("GruAnsatz: hidden dimension must be positive");
  Layout& l = layout_;
  l.d_h = d_h;
  const int wsz = d_h * (d_h + 2);
  l.wc = 0;
  l.wz = l.wc + wsz;
  l.wr = l.wz + wsz;
  l.bc = l.wr + wsz;
  l.bz = l.bc + d_h;
  l.br = l.bz + d_h;
  l.ua = l.br + d_h;
  l.up = l.ua + 2 * d_h;
  l.ba = l.up + 2 * d_h;
  l.bp = l.ba + 2;
  l.total = l.bp + 2;
  params_ = Eigen::VectorXd::Zero(l.total);
}

GruAnsatz GruAnsatz::paramagnetic_product(int n_sites, int d_h) {
  return GruAnsatz(n_sites, d_h);
}

GruAnsatz GruAnsatz::pinned_uniform(int n_sites, int d_h, int bit, double bias) {
  GruAnsatz a(n_sites, d_h);
  const int keep = bit == 0 ? 0 : 1;
  a.params_[a.layout_.ba + keep] = bias;
  a.params_[a.layout_.ba + (1 - keep)] = -bias;
  return a;
}

void GruAnsatz::init_random(RngStream& stream, double scale, bool sign_init,
                            double sign_bias) {
  for (int i = 0; i < layout_.total; ++i) params_[i] = scale * stream.next_normal();
  if (sign_init) {
    // Phase conditionals sit at pi*softsign(s); a large down-bias puts the
    // per-down-spin phase within O(1/sign_bias) of pi and freezes the phase
    // head, so the search only has to shape moduli.
    params_[layout_.bp + 0] = 0.0;
    params_[layout_.bp + 1] = sign_bias;
  }
}

void GruAnsatz::forward(std::span<const std::uint64_t> configs,
                        std::span<RngStream> streams,
                        std::vector<std::uint64_t>* sampled, Eigen::VectorXcd& out,
                        BatchCache* cache) const {
  const bool sampling = configs.empty();
  const int batch = sampling ? static_cast<int>(streams.size())
                             : static_cast<int>(configs.size());
  const int dh = d_h_;
  const int n = n_sites_;

  out.setZero(batch);
  if (cache) {
    cache->batch = batch;
    cache->h.assign(static_cast<std::size_t>(n) + 1, Eigen::MatrixXd());
    cache->z.assign(n, Eigen::MatrixXd());
    cache->r.assign(n, Eigen::MatrixXd());
    cache->hc.assign(n, Eigen::MatrixXd());
    cache->p.assign(n, Eigen::MatrixXd());
    cache->sphi.assign(n, Eigen::MatrixXd());
    cache->h[0] = Eigen::MatrixXd::Zero(dh, batch);
  }
  if (sampling) {
    if (!sampled) throw std::logic_error("GruAnsatz::forward: sampling without output");
    sampled->assign(batch, 0);
  }
  if (batch == 0) return;

  const double* pp = params_.data();
  ConstRowMap wc(pp + layout_.wc, dh, dh + 2);
  ConstRowMap wz(pp + layout_.wz, dh, dh + 2);
  ConstRowMap wr(pp + layout_.wr, dh, dh + 2);
  Eigen::Map<const Eigen::VectorXd> bc(pp + layout_.bc, dh);
  Eigen::Map<const Eigen::VectorXd> bz(pp + layout_.bz, dh);
  Eigen::Map<const Eigen::VectorXd> br(pp + layout_.br, dh);
  ConstRowMap ua(pp + layout_.ua, 2, dh);
  ConstRowMap up(pp + layout_.up, 2, dh);
  Eigen::Map<const Eigen::Vector2d> ba(pp + layout_.ba);
  Eigen::Map<const Eigen::Vector2d> bp(pp + layout_.bp);

  Eigen::MatrixXd hprev = Eigen::MatrixXd::Zero(dh, batch);
  Eigen::MatrixXd zg(dh, batch), rg(dh, batch), hcand(dh, batch), hnew(dh, batch);
  Eigen::MatrixXd gated(dh, batch);
  Eigen::MatrixXd logits(2, batch), probs(2, batch), sphi(2, batch);
  std::vector<std::uint8_t> prev_bit(batch, 0), cur_bit(batch, 0);

  for (int site = 0; site < n; ++site) {
    // Gate pre-activations; the one-hot input contributes one weight column.
    zg.noalias() = wz.leftCols(dh) * hprev;
    rg.noalias() = wr.leftCols(dh) * hprev;
    if (site > 0) {
      for (int c = 0; c < batch; ++c) {
        const int x = prev_bit[c];
        zg.col(c) += wz.col(dh + x);
        rg.col(c) += wr.col(dh + x);
      }
    }
    zg.colwise() -= bz;
    rg.colwise() -= br;
    zg = zg.array().logistic().matrix();
    rg = rg.array().logistic().matrix();

    gated = rg.cwiseProduct(hprev);
    hcand.noalias() = wc.leftCols(dh) * gated;
    if (site > 0) {
      for (int c = 0; c < batch; ++c) hcand.col(c) += wc.col(dh + prev_bit[c]);
    }
    hcand.colwise() += bc;
    hcand = hcand.array().tanh().matrix();

    hnew = hprev + zg.cwiseProduct(hcand - hprev);

    logits.noalias() = ua * hnew;
    logits.colwise() += ba;
    sphi.noalias() = up * hnew;
    sphi.colwise() += bp;
    for (int c = 0; c < batch; ++c) {
      const double m = std::max(logits(0, c), logits(1, c));
      const double e0 = std::exp(logits(0, c) - m);
      const double e1 = std::exp(logits(1, c) - m);
      probs(0, c) = e0 / (e0 + e1);
      probs(1, c) = e1 / (e0 + e1);
    }

    if (sampling) {
      for (int c = 0; c < batch; ++c) {
        const double u = streams[c].next_double();
        cur_bit[c] = u < probs(0, c) ? 0 : 1;
      }
    } else {
      for (int c = 0; c < batch; ++c) cur_bit[c] = config_bit(configs[c], site, n);
    }

    for (int c = 0; c < batch; ++c) {
      const int b = cur_bit[c];
      const double pr = std::max(probs(b, c), 1e-300);
      out[c] += std::complex<double>(0.5 * std::log(pr), kPi * softsign(sphi(b, c)));
    }
    if (sampling) {
      for (int c = 0; c < batch; ++c) {
        if (cur_bit[c]) (*sampled)[c] |= std::uint64_t{1} << (n - 1 - site);
      }
    }

    if (cache) {
      cache->z[site] = zg;
      cache->r[site] = rg;
      cache->hc[site] = hcand;
      cache->p[site] = probs;
      cache->sphi[site] = sphi;
      cache->h[site + 1] = hnew;
    }
    hprev.swap(hnew);
    prev_bit.swap(cur_bit);
  }
}

void GruAnsatz::log_psi_batch(std::span<const std::uint64_t> configs,
                              Eigen::VectorXcd& out, BatchCache* cache) const {
  forward(configs, {}, nullptr, out, cache);
}

std::complex<double> GruAnsatz::log_psi(std::uint64_t config) const {
  Eigen::VectorXcd out;
  const std::uint64_t cfgs[1] = {config};
  forward(std::span<const std::uint64_t>(cfgs, 1), {}, nullptr, out, nullptr);
  return out[0];
}

void GruAnsatz::sample_batch(std::span<RngStream> streams,
                             std::vector<std::uint64_t>& configs,
                             Eigen::VectorXcd& log_psis, BatchCache* cache) const {
  forward({}, streams, &configs, log_psis, cache);
}

void GruAnsatz::log_derivatives_batch(std::span<const std::uint64_t> configs,
                                      const BatchCache& cache, RowMatrixXd& o_re,
                                      RowMatrixXd& o_im) const {
  const int batch = cache.batch;
  if (static_cast<int>(configs.size()) != batch)
    throw std::invalid_argument("log_derivatives_batch: cache/config size mismatch");
  const int dh = d_h_;
  const int n = n_sites_;
  const Layout& l = layout_;
  o_re.setZero(batch, l.total);
  o_im.setZero(batch, l.total);
  if (batch == 0) return;

  const double* pp = params_.data();
  ConstRowMap wc(pp + l.wc, dh, dh + 2);
  ConstRowMap wz(pp + l.wz, dh, dh + 2);
  ConstRowMap wr(pp + l.wr, dh, dh + 2);
  ConstRowMap ua(pp + l.ua, 2, dh);
  ConstRowMap up(pp + l.up, 2, dh);

  // Two real reverse passes through the recurrence: one seeded by the
  // modulus head (real part of log psi), one by the phase head. The gate
  // blocks reuse this loop via the seed matrices.
  Eigen::MatrixXd gh(dh, batch), ghprev(dh, batch);
  Eigen::MatrixXd dpre_c(dh, batch), dpre_z(dh, batch), dpre_r(dh, batch);
  Eigen::MatrixXd gvh(dh, batch), seed(dh, batch);
  Eigen::MatrixXd head2(2, batch);

  for (int pass = 0; pass < 2; ++pass) {
    RowMatrixXd& out = pass == 0 ? o_re : o_im;
    ghprev.setZero(dh, batch);
    for (int site = n - 1; site >= 0; --site) {
      const Eigen::MatrixXd& hp = cache.h[site];
      const Eigen::MatrixXd& hn = cache.h[site + 1];
      const Eigen::MatrixXd& zg = cache.z[site];
      const Eigen::MatrixXd& rg = cache.r[site];
      const Eigen::MatrixXd& hcand = cache.hc[site];
      const Eigen::MatrixXd& probs = cache.p[site];
      const Eigen::MatrixXd& sphi = cache.sphi[site];

      // Head seed and head-parameter gradients at this site.
      if (pass == 0) {
        for (int c = 0; c < batch; ++c) {
          const int b = config_bit(configs[c], site, n);
          head2(0, c) = 0.5 * ((b == 0 ? 1.0 : 0.0) - probs(0, c));
          head2(1, c) = 0.5 * ((b == 1 ? 1.0 : 0.0) - probs(1, c));
        }
        for (int c = 0; c < batch; ++c) {
          double* row = out.data() + static_cast<std::ptrdiff_t>(c) * l.total;
          const double* hcol = hn.data() + static_cast<std::ptrdiff_t>(c) * dh;
          for (int k = 0; k < 2; ++k) {
            const double w = head2(k, c);
            double* uarow = row + l.ua + k * dh;
            for (int q = 0; q < dh; ++q) uarow[q] += w * hcol[q];
            row[l.ba + k] += w;
          }
        }
        seed.noalias() = ua.transpose() * head2;
      } else {
        head2.setZero();
        for (int c = 0; c < batch; ++c) {
          const int b = config_bit(configs[c], site, n);
          head2(b, c) = kPi * softsign_deriv(sphi(b, c));
        }
        for (int c = 0; c < batch; ++c) {
          const int b = config_bit(configs[c], site, n);
          const double w = head2(b, c);
          double* row = out.data() + static_cast<std::ptrdiff_t>(c) * l.total;
          const double* hcol = hn.data() + static_cast<std::ptrdiff_t>(c) * dh;
          double* uprow = row + l.up + b * dh;
          for (int q = 0; q < dh; ++q) uprow[q] += w * hcol[q];
          row[l.bp + b] += w;
        }
        seed.noalias() = up.transpose() * head2;
      }

      gh = seed + ghprev;

      // h = hprev + z .* (hc - hprev)
      dpre_c = gh.cwiseProduct(zg).cwiseProduct(
          (1.0 - hcand.array().square()).matrix());
      dpre_z = gh.cwiseProduct(hcand - hp)
                   .cwiseProduct(zg)
                   .cwiseProduct((1.0 - zg.array()).matrix());
      ghprev = gh.cwiseProduct((1.0 - zg.array()).matrix());

      gvh.noalias() = wc.leftCols(dh).transpose() * dpre_c;
      dpre_r = gvh.cwiseProduct(hp).cwiseProduct(rg).cwiseProduct(
          (1.0 - rg.array()).matrix());
      ghprev += gvh.cwiseProduct(rg);
      ghprev.noalias() += wz.leftCols(dh).transpose() * dpre_z;
      ghprev.noalias() += wr.leftCols(dh).transpose() * dpre_r;

      // Per-sample parameter gradients for the three gate blocks. Bias signs
      // follow the pre-activation conventions (minus for z and r).
      for (int c = 0; c < batch; ++c) {
        double* row = out.data() + static_cast<std::ptrdiff_t>(c) * l.total;
        const double* hpcol = hp.data() + static_cast<std::ptrdiff_t>(c) * dh;
        const double* rcol = rg.data() + static_cast<std::ptrdiff_t>(c) * dh;
        const double* dc = dpre_c.data() + static_cast<std::ptrdiff_t>(c) * dh;
        const double* dz = dpre_z.data() + static_cast<std::ptrdiff_t>(c) * dh;
        const double* dr = dpre_r.data() + static_cast<std::ptrdiff_t>(c) * dh;
        const int x = site > 0 ? config_bit(configs[c], site - 1, n) : -1;
        for (int k = 0; k < dh; ++k) {
          double* wcrow = row + l.wc + k * (dh + 2);
          double* wzrow = row + l.wz + k * (dh + 2);
          double* wrrow = row + l.wr + k * (dh + 2);
          const double dck = dc[k], dzk = dz[k], drk = dr[k];
          for (int q = 0; q < dh; ++q) {
            const double hv = hpcol[q];
            wcrow[q] += dck * rcol[q] * hv;
            wzrow[q] += dzk * hv;
            wrrow[q] += drk * hv;
          }
          row[l.bc + k] += dck;
          row[l.bz + k] -= dzk;
          row[l.br + k] -= drk;
          if (x >= 0) {
            wcrow[dh + x] += dck;
            wzrow[dh + x] += dzk;
            wrrow[dh + x] += drk;
          }
        }
      }
    }
  }
}

std::vector<GruAnsatz::SiteConditional> GruAnsatz::conditionals(
    std::uint64_t config) const {
  BatchCache cache;
  Eigen::VectorXcd out;
  const std::uint64_t cfgs[1] = {config};
  forward(std::span<const std::uint64_t>(cfgs, 1), {}, nullptr, out, &cache);
  std::vector<SiteConditional> res(n_sites_);
  for (int i = 0; i < n_sites_; ++i) {
    for (int b = 0; b < 2; ++b) {
      res[i].modulus[b] = std::sqrt(cache.p[i](b, 0));
      res[i].phase[b] = kPi * softsign(cache.sphi[i](b, 0));
    }
  }
  return res;
}

}  // namespace nqs
