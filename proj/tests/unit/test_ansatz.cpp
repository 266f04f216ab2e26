#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/exact.hpp"
#include "nqs/rbm.hpp"
#include "nqs/rng.hpp"
#include "nqs/symmetry.hpp"

using namespace nqs;
using cd = std::complex<double>;

namespace {

// Central finite differences of log psi over every parameter, on the full
// configuration space. The reported log amplitudes are normalized, so the
// finite difference of the real part carries a column-constant shift of
// -E_Born[Re o_k] relative to the analytic rows (which omit additive
// normalization terms). For families that are normalized by construction
// that expectation is identically zero, so subtracting it is exact for both.
// Returns the worst error against the shifted analytic rows, with the scale
// set by the largest entry.
template <class A>
double worst_fd_error(A& psi, double h = 1e-6) {
  const int np = psi.n_params();
  const std::uint64_t space = std::uint64_t{1} << psi.n_sites();
  std::vector<std::uint64_t> configs(space);
  for (std::uint64_t c = 0; c < space; ++c) configs[c] = c;
  const auto batch = static_cast<Eigen::Index>(space);

  typename A::BatchCache cache;
  Eigen::VectorXcd logs(batch);
  psi.log_psi_batch(configs, logs, &cache);
  RowMatrixXd o_re, o_im;
  psi.log_derivatives_batch(configs, cache, o_re, o_im);

  Eigen::VectorXd born = (2.0 * logs.real().array()).exp();
  born /= born.sum();
  const Eigen::RowVectorXd shift = born.transpose() * o_re;

  Eigen::VectorXd& theta = psi.params();
  RowMatrixXd fd_re(batch, np), fd_im(batch, np);
  Eigen::VectorXcd plus(batch), minus(batch);
  for (int k = 0; k < np; ++k) {
    const double kept = theta[k];
    theta[k] = kept + h;
    psi.log_psi_batch(configs, plus);
    theta[k] = kept - h;
    psi.log_psi_batch(configs, minus);
    theta[k] = kept;
    fd_re.col(k) = (plus - minus).real() / (2.0 * h);
    fd_im.col(k) = (plus - minus).imag() / (2.0 * h);
  }

  const double scale =
      std::max({fd_re.cwiseAbs().maxCoeff(), fd_im.cwiseAbs().maxCoeff(), 1.0});
  const double err =
      std::max(((o_re.rowwise() - shift) - fd_re).cwiseAbs().maxCoeff(),
               (o_im - fd_im).cwiseAbs().maxCoeff());
  return err / scale;
}

std::vector<std::uint64_t> random_configs(int n_sites, int count,
                                          std::uint64_t seed) {
  RngStream stream = derive_stream(seed, 1);
  std::vector<std::uint64_t> out(count);
  for (auto& c : out)
    c = stream.next_u64() & ((std::uint64_t{1} << n_sites) - 1);
  return out;
}

}  // namespace

TEST_CASE("zero-parameter gru is the uniform positive state") {
  GruAnsatz psi(4, 3);
  const DenseState dense = enumerate_ansatz(psi);
  for (int i = 0; i < 16; ++i) {
    CHECK(dense.amps[i].real() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(dense.amps[i].imag() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("ansatz states are normalized by construction") {
  SUBCASE("gru, random parameters") {
    for (int n : {4, 9}) {
      GruAnsatz psi(n, 4);
      RngStream stream = derive_stream(77, static_cast<std::uint64_t>(n));
      psi.init_random(stream, 0.3);
      CHECK(std::abs(enumerate_ansatz(psi).norm() - 1.0) < 1e-10);
    }
  }
  SUBCASE("rbm normalizes through its enumerated partition sum") {
    RbmAnsatz psi(4, 2);
    RngStream stream = derive_stream(78);
    psi.init_random(stream, 0.2);
    CHECK(std::abs(enumerate_ansatz(psi).norm() - 1.0) < 1e-10);
  }
  SUBCASE("symmetrized gru stays normalized") {
    const Lattice lat = build_lattice(2, 2, Boundary::open);
    const std::vector<std::string> gens = {"z2", "reflect_x", "reflect_y"};
    GruAnsatz inner(4, 3);
    RngStream stream = derive_stream(79);
    inner.init_random(stream, 0.3);
    SymmetrizedAnsatz<GruAnsatz> psi(std::move(inner),
                                     build_symmetry_group(lat, gens));
    CHECK(std::abs(enumerate_ansatz(psi).norm() - 1.0) < 1e-10);
  }
}

TEST_CASE("pinned product state concentrates on one configuration") {
  GruAnsatz up = GruAnsatz::pinned_uniform(3, 2, 0);
  const DenseState du = enumerate_ansatz(up);
  CHECK(std::norm(du.amps[0]) > 0.999999);
  GruAnsatz down = GruAnsatz::pinned_uniform(3, 2, 1);
  const DenseState dd = enumerate_ansatz(down);
  CHECK(std::norm(dd.amps[7]) > 0.999999);
}

TEST_CASE("paramagnetic product factory matches the zero-parameter state") {
  GruAnsatz psi = GruAnsatz::paramagnetic_product(4, 5);
  CHECK(psi.params().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic log-derivatives match central differences") {
  SUBCASE("gru") {
    GruAnsatz psi(4, 3);
    RngStream stream = derive_stream(101);
    psi.init_random(stream, 0.4);
    CHECK(worst_fd_error(psi) < 1e-5);
  }
  SUBCASE("gru with sign-biased phases") {
    GruAnsatz psi(4, 3);
    RngStream stream = derive_stream(102);
    psi.init_random(stream, 0.4, true, 3.0);  // mild bias keeps FD stable
    CHECK(worst_fd_error(psi) < 1e-5);
  }
  SUBCASE("rbm") {
    RbmAnsatz psi(4, 2);
    RngStream stream = derive_stream(103);
    psi.init_random(stream, 0.3);
    CHECK(worst_fd_error(psi) < 1e-5);
  }
  SUBCASE("symmetrized gru") {
    const Lattice lat = build_lattice(2, 2, Boundary::open);
    const std::vector<std::string> gens = {"z2", "reflect_x"};
    GruAnsatz inner(4, 3);
    RngStream stream = derive_stream(104);
    inner.init_random(stream, 0.4);
    SymmetrizedAnsatz<GruAnsatz> psi(std::move(inner),
                                     build_symmetry_group(lat, gens));
    CHECK(worst_fd_error(psi) < 1e-5);
  }
}

TEST_CASE("rbm holomorphic derivatives match the real split") {
  RbmAnsatz psi(3, 2);
  RngStream stream = derive_stream(113);
  psi.init_random(stream, 0.3);
  const auto configs = random_configs(3, 20, 9);

  typename RbmAnsatz::BatchCache cache;
  Eigen::VectorXcd logs(static_cast<Eigen::Index>(configs.size()));
  psi.log_psi_batch(configs, logs, &cache);
  RowMatrixXd o_re, o_im;
  psi.log_derivatives_batch(configs, cache, o_re, o_im);
  Eigen::MatrixXcd o;
  psi.holomorphic_derivatives(configs, o);
  REQUIRE(o.cols() == psi.n_complex_params());
  REQUIRE(o_re.cols() == 2 * o.cols());
  for (Eigen::Index k = 0; k < o.cols(); ++k) {
    // Real direction 2k carries O_k; direction 2k+1 carries i O_k.
    CHECK((o_re.col(2 * k) - o.col(k).real()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((o_im.col(2 * k) - o.col(k).imag()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((o_re.col(2 * k + 1) + o.col(k).imag()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((o_im.col(2 * k + 1) - o.col(k).real()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("ancestral sampling follows the Born distribution") {
  GruAnsatz psi(3, 3);
  RngStream stream = derive_stream(131);
  psi.init_random(stream, 0.5);
  const DenseState dense = enumerate_ansatz(psi);

  const int n_samples = 40000;
  std::vector<RngStream> streams;
  streams.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i)
    streams.push_back(derive_stream(900, static_cast<std::uint64_t>(i)));
  std::vector<std::uint64_t> sigmas;
  Eigen::VectorXcd logs;
  psi.sample_batch(streams, sigmas, logs, nullptr);

  Eigen::VectorXd counts = Eigen::VectorXd::Zero(8);
  for (std::size_t i = 0; i < sigmas.size(); ++i) counts[sigmas[i]] += 1.0;
  counts /= double(n_samples);
  double tv = 0.0;
  for (int c = 0; c < 8; ++c)
    tv += 0.5 * std::abs(counts[c] - std::norm(dense.amps[c]));
  CHECK(tv < 0.02);

  // Sampled log amplitudes are the state's own.
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(std::abs(logs[static_cast<Eigen::Index>(i)] - psi.log_psi(sigmas[i])) <
          1e-12);
}

TEST_CASE("sampling and initialization are deterministic in the seed") {
  GruAnsatz a(4, 3), b(4, 3);
  RngStream sa = derive_stream(55), sb = derive_stream(55);
  a.init_random(sa, 0.3);
  b.init_random(sb, 0.3);
  CHECK((a.params() - b.params()).cwiseAbs().maxCoeff() == 0.0);

  std::vector<RngStream> streams_a, streams_b;
  for (int i = 0; i < 32; ++i) {
    streams_a.push_back(derive_stream(7, static_cast<std::uint64_t>(i)));
    streams_b.push_back(derive_stream(7, static_cast<std::uint64_t>(i)));
  }
  std::vector<std::uint64_t> sig_a, sig_b;
  Eigen::VectorXcd log_a, log_b;
  a.sample_batch(streams_a, sig_a, log_a, nullptr);
  b.sample_batch(streams_b, sig_b, log_b, nullptr);
  CHECK(sig_a == sig_b);
}

TEST_CASE("symmetrized state is invariant under its group") {
  const Lattice lat = build_lattice(2, 2, Boundary::open);
  const std::vector<std::string> gens = {"z2", "reflect_x", "reflect_y"};
  const auto group = build_symmetry_group(lat, gens);
  CHECK(group.size() == 8);

  GruAnsatz inner(4, 3);
  RngStream stream = derive_stream(61);
  inner.init_random(stream, 0.5);
  SymmetrizedAnsatz<GruAnsatz> psi(std::move(inner), group);

  for (const auto& op : group) {
    for (std::uint64_t c = 0; c < 16; ++c) {
      const std::uint64_t moved = op.apply(c, 4);
      const cd a = psi.log_psi(c);
      const cd b = psi.log_psi(moved);
      CHECK(std::abs(a.real() - b.real()) < 1e-12);
      // The phase is built from the orbit sum, which the relabeling permutes.
      CHECK(std::abs(std::remainder(a.imag() - b.imag(), 2.0 * M_PI)) < 1e-12);
    }
  }
}
