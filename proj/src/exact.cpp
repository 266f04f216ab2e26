#include "nqs/exact.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "nqs/rng.hpp"

namespace nqs {

void check_dense_cap(int n_sites) {
  if (n_sites < 1) throw std::invalid_argument("dense state needs >= 1 site");
  if (n_sites > k_dense_site_cap) {
    throw std::invalid_argument("dense oracle capped at " +
                                std::to_string(k_dense_site_cap) + " sites");
  }
}

DenseState make_dense_state(int n_sites) {
  check_dense_cap(n_sites);
  DenseState s;
  s.n_sites = n_sites;
  s.amps = Eigen::VectorXcd::Zero(Eigen::Index(1) << n_sites);
  return s;
}

std::vector<double> ising_diagonal_table(const Lattice& lat) {
  check_dense_cap(lat.n_sites());
  const std::size_t dim = std::size_t{1} << lat.n_sites();
  std::vector<double> table(dim);
  for (std::size_t idx = 0; idx < dim; ++idx) table[idx] = ising_diagonal(lat, idx);
  return table;
}

namespace {

template <class Vec>
void apply_impl(const Lattice& lat, const std::vector<double>& diag_table, double J,
                double g, const Vec& in, Vec& out) {
  const int n = lat.n_sites();
  const Eigen::Index dim = in.size();
  if (static_cast<std::size_t>(dim) != diag_table.size()) {
    throw std::invalid_argument("diagonal table does not match state dimension");
  }
  out.resize(dim);
  for (Eigen::Index idx = 0; idx < dim; ++idx) {
    out[idx] = -J * diag_table[static_cast<std::size_t>(idx)] * in[idx];
  }
  if (g != 0.0) {
    for (int site = 0; site < n; ++site) {
      const Eigen::Index mask = Eigen::Index(SpinConfig::flip_mask(site, n));
      for (Eigen::Index idx = 0; idx < dim; ++idx) {
        out[idx] += g * in[idx ^ mask];
      }
    }
  }
}

}  // namespace

void apply_hamiltonian(const Lattice& lat, const std::vector<double>& diag_table,
                       double J, double g, const Eigen::VectorXcd& in,
                       Eigen::VectorXcd& out) {
  apply_impl(lat, diag_table, J, g, in, out);
}

void apply_hamiltonian(const Lattice& lat, const std::vector<double>& diag_table,
                       double J, double g, const Eigen::VectorXd& in,
                       Eigen::VectorXd& out) {
  apply_impl(lat, diag_table, J, g, in, out);
}

GroundStateResult ground_state(const Lattice& lat, double J, double g, double tol,
                               std::uint64_t seed) {
  check_dense_cap(lat.n_sites());
  const Eigen::Index dim = Eigen::Index(1) << lat.n_sites();
  const std::vector<double> diag_table = ising_diagonal_table(lat);

  // The Hamiltonian is real symmetric, so the whole iteration runs in real
  // arithmetic and the eigenvector is promoted to complex at the end.
  RngStream rng = derive_stream(seed, 0x6c616e63);
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.next_normal();
  v.normalize();

  const int block = static_cast<int>(std::min<Eigen::Index>(dim, 40));
  const int max_restarts = 400;
  GroundStateResult result;
  result.state = Eigen::VectorXcd::Zero(dim);

  std::vector<Eigen::VectorXd> basis;
  Eigen::VectorXd w(dim), ritz(dim), hv(dim);
  double energy = 0.0;

  for (int restart = 0; restart < max_restarts; ++restart) {
    basis.clear();
    basis.push_back(v);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(block);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(block);
    int m = 0;
    for (int j = 0; j < block; ++j) {
      apply_hamiltonian(lat, diag_table, J, g, basis[j], w);
      ++result.matvecs;
      alpha[j] = basis[j].dot(w);
      w -= alpha[j] * basis[j];
      if (j > 0) w -= beta[j - 1] * basis[j - 1];
      // Full reorthogonalization keeps the basis numerically orthonormal.
      for (const auto& q : basis) w -= q.dot(w) * q;
      for (const auto& q : basis) w -= q.dot(w) * q;
      m = j + 1;
      beta[j] = w.norm();
      if (beta[j] < 1e-14 || j + 1 == block) break;
      basis.push_back(w / beta[j]);
    }

    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      tri(j, j) = alpha[j];
      if (j + 1 < m) tri(j, j + 1) = tri(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    energy = es.eigenvalues()[0];
    ritz.setZero(dim);
    for (int j = 0; j < m; ++j) ritz += es.eigenvectors()(j, 0) * basis[j];
    ritz.normalize();

    apply_hamiltonian(lat, diag_table, J, g, ritz, hv);
    ++result.matvecs;
    const double residual = (hv - energy * ritz).norm();
    if (residual <= tol * std::max(1.0, std::abs(energy)) || m < block) {
      result.energy = energy;
      result.residual = residual;
      result.state = ritz.cast<std::complex<double>>();
      return result;
    }
    v = ritz;
  }
  throw std::runtime_error("ground-state iteration failed to converge");
}

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double dp_c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double dp_a[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
constexpr double dp_b5[7] = {35.0 / 384,      0.0,  500.0 / 1113, 125.0 / 192,
                             -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double dp_b4[7] = {5179.0 / 57600,  0.0,     7571.0 / 16695, 393.0 / 640,
                             -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

}  // namespace

DenseState exact_evolve(const Lattice& lat, const QuenchSchedule& schedule,
                        const DenseState& psi0, double t0, double t1, double tol) {
  check_dense_cap(psi0.n_sites);
  if (psi0.n_sites != lat.n_sites()) {
    throw std::invalid_argument("state/lattice size mismatch");
  }
  if (!(t1 >= t0)) throw std::invalid_argument("evolution interval is reversed");
  const std::vector<double> diag_table = ising_diagonal_table(lat);
  const Eigen::Index dim = psi0.amps.size();
  const std::complex<double> minus_i(0.0, -1.0);

  Eigen::VectorXcd y = psi0.amps, hy(dim), y5(dim), y4(dim);
  std::array<Eigen::VectorXcd, 7> k;
  for (auto& ki : k) ki.resize(dim);

  auto rhs = [&](double t, const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
    const Couplings cpl = schedule.at(t);
    apply_hamiltonian(lat, diag_table, cpl.J, cpl.g, in, hy);
    out = minus_i * hy;
  };

  double t = t0;
  const double span = t1 - t0;
  if (span == 0.0) return psi0;
  double h = std::min(span, 1e-3);
  const double initial_norm = y.norm();
  long max_steps = 200000000L;
  double prev_err = 1.0;

  while (t < t1 - 1e-15 * std::max(1.0, std::abs(t1))) {
    if (--max_steps < 0) throw std::runtime_error("exact_evolve exceeded step budget");
    h = std::min(h, t1 - t);
    rhs(t, y, k[0]);
    for (int s = 1; s < 7; ++s) {
      y5 = y;
      for (int j = 0; j < s; ++j) {
        if (dp_a[s][j] != 0.0) y5 += (h * dp_a[s][j]) * k[j];
      }
      rhs(t + dp_c[s] * h, y5, k[s]);
    }
    y5 = y;
    y4 = y;
    for (int s = 0; s < 7; ++s) {
      if (dp_b5[s] != 0.0) y5 += (h * dp_b5[s]) * k[s];
      if (dp_b4[s] != 0.0) y4 += (h * dp_b4[s]) * k[s];
    }
    const double scale = tol * std::max(1.0, y.norm());
    const double err = (y5 - y4).norm() / scale;
    if (err <= 1.0) {
      t += h;
      y.swap(y5);
      const double grow =
          0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) * std::pow(prev_err, 0.4 / 5.0);
      h *= std::clamp(grow, 0.2, 5.0);
      prev_err = std::max(err, 1e-10);
    } else {
      h *= std::max(0.9 * std::pow(err, -1.0 / 5.0), 0.2);
    }
    if (h < 1e-15 * std::max(1.0, std::abs(t1))) {
      throw std::runtime_error("exact_evolve step size underflow");
    }
  }

  const double drift = std::abs(y.norm() - initial_norm);
  if (drift > 1e-8 * std::max(1.0, initial_norm)) {
    throw std::runtime_error("exact_evolve norm drift exceeds 1e-8");
  }
  DenseState out;
  out.n_sites = psi0.n_sites;
  out.amps = std::move(y);
  return out;
}

double fidelity(const DenseState& a, const DenseState& b) {
  if (a.amps.size() != b.amps.size()) throw std::invalid_argument("state size mismatch");
  const double na = a.amps.squaredNorm();
  const double nb = b.amps.squaredNorm();
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("fidelity of a null state");
  return std::norm(a.amps.dot(b.amps)) / (na * nb);
}

std::complex<double> dense_expectation(const Lattice& lat,
                                       const std::vector<double>& diag_table, double J,
                                       double g, const DenseState& psi) {
  Eigen::VectorXcd hpsi;
  apply_hamiltonian(lat, diag_table, J, g, psi.amps, hpsi);
  return psi.amps.dot(hpsi) / psi.amps.squaredNorm();
}

}  // namespace nqs
