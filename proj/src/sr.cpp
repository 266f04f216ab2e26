#include "nqs/sr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nqs {

namespace {

constexpr double k_tiny = 1e-300;

double relative_residual(const Eigen::MatrixXcd& a, const Eigen::VectorXcd& x,
                         const Eigen::VectorXcd& rhs) {
  const double scale = std::max(rhs.norm(), k_tiny);
  return (a * x - rhs).norm() / scale;
}

double relative_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& rhs) {
  const double scale = std::max(rhs.norm(), k_tiny);
  return (a * x - rhs).norm() / scale;
}

}  // namespace

QgtAccumulator::QgtAccumulator(int n_params) {
  if (n_params <= 0) throw std::invalid_argument("QgtAccumulator: n_params must be positive");
  ss_ = Eigen::MatrixXcd::Zero(n_params, n_params);
  so_ = Eigen::VectorXcd::Zero(n_params);
  sf_ = Eigen::VectorXcd::Zero(n_params);
}

void QgtAccumulator::add(const RowMatrixXd& o_re, const RowMatrixXd& o_im,
                         const Eigen::VectorXcd& e_loc,
                         const Eigen::VectorXd& weights) {
  const auto rows = o_re.rows();
  const auto cols = o_re.cols();
  if (o_im.rows() != rows || o_im.cols() != cols)
    throw std::invalid_argument("QgtAccumulator: o_re/o_im shape mismatch");
  if (cols != ss_.rows())
    throw std::invalid_argument("QgtAccumulator: parameter count mismatch");
  if (e_loc.size() != rows)
    throw std::invalid_argument("QgtAccumulator: e_loc length mismatch");
  const bool weighted = weights.size() > 0;
  if (weighted && weights.size() != rows)
    throw std::invalid_argument("QgtAccumulator: weight length mismatch");

  Eigen::MatrixXcd o = o_re.cast<std::complex<double>>();
  o.imag() = o_im;

  if (weighted) {
    // S-part wants conj(O)^T diag(w) O; fold the weights in as sqrt factors
    // so a single rank-k update keeps the result Hermitian by construction.
    Eigen::VectorXd root = weights.cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXcd ow = root.asDiagonal() * o;
    ss_.noalias() += ow.adjoint() * ow;
    so_.noalias() += o.transpose() * weights.cast<std::complex<double>>();
    Eigen::VectorXcd we = weights.array().cast<std::complex<double>>() * e_loc.array();
    sf_.noalias() += o.adjoint() * we;
    se_ += we.sum();
    wsum_ += weights.sum();
  } else {
    ss_.noalias() += o.adjoint() * o;
    so_.noalias() += o.colwise().sum().transpose();
    sf_.noalias() += o.adjoint() * e_loc;
    se_ += e_loc.sum();
    wsum_ += static_cast<double>(rows);
  }
  count_ += rows;
}

QgtEstimate QgtAccumulator::finalize() const {
  if (wsum_ <= 0.0) throw std::runtime_error("QgtAccumulator: no samples folded in");
  QgtEstimate out;
  const double inv = 1.0 / wsum_;
  Eigen::VectorXcd mean_o = so_ * inv;
  out.mean_energy = se_ * inv;
  out.s = ss_ * inv;
  out.s.noalias() -= mean_o.conjugate() * mean_o.transpose();
  out.f = sf_ * inv - mean_o.conjugate() * out.mean_energy;
  out.total_weight = wsum_;
  out.sample_count = count_;
  return out;
}

Eigen::VectorXd qgt_spectrum(const Eigen::MatrixXcd& s, SpectrumMode mode) {
  if (s.rows() != s.cols()) throw std::invalid_argument("qgt_spectrum: square matrix required");
  Eigen::VectorXd vals;
  if (mode == SpectrumMode::full) {
    Eigen::MatrixXcd herm = 0.5 * (s + s.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    vals = es.eigenvalues();
  } else {
    // Im(S) is real antisymmetric, so i*Im(S) is Hermitian with a spectrum
    // of +/- pairs; the magnitudes are what conditioning analysis needs.
    Eigen::MatrixXd k = 0.5 * (s.imag() - s.imag().transpose());
    Eigen::MatrixXcd herm = std::complex<double>(0.0, 1.0) * k.cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm, Eigen::EigenvaluesOnly);
    vals = es.eigenvalues().cwiseAbs();
  }
  std::sort(vals.data(), vals.data() + vals.size(), std::greater<double>());
  return vals;
}

SpectrumStats spectrum_stats(const Eigen::VectorXd& descending) {
  SpectrumStats st;
  const auto n = descending.size();
  if (n == 0) return st;
  st.lambda_max = descending[0];
  st.lambda_median = descending[n / 2];
  const double floor_val = std::max(std::abs(st.lambda_max) * 1e-16, k_tiny);
  const double med = std::max(st.lambda_median, floor_val);
  st.flatness_ratio = std::max(st.lambda_max, floor_val) / med;
  const auto half = std::max<Eigen::Index>(2, (n + 1) / 2);
  for (Eigen::Index i = 0; i + 1 < half && i + 1 < n; ++i) {
    const double hi = std::max(descending[i], floor_val);
    const double lo = std::max(descending[i + 1], floor_val);
    st.top_half_max_log_gap = std::max(st.top_half_max_log_gap, std::log10(hi / lo));
  }
  return st;
}

SrSolveResult sr_step_complex(const QgtEstimate& est, double lambda_reg,
                              const Eigen::VectorXcd& theta, double failure_tol) {
  SrSolveResult res;
  const auto n = est.s.rows();
  Eigen::MatrixXcd a = 0.5 * (est.s + est.s.adjoint());
  a.diagonal().array() += lambda_reg;
  const Eigen::VectorXcd rhs = std::complex<double>(0.0, -1.0) * est.f;

  Eigen::LDLT<Eigen::MatrixXcd> ldlt(a);
  if (ldlt.info() == Eigen::Success) {
    res.theta_dot = ldlt.solve(rhs);
    res.residual = relative_residual(a, res.theta_dot, rhs);
  }
  if (ldlt.info() != Eigen::Success || !res.theta_dot.allFinite() ||
      res.residual > failure_tol) {
    // Direct factorization struggled; invert on the numerically supported
    // eigenspace instead.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double cutoff = ev.cwiseAbs().maxCoeff() * 1e-12;
    Eigen::VectorXcd proj = es.eigenvectors().adjoint() * rhs;
    for (Eigen::Index i = 0; i < n; ++i)
      proj[i] = std::abs(ev[i]) > cutoff ? proj[i] / ev[i] : std::complex<double>(0.0);
    res.theta_dot = es.eigenvectors() * proj;
    res.used_pseudo_inverse = true;
    res.residual = relative_residual(a, res.theta_dot, rhs);
  }
  if (!res.theta_dot.allFinite() || res.residual > failure_tol) {
    res.failed = true;
    res.failure_reason = "complex SR solve residual " + std::to_string(res.residual) +
                         " beyond tolerance " + std::to_string(failure_tol);
  }
  res.update_ratio = res.theta_dot.norm() / std::max(theta.norm(), k_tiny);
  return res;
}

SrSolveResult sr_step_real(const QgtEstimate& est, double svd_cutoff,
                           const Eigen::VectorXd& theta, double failure_tol) {
  SrSolveResult res;
  Eigen::MatrixXd a = 0.5 * (est.s.imag() - est.s.imag().transpose());
  Eigen::VectorXd rhs = -est.f.real();

  // The antisymmetric system is singular whenever the parameter count is odd
  // and typically near-singular otherwise, so the pseudo-inverse is the
  // primary path rather than a fallback.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv[0] : 0.0;
  const double cutoff = smax * svd_cutoff;
  Eigen::VectorXd proj = svd.matrixU().transpose() * rhs;
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > cutoff && sv[i] > 0.0) {
      proj[i] /= sv[i];
      ++kept;
    } else {
      proj[i] = 0.0;
    }
  }
  res.theta_dot_real = svd.matrixV() * proj;
  res.used_pseudo_inverse = kept < sv.size();
  res.residual = relative_residual(a, res.theta_dot_real, rhs);
  if (!res.theta_dot_real.allFinite() || res.residual > failure_tol) {
    res.failed = true;
    res.failure_reason = "real-split SR solve residual " + std::to_string(res.residual) +
                         " beyond tolerance " + std::to_string(failure_tol) +
                         " (rank " + std::to_string(kept) + "/" + std::to_string(sv.size()) + ")";
  }
  res.update_ratio = res.theta_dot_real.norm() / std::max(theta.norm(), k_tiny);
  return res;
}

}  // namespace nqs
