#include "nqs/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nqs/exact.hpp"
#include "nqs/spin.hpp"

namespace nqs {

namespace {

using cplx = std::complex<double>;

bool is_strictly_lower(const Eigen::MatrixXd& a) {
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i; j < a.cols(); ++j)
      if (a(i, j) != 0.0) return false;
  return true;
}

void chain_expand(const ButcherTableau& t, double time, double dt, int max_len,
                  std::vector<int>& chain, double weight,
                  std::vector<PropagatorTerm>& out) {
  const int m = static_cast<int>(chain.size());
  if (m > 0) {
    PropagatorTerm term;
    term.coeff = std::pow(cplx(0.0, -1.0) * dt, m) * weight;
    term.times.resize(m);
    for (int k = 0; k < m; ++k) term.times[k] = time + t.c[chain[k]] * dt;
    out.push_back(std::move(term));
  }
  if (m == max_len) return;
  const int last = chain.empty() ? -1 : chain.back();
  const int s = static_cast<int>(t.b.size());
  for (int next = 0; next < s; ++next) {
    const double w = chain.empty() ? t.b[next] : t.a(last, next);
    if (w == 0.0) continue;
    chain.push_back(next);
    chain_expand(t, time, dt, max_len, chain, weight * w, out);
    chain.pop_back();
  }
}

}  // namespace

void validate_tableau(const ButcherTableau& t) {
  const Eigen::Index s = t.b.size();
  if (s < 1) throw std::invalid_argument("tableau: no stages");
  if (t.a.rows() != s || t.a.cols() != s)
    throw std::invalid_argument("tableau: stage matrix shape mismatch");
  if (t.c.size() != s) throw std::invalid_argument("tableau: node count mismatch");
  if (std::abs(t.b.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("tableau: weights must sum to 1");
  for (Eigen::Index i = 0; i < s; ++i) {
    if (std::abs(t.a.row(i).sum() - t.c[i]) > 1e-12)
      throw std::invalid_argument("tableau: nodes must match stage row sums");
  }
}

ButcherTableau named_tableau(const std::string& name) {
  ButcherTableau t;
  t.name = name;
  if (name == "euler") {
    t.a = Eigen::MatrixXd::Zero(1, 1);
    t.b = Eigen::VectorXd::Ones(1);
    t.c = Eigen::VectorXd::Zero(1);
    t.near_unitary = false;
  } else if (name == "heun") {
    t.a = Eigen::MatrixXd::Zero(2, 2);
    t.a(1, 0) = 1.0;
    t.b = Eigen::VectorXd(2);
    t.b << 0.5, 0.5;
    t.c = Eigen::VectorXd(2);
    t.c << 0.0, 1.0;
    t.near_unitary = true;
  } else if (name == "ralston") {
    t.a = Eigen::MatrixXd::Zero(2, 2);
    t.a(1, 0) = 2.0 / 3.0;
    t.b = Eigen::VectorXd(2);
    t.b << 0.25, 0.75;
    t.c = Eigen::VectorXd(2);
    t.c << 0.0, 2.0 / 3.0;
    t.near_unitary = true;
  } else if (name == "implicit-midpoint") {
    t.a = Eigen::MatrixXd::Constant(1, 1, 0.5);
    t.b = Eigen::VectorXd::Ones(1);
    t.c = Eigen::VectorXd::Constant(1, 0.5);
    t.near_unitary = false;
  } else if (name == "rk4-classic") {
    t.a = Eigen::MatrixXd::Zero(4, 4);
    t.a(1, 0) = 0.5;
    t.a(2, 1) = 0.5;
    t.a(3, 2) = 1.0;
    t.b = Eigen::VectorXd(4);
    t.b << 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0;
    t.c = Eigen::VectorXd(4);
    t.c << 0.0, 0.5, 0.5, 1.0;
    t.near_unitary = true;
  } else if (name == "rk4-38") {
    t.a = Eigen::MatrixXd::Zero(4, 4);
    t.a(1, 0) = 1.0 / 3.0;
    t.a(2, 0) = -1.0 / 3.0;
    t.a(2, 1) = 1.0;
    t.a(3, 0) = 1.0;
    t.a(3, 1) = -1.0;
    t.a(3, 2) = 1.0;
    t.b = Eigen::VectorXd(4);
    t.b << 1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0;
    t.c = Eigen::VectorXd(4);
    t.c << 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0;
    t.near_unitary = true;
  } else {
    throw std::invalid_argument("unknown integrator: " + name);
  }
  validate_tableau(t);
  return t;
}

std::vector<std::string> tableau_names() {
  return {"euler", "heun", "ralston", "implicit-midpoint", "rk4-classic", "rk4-38"};
}

std::vector<PropagatorTerm> propagator_terms(const ButcherTableau& t, double time,
                                             double dt) {
  validate_tableau(t);
  std::vector<PropagatorTerm> out;
  out.push_back({cplx(1.0, 0.0), {}});

  if (t.name == "implicit-midpoint") {
    const double tm = time + 0.5 * dt;
    out.push_back({cplx(0.0, -dt), {tm}});
    out.push_back({cplx(-0.25 * dt * dt, 0.0), {tm, tm}});
    return out;
  }

  const int s = static_cast<int>(t.b.size());
  const int max_len = is_strictly_lower(t.a) ? s : s + 1;
  std::vector<int> chain;
  chain.reserve(max_len);
  chain_expand(t, time, dt, max_len, chain, 1.0, out);
  return out;
}

std::vector<PropagatorTerm> tdagt_terms(const std::vector<PropagatorTerm>& terms) {
  std::vector<PropagatorTerm> out;
  out.reserve(terms.size() * terms.size());
  for (const PropagatorTerm& lhs : terms) {
    PropagatorTerm dag;
    dag.coeff = std::conj(lhs.coeff);
    dag.times.assign(lhs.times.rbegin(), lhs.times.rend());
    for (const PropagatorTerm& rhs : terms) {
      PropagatorTerm prod;
      prod.coeff = dag.coeff * rhs.coeff;
      prod.times = dag.times;
      prod.times.insert(prod.times.end(), rhs.times.begin(), rhs.times.end());
      out.push_back(std::move(prod));
    }
  }
  return out;
}

Eigen::VectorXd lambda_coefficients(const ButcherTableau& t, int m_max) {
  validate_tableau(t);
  // Accumulate in extended precision: the weights are sums of small rational
  // tableau entries, and plain double summation can land one ulp off values
  // like 1.0 that the chain sums hit exactly.
  const Eigen::Index s = t.b.size();
  std::vector<long double> v(static_cast<std::size_t>(s)), next(v.size());
  for (Eigen::Index i = 0; i < s; ++i) v[static_cast<std::size_t>(i)] = t.c[i];
  Eigen::VectorXd lam(m_max + 1);
  lam[0] = 1.0;
  if (m_max >= 1) {
    long double acc = 0.0L;
    for (Eigen::Index i = 0; i < s; ++i) acc += t.b[i];
    lam[1] = static_cast<double>(acc);
  }
  for (int m = 2; m <= m_max; ++m) {
    long double acc = 0.0L;
    for (Eigen::Index i = 0; i < s; ++i)
      acc += static_cast<long double>(t.b[i]) * v[static_cast<std::size_t>(i)];
    lam[m] = static_cast<double>(acc);
    for (Eigen::Index i = 0; i < s; ++i) {
      long double row = 0.0L;
      for (Eigen::Index k = 0; k < s; ++k)
        row += static_cast<long double>(t.a(i, k)) * v[static_cast<std::size_t>(k)];
      next[static_cast<std::size_t>(i)] = row;
    }
    v = next;
  }
  return lam;
}

std::vector<RealizedTerm> realize_terms(const std::vector<PropagatorTerm>& terms,
                                        const QuenchSchedule& schedule) {
  std::vector<RealizedTerm> out;
  for (const PropagatorTerm& term : terms) {
    RealizedTerm rt;
    rt.coeff = term.coeff;
    rt.factors.reserve(term.times.size());
    for (double tt : term.times) rt.factors.push_back(schedule.at(tt));
    bool merged = false;
    for (RealizedTerm& prev : out) {
      if (prev.factors.size() != rt.factors.size()) continue;
      bool same = true;
      for (std::size_t k = 0; k < rt.factors.size(); ++k) {
        if (prev.factors[k].J != rt.factors[k].J ||
            prev.factors[k].g != rt.factors[k].g) {
          same = false;
          break;
        }
      }
      if (same) {
        prev.coeff += rt.coeff;
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(std::move(rt));
  }
  return out;
}

void expand_local_row(const Lattice& lat, std::span<const RealizedTerm> terms,
                      std::uint64_t sigma, ConnAccumulator<std::complex<double>>& out,
                      ConnAccumulator<double>& work_a, ConnAccumulator<double>& work_b) {
  out.clear();
  for (const RealizedTerm& term : terms) {
    product_connected_elements(lat, term.factors, sigma, work_a, work_b);
    for (const auto& [config, amp] : work_a.items()) out.add(config, term.coeff * amp);
  }
}

Eigen::MatrixXcd dense_terms_matrix(const Lattice& lat,
                                    std::span<const RealizedTerm> terms) {
  check_dense_cap(lat.n_sites());
  const std::uint64_t dim = std::uint64_t{1} << lat.n_sites();
  Eigen::MatrixXcd mat = Eigen::MatrixXcd::Zero(dim, dim);
  ConnAccumulator<std::complex<double>> row;
  ConnAccumulator<double> wa, wb;
  for (std::uint64_t sigma = 0; sigma < dim; ++sigma) {
    expand_local_row(lat, terms, sigma, row, wa, wb);
    for (const auto& [config, amp] : row.items()) mat(sigma, config) += amp;
  }
  return mat;
}

}  // namespace nqs
