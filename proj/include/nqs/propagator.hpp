#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "nqs/lattice.hpp"

namespace nqs {

// Runge-Kutta tableau for integrating i d/dt psi = H(t) psi. `a` is s x s,
// `b` and `c` have length s, and c_i must equal the i-th row sum of `a`.
struct ButcherTableau {
  std::string name;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  // Set when the scheme's truncated step matches the exponential through
  // second order, so T'T = 1 + O(dt^3) and the overlap objective needs no
  // norm correction term.
  bool near_unitary = false;
};

// Throws std::invalid_argument on malformed input: non-square a, size
// mismatches, weights not summing to 1, or c inconsistent with the row sums.
void validate_tableau(const ButcherTableau& t);

// Registry: euler, heun, ralston, implicit-midpoint, rk4-classic, rk4-38.
ButcherTableau named_tableau(const std::string& name);
std::vector<std::string> tableau_names();

// One monomial of the expanded one-step propagator
//   T = 1 + sum over stage chains (-i dt)^m b_{i1} a_{i1 i2} ... a_{i_{m-1} i_m}
//         H(t + c_{i1} dt) H(t + c_{i2} dt) ... H(t + c_{i_m} dt).
// `times[0]` is the leftmost Hamiltonian factor (applied last to a ket,
// expanded first from a bra row).
struct PropagatorTerm {
  std::complex<double> coeff;
  std::vector<double> times;
};

// Expanded step operator for the window [t, t + dt]. Explicit tableaus
// enumerate every chain of strictly decreasing stages. Tableaus with implicit
// diagonal entries are expanded through their Neumann iteration and truncated
// at chains of length s + 1. The midpoint rule is special-cased: both Cayley
// factors are truncated at first order, giving
//   T = 1 - i dt H(t + dt/2) - (dt^2 / 4) H(t + dt/2)^2,
// whose norm defect is O(dt^2) rather than O(dt^3); the generic expansion
// would instead reproduce the Heun-like -dt^2/2 coefficient and hide that
// behavior.
std::vector<PropagatorTerm> propagator_terms(const ButcherTableau& t, double time,
                                             double dt);

// Product list for T'T: every pairwise product of one conjugated, reversed
// term with one plain term.
std::vector<PropagatorTerm> tdagt_terms(const std::vector<PropagatorTerm>& terms);

// Time-independent weights: T = sum_m lambda_m (-i dt H)^m for constant H.
// lambda_0 = lambda_1 = 1 for any consistent tableau; higher orders are
// b' a^{m-2} c.
Eigen::VectorXd lambda_coefficients(const ButcherTableau& t, int m_max);

// A term with its Hamiltonian factors resolved against a coupling schedule.
struct RealizedTerm {
  std::complex<double> coeff;
  std::vector<Couplings> factors;
};

// Resolves term times through the schedule and merges terms whose factor
// lists coincide (constant schedules collapse chains into powers).
std::vector<RealizedTerm> realize_terms(const std::vector<PropagatorTerm>& terms,
                                        const QuenchSchedule& schedule);

// Row expansion of sum_k coeff_k <sigma| prod H factors: accumulates complex
// weights per reached configuration. `out` is cleared first; `work_a/work_b`
// are scratch.
void expand_local_row(const Lattice& lat, std::span<const RealizedTerm> terms,
                      std::uint64_t sigma, ConnAccumulator<std::complex<double>>& out,
                      ConnAccumulator<double>& work_a, ConnAccumulator<double>& work_b);

// Dense matrix of the expanded propagator on the full configuration space
// (test and small-system oracle path).
Eigen::MatrixXcd dense_terms_matrix(const Lattice& lat,
                                    std::span<const RealizedTerm> terms);

}  // namespace nqs
