// Release gates for the engine. Every quantitative promise the project makes
// is checked end to end here, one [PASS]/[FAIL] line per gate; the process
// exits nonzero when any gate fails. Most gates run in process through
// run_plan; the reproducibility gate shells out twice to the CLI binary named
// with --nqsdyn. Artifacts land under the system temp directory and are kept
// for inspection.
//
// Usage: acceptance_tests [--nqsdyn <path>] [--only 1,5,12]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nqs/ansatz.hpp"
#include "nqs/exact.hpp"
#include "nqs/experiments.hpp"
#include "nqs/local.hpp"
#include "nqs/propagator.hpp"
#include "nqs/rbm.hpp"
#include "nqs/rng.hpp"
#include "nqs/symmetry.hpp"

using namespace nqs;
using json = nlohmann::json;
namespace fs = std::filesystem;
using cd = std::complex<double>;

namespace {

fs::path g_scratch;
std::string g_nqsdyn;

void note(const std::string& line) { std::cout << "    " << line << "\n"; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// --------------------------------------------------------------------------
// Small file helpers
// --------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error("csv column not found: " + name);
  }
};

Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  Csv out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      out.header = std::move(cells);
      first = false;
    } else {
      out.rows.push_back(std::move(cells));
    }
  }
  return out;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  return out;
}

// --------------------------------------------------------------------------
// Dense referees
// --------------------------------------------------------------------------

Eigen::MatrixXcd dense_h(const Lattice& lat, const Couplings& cpl) {
  const int dim = 1 << lat.n_sites();
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  std::vector<ConnectedEntry> row;
  for (int s = 0; s < dim; ++s) {
    connected_elements(lat, cpl.J, cpl.g, static_cast<std::uint64_t>(s), row);
    for (const auto& e : row) h(s, static_cast<int>(e.config)) += e.amplitude;
  }
  return h;
}

Eigen::MatrixXcd exact_exp(const Eigen::MatrixXcd& h, double dt) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  const Eigen::VectorXcd phases =
      (cd(0.0, -dt) * es.eigenvalues().array()).exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

double fitted_slope(const std::vector<double>& dts,
                    const std::vector<double>& errs) {
  const int n = static_cast<int>(dts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::log(dts[i]);
    const double y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Central finite differences of log psi over every parameter on the full
// configuration space. Reported amplitudes are normalized, so the finite
// difference of the real part carries a column-constant shift relative to
// analytic rows that omit additive normalization terms; subtracting the
// Born-weighted column mean is exact for both parameterizations in use.
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

// --------------------------------------------------------------------------
// Gate 1: analytic log-derivatives vs finite differences
// --------------------------------------------------------------------------

bool gate_gradients() {
  double worst_gru = 0.0;
  for (int draw = 0; draw < 50; ++draw) {
    GruAnsatz psi(4, 3);
    RngStream stream = derive_stream(1000, static_cast<std::uint64_t>(draw));
    psi.init_random(stream, 0.4);
    worst_gru = std::max(worst_gru, worst_fd_error(psi));
  }
  double worst_rbm = 0.0;
  for (int draw = 0; draw < 50; ++draw) {
    RbmAnsatz psi(4, 2);
    RngStream stream = derive_stream(2000, static_cast<std::uint64_t>(draw));
    psi.init_random(stream, 0.3);
    worst_rbm = std::max(worst_rbm, worst_fd_error(psi));
  }
  note("worst relative error over 50 draws: gru " + fmt(worst_gru) + ", rbm " +
       fmt(worst_rbm) + " (bound 1e-5)");
  return worst_gru < 1e-5 && worst_rbm < 1e-5;
}

// --------------------------------------------------------------------------
// Gate 2: enumerated norms of the recurrent families
// --------------------------------------------------------------------------

bool gate_norms() {
  bool ok = true;
  const std::vector<std::string> gens = {"z2", "reflect_x", "reflect_y"};
  for (int side : {2, 3, 4}) {
    const int n = side * side;
    GruAnsatz psi(n, 4);
    RngStream stream = derive_stream(3000, static_cast<std::uint64_t>(side));
    psi.init_random(stream, 0.3);
    const double plain = enumerate_ansatz(psi).norm();

    const Lattice lat = build_lattice(side, side, Boundary::open);
    GruAnsatz inner(n, 4);
    RngStream stream2 = derive_stream(3100, static_cast<std::uint64_t>(side));
    inner.init_random(stream2, 0.3);
    SymmetrizedAnsatz<GruAnsatz> sym(std::move(inner),
                                     build_symmetry_group(lat, gens));
    const double wrapped = enumerate_ansatz(sym).norm();

    note("n=" + std::to_string(n) + ": |norm-1| gru " +
         fmt(std::abs(plain - 1.0)) + ", symmetrized " +
         fmt(std::abs(wrapped - 1.0)) + " (bound 1e-10)");
    ok = ok && std::abs(plain - 1.0) < 1e-10 && std::abs(wrapped - 1.0) < 1e-10;
  }
  return ok;
}

// --------------------------------------------------------------------------
// Gate 3: dense single-step error orders of the step operators
// --------------------------------------------------------------------------

bool gate_propagator_order() {
  const Lattice lat = build_lattice(2, 2, Boundary::open);
  const auto sched = QuenchSchedule::constant(1.0, 3.044);
  const Eigen::MatrixXcd h = dense_h(lat, sched.at(0.0));

  std::mt19937 gen(3);
  std::normal_distribution<double> dist;
  Eigen::VectorXcd v(16);
  for (int i = 0; i < 16; ++i) v[i] = cd(dist(gen), dist(gen));
  v /= v.norm();

  const std::vector<double> dts = {0.02, 0.01, 0.005, 0.0025};
  auto order_of = [&](const std::string& name) {
    std::vector<double> errs;
    for (double dt : dts) {
      const auto terms =
          realize_terms(propagator_terms(named_tableau(name), 0.0, dt), sched);
      const Eigen::MatrixXcd t = dense_terms_matrix(lat, terms);
      errs.push_back((t * v - exact_exp(h, dt) * v).norm());
    }
    return fitted_slope(dts, errs);
  };

  bool ok = true;
  auto gate_slope = [&](const std::string& name, double want) {
    const double got = order_of(name);
    note(name + " single-step error slope " + fmt(got) + " (want " +
         fmt(want) + " +- 0.2)");
    ok = ok && std::abs(got - want) <= 0.2;
  };
  gate_slope("euler", 2.0);
  gate_slope("heun", 3.0);
  gate_slope("rk4-classic", 5.0);
  gate_slope("rk4-38", 5.0);

  // Norm defect of T'T for the quadrature-favored second-order method.
  const auto soft = QuenchSchedule::constant(1.0, 1.5);
  std::vector<double> defects;
  for (double dt : dts) {
    const auto base = propagator_terms(named_tableau("heun"), 0.0, dt);
    const auto tt = realize_terms(tdagt_terms(base), soft);
    const Eigen::MatrixXcd m = dense_terms_matrix(lat, tt);
    defects.push_back(
        (m - Eigen::MatrixXcd::Identity(16, 16)).cwiseAbs().maxCoeff());
  }
  const double defect_slope = fitted_slope(dts, defects);
  note("heun norm-defect slope " + fmt(defect_slope) + " (want 4 +- 0.2)");
  ok = ok && std::abs(defect_slope - 4.0) <= 0.2;

  // Time-dependent couplings: the second-order cross terms cancel, so the
  // single-step error keeps its third-order slope on an analytic ramp.
  const auto ramp = QuenchSchedule::linear_ramp(1.0, 1.0, 0.5);
  DenseState psi0 = make_dense_state(4);
  std::mt19937 gen2(5);
  for (int i = 0; i < psi0.amps.size(); ++i)
    psi0.amps[i] = cd(dist(gen2), dist(gen2));
  psi0.amps /= psi0.norm();
  std::vector<double> ramp_errs;
  for (double dt : dts) {
    const double t0 = 0.1;
    const auto terms =
        realize_terms(propagator_terms(named_tableau("heun"), t0, dt), ramp);
    const Eigen::MatrixXcd t = dense_terms_matrix(lat, terms);
    const DenseState ref = exact_evolve(lat, ramp, psi0, t0, t0 + dt, 1e-13);
    ramp_errs.push_back((t * psi0.amps - ref.amps).norm());
  }
  const double ramp_slope = fitted_slope(dts, ramp_errs);
  note("heun ramped-coupling error slope " + fmt(ramp_slope) +
       " (want 3 +- 0.2; second-order terms cancel)");
  ok = ok && std::abs(ramp_slope - 3.0) <= 0.2;
  return ok;
}

// --------------------------------------------------------------------------
// Gate 4: fourth-order expansion weights
// --------------------------------------------------------------------------

bool gate_lambda_weights() {
  bool ok = true;
  for (const char* name : {"rk4-classic", "rk4-38"}) {
    const auto lam = lambda_coefficients(named_tableau(name), 3);
    const bool match = lam[0] == 1.0 && lam[1] == 1.0 && lam[2] == 0.5 &&
                       lam[3] == 1.0 / 6.0;
    note(std::string(name) + ": (" + fmt(lam[0]) + ", " + fmt(lam[1]) + ", " +
         fmt(lam[2]) + ", " + fmt(lam[3]) + ") want (1, 1, 1/2, 1/6) exactly");
    ok = ok && match;
  }
  return ok;
}

// --------------------------------------------------------------------------
// Gate 5: single-spin precession against the closed form
// --------------------------------------------------------------------------

bool gate_single_spin() {
  ExperimentPlan p;
  p.kind = "evolve";
  p.name = "gate-single-spin";
  p.lattice.rows = 1;
  p.lattice.cols = 1;
  p.ansatz.hidden = 4;
  p.initial_state.kind = "z_basis_product";
  p.schedule.protocol = "constant";
  p.schedule.J = 0.0;
  p.schedule.g = 1.0;
  p.method = "heun";
  p.step.n_opt_steps = 100;
  p.step.eta = 0.01;
  p.step.n_samples = 1000;
  p.step.dt.value = 0.01;
  p.time.t_final = 3.0;
  p.seed = 11;
  run_plan(p, g_scratch / "single-spin");

  const Csv traj = read_csv(g_scratch / "single-spin" / "trajectory.csv");
  const int tc = traj.col("time");
  const int zc = traj.col("sz");
  double worst = 0.0;
  for (const auto& row : traj.rows) {
    const double t = std::stod(row[tc]);
    const double sz = std::stod(row[zc]);
    worst = std::max(worst, std::abs(sz - std::cos(2.0 * t)));
  }
  note("steps " + std::to_string(traj.rows.size() - 1) +
       ", max |sz - cos(2gt)| = " + fmt(worst) + " (bound 0.02)");
  return traj.rows.size() >= 300 && worst <= 2e-2;
}

// --------------------------------------------------------------------------
// Gate 6: sudden quench against the dense oracle on 3x3
// --------------------------------------------------------------------------

bool gate_sudden_quench() {
  bool ok = true;
  for (const char* name : {"fig4-g2", "fig4-g1"}) {
    ExperimentPlan p = preset_plan(name);
    p.seed = 21;
    const RunResult res = run_plan(p, g_scratch / (std::string("quench-") + name));
    const auto& ob = res.summary.at("oracle");
    const double dev = ob.at("max_abs_sx_dev").get<double>();
    const double fid = ob.at("terminal_fidelity").get<double>();
    note(std::string(name) + ": max |Sx - oracle| " + fmt(dev) +
         " (bound 0.05), terminal fidelity " + fmt(fid) + " (bound 0.99)");
    ok = ok && dev <= 0.05 && fid >= 0.99;
  }
  note("[info] 4x4 tier (terminal fidelity >= 0.97) is a stretch target; run "
       "the fig6 preset to produce it");
  return ok;
}

// --------------------------------------------------------------------------
// Gates 7 and 11 share two ramp scans (3x3 and 4x4)
// --------------------------------------------------------------------------

struct KzRuns {
  bool ran = false;
  json s3, s4;
};
KzRuns g_kz;

void ensure_kz_runs() {
  if (g_kz.ran) return;
  auto configure = [](ExperimentPlan p, int n_samples, std::uint64_t seed) {
    p.kz.tau_q_grid = {0.03, 0.1, 0.31, 1.0};
    p.step.n_opt_steps = 60;
    p.step.n_samples = n_samples;
    const Lattice lat = p.lattice.build();
    p.step.dt.value = 0.02 / p.schedule.critical_field(lat);
    p.output.track_fidelity = false;
    p.seed = seed;
    return p;
  };
  ExperimentPlan p3 = configure(preset_plan("fig2-3x3"), 500, 31);
  g_kz.s3 = run_plan(p3, g_scratch / "ramp-3x3").summary;
  ExperimentPlan p4 = configure(preset_plan("fig2-4x4"), 300, 32);
  g_kz.s4 = run_plan(p4, g_scratch / "ramp-4x4").summary;
  g_kz.ran = true;
}

bool gate_fast_ramp_energy() {
  ensure_kz_runs();
  bool ok = true;
  auto check = [&ok](const json& summary, const std::string& label) {
    for (const auto& pt : summary.at("points")) {
      const double jtq = pt.at("j_tau_q").get<double>();
      if (std::abs(jtq - 0.1) > 1e-9 && std::abs(jtq - 0.31) > 1e-9) continue;
      const bool ran = pt.at("status").get<std::string>() == "ok";
      const double rel =
          ran ? pt.at("injected_rel_error").get<double>() : 1.0;
      note(label + " J*tau_q " + fmt(jtq) + ": injected " +
           (ran ? fmt(pt.at("injected_energy_density").get<double>()) : "-") +
           " vs oracle " +
           (ran ? fmt(pt.at("oracle_injected_energy_density").get<double>())
                : "-") +
           ", relative error " + fmt(rel) + " (bound 0.10)");
      ok = ok && ran && rel <= 0.10;
    }
  };
  check(g_kz.s3, "3x3");
  check(g_kz.s4, "4x4");
  return ok;
}

// --------------------------------------------------------------------------
// Gate 8: residual-vs-step orders, noise floor, floor shift
// --------------------------------------------------------------------------

bool gate_residual_orders() {
  ExperimentPlan p = preset_plan("fig5a");
  p.seed = 41;
  const RunResult res = run_plan(p, g_scratch / "step-scan");
  const auto& methods = res.summary.at("methods");

  bool ok = true;
  auto gate_slope = [&](const std::string& name, double want) {
    const double got = methods.at(name).at("slope").get<double>();
    note(name + " mean-residual slope " + fmt(got) + " (want " + fmt(want) +
         " +- 0.5)");
    ok = ok && std::abs(got - want) <= 0.5;
  };
  gate_slope("euler", 2.0);
  gate_slope("implicit-midpoint", 2.0);
  gate_slope("heun", 4.0);

  const auto& floor = res.summary.at("floor");
  const bool exists = floor.at("exists").get<bool>();
  const bool moves = floor.at("moves_down").get<bool>();
  note(std::string("noise floor exists: ") + (exists ? "yes" : "no") +
       ", moves down at 4x samples: " + (moves ? "yes" : "no"));
  note("smallest mean residual at g*dt = " +
       fmt(res.summary.at("optimal_g_dt").get<double>()) +
       " (reported, not gated)");
  return ok && exists && moves;
}

// --------------------------------------------------------------------------
// Gate 9: residual spread scales as 1/sqrt(samples)
// --------------------------------------------------------------------------

bool gate_noise_collapse() {
  ExperimentPlan p = preset_plan("fig5b");
  p.noise.window = 10;
  p.seed = 51;
  const RunResult res = run_plan(p, g_scratch / "noise-scan");
  const double collapse = res.summary.at("collapse_max_rel_dev").get<double>();
  const int reps = res.summary.at("repetitions").get<int>();
  std::string levels;
  for (const auto& pn : res.summary.at("per_ns"))
    levels += fmt(pn.at("mean_sigma_sqrt_ns").get<double>()) + " ";
  note("sigma*sqrt(Ns) levels per Ns grid point: " + levels);
  note("max pairwise spread " + fmt(collapse) + " of the common level (bound "
       "0.30), repetitions " + std::to_string(reps) + " (need >= 10)");
  return collapse <= 0.30 && reps >= 10;
}

// --------------------------------------------------------------------------
// Gate 10: geometric-tensor spectrum statistics at 4x4
// --------------------------------------------------------------------------

bool gate_qgt_spectra() {
  ExperimentPlan gru = preset_plan("fig1d-gru");
  gru.seed = 61;
  const RunResult rg = run_plan(gru, g_scratch / "spectra-gru");

  bool ok = true;
  double gru_gap_at_2 = 0.0;
  for (const auto& pt : rg.summary.at("points")) {
    const double ratio = pt.at("g_over_gc").get<double>();
    const double flat = pt.at("flatness_ratio").get<double>();
    note("gru g/gc " + fmt(ratio) + ": lambda_max/lambda_median " + fmt(flat) +
         " (bound 1e6)");
    ok = ok && flat >= 1e6;
    if (std::abs(ratio - 2.0) < 1e-9)
      gru_gap_at_2 = pt.at("top_half_max_log_gap").get<double>();
  }

  ExperimentPlan rbm = preset_plan("fig1b-rbm");
  rbm.qgt.g_over_gc_grid = {2.0};
  rbm.seed = 62;
  const RunResult rr = run_plan(rbm, g_scratch / "spectra-rbm");
  const auto& pt = rr.summary.at("points").at(0);
  const double rbm_gap = pt.at("top_half_max_log_gap").get<double>();
  note("top-half largest log-gap at g/gc 2: rbm " + fmt(rbm_gap) + " vs gru " +
       fmt(gru_gap_at_2) + " (need rbm >= 2x gru)");
  note("[info] rbm grid restricted to g/gc = 2 here; the fig1b-rbm preset "
       "keeps the full grid");
  return ok && rbm_gap >= 2.0 * gru_gap_at_2;
}

// --------------------------------------------------------------------------
// Gate 11: injected energy falls monotonically with ramp duration
// --------------------------------------------------------------------------

bool gate_ramp_monotonicity() {
  ensure_kz_runs();
  std::string seen;
  for (const auto& pt : g_kz.s4.at("points")) {
    if (pt.at("status").get<std::string>() != "ok") {
      note("4x4 point J*tau_q " + fmt(pt.at("j_tau_q").get<double>()) +
           " failed to run");
      return false;
    }
    seen += fmt(pt.at("injected_energy_density").get<double>()) + " ";
  }
  const bool monotone = g_kz.s4.at("monotonic_decreasing").get<bool>();
  note("4x4 injected energy density over the ramp grid: " + seen);
  note(std::string("strictly decreasing: ") + (monotone ? "yes" : "no"));
  note("[info] the 6x6 exponent fit ships as the fig2-6x6 preset and is "
       "reported against 0.72 +- 0.15 without gating");
  return monotone;
}

// --------------------------------------------------------------------------
// Gate 12: byte-identical reruns through the CLI
// --------------------------------------------------------------------------

bool gate_reproducibility() {
  if (g_nqsdyn.empty()) {
    note("no --nqsdyn path given; cannot spawn the CLI");
    return false;
  }
  ExperimentPlan p;
  p.kind = "evolve";
  p.name = "gate-repro";
  p.lattice.rows = 1;
  p.lattice.cols = 2;
  p.ansatz.hidden = 3;
  p.schedule.protocol = "constant";
  p.schedule.J = 1.0;
  p.schedule.g = 1.2;
  p.method = "heun";
  p.step.n_opt_steps = 30;
  p.step.eta = 0.01;
  p.step.n_samples = 100;
  p.step.dt.value = 0.02;
  p.time.t_final = 0.06;
  p.output.checkpoint_stride = 2;
  p.seed = 71;

  const fs::path dir = g_scratch / "repro";
  fs::create_directories(dir);
  write_json_file(dir / "plan.json", plan_to_json(p));

  auto spawn = [&](const std::string& run) {
    const std::string cmd = "\"" + g_nqsdyn + "\" evolve --plan \"" +
                            (dir / "plan.json").string() + "\" --out \"" +
                            (dir / run).string() + "\" > \"" +
                            (dir / (run + ".log")).string() + "\" 2>&1";
    return std::system(cmd.c_str());
  };
  if (spawn("a") != 0 || spawn("b") != 0) {
    note("CLI run exited nonzero; see logs under " + dir.string());
    return false;
  }

  const auto ta = tree_bytes(dir / "a");
  const auto tb = tree_bytes(dir / "b");
  if (ta.size() != tb.size()) {
    note("runs produced different file sets (" + std::to_string(ta.size()) +
         " vs " + std::to_string(tb.size()) + ")");
    return false;
  }
  for (const auto& [rel, bytes] : ta) {
    const auto it = tb.find(rel);
    if (it == tb.end()) {
      note("file " + rel + " missing from the second run");
      return false;
    }
    if (it->second != bytes) {
      note("file " + rel + " differs between runs");
      return false;
    }
  }
  note(std::to_string(ta.size()) + " files byte-identical across two CLI runs");
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--nqsdyn" && i + 1 < argc) {
      g_nqsdyn = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::istringstream is(argv[++i]);
      std::string tok;
      while (std::getline(is, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance_tests [--nqsdyn <path>] [--only 1,2]\n";
      return 2;
    }
  }

  g_scratch = fs::temp_directory_path() / "nqs-acceptance";
  std::error_code ec;
  fs::remove_all(g_scratch, ec);
  fs::create_directories(g_scratch);
  std::cout << "artifacts under " << g_scratch.string() << "\n";

  struct Gate {
    int id;
    const char* label;
    bool (*fn)();
  };
  const std::vector<Gate> gates = {
      {1, "analytic gradients match finite differences", gate_gradients},
      {2, "states are normalized at 4, 9 and 16 sites", gate_norms},
      {3, "step operators hold their dense error orders", gate_propagator_order},
      {4, "fourth-order expansion weights are (1, 1, 1/2, 1/6)",
       gate_lambda_weights},
      {5, "single spin tracks cos(2gt)", gate_single_spin},
      {6, "3x3 sudden quench stays on the dense oracle", gate_sudden_quench},
      {7, "fast ramps match oracle injected energy within 10%",
       gate_fast_ramp_energy},
      {8, "residual orders, noise floor and floor shift", gate_residual_orders},
      {9, "residual spread collapses as 1/sqrt(samples)", gate_noise_collapse},
      {10, "spectrum statistics separate the two families", gate_qgt_spectra},
      {11, "injected energy decreases with ramp duration",
       gate_ramp_monotonicity},
      {12, "same seed and workers give byte-identical runs",
       gate_reproducibility},
  };

  int failures = 0;
  int ran = 0;
  for (const auto& gate : gates) {
    if (!only.empty() && only.count(gate.id) == 0) continue;
    ++ran;
    std::cout << "[ run] gate " << gate.id << ": " << gate.label << std::endl;
    const auto start = std::chrono::steady_clock::now();
    bool pass = false;
    std::string error;
    try {
      pass = gate.fn();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (!error.empty()) note("exception: " + error);
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " gate " << gate.id << ": "
              << gate.label << " (" << fmt(secs) << "s)" << std::endl;
    if (!pass) ++failures;
  }

  std::cout << (ran - failures) << "/" << ran << " gates passed\n";
  return failures == 0 ? 0 : 1;
}
