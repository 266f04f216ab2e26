#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nqs/io.hpp"
#include "nqs/lattice.hpp"
#include "nqs/stepper.hpp"

namespace nqs {

// A run that started fine but could not finish (diverged optimization,
// eigensolver that never converged, ...). Maps to its own exit code.
struct RunFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Plan schema. Every run is described by one ExperimentPlan, serialized as
// JSON with strict key checking so typos fail loudly instead of silently
// falling back to defaults. Unset transverse fields are NaN until resolved.
// ---------------------------------------------------------------------------

struct LatticeSpec {
  int rows = 3;
  int cols = 3;
  std::string boundary = "open";

  int n_sites() const { return rows * cols; }
  Lattice build() const;
};

struct VmcSpec {
  int n_iters = 500;
  double eta = 0.01;
  int n_samples = 1000;
  bool sign_init = true;
  // Relative energy change between the last two windows must fall below this;
  // <= 0 disables the check.
  double plateau_tol = 0.05;
  int plateau_window = 50;
};

struct AnsatzSpec {
  std::string architecture = "gru";  // "gru" | "rbm"
  int hidden = 10;                   // GRU memory size d_h
  int alpha = 2;                     // RBM hidden units per site
  bool symmetrized = false;
  std::vector<std::string> symmetries{"z2", "reflect_x", "reflect_y"};
  double init_scale = 0.02;
};

struct InitialStateSpec {
  // "paramagnetic_product": uniform positive amplitudes (zero parameters).
  // "ground_state_vmc": energy minimization at the schedule's t = 0 couplings.
  // "z_basis_product": all spins pinned to `pinned_bit`.
  // "checkpoint": parameters loaded from `checkpoint`.
  std::string kind = "paramagnetic_product";
  int pinned_bit = 0;
  // Pinning logit for z_basis_product. Moderate values matter: at 3.0 the
  // stray-spin probability is 2.5e-3 (sz within 5e-3 of 1) while the softmax
  // stays off saturation, so the state remains trainable when evolved. Large
  // values freeze the optimizer's gradients.
  double pinned_bias = 3.0;
  std::string checkpoint;
  VmcSpec vmc;
};

struct ScheduleSpec {
  std::string protocol = "sudden";  // "constant" | "sudden" | "linear_ramp"
  double J = 1.0;
  // Exactly one of these two sets the field; g_over_gc scales the lattice's
  // critical value.
  double g_over_gc = std::numeric_limits<double>::quiet_NaN();
  double g = std::numeric_limits<double>::quiet_NaN();
  double tau_q = 0.0;  // ramp duration; kz scans override it per grid point

  double critical_field(const Lattice& lat) const;
  double resolved_g(const Lattice& lat) const;
  QuenchSchedule resolve(const Lattice& lat) const;
};

struct DtSpec {
  std::string kind = "fixed";  // "fixed" | "linear"
  double value = 0.0;
  double start = 0.0;
  double end = 0.0;

  DtPolicy policy() const;
};

struct StepSpec {
  int n_opt_steps = 100;
  double eta = 0.01;
  int n_samples = 1000;
  DtSpec dt;
  AdamConfig adam;

  StepConfig config() const;
};

struct TimeSpec {
  double t0 = 0.0;
  double t_final = 0.0;
  // Convenience alternative: final time in units of 1/g (g from the schedule's
  // largest field). Used when > 0 and t_final is unset.
  double gt_final = 0.0;
};

struct OutputSpec {
  int checkpoint_stride = 0;
  bool measure_each_step = true;
  // Dense reference evolution alongside the run: "auto" turns it on when the
  // state vector fits comfortably (<= 16 sites), "on" forces it (<= 20 sites,
  // else a cap error), "off" disables it.
  std::string oracle = "auto";
  bool track_fidelity = true;
  // Ground-state reference E0(t) per measured point (needs <= 20 sites).
  bool e0_each_step = true;
  // Observable estimator: "sampled" uses the per-step sample batch,
  // "enumerated" evaluates exact Born-weighted sums over every configuration
  // (<= 20 sites), "auto" picks enumerated when <= 16 sites.
  std::string observables = "auto";
};

struct KzSpec {
  std::vector<double> tau_q_grid{0.03, 0.1, 0.31, 1.0, 3.1};  // in units of 1/J
  double fit_max_jtq = 1.0;  // power-law fit only uses J*tau_q <= this
  int min_time_steps = 5;
};

struct DtScanSpec {
  std::vector<std::string> methods{"euler", "implicit-midpoint", "heun"};
  std::vector<double> g_dt_grid{0.0025, 0.005, 0.01, 0.02, 0.04, 0.08, 0.16};
  int window = 10;        // steps per point; the error statistic averages these
  int samples_scale = 4;  // N_s multiplier for the floor re-run
  int floor_points = 2;   // smallest-dt points defining the floor level
  // |log-log slope| between the two smallest points below this means the
  // curve has flattened into the sampling-noise floor.
  double floor_slope_cut = 1.0;
  // Points enter the order fit only when above floor_level * this factor.
  double fit_floor_factor = 30.0;
};

struct NoiseScanSpec {
  std::vector<int> n_samples_grid{250, 500, 1000};
  int repetitions = 12;
  int window = 10;
};

struct QgtSpec {
  std::vector<double> g_over_gc_grid{0.5, 1.0, 2.0};
  // "auto" picks the spectrum mode by architecture: real-parameter networks
  // diagnose the imaginary part (the operator their dynamics inverts),
  // holomorphic ones the full Hermitian matrix.
  std::string mode = "auto";
};

struct ExperimentPlan {
  // "ground_state" | "evolve" | "sudden_quench" | "kz_single" | "kz_scan" |
  // "dt_scan" | "noise_scan" | "qgt_spectra"
  std::string kind = "evolve";
  std::string name;
  LatticeSpec lattice;
  AnsatzSpec ansatz;
  InitialStateSpec initial_state;
  ScheduleSpec schedule;
  std::string method = "heun";
  StepSpec step;
  TimeSpec time;
  OutputSpec output;
  KzSpec kz;
  DtScanSpec dt_scan;
  NoiseScanSpec noise;
  QgtSpec qgt;
  std::uint64_t seed = 1;
  int workers = 1;
};

nlohmann::json plan_to_json(const ExperimentPlan& plan);
// Strict parse: unknown keys and type mismatches raise ConfigError.
ExperimentPlan plan_from_json(const nlohmann::json& j);
// Applies one "dotted.path=value" assignment to a plan's JSON form. The value
// is parsed as JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& plan, const std::string& assignment);
// Semantic checks beyond parsing; raises ConfigError or CapError.
void validate_plan(const ExperimentPlan& plan);
// The plan echoed back with derived quantities (resolved fields, step counts,
// parameter counts) attached under "resolved".
nlohmann::json resolved_config(const ExperimentPlan& plan);

struct RunResult {
  std::filesystem::path dir;
  nlohmann::json summary;
};

// Validates, prepares the output directory (plan.json, resolved_config.json,
// version.txt), dispatches on plan.kind, and writes summary.json. Artifact
// bytes depend only on the plan, so equal plans give equal directories.
RunResult run_plan(const ExperimentPlan& plan, const std::filesystem::path& out_dir);

// Named ready-made plans covering the documented production runs.
std::vector<std::string> preset_names();
ExperimentPlan preset_plan(const std::string& name);

// Least-squares line fit, used for the power-law and order diagnostics.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  int n = 0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace nqs
