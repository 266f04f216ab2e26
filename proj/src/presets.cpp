#include "nqs/experiments.hpp"

#include "nqs/lattice.hpp"

namespace nqs {

// Built-in experiment presets. Each returns a fully-populated plan that runs
// as-is; --set overrides tweak individual fields. Field-strength units: the
// square-lattice critical point sits at g = k_gc_square (J = 1), and time
// steps are stored in absolute time, chosen so g dt lands near 0.01 at the
// relevant field scale.

namespace {

ExperimentPlan kz_base(int rows, int cols, int hidden, int n_opt, double eta,
                       int n_samples) {
  ExperimentPlan p;
  p.kind = "kz_scan";
  p.lattice.rows = rows;
  p.lattice.cols = cols;
  p.ansatz.architecture = "gru";
  p.ansatz.hidden = hidden;
  p.initial_state.kind = "ground_state_vmc";
  p.initial_state.vmc.n_samples = n_samples;
  p.schedule.protocol = "linear_ramp";
  p.schedule.J = 1.0;
  p.schedule.g_over_gc = 1.0;
  p.method = "heun";
  p.step.n_opt_steps = n_opt;
  p.step.eta = eta;
  p.step.n_samples = n_samples;
  p.step.dt.kind = "fixed";
  p.step.dt.value = 0.01 / k_gc_square;
  return p;
}

ExperimentPlan sudden_base(int rows, int cols, int hidden, double g_over_gc,
                           bool symmetrized, int n_opt, double eta,
                           int n_samples) {
  ExperimentPlan p;
  p.kind = "sudden_quench";
  p.lattice.rows = rows;
  p.lattice.cols = cols;
  p.ansatz.architecture = "gru";
  p.ansatz.hidden = hidden;
  p.ansatz.symmetrized = symmetrized;
  p.initial_state.kind = "paramagnetic_product";
  p.schedule.protocol = "sudden";
  p.schedule.J = 1.0;
  p.schedule.g_over_gc = g_over_gc;
  p.method = "heun";
  p.step.n_opt_steps = n_opt;
  p.step.eta = eta;
  p.step.n_samples = n_samples;
  p.step.dt.kind = "fixed";
  p.step.dt.value = 0.01 / (g_over_gc * k_gc_square);
  p.time.gt_final = 2.0;
  return p;
}

ExperimentPlan qgt_base(const std::string& arch, int width) {
  ExperimentPlan p;
  p.kind = "qgt_spectra";
  p.lattice.rows = 4;
  p.lattice.cols = 4;
  p.ansatz.architecture = arch;
  if (arch == "rbm") p.ansatz.alpha = width;
  else p.ansatz.hidden = width;
  p.ansatz.init_scale = arch == "rbm" ? 0.01 : 0.02;
  p.initial_state.kind = "ground_state_vmc";
  p.initial_state.vmc.n_iters = 500;
  p.initial_state.vmc.eta = 0.01;
  p.initial_state.vmc.n_samples = 1000;
  p.schedule.J = 1.0;
  p.schedule.g_over_gc = 1.0;  // grid entries supply the actual field
  p.qgt.g_over_gc_grid = {0.5, 1.0, 2.0};
  return p;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig1b-rbm", "fig1d-gru", "fig2-3x3", "fig2-4x4", "fig2-5x5",
          "fig2-6x6",  "fig2-8x8",  "fig3",     "fig4-g2",  "fig4-g1",
          "fig4-g01",  "fig5a",     "fig5b",    "fig6"};
}

ExperimentPlan preset_plan(const std::string& name) {
  ExperimentPlan p;
  if (name == "fig1b-rbm") {
    p = qgt_base("rbm", 2);
  } else if (name == "fig1d-gru") {
    p = qgt_base("gru", 10);
  } else if (name == "fig2-3x3") {
    p = kz_base(3, 3, 8, 200, 0.01, 1000);
  } else if (name == "fig2-4x4") {
    p = kz_base(4, 4, 8, 200, 0.01, 500);
  } else if (name == "fig2-5x5") {
    p = kz_base(5, 5, 8, 100, 0.01, 200);
  } else if (name == "fig2-6x6") {
    p = kz_base(6, 6, 8, 100, 0.005, 200);
  } else if (name == "fig2-8x8") {
    p = kz_base(8, 8, 8, 50, 0.006, 200);
  } else if (name == "fig3") {
    p = kz_base(4, 4, 10, 100, 0.01, 1000);
    // Shrinking step: g dt runs from 0.02 down to 0.005 at the critical scale.
    p.step.dt.kind = "linear";
    p.step.dt.start = 0.02 / k_gc_square;
    p.step.dt.end = 0.005 / k_gc_square;
  } else if (name == "fig4-g2") {
    p = sudden_base(3, 3, 10, 2.0, true, 100, 0.01, 1000);
  } else if (name == "fig4-g1") {
    p = sudden_base(3, 3, 10, 1.0, true, 100, 0.01, 1000);
  } else if (name == "fig4-g01") {
    p = sudden_base(3, 3, 10, 0.1, false, 100, 0.01, 1000);
  } else if (name == "fig5a") {
    p = sudden_base(3, 3, 8, 2.0, false, 100, 0.01, 1000);
    p.kind = "dt_scan";
    p.time = TimeSpec{};  // the scan window is counted in steps, not time
  } else if (name == "fig5b") {
    p = sudden_base(3, 3, 8, 2.0, false, 100, 0.01, 1000);
    p.kind = "noise_scan";
    p.time = TimeSpec{};
    p.noise.window = 20;
  } else if (name == "fig6") {
    p = sudden_base(4, 4, 10, 1.0, true, 100, 0.01, 500);
  } else {
    throw ConfigError("unknown preset \"" + name + "\"");
  }
  p.name = name;
  return p;
}

}  // namespace nqs
