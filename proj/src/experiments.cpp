#include "nqs/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <type_traits>
#include <utility>

#include "nqs/ansatz.hpp"
#include "nqs/exact.hpp"
#include "nqs/local.hpp"
#include "nqs/observables.hpp"
#include "nqs/rbm.hpp"
#include "nqs/sr.hpp"
#include "nqs/symmetry.hpp"

namespace nqs {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Spec resolution
// ---------------------------------------------------------------------------

Lattice LatticeSpec::build() const {
  Boundary b;
  if (boundary == "open") b = Boundary::open;
  else if (boundary == "periodic") b = Boundary::periodic;
  else throw ConfigError("lattice.boundary must be \"open\" or \"periodic\", got \"" +
                         boundary + "\"");
  return build_lattice(rows, cols, b);
}

double ScheduleSpec::critical_field(const Lattice& lat) const {
  return (lat.rows == 1 || lat.cols == 1) ? k_gc_chain : k_gc_square;
}

double ScheduleSpec::resolved_g(const Lattice& lat) const {
  const bool has_ratio = std::isfinite(g_over_gc);
  const bool has_abs = std::isfinite(g);
  if (has_ratio == has_abs)
    throw ConfigError("set exactly one of schedule.g and schedule.g_over_gc");
  return has_abs ? g : g_over_gc * critical_field(lat);
}

QuenchSchedule ScheduleSpec::resolve(const Lattice& lat) const {
  const double field = resolved_g(lat);
  if (protocol == "constant") return QuenchSchedule::constant(J, field);
  if (protocol == "sudden") return QuenchSchedule::sudden(J, field);
  if (protocol == "linear_ramp") return QuenchSchedule::linear_ramp(J, field, tau_q);
  throw ConfigError("schedule.protocol must be \"constant\", \"sudden\" or "
                    "\"linear_ramp\", got \"" + protocol + "\"");
}

DtPolicy DtSpec::policy() const {
  if (kind == "fixed") return DtPolicy::fixed_dt(value);
  if (kind == "linear") return DtPolicy::linear(start, end);
  throw ConfigError("step.dt.kind must be \"fixed\" or \"linear\", got \"" + kind + "\"");
}

StepConfig StepSpec::config() const {
  StepConfig cfg;
  cfg.n_opt_steps = n_opt_steps;
  cfg.eta = eta;
  cfg.n_samples = n_samples;
  cfg.adam = adam;
  return cfg;
}

// ---------------------------------------------------------------------------
// JSON round trip
// ---------------------------------------------------------------------------

namespace {

void require_keys(const json& j, const char* where,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError(std::string(where) + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
  }
}

template <class T>
void read_field(const json& j, const char* where, const char* key, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

json lattice_to_json(const LatticeSpec& s) {
  return {{"rows", s.rows}, {"cols", s.cols}, {"boundary", s.boundary}};
}

json vmc_to_json(const VmcSpec& s) {
  return {{"n_iters", s.n_iters},
          {"eta", s.eta},
          {"n_samples", s.n_samples},
          {"sign_init", s.sign_init},
          {"plateau_tol", s.plateau_tol},
          {"plateau_window", s.plateau_window}};
}

VmcSpec vmc_from_json(const json& j, const char* where) {
  VmcSpec s;
  require_keys(j, where,
               {"n_iters", "eta", "n_samples", "sign_init", "plateau_tol",
                "plateau_window"});
  read_field(j, where, "n_iters", s.n_iters);
  read_field(j, where, "eta", s.eta);
  read_field(j, where, "n_samples", s.n_samples);
  read_field(j, where, "sign_init", s.sign_init);
  read_field(j, where, "plateau_tol", s.plateau_tol);
  read_field(j, where, "plateau_window", s.plateau_window);
  return s;
}

}  // namespace

json plan_to_json(const ExperimentPlan& p) {
  json j;
  j["kind"] = p.kind;
  j["name"] = p.name;
  j["lattice"] = lattice_to_json(p.lattice);
  j["ansatz"] = {{"architecture", p.ansatz.architecture},
                 {"hidden", p.ansatz.hidden},
                 {"alpha", p.ansatz.alpha},
                 {"symmetrized", p.ansatz.symmetrized},
                 {"symmetries", p.ansatz.symmetries},
                 {"init_scale", p.ansatz.init_scale}};
  j["initial_state"] = {{"kind", p.initial_state.kind},
                        {"pinned_bit", p.initial_state.pinned_bit},
                        {"pinned_bias", p.initial_state.pinned_bias},
                        {"checkpoint", p.initial_state.checkpoint},
                        {"vmc", vmc_to_json(p.initial_state.vmc)}};
  json sched = {{"protocol", p.schedule.protocol},
                {"J", p.schedule.J},
                {"tau_q", p.schedule.tau_q}};
  if (std::isfinite(p.schedule.g_over_gc)) sched["g_over_gc"] = p.schedule.g_over_gc;
  if (std::isfinite(p.schedule.g)) sched["g"] = p.schedule.g;
  j["schedule"] = std::move(sched);
  j["method"] = p.method;
  j["step"] = {{"n_opt_steps", p.step.n_opt_steps},
               {"eta", p.step.eta},
               {"n_samples", p.step.n_samples},
               {"dt",
                {{"kind", p.step.dt.kind},
                 {"value", p.step.dt.value},
                 {"start", p.step.dt.start},
                 {"end", p.step.dt.end}}},
               {"adam",
                {{"beta1", p.step.adam.beta1},
                 {"beta2", p.step.adam.beta2},
                 {"eps", p.step.adam.eps}}}};
  j["time"] = {{"t0", p.time.t0},
               {"t_final", p.time.t_final},
               {"gt_final", p.time.gt_final}};
  j["output"] = {{"checkpoint_stride", p.output.checkpoint_stride},
                 {"measure_each_step", p.output.measure_each_step},
                 {"oracle", p.output.oracle},
                 {"track_fidelity", p.output.track_fidelity},
                 {"e0_each_step", p.output.e0_each_step},
                 {"observables", p.output.observables}};
  j["kz"] = {{"tau_q_grid", p.kz.tau_q_grid},
             {"fit_max_jtq", p.kz.fit_max_jtq},
             {"min_time_steps", p.kz.min_time_steps}};
  j["dt_scan"] = {{"methods", p.dt_scan.methods},
                  {"g_dt_grid", p.dt_scan.g_dt_grid},
                  {"window", p.dt_scan.window},
                  {"samples_scale", p.dt_scan.samples_scale},
                  {"floor_points", p.dt_scan.floor_points},
                  {"floor_slope_cut", p.dt_scan.floor_slope_cut},
                  {"fit_floor_factor", p.dt_scan.fit_floor_factor}};
  j["noise"] = {{"n_samples_grid", p.noise.n_samples_grid},
                {"repetitions", p.noise.repetitions},
                {"window", p.noise.window}};
  j["qgt"] = {{"g_over_gc_grid", p.qgt.g_over_gc_grid}, {"mode", p.qgt.mode}};
  j["seed"] = p.seed;
  j["workers"] = p.workers;
  return j;
}

ExperimentPlan plan_from_json(const json& j) {
  ExperimentPlan p;
  require_keys(j, "plan",
               {"kind", "name", "lattice", "ansatz", "initial_state", "schedule",
                "method", "step", "time", "output", "kz", "dt_scan", "noise",
                "qgt", "seed", "workers"});
  read_field(j, "plan", "kind", p.kind);
  read_field(j, "plan", "name", p.name);
  if (j.contains("lattice")) {
    const json& l = j.at("lattice");
    require_keys(l, "lattice", {"rows", "cols", "boundary"});
    read_field(l, "lattice", "rows", p.lattice.rows);
    read_field(l, "lattice", "cols", p.lattice.cols);
    read_field(l, "lattice", "boundary", p.lattice.boundary);
  }
  if (j.contains("ansatz")) {
    const json& a = j.at("ansatz");
    require_keys(a, "ansatz",
                 {"architecture", "hidden", "alpha", "symmetrized", "symmetries",
                  "init_scale"});
    read_field(a, "ansatz", "architecture", p.ansatz.architecture);
    read_field(a, "ansatz", "hidden", p.ansatz.hidden);
    read_field(a, "ansatz", "alpha", p.ansatz.alpha);
    read_field(a, "ansatz", "symmetrized", p.ansatz.symmetrized);
    read_field(a, "ansatz", "symmetries", p.ansatz.symmetries);
    read_field(a, "ansatz", "init_scale", p.ansatz.init_scale);
  }
  if (j.contains("initial_state")) {
    const json& s = j.at("initial_state");
    require_keys(s, "initial_state",
                 {"kind", "pinned_bit", "pinned_bias", "checkpoint", "vmc"});
    read_field(s, "initial_state", "kind", p.initial_state.kind);
    read_field(s, "initial_state", "pinned_bit", p.initial_state.pinned_bit);
    read_field(s, "initial_state", "pinned_bias", p.initial_state.pinned_bias);
    read_field(s, "initial_state", "checkpoint", p.initial_state.checkpoint);
    if (s.contains("vmc"))
      p.initial_state.vmc = vmc_from_json(s.at("vmc"), "initial_state.vmc");
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    require_keys(s, "schedule", {"protocol", "J", "g_over_gc", "g", "tau_q"});
    read_field(s, "schedule", "protocol", p.schedule.protocol);
    read_field(s, "schedule", "J", p.schedule.J);
    read_field(s, "schedule", "g_over_gc", p.schedule.g_over_gc);
    read_field(s, "schedule", "g", p.schedule.g);
    read_field(s, "schedule", "tau_q", p.schedule.tau_q);
  }
  read_field(j, "plan", "method", p.method);
  if (j.contains("step")) {
    const json& s = j.at("step");
    require_keys(s, "step", {"n_opt_steps", "eta", "n_samples", "dt", "adam"});
    read_field(s, "step", "n_opt_steps", p.step.n_opt_steps);
    read_field(s, "step", "eta", p.step.eta);
    read_field(s, "step", "n_samples", p.step.n_samples);
    if (s.contains("dt")) {
      const json& d = s.at("dt");
      require_keys(d, "step.dt", {"kind", "value", "start", "end"});
      read_field(d, "step.dt", "kind", p.step.dt.kind);
      read_field(d, "step.dt", "value", p.step.dt.value);
      read_field(d, "step.dt", "start", p.step.dt.start);
      read_field(d, "step.dt", "end", p.step.dt.end);
    }
    if (s.contains("adam")) {
      const json& a = s.at("adam");
      require_keys(a, "step.adam", {"beta1", "beta2", "eps"});
      read_field(a, "step.adam", "beta1", p.step.adam.beta1);
      read_field(a, "step.adam", "beta2", p.step.adam.beta2);
      read_field(a, "step.adam", "eps", p.step.adam.eps);
    }
  }
  if (j.contains("time")) {
    const json& t = j.at("time");
    require_keys(t, "time", {"t0", "t_final", "gt_final"});
    read_field(t, "time", "t0", p.time.t0);
    read_field(t, "time", "t_final", p.time.t_final);
    read_field(t, "time", "gt_final", p.time.gt_final);
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    require_keys(o, "output",
                 {"checkpoint_stride", "measure_each_step", "oracle",
                  "track_fidelity", "e0_each_step", "observables"});
    read_field(o, "output", "checkpoint_stride", p.output.checkpoint_stride);
    read_field(o, "output", "measure_each_step", p.output.measure_each_step);
    read_field(o, "output", "oracle", p.output.oracle);
    read_field(o, "output", "track_fidelity", p.output.track_fidelity);
    read_field(o, "output", "e0_each_step", p.output.e0_each_step);
    read_field(o, "output", "observables", p.output.observables);
  }
  if (j.contains("kz")) {
    const json& k = j.at("kz");
    require_keys(k, "kz", {"tau_q_grid", "fit_max_jtq", "min_time_steps"});
    read_field(k, "kz", "tau_q_grid", p.kz.tau_q_grid);
    read_field(k, "kz", "fit_max_jtq", p.kz.fit_max_jtq);
    read_field(k, "kz", "min_time_steps", p.kz.min_time_steps);
  }
  if (j.contains("dt_scan")) {
    const json& d = j.at("dt_scan");
    require_keys(d, "dt_scan",
                 {"methods", "g_dt_grid", "window", "samples_scale",
                  "floor_points", "floor_slope_cut", "fit_floor_factor"});
    read_field(d, "dt_scan", "methods", p.dt_scan.methods);
    read_field(d, "dt_scan", "g_dt_grid", p.dt_scan.g_dt_grid);
    read_field(d, "dt_scan", "window", p.dt_scan.window);
    read_field(d, "dt_scan", "samples_scale", p.dt_scan.samples_scale);
    read_field(d, "dt_scan", "floor_points", p.dt_scan.floor_points);
    read_field(d, "dt_scan", "floor_slope_cut", p.dt_scan.floor_slope_cut);
    read_field(d, "dt_scan", "fit_floor_factor", p.dt_scan.fit_floor_factor);
  }
  if (j.contains("noise")) {
    const json& n = j.at("noise");
    require_keys(n, "noise", {"n_samples_grid", "repetitions", "window"});
    read_field(n, "noise", "n_samples_grid", p.noise.n_samples_grid);
    read_field(n, "noise", "repetitions", p.noise.repetitions);
    read_field(n, "noise", "window", p.noise.window);
  }
  if (j.contains("qgt")) {
    const json& q = j.at("qgt");
    require_keys(q, "qgt", {"g_over_gc_grid", "mode"});
    read_field(q, "qgt", "g_over_gc_grid", p.qgt.g_over_gc_grid);
    read_field(q, "qgt", "mode", p.qgt.mode);
  }
  read_field(j, "plan", "seed", p.seed);
  read_field(j, "plan", "workers", p.workers);
  return p;
}

void apply_override(json& plan, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like path.to.key=value, got \"" +
                      assignment + "\"");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  std::string pointer;
  for (char c : path) pointer += (c == '.') ? '/' : c;
  if (pointer.find("//") != std::string::npos || pointer.back() == '/')
    throw ConfigError("override path has an empty segment: \"" + path + "\"");
  json parsed = json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;
  try {
    plan[json::json_pointer("/" + pointer)] = std::move(parsed);
  } catch (const json::exception& e) {
    throw ConfigError("cannot apply override \"" + assignment + "\": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& plan_kinds() {
  static const std::vector<std::string> kinds = {
      "ground_state", "evolve",     "sudden_quench", "kz_single",
      "kz_scan",      "dt_scan",    "noise_scan",    "qgt_spectra"};
  return kinds;
}

bool known_method(const std::string& name) {
  for (const auto& m : tableau_names())
    if (m == name) return true;
  return false;
}

bool needs_time_window(const std::string& kind) {
  return kind == "evolve" || kind == "sudden_quench";
}

bool needs_dt(const std::string& kind) {
  return kind == "evolve" || kind == "sudden_quench" || kind == "kz_single" ||
         kind == "kz_scan" || kind == "noise_scan";
}

bool needs_field(const std::string& kind) {
  return kind != "qgt_spectra";
}

bool oracle_on(const OutputSpec& out, int n_sites) {
  if (out.oracle == "off") return false;
  if (out.oracle == "on") return true;
  return n_sites <= 16;
}

void validate_vmc(const VmcSpec& v, const char* where) {
  if (v.n_iters < 1) throw ConfigError(std::string(where) + ".n_iters must be >= 1");
  if (!(v.eta > 0.0)) throw ConfigError(std::string(where) + ".eta must be > 0");
  if (v.n_samples < 1)
    throw ConfigError(std::string(where) + ".n_samples must be >= 1");
  if (v.plateau_window < 1)
    throw ConfigError(std::string(where) + ".plateau_window must be >= 1");
}

}  // namespace

void validate_plan(const ExperimentPlan& p) {
  const auto& kinds = plan_kinds();
  if (std::find(kinds.begin(), kinds.end(), p.kind) == kinds.end())
    throw ConfigError("unknown experiment kind \"" + p.kind + "\"");

  if (p.lattice.rows < 1 || p.lattice.cols < 1)
    throw ConfigError("lattice.rows and lattice.cols must be >= 1");
  const int n = p.lattice.n_sites();
  if (n > 64)
    throw CapError("lattice has " + std::to_string(n) +
                   " sites; the configuration encoding caps at 64");
  const Lattice lat = p.lattice.build();  // checks boundary string

  if (p.ansatz.architecture != "gru" && p.ansatz.architecture != "rbm")
    throw ConfigError("ansatz.architecture must be \"gru\" or \"rbm\", got \"" +
                      p.ansatz.architecture + "\"");
  if (p.ansatz.hidden < 1) throw ConfigError("ansatz.hidden must be >= 1");
  if (p.ansatz.alpha < 1) throw ConfigError("ansatz.alpha must be >= 1");
  if (!(p.ansatz.init_scale > 0.0))
    throw ConfigError("ansatz.init_scale must be > 0");
  if (p.ansatz.symmetrized) {
    if (p.ansatz.architecture != "gru")
      throw ConfigError("symmetrization wraps the gru architecture only");
    if (p.ansatz.symmetries.empty())
      throw ConfigError("ansatz.symmetries must list at least one generator");
    build_symmetry_group(lat, p.ansatz.symmetries);  // checks generator names
  }
  if (p.ansatz.architecture == "rbm" && n > k_dense_site_cap)
    throw CapError("rbm normalization enumerates the full basis; capped at " +
                   std::to_string(k_dense_site_cap) + " sites");

  const auto& ik = p.initial_state.kind;
  if (ik != "paramagnetic_product" && ik != "ground_state_vmc" &&
      ik != "z_basis_product" && ik != "checkpoint")
    throw ConfigError("initial_state.kind must be one of paramagnetic_product, "
                      "ground_state_vmc, z_basis_product, checkpoint");
  if (ik == "checkpoint" && p.initial_state.checkpoint.empty())
    throw ConfigError("initial_state.checkpoint path is empty");
  if (ik == "z_basis_product") {
    if (p.initial_state.pinned_bit != 0 && p.initial_state.pinned_bit != 1)
      throw ConfigError("initial_state.pinned_bit must be 0 or 1");
    if (!(p.initial_state.pinned_bias > 0.0))
      throw ConfigError("initial_state.pinned_bias must be > 0");
    if (p.ansatz.architecture != "gru")
      throw ConfigError("z_basis_product initial state needs the gru architecture");
  }
  if (ik == "ground_state_vmc" || p.kind == "ground_state" ||
      p.kind == "qgt_spectra")
    validate_vmc(p.initial_state.vmc, "initial_state.vmc");

  if (!std::isfinite(p.schedule.J))
    throw ConfigError("schedule.J must be finite");
  if (p.schedule.protocol != "constant" && p.schedule.protocol != "sudden" &&
      p.schedule.protocol != "linear_ramp")
    throw ConfigError("schedule.protocol must be \"constant\", \"sudden\" or "
                      "\"linear_ramp\", got \"" + p.schedule.protocol + "\"");
  if (needs_field(p.kind)) p.schedule.resolved_g(lat);  // throws when ambiguous
  if (p.kind == "sudden_quench" && p.schedule.protocol != "sudden")
    throw ConfigError("sudden_quench runs need schedule.protocol = \"sudden\"");
  if (p.kind == "kz_single" || p.kind == "kz_scan") {
    if (p.schedule.protocol != "linear_ramp")
      throw ConfigError("kz runs need schedule.protocol = \"linear_ramp\"");
    if (!p.output.measure_each_step)
      throw ConfigError("kz runs need output.measure_each_step: the observable "
                        "of interest is the terminal energy");
  }
  if (p.kind == "kz_single" && !(p.schedule.tau_q > 0.0))
    throw ConfigError("kz_single needs schedule.tau_q > 0");
  if (p.kind == "evolve" && p.schedule.protocol == "linear_ramp" &&
      !(p.schedule.tau_q > 0.0))
    throw ConfigError("linear_ramp schedules need schedule.tau_q > 0");

  if (!known_method(p.method))
    throw ConfigError("unknown integration method \"" + p.method + "\"");

  if (needs_dt(p.kind) || p.kind == "dt_scan") {
    try {
      p.step.config().validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (needs_dt(p.kind)) {
    try {
      p.step.dt.policy().validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  if (needs_time_window(p.kind)) {
    const bool has_tf = p.time.t_final > p.time.t0;
    const bool has_gtf = p.time.gt_final > 0.0;
    if (!has_tf && !has_gtf)
      throw ConfigError("set time.t_final (> time.t0) or time.gt_final (> 0)");
    if (has_gtf) {
      const double scale = p.schedule.resolve(lat).g_scale();
      if (!(scale > 0.0))
        throw ConfigError("time.gt_final needs a schedule with a nonzero field");
    }
  }

  if (p.output.oracle != "auto" && p.output.oracle != "on" &&
      p.output.oracle != "off")
    throw ConfigError("output.oracle must be \"auto\", \"on\" or \"off\"");
  if (p.output.oracle == "on" && n > k_dense_site_cap)
    throw CapError("exact reference requested for " + std::to_string(n) +
                   " sites; dense states cap at " +
                   std::to_string(k_dense_site_cap));
  if (p.output.observables != "auto" && p.output.observables != "sampled" &&
      p.output.observables != "enumerated")
    throw ConfigError("output.observables must be \"auto\", \"sampled\" or "
                      "\"enumerated\"");
  if (p.output.observables == "enumerated" && n > k_dense_site_cap)
    throw CapError("enumerated observables requested for " + std::to_string(n) +
                   " sites; enumeration caps at " +
                   std::to_string(k_dense_site_cap));
  if (p.output.checkpoint_stride < 0)
    throw ConfigError("output.checkpoint_stride must be >= 0");

  if (p.kind == "kz_scan") {
    if (p.kz.tau_q_grid.empty()) throw ConfigError("kz.tau_q_grid is empty");
    for (double tq : p.kz.tau_q_grid)
      if (!(tq > 0.0)) throw ConfigError("kz.tau_q_grid entries must be > 0");
    if (!(p.kz.fit_max_jtq > 0.0)) throw ConfigError("kz.fit_max_jtq must be > 0");
  }
  if (p.kind == "kz_single" || p.kind == "kz_scan") {
    if (p.kz.min_time_steps < 1)
      throw ConfigError("kz.min_time_steps must be >= 1");
  }

  if (p.kind == "dt_scan") {
    if (p.dt_scan.methods.empty()) throw ConfigError("dt_scan.methods is empty");
    for (const auto& m : p.dt_scan.methods)
      if (!known_method(m))
        throw ConfigError("dt_scan.methods has unknown method \"" + m + "\"");
    if (p.dt_scan.g_dt_grid.empty()) throw ConfigError("dt_scan.g_dt_grid is empty");
    for (double v : p.dt_scan.g_dt_grid)
      if (!(v > 0.0))
        throw ConfigError("invalid time step: dt_scan.g_dt_grid entries must be > 0");
    if (p.dt_scan.window < 1) throw ConfigError("dt_scan.window must be >= 1");
    if (p.dt_scan.samples_scale < 1)
      throw ConfigError("dt_scan.samples_scale must be >= 1");
    if (p.dt_scan.floor_points < 1)
      throw ConfigError("dt_scan.floor_points must be >= 1");
    const double scale = p.schedule.resolve(lat).g_scale();
    if (!(scale > 0.0))
      throw ConfigError("dt_scan needs a schedule with a nonzero field to fix "
                        "the time-step units");
  }

  if (p.kind == "noise_scan") {
    if (p.noise.n_samples_grid.empty())
      throw ConfigError("noise.n_samples_grid is empty");
    for (int v : p.noise.n_samples_grid)
      if (v < 1) throw ConfigError("noise.n_samples_grid entries must be >= 1");
    if (p.noise.repetitions < 2)
      throw ConfigError("noise scan needs at least 2 repetitions to estimate a "
                        "spread");
    if (p.noise.window < 1) throw ConfigError("noise.window must be >= 1");
  }

  if (p.kind == "qgt_spectra") {
    if (p.qgt.g_over_gc_grid.empty())
      throw ConfigError("qgt.g_over_gc_grid is empty");
    for (double v : p.qgt.g_over_gc_grid)
      if (!(v > 0.0)) throw ConfigError("qgt.g_over_gc_grid entries must be > 0");
    if (p.qgt.mode != "auto" && p.qgt.mode != "full" &&
        p.qgt.mode != "imaginary_part")
      throw ConfigError("qgt.mode must be \"auto\", \"full\" or "
                        "\"imaginary_part\"");
  }

  if (p.workers < 1) throw ConfigError("workers must be >= 1");
}

// ---------------------------------------------------------------------------
// Resolution echo
// ---------------------------------------------------------------------------

namespace {

int count_params(const ExperimentPlan& p) {
  const int n = p.lattice.n_sites();
  if (p.ansatz.architecture == "gru") return GruAnsatz(n, p.ansatz.hidden).n_params();
  return RbmAnsatz(n, p.ansatz.alpha).n_params();
}

double resolve_t_final(const ExperimentPlan& p, const QuenchSchedule& sched) {
  if (p.time.t_final > p.time.t0) return p.time.t_final;
  return p.time.t0 + p.time.gt_final / sched.g_scale();
}

}  // namespace

json resolved_config(const ExperimentPlan& p) {
  json j = plan_to_json(p);
  const Lattice lat = p.lattice.build();
  json r;
  r["version"] = k_version;
  r["n_sites"] = lat.n_sites();
  r["n_bonds"] = lat.bonds.size();
  r["critical_field"] = p.schedule.critical_field(lat);
  r["n_params"] = count_params(p);
  r["oracle_active"] = oracle_on(p.output, lat.n_sites());
  if (p.ansatz.symmetrized)
    r["group_order"] = build_symmetry_group(lat, p.ansatz.symmetries).size();
  if (needs_field(p.kind)) {
    const QuenchSchedule sched = p.schedule.resolve(lat);
    r["g_t0"] = sched.at(p.time.t0).g;
    r["g_scale"] = sched.g_scale();
    if (needs_time_window(p.kind)) {
      const double tf = resolve_t_final(p, sched);
      r["t_final"] = tf;
      if (p.step.dt.kind == "fixed" && p.step.dt.value > 0.0)
        r["n_time_steps"] =
            static_cast<long>(std::ceil((tf - p.time.t0) / p.step.dt.value - 1e-9));
    }
  }
  j["resolved"] = std::move(r);
  return j;
}

// ---------------------------------------------------------------------------
// Shared run machinery
// ---------------------------------------------------------------------------

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  LineFit f;
  f.n = static_cast<int>(std::min(x.size(), y.size()));
  if (f.n < 2) {
    f.slope = f.intercept = std::numeric_limits<double>::quiet_NaN();
    return f;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < f.n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double d = f.n * sxx - sx * sx;
  f.slope = (f.n * sxy - sx * sy) / d;
  f.intercept = (sy - f.slope * sx) / f.n;
  return f;
}

namespace {

namespace fs = std::filesystem;
using cd = std::complex<double>;

const std::vector<std::string> k_traj_cols = {
    "step",          "time",
    "dt",            "epsilon",
    "cumulative_epsilon", "distance",
    "tdagt",         "energy_re",
    "energy_im",     "energy_se",
    "sx",            "sx_se",
    "zz",            "zz_se",
    "sz",            "sz_se",
    "e0",            "injected_energy",
    "injected_energy_density", "fidelity",
    "oracle_sx",     "oracle_energy",
    "oracle_injected_density", "n_samples"};

constexpr double k_nan = std::numeric_limits<double>::quiet_NaN();

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

// Ground-state energy reference E0(J, g). Independent spins (J = 0) have the
// closed form -|g| N at any size; everything else runs the Lanczos solver and
// is memoized since constant and sudden schedules ask for one pair repeatedly.
class E0Cache {
 public:
  E0Cache(const Lattice& lat) : lat_(&lat) {}

  double at(double J, double g) {
    if (J == 0.0) return -std::abs(g) * lat_->n_sites();
    if (lat_->n_sites() > k_dense_site_cap) return k_nan;
    const auto key = std::make_pair(J, g);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    const double e0 = ground_state(*lat_, J, g).energy;
    memo_.emplace(key, e0);
    return e0;
  }

 private:
  const Lattice* lat_;
  std::map<std::pair<double, double>, double> memo_;
};

struct OracleRow {
  double fidelity = k_nan;
  double sx = k_nan;
  double energy = k_nan;
  double injected_density = k_nan;
};

// Dense reference evolution advanced in lockstep with the variational run.
class OracleTrack {
 public:
  OracleTrack(const Lattice& lat, const QuenchSchedule& sched, DenseState psi0,
              double t0)
      : lat_(&lat),
        sched_(sched),
        table_(ising_diagonal_table(lat)),
        state_(std::move(psi0)),
        t_(t0) {
    state_.amps /= state_.norm();
  }

  void advance(double t_new) {
    if (t_new > t_) state_ = exact_evolve(*lat_, sched_, state_, t_, t_new);
    t_ = t_new;
  }

  OracleRow eval(const DenseState* variational, E0Cache& e0) const {
    OracleRow row;
    const auto cpl = sched_.at(t_);
    const int n = lat_->n_sites();
    row.sx = dense_expectation(*lat_, table_, 0.0, 1.0, state_).real() / n;
    row.energy = dense_expectation(*lat_, table_, cpl.J, cpl.g, state_).real();
    row.injected_density = (row.energy - e0.at(cpl.J, cpl.g)) / n;
    if (variational != nullptr) row.fidelity = fidelity(state_, *variational);
    return row;
  }

 private:
  const Lattice* lat_;
  QuenchSchedule sched_;
  std::vector<double> table_;
  DenseState state_;
  double t_;
};

std::string cell(double v) { return format_double(v); }

void write_trajectory_csv(const fs::path& path,
                          const std::vector<TrajectoryPoint>& traj,
                          const std::vector<OracleRow>& oracle) {
  CsvWriter w(path, k_traj_cols);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& pt = traj[i];
    const OracleRow row = i < oracle.size() ? oracle[i] : OracleRow{};
    const double e0 = pt.obs.energy.real() - pt.obs.injected_energy;
    w.write_row({std::to_string(pt.step), cell(pt.time), cell(pt.dt),
                 cell(pt.epsilon), cell(pt.cumulative_epsilon),
                 cell(i == 0 ? k_nan : pt.distance_final),
                 cell(i == 0 ? k_nan : pt.tdagt), cell(pt.obs.energy.real()),
                 cell(pt.obs.energy.imag()), cell(pt.obs.energy_se),
                 cell(pt.obs.sx), cell(pt.obs.sx_se), cell(pt.obs.zz),
                 cell(pt.obs.zz_se), cell(pt.obs.sz), cell(pt.obs.sz_se),
                 cell(e0), cell(pt.obs.injected_energy),
                 cell(pt.obs.injected_energy_density), cell(row.fidelity),
                 cell(row.sx), cell(row.energy), cell(row.injected_density),
                 std::to_string(pt.obs.n_samples)});
  }
}

void write_events_jsonl(const fs::path& path,
                        const std::vector<TrajectoryPoint>& traj) {
  for (const auto& pt : traj) {
    json rec = {{"step", pt.step},
                {"time", pt.time},
                {"epsilon", pt.epsilon},
                {"distance", pt.distance_final},
                {"loss", pt.loss_history}};
    append_jsonl(path, rec);
  }
}

// ---------------------------------------------------------------------------
// VMC ground-state search (shared by initial states, spectra and the
// ground_state command).
// ---------------------------------------------------------------------------

struct VmcOutcome {
  double energy = 0.0;
  double energy_se = 0.0;
  int iters = 0;
  std::vector<double> history;
};

template <SampledAnsatz A>
VmcOutcome run_vmc(A& psi, const Lattice& lat, double J, double g,
                   const VmcSpec& vmc, std::uint64_t master, int workers) {
  AdamState adam;
  adam.reset(psi.params().size());
  AdamConfig acfg;
  const Couplings cpl{J, g};

  std::vector<RngStream> streams;
  std::vector<std::uint64_t> sigmas;
  Eigen::VectorXcd logs;
  Eigen::VectorXd weights;
  VmcOutcome out;
  out.history.reserve(vmc.n_iters);

  for (int it = 0; it < vmc.n_iters; ++it) {
    detail::fill_streams(streams, master, 5, 0, static_cast<std::uint64_t>(it),
                         vmc.n_samples);
    typename A::BatchCache cache;
    psi.sample_batch(streams, sigmas, logs, &cache);
    const std::size_t raw = sigmas.size();
    detail::dedup_batch(sigmas, logs, weights);
    if (sigmas.size() < raw) psi.log_psi_batch(sigmas, logs, &cache);
    else weights.resize(0);

    const auto batch = static_cast<Eigen::Index>(sigmas.size());
    Eigen::VectorXd w = weights.size() > 0
                            ? (weights / weights.sum()).eval()
                            : Eigen::VectorXd::Constant(batch, 1.0 / double(batch));
    Eigen::VectorXcd e_loc(batch);
    local_operator_values(psi, lat, cpl, sigmas, logs, workers, e_loc);
    const cd ebar = (w.cast<cd>().array() * e_loc.array()).sum();

    RowMatrixXd o_re, o_im;
    psi.log_derivatives_batch(sigmas, cache, o_re, o_im);
    const Eigen::VectorXcd dew =
        (w.cast<cd>().array() * (e_loc.array() - ebar)).matrix();
    const Eigen::VectorXd grad =
        2.0 * (o_re.transpose() * dew.real() + o_im.transpose() * dew.imag());

    if (!std::isfinite(ebar.real()) || !grad.allFinite())
      throw RunFailure("energy minimization hit a non-finite value at iteration " +
                       std::to_string(it));
    out.history.push_back(ebar.real());
    adam_update(adam, acfg, vmc.eta, grad, psi.params());
  }
  out.iters = vmc.n_iters;

  if (vmc.plateau_tol > 0.0 &&
      out.history.size() >= static_cast<std::size_t>(2 * vmc.plateau_window)) {
    const auto w = static_cast<std::size_t>(vmc.plateau_window);
    const auto n = out.history.size();
    double m1 = 0, m0 = 0;
    for (std::size_t i = n - w; i < n; ++i) m1 += out.history[i];
    for (std::size_t i = n - 2 * w; i < n - w; ++i) m0 += out.history[i];
    m1 /= double(w);
    m0 /= double(w);
    const double rel = std::abs(m1 - m0) / std::max(std::abs(m1), 1e-12);
    if (rel > vmc.plateau_tol)
      throw RunFailure("energy failed to plateau: windows " +
                       format_double(m0) + " -> " + format_double(m1) +
                       " move by a relative " + format_double(rel) +
                       " (tolerance " + format_double(vmc.plateau_tol) + ")");
  }

  // Clean final estimate on one more independent batch.
  detail::fill_streams(streams, master, 5, 1,
                       static_cast<std::uint64_t>(vmc.n_iters), vmc.n_samples);
  psi.sample_batch(streams, sigmas, logs, nullptr);
  const auto snap = measure(psi, lat, J, g, 0.0, sigmas, logs, Eigen::VectorXd(),
                            workers, std::nullopt);
  out.energy = snap.energy.real();
  out.energy_se = snap.energy_se;
  return out;
}

// ---------------------------------------------------------------------------
// Initial states
// ---------------------------------------------------------------------------

void check_checkpoint_header(const CheckpointHeader& h, const ExperimentPlan& p,
                             int expected_units) {
  if (h.architecture != p.ansatz.architecture)
    throw ConfigError("checkpoint architecture \"" + h.architecture +
                      "\" does not match plan architecture \"" +
                      p.ansatz.architecture + "\"");
  if (h.hidden != expected_units)
    throw ConfigError("checkpoint width " + std::to_string(h.hidden) +
                      " does not match the plan's " +
                      std::to_string(expected_units));
  if (h.rows != p.lattice.rows || h.cols != p.lattice.cols)
    throw ConfigError("checkpoint lattice " + std::to_string(h.rows) + "x" +
                      std::to_string(h.cols) + " does not match the plan's " +
                      std::to_string(p.lattice.rows) + "x" +
                      std::to_string(p.lattice.cols));
}

// Builds the starting parameters for the architecture; VMC (if requested)
// happens after optional symmetrization, so it optimizes the state actually
// evolved.
GruAnsatz make_base_gru(const ExperimentPlan& p) {
  const int n = p.lattice.n_sites();
  const auto& init = p.initial_state;
  if (init.kind == "paramagnetic_product")
    return GruAnsatz::paramagnetic_product(n, p.ansatz.hidden);
  if (init.kind == "z_basis_product")
    return GruAnsatz::pinned_uniform(n, p.ansatz.hidden, init.pinned_bit,
                                     init.pinned_bias);
  if (init.kind == "checkpoint") {
    const Checkpoint ck = load_checkpoint(init.checkpoint);
    check_checkpoint_header(ck.header, p, p.ansatz.hidden);
    GruAnsatz psi(n, p.ansatz.hidden);
    if (ck.params.size() != psi.params().size())
      throw ConfigError("checkpoint parameter count " +
                        std::to_string(ck.params.size()) + " does not match " +
                        std::to_string(psi.params().size()));
    psi.params() = ck.params;
    return psi;
  }
  // ground_state_vmc: random start, optimized later.
  GruAnsatz psi(n, p.ansatz.hidden);
  RngStream stream = derive_stream(p.seed, 9);
  psi.init_random(stream, p.ansatz.init_scale, init.vmc.sign_init);
  return psi;
}

RbmAnsatz make_base_rbm(const ExperimentPlan& p) {
  const int n = p.lattice.n_sites();
  const auto& init = p.initial_state;
  if (init.kind == "paramagnetic_product") return RbmAnsatz(n, p.ansatz.alpha);
  if (init.kind == "checkpoint") {
    const Checkpoint ck = load_checkpoint(init.checkpoint);
    check_checkpoint_header(ck.header, p, p.ansatz.alpha);
    RbmAnsatz psi(n, p.ansatz.alpha);
    if (ck.params.size() != psi.params().size())
      throw ConfigError("checkpoint parameter count " +
                        std::to_string(ck.params.size()) + " does not match " +
                        std::to_string(psi.params().size()));
    psi.params() = ck.params;
    return psi;
  }
  RbmAnsatz psi(n, p.ansatz.alpha);
  RngStream stream = derive_stream(p.seed, 9);
  psi.init_random(stream, p.ansatz.init_scale);
  return psi;
}

template <SampledAnsatz A>
json maybe_vmc_init(A& psi, const ExperimentPlan& p, const Lattice& lat,
                    const QuenchSchedule& sched, double t0) {
  json block = {{"kind", p.initial_state.kind}};
  if (p.initial_state.kind != "ground_state_vmc") return block;
  const auto cpl = sched.at(t0);
  const auto out =
      run_vmc(psi, lat, cpl.J, cpl.g, p.initial_state.vmc, p.seed, p.workers);
  block["energy"] = out.energy;
  block["energy_se"] = out.energy_se;
  block["n_iters"] = out.iters;
  if (lat.n_sites() <= k_dense_site_cap) {
    const double e0 = ground_state(lat, cpl.J, cpl.g).energy;
    block["exact_e0"] = e0;
    block["relative_offset"] = (out.energy - e0) / std::abs(e0);
  }
  return block;
}

// ---------------------------------------------------------------------------
// Evolution runner shared by evolve / sudden_quench / kz_single
// ---------------------------------------------------------------------------

struct EvoJob {
  const ExperimentPlan* plan = nullptr;
  const Lattice* lat = nullptr;
  QuenchSchedule sched;
  double t0 = 0.0;
  double t_final = 0.0;
  DtPolicy dtp;
  std::uint64_t seed = 1;
  fs::path dir;
  bool write_files = true;
};

template <SampledAnsatz A>
json run_evolution(A& psi, const EvoJob& job, json init_block) {
  const ExperimentPlan& p = *job.plan;
  const Lattice& lat = *job.lat;
  const int n = lat.n_sites();
  const auto tableau = named_tableau(p.method);

  E0Cache e0cache(lat);
  const bool oracle = oracle_on(p.output, n);
  std::vector<OracleRow> oracle_rows;
  std::unique_ptr<OracleTrack> track;
  if (oracle)
    track = std::make_unique<OracleTrack>(lat, job.sched, enumerate_ansatz(psi),
                                          job.t0);

  EvolveOptions opts;
  opts.t0 = job.t0;
  opts.t_final = job.t_final;
  opts.dt_policy = job.dtp;
  opts.step = p.step.config();
  opts.seed = job.seed;
  opts.n_workers = p.workers;
  opts.measure_each_step = p.output.measure_each_step;
  if (p.output.measure_each_step && p.output.e0_each_step &&
      n <= k_dense_site_cap) {
    opts.e0_of_t = [&](double t) {
      const auto cpl = job.sched.at(t);
      return e0cache.at(cpl.J, cpl.g);
    };
  }

  fs::path ckdir = job.dir / "checkpoints";
  if (job.write_files) {
    ensure_dir(ckdir);
    if (p.output.checkpoint_stride > 0) {
      opts.checkpoint_stride = p.output.checkpoint_stride;
      opts.on_checkpoint = [&, ckdir](int step, double, const Eigen::VectorXd& th) {
        char name[32];
        std::snprintf(name, sizeof(name), "step_%06d.txt", step);
        CheckpointHeader h{p.ansatz.architecture,
                           p.ansatz.architecture == "rbm" ? p.ansatz.alpha
                                                          : p.ansatz.hidden,
                           p.lattice.rows, p.lattice.cols, "row-major"};
        save_checkpoint(ckdir / name, h, th);
      };
    }
  }

  // Exact Born-weighted observables replace the sampled snapshots on small
  // systems, so state-quality numbers carry integration error only.
  const bool enum_obs =
      p.output.measure_each_step &&
      (p.output.observables == "enumerated" ||
       (p.output.observables == "auto" && n <= 16));
  std::vector<ObservableSnapshot> enum_snaps;
  auto enum_measure = [&](double t) {
    const auto cpl = job.sched.at(t);
    std::optional<double> e0;
    if (p.output.e0_each_step && n <= k_dense_site_cap)
      e0 = e0cache.at(cpl.J, cpl.g);
    enum_snaps.push_back(
        measure_enumerated(psi, lat, cpl.J, cpl.g, t, p.workers, e0));
  };

  opts.on_step = [&](const TrajectoryPoint& pt) {
    if (enum_obs) enum_measure(pt.time);
    if (!track) return;
    track->advance(pt.time);
    DenseState var;
    const DenseState* varp = nullptr;
    if (p.output.track_fidelity) {
      var = enumerate_ansatz(psi);
      varp = &var;
    }
    oracle_rows.push_back(track->eval(varp, e0cache));
  };

  if (enum_obs) enum_measure(job.t0);
  if (track) {
    // Row for the initial point: same state on both sides when fidelity is on.
    DenseState var = enumerate_ansatz(psi);
    oracle_rows.push_back(
        track->eval(p.output.track_fidelity ? &var : nullptr, e0cache));
  }

  auto traj = evolve(psi, lat, job.sched, tableau, opts);
  if (enum_obs && enum_snaps.size() == traj.size())
    for (std::size_t i = 0; i < traj.size(); ++i) traj[i].obs = enum_snaps[i];

  if (job.write_files) {
    write_trajectory_csv(job.dir / "trajectory.csv", traj, oracle_rows);
    write_events_jsonl(job.dir / "events.jsonl", traj);
    CheckpointHeader h{p.ansatz.architecture,
                       p.ansatz.architecture == "rbm" ? p.ansatz.alpha
                                                      : p.ansatz.hidden,
                       p.lattice.rows, p.lattice.cols, "row-major"};
    save_checkpoint(ckdir / "final.txt", h, psi.params());
  }

  // Summary statistics.
  json summary;
  summary["initial_state"] = std::move(init_block);
  summary["n_time_steps"] = static_cast<long>(traj.size()) - 1;
  summary["t_final"] = traj.back().time;
  double mean_eps = 0.0, max_abs_eps = 0.0;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    mean_eps += traj[i].epsilon;
    max_abs_eps = std::max(max_abs_eps, std::abs(traj[i].epsilon));
  }
  if (traj.size() > 1) mean_eps /= double(traj.size() - 1);
  summary["mean_epsilon"] = mean_eps;
  summary["max_abs_epsilon"] = max_abs_eps;
  summary["cumulative_epsilon"] = traj.back().cumulative_epsilon;
  summary["observables_mode"] = enum_obs ? "enumerated" : "sampled";
  if (p.output.measure_each_step) {
    const auto& last = traj.back().obs;
    summary["terminal"] = {{"sx", last.sx},
                           {"energy_re", last.energy.real()},
                           {"energy_im", last.energy.imag()},
                           {"zz", last.zz},
                           {"sz", last.sz},
                           {"injected_energy_density",
                            last.injected_energy_density}};
  }
  json ob = {{"active", oracle}};
  if (oracle && !oracle_rows.empty()) {
    double max_sx_dev = 0.0, min_fid = 2.0;
    for (std::size_t i = 0; i < traj.size() && i < oracle_rows.size(); ++i) {
      if (p.output.measure_each_step)
        max_sx_dev = std::max(max_sx_dev,
                              std::abs(traj[i].obs.sx - oracle_rows[i].sx));
      if (p.output.track_fidelity)
        min_fid = std::min(min_fid, oracle_rows[i].fidelity);
    }
    const auto& lastrow = oracle_rows.back();
    if (p.output.measure_each_step) ob["max_abs_sx_dev"] = max_sx_dev;
    if (p.output.track_fidelity) {
      ob["terminal_fidelity"] = lastrow.fidelity;
      ob["min_fidelity"] = min_fid;
    }
    ob["terminal_sx"] = lastrow.sx;
    ob["terminal_energy"] = lastrow.energy;
    ob["terminal_injected_density"] = lastrow.injected_density;
  }
  summary["oracle"] = std::move(ob);
  return summary;
}

// Architecture dispatch: builds the ansatz, runs the optional VMC stage, and
// hands the concrete type to `fn(psi, init_block)`.
template <class Fn>
json with_initial_state(const ExperimentPlan& p, const Lattice& lat,
                        const QuenchSchedule& sched, double t0, Fn&& fn) {
  if (p.ansatz.architecture == "gru" && p.ansatz.symmetrized) {
    auto group = build_symmetry_group(lat, p.ansatz.symmetries);
    SymmetrizedAnsatz<GruAnsatz> psi(make_base_gru(p), std::move(group));
    json init = maybe_vmc_init(psi, p, lat, sched, t0);
    return fn(psi, std::move(init));
  }
  if (p.ansatz.architecture == "gru") {
    GruAnsatz psi = make_base_gru(p);
    json init = maybe_vmc_init(psi, p, lat, sched, t0);
    return fn(psi, std::move(init));
  }
  RbmAnsatz psi = make_base_rbm(p);
  json init = maybe_vmc_init(psi, p, lat, sched, t0);
  return fn(psi, std::move(init));
}

// ---------------------------------------------------------------------------
// Kind runners
// ---------------------------------------------------------------------------

json run_kind_evolve(const ExperimentPlan& p, const fs::path& dir) {
  const Lattice lat = p.lattice.build();
  const QuenchSchedule sched = p.schedule.resolve(lat);
  EvoJob job;
  job.plan = &p;
  job.lat = &lat;
  job.sched = sched;
  job.t0 = p.time.t0;
  job.t_final = resolve_t_final(p, sched);
  job.dtp = p.step.dt.policy();
  job.seed = p.seed;
  job.dir = dir;
  return with_initial_state(p, lat, sched, p.time.t0,
                            [&](auto& psi, json init) {
                              return run_evolution(psi, job, std::move(init));
                            });
}

// One linear ramp to t = tau_q. The ramp ends at zero Ising coupling, where
// the ground-state energy is the closed form -g(tau_q) N; the injected energy
// at the endpoint therefore needs no eigensolver at any size.
json run_kz_point(const ExperimentPlan& p, const Lattice& lat, double tau_q,
                  const Eigen::VectorXd* warm_params, const json& init_block,
                  std::uint64_t evo_seed, const fs::path& dir, bool write_files) {
  ScheduleSpec ss = p.schedule;
  ss.tau_q = tau_q;
  const QuenchSchedule sched = ss.resolve(lat);

  // Snap the step so the last step lands exactly on tau_q.
  double dt_value = p.step.dt.value;
  DtPolicy dtp;
  if (p.step.dt.kind == "fixed") {
    const long n_steps = std::max<long>(
        p.kz.min_time_steps, std::lround(std::ceil(tau_q / dt_value - 1e-9)));
    dtp = DtPolicy::fixed_dt(tau_q / double(n_steps));
  } else {
    dtp = p.step.dt.policy();
  }

  EvoJob job;
  job.plan = &p;
  job.lat = &lat;
  job.sched = sched;
  job.t0 = 0.0;
  job.t_final = tau_q;
  job.dtp = dtp;
  job.seed = evo_seed;
  job.dir = dir;
  job.write_files = write_files;

  auto run_with = [&](auto& psi) {
    if (warm_params != nullptr) psi.params() = *warm_params;
    return run_evolution(psi, job, init_block);
  };

  json summary;
  if (p.ansatz.architecture == "gru" && p.ansatz.symmetrized) {
    auto group = build_symmetry_group(lat, p.ansatz.symmetries);
    SymmetrizedAnsatz<GruAnsatz> psi(make_base_gru(p), std::move(group));
    summary = run_with(psi);
  } else if (p.ansatz.architecture == "gru") {
    GruAnsatz psi = make_base_gru(p);
    summary = run_with(psi);
  } else {
    RbmAnsatz psi = make_base_rbm(p);
    summary = run_with(psi);
  }

  const double g_end = sched.at(tau_q).g;
  const double e0_end = -std::abs(g_end) * lat.n_sites();
  summary["tau_q"] = tau_q;
  summary["j_tau_q"] = p.schedule.J * tau_q;
  summary["e0_end"] = e0_end;
  const double e_end = summary["terminal"]["energy_re"].get<double>();
  const double inj = (e_end - e0_end) / lat.n_sites();
  summary["injected_energy_density"] = inj;
  if (summary["oracle"]["active"].get<bool>()) {
    const double oe = summary["oracle"]["terminal_energy"].get<double>();
    const double oinj = (oe - e0_end) / lat.n_sites();
    summary["oracle_injected_energy_density"] = oinj;
    summary["injected_rel_error"] =
        std::abs(inj - oinj) / std::max(std::abs(oinj), 1e-300);
  }
  return summary;
}

json run_kind_kz_single(const ExperimentPlan& p, const fs::path& dir) {
  const Lattice lat = p.lattice.build();
  ScheduleSpec ss = p.schedule;
  const QuenchSchedule sched = ss.resolve(lat);

  // The starting state depends on t = 0 couplings only, not on tau_q.
  json init_block;
  Eigen::VectorXd params;
  if (p.initial_state.kind == "ground_state_vmc") {
    init_block = with_initial_state(p, lat, sched, 0.0, [&](auto& psi, json init) {
      params = psi.params();
      return init;
    });
  } else {
    init_block = {{"kind", p.initial_state.kind}};
  }
  const Eigen::VectorXd* warm =
      p.initial_state.kind == "ground_state_vmc" ? &params : nullptr;
  return run_kz_point(p, lat, p.schedule.tau_q, warm, init_block,
                      p.seed, dir, true);
}

json run_kind_kz_scan(const ExperimentPlan& p, const fs::path& dir) {
  const Lattice lat = p.lattice.build();
  ScheduleSpec ss = p.schedule;
  ss.tau_q = p.kz.tau_q_grid.front();  // any positive value; t=0 couplings match
  const QuenchSchedule sched = ss.resolve(lat);

  // One shared starting state: every grid point ramps away from the same
  // t = 0 Hamiltonian.
  json init_block;
  Eigen::VectorXd params;
  bool warm = false;
  if (p.initial_state.kind == "ground_state_vmc") {
    init_block = with_initial_state(p, lat, sched, 0.0, [&](auto& psi, json init) {
      params = psi.params();
      return init;
    });
    warm = true;
  } else {
    init_block = {{"kind", p.initial_state.kind}};
  }

  ensure_dir(dir / "runs");
  json points = json::array();
  std::vector<double> fit_x, fit_y;
  bool monotone = true;
  double prev_inj = k_nan;
  for (std::size_t i = 0; i < p.kz.tau_q_grid.size(); ++i) {
    const double tq = p.kz.tau_q_grid[i];
    const fs::path pdir = dir / "runs" / ("tq-" + format_double(tq));
    ensure_dir(pdir);
    const std::uint64_t evo_seed =
        derive_stream(p.seed, 6, static_cast<std::uint64_t>(i)).next_u64();
    json pt;
    try {
      pt = run_kz_point(p, lat, tq, warm ? &params : nullptr, init_block,
                        evo_seed, pdir, true);
      pt["status"] = "ok";
      write_json_file(pdir / "summary.json", pt);
    } catch (const std::exception& e) {
      pt = {{"tau_q", tq},
            {"j_tau_q", p.schedule.J * tq},
            {"status", "failed"},
            {"error", e.what()}};
      write_json_file(pdir / "summary.json", pt);
      points.push_back(pt);
      continue;
    }
    const double jtq = pt["j_tau_q"].get<double>();
    const double inj = pt["injected_energy_density"].get<double>();
    if (jtq <= p.kz.fit_max_jtq) {
      if (std::isfinite(prev_inj) && !(inj < prev_inj)) monotone = false;
      prev_inj = inj;
      if (inj > 0.0) {
        fit_x.push_back(std::log(tq));
        fit_y.push_back(std::log(inj));
      }
    }
    points.push_back(pt);
  }

  CsvWriter csv(dir / "scan_points.csv",
                {"tau_q", "j_tau_q", "injected_energy_density",
                 "oracle_injected_energy_density", "injected_rel_error",
                 "terminal_fidelity", "status"});
  for (const auto& pt : points) {
    auto opt = [&](const char* key) {
      return pt.contains(key) ? pt[key].get<double>() : k_nan;
    };
    double fid = k_nan;
    if (pt.contains("oracle") && pt["oracle"].contains("terminal_fidelity"))
      fid = pt["oracle"]["terminal_fidelity"].get<double>();
    csv.write_row({cell(pt["tau_q"].get<double>()),
                   cell(pt["j_tau_q"].get<double>()),
                   cell(opt("injected_energy_density")),
                   cell(opt("oracle_injected_energy_density")),
                   cell(opt("injected_rel_error")), cell(fid),
                   pt["status"].get<std::string>()});
  }

  json summary;
  summary["initial_state"] = init_block;
  summary["points"] = std::move(points);
  const LineFit fit = fit_line(fit_x, fit_y);
  summary["fit"] = {{"slope", fit.slope},
                    {"exponent", -fit.slope},
                    {"n_points", fit.n},
                    {"max_j_tau_q", p.kz.fit_max_jtq}};
  summary["monotonic_decreasing"] = monotone;
  return summary;
}

json run_kind_dt_scan(const ExperimentPlan& p, const fs::path& dir) {
  const Lattice lat = p.lattice.build();
  const QuenchSchedule sched = p.schedule.resolve(lat);
  const double g_scale = sched.g_scale();

  CsvWriter csv(dir / "scan_points.csv",
                {"method", "g_dt", "dt", "n_samples", "mean_epsilon",
                 "mean_abs_epsilon", "status"});

  // All points share one starting state (no VMC in this scan's scope).
  auto run_point = [&](const std::string& method, double g_dt, int n_samples,
                       std::uint64_t seed) -> double {
    ExperimentPlan q = p;
    q.method = method;
    q.step.n_samples = n_samples;
    q.output.measure_each_step = false;
    q.output.oracle = "off";
    q.output.track_fidelity = false;
    q.output.checkpoint_stride = 0;
    const double dt = g_dt / g_scale;

    EvoJob job;
    job.plan = &q;
    job.lat = &lat;
    job.sched = sched;
    job.t0 = 0.0;
    job.t_final = p.dt_scan.window * dt;
    job.dtp = DtPolicy::fixed_dt(dt);
    job.seed = seed;
    job.dir = dir;
    job.write_files = false;

    return with_initial_state(
        q, lat, sched, 0.0, [&](auto& psi, json init) {
          (void)init;
          json s = run_evolution(psi, job, json{{"kind", q.initial_state.kind}});
          return json{{"mean_epsilon", s["mean_epsilon"]}};
        })["mean_epsilon"].get<double>();
  };

  struct Point {
    double g_dt = 0.0;
    double mean_eps = k_nan;
    bool ok = false;
  };

  json methods_out;
  json floor_out;
  double optimal_g_dt = k_nan;
  for (std::size_t mi = 0; mi < p.dt_scan.methods.size(); ++mi) {
    const std::string& method = p.dt_scan.methods[mi];
    std::vector<Point> pts;
    for (std::size_t di = 0; di < p.dt_scan.g_dt_grid.size(); ++di) {
      Point pt;
      pt.g_dt = p.dt_scan.g_dt_grid[di];
      const std::uint64_t seed =
          derive_stream(p.seed, 8, mi, di, 0).next_u64();
      std::string status = "ok";
      try {
        pt.mean_eps = run_point(method, pt.g_dt, p.step.n_samples, seed);
        pt.ok = true;
      } catch (const std::exception& e) {
        status = std::string("failed: ") + e.what();
      }
      csv.write_row({method, cell(pt.g_dt), cell(pt.g_dt / g_scale),
                     std::to_string(p.step.n_samples), cell(pt.mean_eps),
                     cell(std::abs(pt.mean_eps)), status});
      pts.push_back(pt);
    }
    std::sort(pts.begin(), pts.end(),
              [](const Point& a, const Point& b) { return a.g_dt < b.g_dt; });

    // Floor: the level where shrinking the step stops shrinking the error.
    json m;
    m["points"] = json::array();
    for (const auto& pt : pts)
      m["points"].push_back({{"g_dt", pt.g_dt},
                             {"mean_epsilon", pt.mean_eps},
                             {"ok", pt.ok}});
    std::vector<Point> ok;
    for (const auto& pt : pts)
      if (pt.ok && std::isfinite(pt.mean_eps) && pt.mean_eps != 0.0)
        ok.push_back(pt);
    double floor_level = k_nan;
    bool floor_exists = false;
    if (ok.size() >= 2) {
      const double s01 =
          (std::log(std::abs(ok[1].mean_eps)) - std::log(std::abs(ok[0].mean_eps))) /
          (std::log(ok[1].g_dt) - std::log(ok[0].g_dt));
      floor_exists = std::abs(s01) < p.dt_scan.floor_slope_cut;
      const int fp = std::min<int>(p.dt_scan.floor_points, int(ok.size()));
      floor_level = 0.0;
      for (int i = 0; i < fp; ++i) floor_level += std::abs(ok[i].mean_eps);
      floor_level /= fp;
    }
    // Order fit over the points clearly above the floor.
    std::vector<double> lx, ly;
    for (const auto& pt : ok)
      if (!floor_exists ||
          std::abs(pt.mean_eps) >= p.dt_scan.fit_floor_factor * floor_level) {
        lx.push_back(std::log(pt.g_dt));
        ly.push_back(std::log(std::abs(pt.mean_eps)));
      }
    if (lx.size() < 2 && ok.size() >= 3) {
      lx.clear();
      ly.clear();
      for (std::size_t i = ok.size() - 3; i < ok.size(); ++i) {
        lx.push_back(std::log(ok[i].g_dt));
        ly.push_back(std::log(std::abs(ok[i].mean_eps)));
      }
    }
    const LineFit fit = fit_line(lx, ly);
    m["slope"] = fit.slope;
    m["fit_points"] = fit.n;
    m["floor"] = {{"exists", floor_exists}, {"level", floor_level}};
    methods_out[method] = std::move(m);

    const bool is_floor_method =
        method == "heun" || mi + 1 == p.dt_scan.methods.size();
    if (is_floor_method && !floor_out.contains("method")) {
      // Error-vs-step minimum and the 4x-samples floor shift live on the
      // highest-order method, where the floor is reached soonest.
      double best = std::numeric_limits<double>::infinity();
      for (const auto& pt : ok)
        if (std::abs(pt.mean_eps) < best) {
          best = std::abs(pt.mean_eps);
          optimal_g_dt = pt.g_dt;
        }
      const int fp = std::min<int>(p.dt_scan.floor_points, int(ok.size()));
      double scaled_level = 0.0;
      int got = 0;
      for (int i = 0; i < fp; ++i) {
        const std::uint64_t seed = derive_stream(p.seed, 8, mi,
                                                 static_cast<std::uint64_t>(i), 1)
                                       .next_u64();
        try {
          const double eps =
              run_point(method, ok[i].g_dt,
                        p.step.n_samples * p.dt_scan.samples_scale, seed);
          csv.write_row({method, cell(ok[i].g_dt), cell(ok[i].g_dt / g_scale),
                         std::to_string(p.step.n_samples * p.dt_scan.samples_scale),
                         cell(eps), cell(std::abs(eps)), "ok"});
          scaled_level += std::abs(eps);
          ++got;
        } catch (const std::exception&) {
        }
      }
      if (got > 0) scaled_level /= got;
      floor_out = {{"method", method},
                   {"exists", floor_exists},
                   {"level", floor_level},
                   {"scaled_samples_level", got > 0 ? scaled_level : k_nan},
                   {"moves_down", got > 0 && scaled_level < floor_level}};
    }
  }

  json summary;
  summary["methods"] = std::move(methods_out);
  summary["floor"] = std::move(floor_out);
  summary["optimal_g_dt"] = optimal_g_dt;
  return summary;
}

json run_kind_noise_scan(const ExperimentPlan& p, const fs::path& dir) {
  const Lattice lat = p.lattice.build();
  const QuenchSchedule sched = p.schedule.resolve(lat);
  const double dt = p.step.dt.value;

  json per_ns = json::array();
  std::vector<double> y_means;
  CsvWriter csv(dir / "noise.csv",
                {"n_samples", "step", "time", "sigma_epsilon",
                 "sigma_epsilon_sqrt_ns"});

  for (std::size_t ni = 0; ni < p.noise.n_samples_grid.size(); ++ni) {
    const int ns = p.noise.n_samples_grid[ni];
    const int window = p.noise.window;
    // eps[rep][step]
    std::vector<std::vector<double>> eps(p.noise.repetitions);
    for (int rep = 0; rep < p.noise.repetitions; ++rep) {
      ExperimentPlan q = p;
      q.step.n_samples = ns;
      EvoJob job;
      job.plan = &q;
      job.lat = &lat;
      job.sched = sched;
      job.t0 = 0.0;
      job.t_final = window * dt;
      job.dtp = DtPolicy::fixed_dt(dt);
      job.seed = derive_stream(p.seed, 7, ni, static_cast<std::uint64_t>(rep))
                     .next_u64();
      job.dir = dir;
      job.write_files = false;

      std::vector<double>& row = eps[rep];
      with_initial_state(q, lat, sched, 0.0, [&](auto& psi, json init) {
        (void)init;
        const auto tableau = named_tableau(q.method);
        EvolveOptions opts;
        opts.t0 = job.t0;
        opts.t_final = job.t_final;
        opts.dt_policy = job.dtp;
        opts.step = q.step.config();
        opts.seed = job.seed;
        opts.n_workers = q.workers;
        opts.measure_each_step = false;
        const auto traj = evolve(psi, lat, job.sched, tableau, opts);
        for (std::size_t i = 1; i < traj.size(); ++i)
          row.push_back(traj[i].epsilon);
        return json{};
      });
    }

    const std::size_t steps = eps[0].size();
    std::vector<double> sigma(steps, 0.0);
    double y_mean = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      double mean = 0.0;
      for (const auto& row : eps) mean += row[s];
      mean /= double(p.noise.repetitions);
      double var = 0.0;
      for (const auto& row : eps) var += (row[s] - mean) * (row[s] - mean);
      var /= double(p.noise.repetitions - 1);
      sigma[s] = std::sqrt(var);
      y_mean += sigma[s] * std::sqrt(double(ns));
      csv.write_row({std::to_string(ns), std::to_string(s + 1),
                     cell(double(s + 1) * dt), cell(sigma[s]),
                     cell(sigma[s] * std::sqrt(double(ns)))});
    }
    y_mean /= double(steps);
    y_means.push_back(y_mean);
    per_ns.push_back({{"n_samples", ns},
                      {"mean_sigma_sqrt_ns", y_mean},
                      {"sigma", sigma}});
  }

  double mean_y = 0.0;
  for (double y : y_means) mean_y += y;
  mean_y /= double(y_means.size());
  double max_dev = 0.0;
  for (double y : y_means) max_dev = std::max(max_dev, std::abs(y - mean_y));
  // Max pairwise spread relative to the common level.
  double max_pair = 0.0;
  for (std::size_t i = 0; i < y_means.size(); ++i)
    for (std::size_t k = i + 1; k < y_means.size(); ++k)
      max_pair = std::max(max_pair, std::abs(y_means[i] - y_means[k]));

  json summary;
  summary["per_ns"] = std::move(per_ns);
  summary["collapse_max_rel_dev"] = max_pair / mean_y;
  summary["repetitions"] = p.noise.repetitions;
  summary["window"] = p.noise.window;
  return summary;
}

// Holomorphic-parameter covariance for the rbm: columns are complex
// derivatives, so the spectrum is the one the complex-parameter equation of
// motion inverts (the real-split matrix would double every eigenvalue pair).
QgtEstimate rbm_holomorphic_qgt(const RbmAnsatz& psi, const Lattice& lat,
                                const Couplings& cpl,
                                std::span<const std::uint64_t> sigmas,
                                const Eigen::VectorXcd& logs,
                                const Eigen::VectorXd& weights, int workers) {
  const auto batch = static_cast<Eigen::Index>(sigmas.size());
  Eigen::VectorXcd e_loc(batch);
  local_operator_values(psi, lat, cpl, sigmas, logs, workers, e_loc);

  QgtAccumulator acc(psi.n_complex_params());
  const Eigen::Index chunk = 4096;
  Eigen::MatrixXcd o;
  for (Eigen::Index lo = 0; lo < batch; lo += chunk) {
    const Eigen::Index hi = std::min(batch, lo + chunk);
    const std::span<const std::uint64_t> part(sigmas.data() + lo,
                                              static_cast<std::size_t>(hi - lo));
    psi.holomorphic_derivatives(part, o);
    const RowMatrixXd o_re = o.real();
    const RowMatrixXd o_im = o.imag();
    acc.add(o_re, o_im, e_loc.segment(lo, hi - lo),
            weights.size() > 0 ? weights.segment(lo, hi - lo).eval()
                               : Eigen::VectorXd());
  }
  return acc.finalize();
}

json run_kind_qgt(const ExperimentPlan& p, const fs::path& dir) {
  const Lattice lat = p.lattice.build();
  const int n = lat.n_sites();
  const double gc = p.schedule.critical_field(lat);
  ensure_dir(dir / "spectra");

  const bool is_rbm = p.ansatz.architecture == "rbm";
  const SpectrumMode mode =
      p.qgt.mode == "full"
          ? SpectrumMode::full
          : p.qgt.mode == "imaginary_part"
                ? SpectrumMode::imaginary_part
                : (is_rbm ? SpectrumMode::full : SpectrumMode::imaginary_part);

  json points = json::array();
  for (std::size_t gi = 0; gi < p.qgt.g_over_gc_grid.size(); ++gi) {
    const double ratio = p.qgt.g_over_gc_grid[gi];
    const double g = ratio * gc;
    const Couplings cpl{p.schedule.J, g};
    const std::uint64_t master = derive_stream(p.seed, 6, gi).next_u64();

    // Ground state by energy minimization at these couplings.
    json vmc_block;
    Eigen::VectorXd spectrum;
    double vmc_energy = k_nan;
    auto spectra_for = [&](auto& psi) {
      const auto vout =
          run_vmc(psi, lat, cpl.J, cpl.g, p.initial_state.vmc, master, p.workers);
      vmc_energy = vout.energy;
      vmc_block = {{"energy", vout.energy},
                   {"energy_se", vout.energy_se},
                   {"n_iters", vout.iters}};

      std::vector<std::uint64_t> sigmas;
      Eigen::VectorXcd logs;
      Eigen::VectorXd weights;
      if (n <= k_dense_site_cap) {
        // Exact Born weights over the full basis.
        const std::size_t dim = std::size_t{1} << n;
        sigmas.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) sigmas[i] = i;
        logs.resize(static_cast<Eigen::Index>(dim));
        psi.log_psi_batch(sigmas, logs);
        weights = (2.0 * logs.real().array()).exp();
        weights /= weights.sum();
      } else {
        std::vector<RngStream> streams;
        detail::fill_streams(streams, master, 11, gi, 0,
                             p.initial_state.vmc.n_samples);
        psi.sample_batch(streams, sigmas, logs, nullptr);
        detail::dedup_batch(sigmas, logs, weights);
      }

      if constexpr (std::is_same_v<std::decay_t<decltype(psi)>, RbmAnsatz>) {
        if (mode == SpectrumMode::full) {
          const auto est = rbm_holomorphic_qgt(psi, lat, cpl, sigmas, logs,
                                               weights, p.workers);
          spectrum = qgt_spectrum(est.s, mode);
          return;
        }
      }
      const auto est =
          estimate_qgt(psi, lat, cpl, sigmas, logs, weights, p.workers);
      spectrum = qgt_spectrum(est.s, mode);
    };

    RngStream init = derive_stream(master, 9);
    if (is_rbm) {
      RbmAnsatz psi(n, p.ansatz.alpha);
      psi.init_random(init, p.ansatz.init_scale);
      spectra_for(psi);
    } else if (p.ansatz.symmetrized) {
      auto group = build_symmetry_group(lat, p.ansatz.symmetries);
      GruAnsatz inner(n, p.ansatz.hidden);
      inner.init_random(init, p.ansatz.init_scale, p.initial_state.vmc.sign_init);
      SymmetrizedAnsatz<GruAnsatz> psi(std::move(inner), std::move(group));
      spectra_for(psi);
    } else {
      GruAnsatz psi(n, p.ansatz.hidden);
      psi.init_random(init, p.ansatz.init_scale, p.initial_state.vmc.sign_init);
      spectra_for(psi);
    }

    const SpectrumStats stats = spectrum_stats(spectrum);
    const std::string label = format_double(ratio);
    CsvWriter csv(dir / "spectra" / ("g-" + label + ".csv"),
                  {"index", "eigenvalue"});
    for (Eigen::Index i = 0; i < spectrum.size(); ++i)
      csv.write_row({std::to_string(i), cell(spectrum[i])});

    json pt = {{"g_over_gc", ratio},
               {"g", g},
               {"mode", mode == SpectrumMode::full ? "full" : "imaginary_part"},
               {"vmc", vmc_block},
               {"lambda_max", stats.lambda_max},
               {"lambda_median", stats.lambda_median},
               {"flatness_ratio", stats.flatness_ratio},
               {"top_half_max_log_gap", stats.top_half_max_log_gap},
               {"n_eigenvalues", spectrum.size()}};
    if (n <= k_dense_site_cap) {
      const double e0 = ground_state(lat, cpl.J, cpl.g).energy;
      pt["exact_e0"] = e0;
      pt["vmc_relative_offset"] = (vmc_energy - e0) / std::abs(e0);
    }
    points.push_back(std::move(pt));
  }

  json summary;
  summary["points"] = std::move(points);
  return summary;
}

json run_kind_ground_state(const ExperimentPlan& p, const fs::path& dir) {
  const Lattice lat = p.lattice.build();
  const QuenchSchedule sched = p.schedule.resolve(lat);
  const auto cpl = sched.at(p.time.t0);

  json summary;
  auto with = [&](auto& psi) {
    const auto out =
        run_vmc(psi, lat, cpl.J, cpl.g, p.initial_state.vmc, p.seed, p.workers);
    CsvWriter csv(dir / "vmc_history.csv", {"iter", "energy"});
    for (std::size_t i = 0; i < out.history.size(); ++i)
      csv.write_row({std::to_string(i), cell(out.history[i])});
    ensure_dir(dir / "checkpoints");
    CheckpointHeader h{p.ansatz.architecture,
                       p.ansatz.architecture == "rbm" ? p.ansatz.alpha
                                                      : p.ansatz.hidden,
                       p.lattice.rows, p.lattice.cols, "row-major"};
    save_checkpoint(dir / "checkpoints" / "final.txt", h, psi.params());
    summary["energy"] = out.energy;
    summary["energy_se"] = out.energy_se;
    summary["n_iters"] = out.iters;
    if (lat.n_sites() <= k_dense_site_cap) {
      const double e0 = ground_state(lat, cpl.J, cpl.g).energy;
      summary["exact_e0"] = e0;
      summary["relative_offset"] = (out.energy - e0) / std::abs(e0);
    }
  };

  if (p.ansatz.architecture == "gru" && p.ansatz.symmetrized) {
    auto group = build_symmetry_group(lat, p.ansatz.symmetries);
    GruAnsatz inner(lat.n_sites(), p.ansatz.hidden);
    RngStream stream = derive_stream(p.seed, 9);
    inner.init_random(stream, p.ansatz.init_scale, p.initial_state.vmc.sign_init);
    SymmetrizedAnsatz<GruAnsatz> psi(std::move(inner), std::move(group));
    with(psi);
  } else if (p.ansatz.architecture == "gru") {
    GruAnsatz psi(lat.n_sites(), p.ansatz.hidden);
    RngStream stream = derive_stream(p.seed, 9);
    psi.init_random(stream, p.ansatz.init_scale, p.initial_state.vmc.sign_init);
    with(psi);
  } else {
    RbmAnsatz psi(lat.n_sites(), p.ansatz.alpha);
    RngStream stream = derive_stream(p.seed, 9);
    psi.init_random(stream, p.ansatz.init_scale);
    with(psi);
  }
  return summary;
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

RunResult run_plan(const ExperimentPlan& plan, const fs::path& out_dir) {
  validate_plan(plan);
  ensure_dir(out_dir);
  write_json_file(out_dir / "plan.json", plan_to_json(plan));
  write_json_file(out_dir / "resolved_config.json", resolved_config(plan));
  write_text_file(out_dir / "version.txt",
                  std::string("nqsdyn ") + k_version + "\n");

  json summary;
  if (plan.kind == "ground_state") summary = run_kind_ground_state(plan, out_dir);
  else if (plan.kind == "evolve" || plan.kind == "sudden_quench")
    summary = run_kind_evolve(plan, out_dir);
  else if (plan.kind == "kz_single") summary = run_kind_kz_single(plan, out_dir);
  else if (plan.kind == "kz_scan") summary = run_kind_kz_scan(plan, out_dir);
  else if (plan.kind == "dt_scan") summary = run_kind_dt_scan(plan, out_dir);
  else if (plan.kind == "noise_scan") summary = run_kind_noise_scan(plan, out_dir);
  else if (plan.kind == "qgt_spectra") summary = run_kind_qgt(plan, out_dir);
  else throw ConfigError("unknown experiment kind \"" + plan.kind + "\"");

  summary["kind"] = plan.kind;
  summary["name"] = plan.name;
  summary["seed"] = plan.seed;
  write_json_file(out_dir / "summary.json", summary);
  return {out_dir, std::move(summary)};
}

}  // namespace nqs
