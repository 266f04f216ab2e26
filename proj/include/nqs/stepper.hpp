#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "nqs/ansatz.hpp"
#include "nqs/lattice.hpp"
#include "nqs/local.hpp"
#include "nqs/observables.hpp"
#include "nqs/propagator.hpp"
#include "nqs/rng.hpp"

namespace nqs {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;

  void reset(Eigen::Index n) {
    m = Eigen::VectorXd::Zero(n);
    v = Eigen::VectorXd::Zero(n);
    t = 0;
  }
};

// Bias-corrected Adam update, applied in place.
inline void adam_update(AdamState& st, const AdamConfig& cfg, double eta,
                        const Eigen::VectorXd& grad, Eigen::VectorXd& params) {
  if (st.m.size() != grad.size()) st.reset(grad.size());
  ++st.t;
  st.m = cfg.beta1 * st.m + (1.0 - cfg.beta1) * grad;
  st.v = cfg.beta2 * st.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double mc = 1.0 - std::pow(cfg.beta1, double(st.t));
  const double vc = 1.0 - std::pow(cfg.beta2, double(st.t));
  params.array() -=
      eta * (st.m.array() / mc) / ((st.v.array() / vc).sqrt() + cfg.eps);
}

// Step-size schedule across an evolution window. The linearly decreasing
// policy interpolates from dt_start at t0 to dt_end at t_final, which front
// loads resolution where quench ramps end steeply.
struct DtPolicy {
  enum class Kind { fixed, linear_decreasing };
  Kind kind = Kind::fixed;
  double dt = 0.0;
  double dt_start = 0.0;
  double dt_end = 0.0;

  static DtPolicy fixed_dt(double step) { return {Kind::fixed, step, 0.0, 0.0}; }
  static DtPolicy linear(double start, double end) {
    return {Kind::linear_decreasing, 0.0, start, end};
  }

  double at(double t, double t0, double t_final) const {
    if (kind == Kind::fixed) return dt;
    const double span = t_final - t0;
    const double frac = span > 0.0 ? (t - t0) / span : 0.0;
    return dt_start + (dt_end - dt_start) * std::clamp(frac, 0.0, 1.0);
  }

  void validate() const {
    if (kind == Kind::fixed) {
      if (!(dt > 0.0)) throw std::invalid_argument("invalid time step: dt must be > 0");
    } else {
      if (!(dt_start > 0.0) || !(dt_end > 0.0))
        throw std::invalid_argument("invalid time step: dt_start/dt_end must be > 0");
    }
  }
};

// Hyperparameters of the per-step overlap optimization.
struct StepConfig {
  int n_opt_steps = 100;
  double eta = 0.01;
  int n_samples = 1000;
  AdamConfig adam;

  void validate() const {
    if (n_opt_steps < 1) throw std::invalid_argument("n_opt_steps must be >= 1");
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  }
};

struct DistanceEval {
  double distance = 0.0;
  std::complex<double> f_bar{0.0, 0.0};
  double denom = 1.0;
  Eigen::VectorXd gradient;
};

// Overlap objective between a trial state and the propagated frozen state:
//   D = 1 - |mean T_loc|^2 / denom,  T_loc(s) = <s|T|psi_frozen> / psi_trial(s),
// with rows drawn from (or weighted by) the trial state. denom carries the
// <T'T> norm correction for schemes that are not near-unitary; pass 1 for the
// ones that are. When trial_cache is non-null the gradient with respect to
// the trial parameters is evaluated:
//   grad_k = -2/denom * Re( conj(F) * mean[ conj(O_k) (T_loc - F) ] ),
// the baseline -F inside the bracket removes the exact-cancellation part and
// costs nothing extra.
template <SampledAnsatz A>
DistanceEval evaluate_distance(const A& frozen, const A& trial, const Lattice& lat,
                               const std::vector<RealizedTerm>& terms,
                               std::span<const std::uint64_t> sigmas,
                               const Eigen::VectorXcd& trial_logs,
                               const Eigen::VectorXd& weights,
                               const typename A::BatchCache* trial_cache,
                               double denom, int n_workers) {
  DistanceEval ev;
  ev.denom = denom;
  const auto batch = static_cast<Eigen::Index>(sigmas.size());
  if (batch == 0) throw std::invalid_argument("evaluate_distance: empty batch");

  Eigen::VectorXcd t_loc(batch);
  local_values_batch(frozen, lat, terms, sigmas, trial_logs, n_workers, t_loc);

  const bool weighted = weights.size() > 0;
  Eigen::VectorXd w;
  if (weighted) {
    w = weights / weights.sum();
  } else {
    w = Eigen::VectorXd::Constant(batch, 1.0 / double(batch));
  }
  ev.f_bar = (w.cast<std::complex<double>>().array() * t_loc.array()).sum();
  ev.distance = 1.0 - std::norm(ev.f_bar) / denom;

  if (trial_cache != nullptr) {
    RowMatrixXd o_re, o_im;
    trial.log_derivatives_batch(sigmas, *trial_cache, o_re, o_im);
    Eigen::VectorXcd v =
        (std::conj(ev.f_bar) * (t_loc.array() - ev.f_bar) * w.cast<std::complex<double>>().array())
            .matrix();
    ev.gradient = (-2.0 / denom) *
                  (o_re.transpose() * v.real() + o_im.transpose() * v.imag());
  }
  return ev;
}

// Residual error of a completed step: 1 - |mean T_loc|^2 with sigmas/logs
// drawn from the updated state. No norm correction, so non-unitary schemes
// show their norm defect here.
template <SampledAnsatz A>
double residual_epsilon(const A& frozen, const Lattice& lat,
                        const std::vector<RealizedTerm>& terms,
                        std::span<const std::uint64_t> sigmas,
                        const Eigen::VectorXcd& logs, int n_workers) {
  Eigen::VectorXcd t_loc(static_cast<Eigen::Index>(sigmas.size()));
  local_values_batch(frozen, lat, terms, sigmas, logs, n_workers, t_loc);
  return 1.0 - std::norm(t_loc.mean());
}

struct StepRecord {
  double t0 = 0.0;
  double dt = 0.0;
  double epsilon = 0.0;
  double distance_final = 0.0;
  double tdagt = 1.0;
  std::vector<double> loss_history;
  bool aborted = false;
  std::string abort_reason;
};

namespace detail {

inline void fill_streams(std::vector<RngStream>& streams, std::uint64_t master,
                         std::uint64_t purpose, std::uint64_t step,
                         std::uint64_t iter, int count) {
  streams.clear();
  streams.reserve(count);
  for (int s = 0; s < count; ++s)
    streams.push_back(derive_stream(master, purpose, step, iter,
                                    static_cast<std::uint64_t>(s)));
}

// Collapses repeated configurations into (unique configs, multiplicities).
// Weighted means over the result are bit-for-bit identical reorderings of the
// raw means, but derivative evaluations only pay for distinct rows; on small
// lattices the sample batch covers far fewer configurations than it has
// samples. First-occurrence order keeps downstream sums deterministic.
inline void dedup_batch(std::vector<std::uint64_t>& sigmas, Eigen::VectorXcd& logs,
                        Eigen::VectorXd& weights) {
  const std::size_t n = sigmas.size();
  std::unordered_map<std::uint64_t, std::size_t> index;
  index.reserve(n);
  std::vector<std::uint64_t> uniq;
  std::vector<double> counts;
  uniq.reserve(n);
  counts.reserve(n);
  Eigen::VectorXcd uniq_logs(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = index.try_emplace(sigmas[i], uniq.size());
    if (inserted) {
      uniq_logs[static_cast<Eigen::Index>(uniq.size())] =
          logs[static_cast<Eigen::Index>(i)];
      uniq.push_back(sigmas[i]);
      counts.push_back(1.0);
    } else {
      counts[it->second] += 1.0;
    }
  }
  sigmas = std::move(uniq);
  logs = uniq_logs.head(static_cast<Eigen::Index>(sigmas.size())).eval();
  weights = Eigen::Map<const Eigen::VectorXd>(counts.data(),
                                              static_cast<Eigen::Index>(counts.size()));
}

}  // namespace detail

// Advances the ansatz by one window [t, t + dt]: freezes a copy, expands the
// step operator, then runs Adam on the overlap distance with fresh samples
// from the trial state at every iteration (the trial starts warm, at the
// frozen parameters). On return the ansatz holds the optimized parameters and
// the record carries the residual error measured on one more independent
// batch; that batch is handed back through final_sigmas/final_logs so callers
// can reuse it for observables. A non-finite loss aborts the step: parameters
// are rolled back to the frozen copy and the record says why.
template <SampledAnsatz A>
StepRecord variational_step(A& ansatz, const Lattice& lat,
                            const QuenchSchedule& sched,
                            const ButcherTableau& tableau, double t, double dt,
                            const StepConfig& cfg, std::uint64_t master_seed,
                            std::int64_t step_index, int n_workers,
                            std::vector<std::uint64_t>* final_sigmas = nullptr,
                            Eigen::VectorXcd* final_logs = nullptr) {
  cfg.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("invalid time step: dt must be > 0");

  StepRecord rec;
  rec.t0 = t;
  rec.dt = dt;
  rec.loss_history.reserve(cfg.n_opt_steps);

  const A frozen = ansatz;
  const auto terms = realize_terms(propagator_terms(tableau, t, dt), sched);
  const auto step_tag = static_cast<std::uint64_t>(step_index);

  std::vector<RngStream> streams;
  std::vector<std::uint64_t> sigmas;
  Eigen::VectorXcd logs;

  double denom = 1.0;
  if (!tableau.near_unitary) {
    // One norm-correction estimate per step, on the frozen state. It is
    // constant with respect to the trial parameters, so the optimizer only
    // needs its value.
    const auto tt = realize_terms(tdagt_terms(propagator_terms(tableau, t, dt)), sched);
    detail::fill_streams(streams, master_seed, 2, step_tag, 0, cfg.n_samples);
    typename A::BatchCache cache;
    frozen.sample_batch(streams, sigmas, logs, &cache);
    Eigen::VectorXcd tt_loc(static_cast<Eigen::Index>(sigmas.size()));
    local_values_batch(frozen, lat, tt, sigmas, logs, n_workers, tt_loc);
    denom = tt_loc.mean().real();
    if (!(denom > 0.0)) {
      rec.aborted = true;
      rec.abort_reason = "norm correction <T'T> = " + std::to_string(denom) +
                         " is not positive; step abandoned";
      return rec;
    }
  }
  rec.tdagt = denom;

  AdamState adam;
  adam.reset(ansatz.params().size());
  Eigen::VectorXd weights;
  for (int it = 0; it < cfg.n_opt_steps; ++it) {
    detail::fill_streams(streams, master_seed, 1, step_tag,
                         static_cast<std::uint64_t>(it), cfg.n_samples);
    typename A::BatchCache cache;
    ansatz.sample_batch(streams, sigmas, logs, &cache);
    const std::size_t raw = sigmas.size();
    detail::dedup_batch(sigmas, logs, weights);
    if (sigmas.size() < raw) {
      // Rebuild the derivative cache on the collapsed batch; the forward pass
      // is much cheaper than the derivative pass it feeds.
      ansatz.log_psi_batch(sigmas, logs, &cache);
    } else {
      weights.resize(0);
    }
    const auto ev = evaluate_distance(frozen, ansatz, lat, terms, sigmas, logs,
                                      weights, &cache, denom, n_workers);
    if (!std::isfinite(ev.distance) || !ev.gradient.allFinite()) {
      ansatz.params() = frozen.params();
      rec.aborted = true;
      rec.abort_reason = "non-finite loss or gradient at optimizer iteration " +
                         std::to_string(it);
      return rec;
    }
    rec.loss_history.push_back(ev.distance);
    adam_update(adam, cfg.adam, cfg.eta, ev.gradient, ansatz.params());
  }
  rec.distance_final = rec.loss_history.empty() ? 0.0 : rec.loss_history.back();

  detail::fill_streams(streams, master_seed, 3, step_tag, 0, cfg.n_samples);
  typename A::BatchCache cache;
  ansatz.sample_batch(streams, sigmas, logs, &cache);
  rec.epsilon = residual_epsilon(frozen, lat, terms, sigmas, logs, n_workers);
  if (final_sigmas != nullptr) *final_sigmas = std::move(sigmas);
  if (final_logs != nullptr) *final_logs = std::move(logs);
  return rec;
}

struct TrajectoryPoint {
  int step = 0;
  double time = 0.0;
  double dt = 0.0;
  double epsilon = 0.0;
  double cumulative_epsilon = 0.0;
  double distance_final = 0.0;
  double tdagt = 1.0;
  ObservableSnapshot obs;
  std::vector<double> loss_history;
};

struct EvolveOptions {
  double t0 = 0.0;
  double t_final = 0.0;
  DtPolicy dt_policy;
  StepConfig step;
  std::uint64_t seed = 1;
  int n_workers = 1;
  bool measure_each_step = true;
  // Ground-state energy reference for injected-energy fields; may be empty.
  std::function<double(double)> e0_of_t;
  // Invoked with the parameter vector at the initial point, every
  // checkpoint_stride completed steps (when > 0), and after the final step.
  int checkpoint_stride = 0;
  std::function<void(int, double, const Eigen::VectorXd&)> on_checkpoint;
  std::function<void(const TrajectoryPoint&)> on_step;
};

// Runs the full time evolution. The returned trajectory starts with one
// measurement-only point at t0; a step that aborts raises std::runtime_error
// since continuing from rolled-back parameters would silently freeze the
// state.
template <SampledAnsatz A>
std::vector<TrajectoryPoint> evolve(A& ansatz, const Lattice& lat,
                                    const QuenchSchedule& sched,
                                    const ButcherTableau& tableau,
                                    const EvolveOptions& opt) {
  opt.dt_policy.validate();
  opt.step.validate();
  if (!(opt.t_final > opt.t0))
    throw std::invalid_argument("evolve: t_final must exceed t0");

  std::vector<TrajectoryPoint> traj;
  std::vector<RngStream> streams;
  std::vector<std::uint64_t> sigmas;
  Eigen::VectorXcd logs;

  auto measure_point = [&](double time, std::span<const std::uint64_t> cfgs,
                           const Eigen::VectorXcd& cfg_logs) {
    const auto cpl = sched.at(time);
    std::optional<double> e0;
    if (opt.e0_of_t) e0 = opt.e0_of_t(time);
    return measure(ansatz, lat, cpl.J, cpl.g, time, cfgs, cfg_logs,
                   Eigen::VectorXd(), opt.n_workers, e0);
  };

  TrajectoryPoint start;
  start.time = opt.t0;
  if (opt.measure_each_step) {
    detail::fill_streams(streams, opt.seed, 4, 0, 0, opt.step.n_samples);
    ansatz.sample_batch(streams, sigmas, logs, nullptr);
    start.obs = measure_point(opt.t0, sigmas, logs);
  }
  traj.push_back(std::move(start));
  if (opt.on_checkpoint) opt.on_checkpoint(0, opt.t0, ansatz.params());

  double t = opt.t0;
  double cumulative = 0.0;
  int step = 0;
  const double t_eps = 1e-12 * std::max(1.0, std::abs(opt.t_final));
  while (t < opt.t_final - t_eps) {
    double dt = opt.dt_policy.at(t, opt.t0, opt.t_final);
    dt = std::min(dt, opt.t_final - t);
    ++step;
    auto rec = variational_step(ansatz, lat, sched, tableau, t, dt, opt.step,
                                opt.seed, step, opt.n_workers, &sigmas, &logs);
    if (rec.aborted)
      throw std::runtime_error("evolve: step " + std::to_string(step) +
                               " at t = " + std::to_string(t) + " aborted: " +
                               rec.abort_reason);
    t += dt;
    cumulative += rec.epsilon;

    TrajectoryPoint pt;
    pt.step = step;
    pt.time = t;
    pt.dt = dt;
    pt.epsilon = rec.epsilon;
    pt.cumulative_epsilon = cumulative;
    pt.distance_final = rec.distance_final;
    pt.tdagt = rec.tdagt;
    pt.loss_history = std::move(rec.loss_history);
    if (opt.measure_each_step) pt.obs = measure_point(t, sigmas, logs);
    if (opt.on_checkpoint &&
        ((opt.checkpoint_stride > 0 && step % opt.checkpoint_stride == 0) ||
         t >= opt.t_final - t_eps))
      opt.on_checkpoint(step, t, ansatz.params());
    if (opt.on_step) opt.on_step(pt);
    traj.push_back(std::move(pt));
  }
  return traj;
}

}  // namespace nqs
