#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "nqs/ansatz.hpp"
#include "nqs/exact.hpp"
#include "nqs/stepper.hpp"

using namespace nqs;
using cd = std::complex<double>;

TEST_CASE("adam takes a bias-corrected first step of size eta") {
  AdamState st;
  AdamConfig cfg;
  Eigen::VectorXd params = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd grad(3);
  grad << 2.0, -0.5, 1e-3;

  adam_update(st, cfg, 0.01, grad, params);
  // First step: m-hat = g, v-hat = g^2, so the move is eta * sign(g) up to
  // the epsilon in the denominator.
  for (int k = 0; k < 3; ++k) {
    const double expect = -0.01 * grad[k] / (std::abs(grad[k]) + cfg.eps);
    CHECK(params[k] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(params[k] + 0.01 * (grad[k] > 0 ? 1.0 : -1.0)) < 1e-6);
  }

  // Zero gradient moves nothing, including after a state reset.
  AdamState st2;
  Eigen::VectorXd frozen = Eigen::VectorXd::Constant(4, 1.5);
  adam_update(st2, cfg, 0.1, Eigen::VectorXd::Zero(4), frozen);
  CHECK((frozen.array() == 1.5).all());

  // A size mismatch resets the moments instead of crashing.
  Eigen::VectorXd wider = Eigen::VectorXd::Zero(7);
  adam_update(st, cfg, 0.01, Eigen::VectorXd::Zero(7), wider);
  CHECK(st.m.size() == 7);
}

TEST_CASE("step-size policies validate and interpolate") {
  CHECK_THROWS_WITH_AS(DtPolicy::fixed_dt(0.0).validate(),
                       doctest::Contains("invalid time step"),
                       std::invalid_argument);
  CHECK_THROWS_AS(DtPolicy::fixed_dt(-0.1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(DtPolicy::linear(0.0, 0.01).validate(), std::invalid_argument);
  CHECK_NOTHROW(DtPolicy::fixed_dt(0.02).validate());

  const DtPolicy lin = DtPolicy::linear(0.02, 0.005);
  CHECK(lin.at(0.0, 0.0, 2.0) == doctest::Approx(0.02));
  CHECK(lin.at(2.0, 0.0, 2.0) == doctest::Approx(0.005));
  CHECK(lin.at(1.0, 0.0, 2.0) == doctest::Approx(0.0125));
  CHECK(lin.at(5.0, 0.0, 2.0) == doctest::Approx(0.005));  // clamped

  const DtPolicy fix = DtPolicy::fixed_dt(0.025);
  CHECK(fix.at(1.7, 0.0, 2.0) == 0.025);

  StepConfig bad;
  bad.n_opt_steps = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("dedup collapses repeats in first-occurrence order") {
  std::vector<std::uint64_t> sigmas = {5, 3, 5, 5, 9, 3};
  Eigen::VectorXcd logs(6);
  logs << cd(1, 0), cd(2, 0), cd(1, 0), cd(1, 0), cd(3, 0), cd(2, 0);
  Eigen::VectorXd weights;

  detail::dedup_batch(sigmas, logs, weights);
  REQUIRE(sigmas.size() == 3);
  CHECK(sigmas[0] == 5);
  CHECK(sigmas[1] == 3);
  CHECK(sigmas[2] == 9);
  CHECK(weights[0] == 3.0);
  CHECK(weights[1] == 2.0);
  CHECK(weights[2] == 1.0);
  CHECK(logs[0] == cd(1, 0));
  CHECK(logs[1] == cd(2, 0));
  CHECK(logs[2] == cd(3, 0));
}

TEST_CASE("zero hamiltonian makes the step objective exactly flat") {
  const Lattice lat = build_lattice(1, 2, Boundary::open);
  const auto sched = QuenchSchedule::constant(0.0, 0.0);
  GruAnsatz psi(2, 3);
  RngStream stream = derive_stream(21);
  psi.init_random(stream, 0.4);
  const GruAnsatz frozen = psi;

  const auto terms =
      realize_terms(propagator_terms(named_tableau("heun"), 0.0, 0.05), sched);
  std::vector<std::uint64_t> sigmas = {0, 1, 2, 3};
  Eigen::VectorXcd logs(4);
  GruAnsatz::BatchCache cache;
  psi.log_psi_batch(sigmas, logs, &cache);
  const Eigen::VectorXd weights = (2.0 * logs.real().array()).exp();

  const auto ev = evaluate_distance(frozen, psi, lat, terms, sigmas, logs,
                                    weights, &cache, 1.0, 1);
  CHECK(ev.distance == 0.0);
  CHECK(std::abs(ev.f_bar - cd(1.0, 0.0)) < 1e-15);
  CHECK(ev.gradient.cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(
      evaluate_distance(frozen, psi, lat, terms, std::vector<std::uint64_t>{},
                        Eigen::VectorXcd(), Eigen::VectorXd(), nullptr, 1.0, 1),
      std::invalid_argument);
}

TEST_CASE("orthogonal states sit at distance one") {
  const Lattice lat = build_lattice(1, 1, Boundary::open);
  const auto sched = QuenchSchedule::constant(0.0, 0.0);
  const GruAnsatz frozen = GruAnsatz::pinned_uniform(1, 2, /*bit=*/0);
  const GruAnsatz trial = GruAnsatz::pinned_uniform(1, 2, /*bit=*/1);

  const auto terms =
      realize_terms(propagator_terms(named_tableau("heun"), 0.0, 0.01), sched);
  std::vector<std::uint64_t> sigmas = {0, 1};
  Eigen::VectorXcd logs(2);
  trial.log_psi_batch(sigmas, logs);
  const Eigen::VectorXd weights = (2.0 * logs.real().array()).exp();

  const auto ev = evaluate_distance(frozen, trial, lat, terms, sigmas, logs,
                                    weights, nullptr, 1.0, 1);
  CHECK(ev.distance == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("distance and gradient match dense overlap algebra") {
  const Lattice lat = build_lattice(1, 2, Boundary::open);
  const auto sched = QuenchSchedule::constant(1.0, 1.3);
  const double dt = 0.01;
  const auto terms =
      realize_terms(propagator_terms(named_tableau("heun"), 0.0, dt), sched);
  const Eigen::MatrixXcd t_dense = dense_terms_matrix(lat, terms);

  GruAnsatz frozen(2, 3);
  RngStream fs = derive_stream(31);
  frozen.init_random(fs, 0.4);
  GruAnsatz trial(2, 3);
  RngStream ts = derive_stream(32);
  trial.init_random(ts, 0.4);

  const Eigen::VectorXcd t_psi = t_dense * enumerate_ansatz(frozen).amps;
  // Distance as a plain function of the trial parameter vector, evaluated by
  // full enumeration with Born weights that move with the parameters.
  auto dense_distance = [&](const Eigen::VectorXd& theta) {
    GruAnsatz probe(2, 3);
    probe.params() = theta;
    const Eigen::VectorXcd amps = enumerate_ansatz(probe).amps;
    cd overlap = 0.0;
    for (int s = 0; s < 4; ++s) overlap += std::conj(amps[s]) * t_psi[s];
    return 1.0 - std::norm(overlap);
  };

  std::vector<std::uint64_t> sigmas = {0, 1, 2, 3};
  Eigen::VectorXcd logs(4);
  GruAnsatz::BatchCache cache;
  trial.log_psi_batch(sigmas, logs, &cache);
  const Eigen::VectorXd weights = (2.0 * logs.real().array()).exp();
  const auto ev = evaluate_distance(frozen, trial, lat, terms, sigmas, logs,
                                    weights, &cache, 1.0, 1);

  CHECK(ev.distance == doctest::Approx(dense_distance(trial.params())).epsilon(1e-12));

  const double h = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < trial.n_params(); ++k) {
    Eigen::VectorXd up = trial.params(), dn = trial.params();
    up[k] += h;
    dn[k] -= h;
    const double fd = (dense_distance(up) - dense_distance(dn)) / (2.0 * h);
    const double scale = std::max(std::abs(fd), 1.0);
    worst = std::max(worst, std::abs(ev.gradient[k] - fd) / scale);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("residual error of an eigenstate has a closed form") {
  // The equal-amplitude state is an eigenstate of the pure transverse field,
  // so the overlap objective starts at its minimum, the gradient vanishes
  // identically, and the optimizer never moves. The residual is then exactly
  // the norm defect of the truncated propagator polynomial at x = g N dt.
  const Lattice lat = build_lattice(1, 2, Boundary::open);
  const double g = 0.9;
  const auto sched = QuenchSchedule::constant(0.0, g);
  const double dt = 0.01;
  const double x = g * 2.0 * dt;

  StepConfig cfg;
  cfg.n_opt_steps = 5;
  cfg.n_samples = 64;
  cfg.eta = 0.01;

  GruAnsatz e1 = GruAnsatz::paramagnetic_product(2, 2);
  const auto r1 =
      variational_step(e1, lat, sched, named_tableau("euler"), 0.0, dt, cfg, 3, 1, 1);
  REQUIRE_FALSE(r1.aborted);
  CHECK((e1.params().array() == 0.0).all());
  CHECK(r1.epsilon == doctest::Approx(-x * x).epsilon(1e-10));
  CHECK(r1.distance_final == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // Euler is not near-unitary, so the norm correction was estimated.
  CHECK(r1.tdagt == doctest::Approx(1.0 + x * x).epsilon(1e-10));

  GruAnsatz e2 = GruAnsatz::paramagnetic_product(2, 2);
  const auto r2 =
      variational_step(e2, lat, sched, named_tableau("heun"), 0.0, dt, cfg, 3, 1, 1);
  REQUIRE_FALSE(r2.aborted);
  CHECK(r2.epsilon == doctest::Approx(-std::pow(x, 4) / 4.0).epsilon(1e-6));
  CHECK(r2.tdagt == 1.0);  // near-unitary: no correction estimated

  // Zero Hamiltonian: the step is the identity and everything is exactly flat.
  GruAnsatz e3(2, 3);
  RngStream stream = derive_stream(77);
  e3.init_random(stream, 0.3);
  const Eigen::VectorXd before = e3.params();
  const auto sched0 = QuenchSchedule::constant(0.0, 0.0);
  const auto r3 =
      variational_step(e3, lat, sched0, named_tableau("heun"), 0.0, dt, cfg, 3, 1, 1);
  CHECK((e3.params() - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(r3.epsilon) < 1e-15);

  CHECK_THROWS_WITH_AS(
      variational_step(e3, lat, sched0, named_tableau("heun"), 0.0, 0.0, cfg, 3, 1, 1),
      doctest::Contains("invalid time step"), std::invalid_argument);
}

TEST_CASE("evolution trajectories are reproducible and seeded") {
  const Lattice lat = build_lattice(1, 1, Boundary::open);
  const auto sched = QuenchSchedule::constant(0.0, 1.0);

  EvolveOptions opt;
  opt.t0 = 0.0;
  opt.t_final = 0.05;
  opt.dt_policy = DtPolicy::fixed_dt(0.01);
  opt.step.n_opt_steps = 30;
  opt.step.n_samples = 100;
  opt.step.eta = 0.01;
  opt.seed = 12;

  auto run = [&](std::uint64_t seed) {
    EvolveOptions o = opt;
    o.seed = seed;
    GruAnsatz psi = GruAnsatz::paramagnetic_product(1, 2);
    // Nudge off the eigenstate so the optimizer genuinely works.
    psi.params()[0] = 0.3;
    auto traj = evolve(psi, lat, sched, named_tableau("heun"), o);
    return std::make_pair(psi.params(), traj);
  };

  auto [p1, t1] = run(12);
  auto [p2, t2] = run(12);
  auto [p3, t3] = run(13);

  REQUIRE(t1.size() == 6);  // initial point plus five steps
  CHECK(t1[0].step == 0);
  CHECK(t1[0].epsilon == 0.0);
  for (int i = 1; i < 6; ++i) {
    CHECK(t1[i].time > t1[i - 1].time);
    CHECK(t1[i].dt == doctest::Approx(0.01));
  }
  CHECK(t1.back().time == doctest::Approx(0.05).epsilon(1e-12));

  CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].epsilon == t2[i].epsilon);
    CHECK(t1[i].obs.sx == t2[i].obs.sx);
    CHECK(t1[i].obs.energy == t2[i].obs.energy);
  }
  CHECK((p1 - p3).cwiseAbs().maxCoeff() > 0.0);

  // Checkpoint callback fires at the start and at the final step.
  std::vector<int> cp_steps;
  EvolveOptions o = opt;
  o.checkpoint_stride = 2;
  o.on_checkpoint = [&](int step, double, const Eigen::VectorXd&) {
    cp_steps.push_back(step);
  };
  GruAnsatz psi = GruAnsatz::paramagnetic_product(1, 2);
  psi.params()[0] = 0.3;
  evolve(psi, lat, sched, named_tableau("heun"), o);
  REQUIRE(cp_steps.size() == 4);
  CHECK(cp_steps[0] == 0);
  CHECK(cp_steps[1] == 2);
  CHECK(cp_steps[2] == 4);
  CHECK(cp_steps[3] == 5);
}
