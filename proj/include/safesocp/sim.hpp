#pragma once

// Closed-loop execution: solve the min-norm cone program at a fixed control
// period, hold the input, integrate the true dynamics with classical RK4,
// and either halt or acquire data when the program turns infeasible. Also
// the two experiment protocols (offline dataset-size sweep, online
// acquisition) built on top of it.

#include "safesocp/scenario.hpp"
#include "safesocp/sim_types.hpp"

namespace safesocp {

/// One RK4 step of xdot = f(x) + g(x) u with u held constant.
template <typename Scalar>
Vector<Scalar> rk4_step(const AffineDynamics<Scalar>& dyn, const Vector<Scalar>& x,
                        const Vector<Scalar>& u, Scalar dt) {
  const Vector<Scalar> k1 = dyn.drift(x, u);
  const Vector<Scalar> k2 = dyn.drift(x + Scalar(0.5) * dt * k1, u);
  const Vector<Scalar> k3 = dyn.drift(x + Scalar(0.5) * dt * k2, u);
  const Vector<Scalar> k4 = dyn.drift(x + dt * k3, u);
  return x + dt / Scalar(6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

/// Build the worst-case cone pair (stability first, safety second) at x.
template <typename Scalar>
SoccProgram<Scalar> worstcase_pair(const WorstCaseModel<Scalar>& model, const ClfSpec<Scalar>& clf,
                                   const CbfSpec<Scalar>& cbf, const Vector<Scalar>& x) {
  const int m = model.dims.m;
  std::vector<Socc<Scalar>> cones;
  cones.push_back(embed_worstcase(worstcase_clf_coeffs(model, clf, x), m));
  cones.push_back(embed_worstcase(worstcase_cbf_coeffs(model, cbf, x), m));
  return SoccProgram<Scalar>(std::move(cones), m);
}

/// Everything a closed-loop run needs. dataset/oracle are only touched by
/// the acquire policy; the dataset is mutated by the simulation loop alone.
template <typename Scalar>
struct SimEnv {
  AffineDynamics<Scalar> truth;
  WorstCaseModel<Scalar> model;
  ClfSpec<Scalar> clf;
  CbfSpec<Scalar> cbf;
  BarrierData<Scalar> barrier;  // true h for logging and slack bounds
  SolverConfig<Scalar> solver;
  std::optional<BoundB<Scalar>> bound;  // margin diagnostics; defaults to analysis mode
  Dataset<Scalar>* dataset = nullptr;
  const Oracle<Scalar>* oracle = nullptr;
  Box<Scalar> workspace;
  AcquisitionPattern<Scalar> pattern;
};

template <typename Scalar>
Trajectory<Scalar> simulate(const SimConfig<Scalar>& cfg, SimEnv<Scalar>& env) {
  cfg.validate();
  if (env.barrier.h(cfg.x0) < Scalar(0))
    throw DomainError("simulate: x0 must lie in the safe set (h(x0) >= 0)");

  BoundB<Scalar> bound =
      env.bound ? *env.bound
                : BoundB<Scalar>::analysis_pointwise(env.truth, env.clf, env.cbf, env.barrier,
                                                     Scalar(1.5), env.solver,
                                                     SlackInfeasiblePolicy::MarkUnbounded);

  Trajectory<Scalar> traj;
  Vector<Scalar> x = cfg.x0;
  Scalar t = Scalar(0);
  const int max_steps = static_cast<int>(std::ceil(cfg.t_end / cfg.control_period)) + 1;
  traj.termination = Termination::TimeLimit;

  for (int step = 0; step < max_steps; ++step) {
    if (x.norm() <= cfg.convergence_radius) {
      traj.termination = Termination::Converged;
      break;
    }
    if (t > cfg.t_end + Scalar(1e-12)) break;

    SoccProgram<Scalar> prog = worstcase_pair(env.model, env.clf, env.cbf, x);
    SolveResult<Scalar> res = solve_min_norm(prog, env.solver);

    if (res.status == SolveStatus::Infeasible &&
        cfg.stop_policy == StopPolicy::AcquireOnInfeasible) {
      if (!env.dataset || !env.oracle)
        throw DomainError("simulate: acquire policy needs a dataset and an oracle");
      const int added = acquire_on_infeasibility(*env.oracle, *env.dataset, x, env.pattern,
                                                 env.workspace, env.barrier.h);
      traj.acquisitions.push_back({t, x, added, env.dataset->size()});
      prog = worstcase_pair(env.model, env.clf, env.cbf, x);
      res = solve_min_norm(prog, env.solver);
    }

    TrajectoryStep<Scalar> row;
    row.t = t;
    row.x = x;
    row.status = res.status;
    row.phase1_t = res.phase1_value;
    row.h = env.barrier.h(x);
    row.V = env.clf.V(x);
    row.dataset_size = env.dataset ? env.dataset->size() : 0;
    if (x.norm() > Scalar(0)) {
      const CompatMargins<Scalar> cm =
          check_worstcase_compat<Scalar>(env.model, env.clf, env.cbf, bound, x);
      row.clf_margin = cm.clf_margin;
      row.cbf_margin = cm.cbf_margin;
    }
    if (res.status == SolveStatus::Feasible) {
      row.u = res.u_star;
      row.control_applied = true;
    } else {
      row.u = Vector<Scalar>::Constant(prog.m, std::numeric_limits<Scalar>::quiet_NaN());
      row.control_applied = false;
    }
    traj.steps.push_back(row);

    if (res.status == SolveStatus::MaxIterations) {
      traj.termination = Termination::SolverFailure;
      break;
    }
    if (res.status == SolveStatus::Infeasible) {
      traj.termination = Termination::Infeasible;
      break;
    }

    const Scalar dt = cfg.control_period / Scalar(cfg.substeps);
    for (int sub = 0; sub < cfg.substeps; ++sub) x = rk4_step(env.truth, x, res.u_star, dt);
    t += cfg.control_period;

    if (x.norm() > cfg.blowup_norm) {
      traj.termination = Termination::BlowUp;
      break;
    }
  }

  traj.final_time = t;
  traj.final_state = x;
  return traj;
}

// ---------------------------------------------------------------------------
// Offline experiment: nested datasets of increasing size, halt on the first
// infeasible step, record how close each run gets to the origin.

template <typename Scalar>
struct OfflineStage {
  int cumulative_points;  // dataset size after this stage
  Box<Scalar> region;     // where this stage's points are sampled
};

template <typename Scalar>
struct OfflineExperimentConfig {
  std::vector<OfflineStage<Scalar>> stages;  // cumulative_points strictly increasing
  SimConfig<Scalar> sim;
  LipschitzConstants<Scalar> lip;
  std::uint64_t seed = 1;
};

template <typename Scalar>
struct OfflineRun {
  int n_points = 0;
  Trajectory<Scalar> trajectory;
  Scalar closest_approach = std::numeric_limits<Scalar>::infinity();
  // Step index where the margin conditions first stop holding; -1 if never.
  long first_condition_failure = -1;
  std::shared_ptr<Dataset<Scalar>> dataset;
};

/// Draw the master point sequence for the nested datasets: stage k extends
/// the sequence inside its region (rejection-sampled to the safe set).
template <typename Scalar>
std::vector<Vector<Scalar>> nested_sample_points(const std::vector<OfflineStage<Scalar>>& stages,
                                                 const BarrierData<Scalar>& barrier, Rng& rng) {
  std::vector<Vector<Scalar>> pts;
  for (const auto& st : stages) {
    while (static_cast<int>(pts.size()) < st.cumulative_points) {
      Vector<Scalar> x = st.region.sample(rng);
      int guard = 0;
      while (barrier.h(x) < Scalar(0) && ++guard < 10000) x = st.region.sample(rng);
      if (guard >= 10000) throw DomainError("nested_sample_points: region is almost entirely unsafe");
      pts.push_back(x);
    }
  }
  return pts;
}

template <typename Scalar>
std::vector<OfflineRun<Scalar>> experiment_offline_n(const Scenario<Scalar>& sc,
                                                     const OfflineExperimentConfig<Scalar>& cfg,
                                                     const SolverConfig<Scalar>& solver = {}) {
  if (cfg.stages.empty()) throw DomainError("experiment_offline_n: no stages");
  for (std::size_t i = 1; i < cfg.stages.size(); ++i)
    if (cfg.stages[i].cumulative_points <= cfg.stages[i - 1].cumulative_points)
      throw DomainError("experiment_offline_n: stage sizes must increase");

  Rng rng(cfg.seed);
  const Oracle<Scalar> oracle{sc.truth};
  const std::vector<Vector<Scalar>> master = nested_sample_points(cfg.stages, sc.barrier, rng);

  std::vector<OfflineRun<Scalar>> runs;
  for (const auto& st : cfg.stages) {
    OfflineRun<Scalar> run;
    run.n_points = st.cumulative_points;
    run.dataset = std::make_shared<Dataset<Scalar>>(sc.dims.n, sc.dims.m);
    for (int i = 0; i < st.cumulative_points; ++i) run.dataset->insert_from(oracle, master[i]);

    SimEnv<Scalar> env;
    env.truth = sc.truth;
    env.model = nn_model(sc, *run.dataset, cfg.lip);
    env.clf = sc.clf;
    env.cbf = sc.cbf;
    env.barrier = sc.barrier;
    env.solver = solver;
    env.dataset = run.dataset.get();

    SimConfig<Scalar> sim_cfg = cfg.sim;
    sim_cfg.stop_policy = StopPolicy::HaltOnInfeasible;
    run.trajectory = simulate(sim_cfg, env);

    for (std::size_t k = 0; k < run.trajectory.steps.size(); ++k) {
      const auto& row = run.trajectory.steps[k];
      run.closest_approach = std::min(run.closest_approach, row.x.norm());
      if (run.first_condition_failure < 0 &&
          !(row.clf_margin > Scalar(0) && row.cbf_margin > Scalar(0)))
        run.first_condition_failure = static_cast<long>(k);
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Online experiment: start from a few measurements near each initial
// condition and acquire more whenever the program turns infeasible.

template <typename Scalar>
struct OnlineExperimentConfig {
  std::vector<Vector<Scalar>> initial_conditions;
  int initial_points = 25;
  Scalar initial_halfwidth = Scalar(0.5);  // sampling box half-width around x0
  SimConfig<Scalar> sim;
  LipschitzConstants<Scalar> lip;
  Box<Scalar> workspace;
  AcquisitionPattern<Scalar> pattern;
  std::uint64_t seed = 1;
};

template <typename Scalar>
struct OnlineRun {
  Vector<Scalar> x0;
  Trajectory<Scalar> trajectory;
  std::shared_ptr<Dataset<Scalar>> dataset;
  std::size_t initial_size = 0;
};

template <typename Scalar>
std::vector<OnlineRun<Scalar>> experiment_online(const Scenario<Scalar>& sc,
                                                 const OnlineExperimentConfig<Scalar>& cfg,
                                                 const SolverConfig<Scalar>& solver = {}) {
  if (cfg.initial_conditions.empty()) throw DomainError("experiment_online: no initial conditions");
  const Oracle<Scalar> oracle{sc.truth};

  std::vector<OnlineRun<Scalar>> runs;
  for (std::size_t run_idx = 0; run_idx < cfg.initial_conditions.size(); ++run_idx) {
    const Vector<Scalar>& x0 = cfg.initial_conditions[run_idx];
    Rng rng(cfg.seed + run_idx);

    OnlineRun<Scalar> run;
    run.x0 = x0;
    run.dataset = std::make_shared<Dataset<Scalar>>(sc.dims.n, sc.dims.m);
    const Box<Scalar> init_box(x0.array() - cfg.initial_halfwidth,
                               x0.array() + cfg.initial_halfwidth);
    while (static_cast<int>(run.dataset->size()) < cfg.initial_points) {
      Vector<Scalar> p = init_box.sample(rng);
      if (sc.barrier.h(p) < Scalar(0) || !cfg.workspace.contains(p)) continue;
      run.dataset->insert_from(oracle, p);
    }
    run.initial_size = run.dataset->size();

    SimEnv<Scalar> env;
    env.truth = sc.truth;
    env.model = nn_model(sc, *run.dataset, cfg.lip);
    env.clf = sc.clf;
    env.cbf = sc.cbf;
    env.barrier = sc.barrier;
    env.solver = solver;
    env.dataset = run.dataset.get();
    env.oracle = &oracle;
    env.workspace = cfg.workspace;
    env.pattern = cfg.pattern;

    SimConfig<Scalar> sim_cfg = cfg.sim;
    sim_cfg.x0 = x0;
    sim_cfg.stop_policy = StopPolicy::AcquireOnInfeasible;
    run.trajectory = simulate(sim_cfg, env);
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace safesocp
