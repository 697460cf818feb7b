#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "safesocp/io.hpp"
#include "safesocp/sim.hpp"

using namespace safesocp;

namespace {

VectorD vec2(double a, double b) {
  VectorD v(2);
  v << a, b;
  return v;
}

SimEnv<double> exact_env(const Scenario<double>& sc) {
  SimEnv<double> env;
  env.truth = sc.truth;
  env.model = exact_model(sc);
  env.clf = sc.clf;
  env.cbf = sc.cbf;
  env.barrier = sc.barrier;
  return env;
}

}  // namespace

TEST_CASE("rk4 matches the closed form of a held linear system") {
  const auto sc = make_planar_scenario<double>();
  const VectorD x0 = vec2(1.0, -2.0);
  const VectorD u = vec2(0.3, 0.7);
  // xdot = x + u  =>  x(t) = e^t (x0 + u) - u
  VectorD x = x0;
  const double dt = 1e-3;
  for (int i = 0; i < 1000; ++i) x = rk4_step(sc.truth, x, u, dt);
  const VectorD expected = std::exp(1.0) * (x0 + u) - u;
  CHECK((x - expected).norm() <= 1e-10);
}

TEST_CASE("exact-model closed loop from (2,6)") {
  const auto sc = make_planar_scenario<double>();
  auto env = exact_env(sc);
  SimConfig<double> cfg;
  cfg.x0 = vec2(2.0, 6.0);
  const auto traj = simulate(cfg, env);

  CHECK(traj.termination == Termination::Converged);
  CHECK(traj.final_time <= 10.0);
  CHECK(traj.final_state.norm() <= 0.05);
  CHECK(traj.min_h() >= -1e-6);
  for (std::size_t k = 0; k + 1 < traj.steps.size(); ++k) {
    CHECK(traj.steps[k].control_applied);
    CHECK(traj.steps[k + 1].V < traj.steps[k].V);
    CHECK(traj.steps[k + 1].t > traj.steps[k].t);
  }
}

TEST_CASE("x0 outside the safe set is rejected") {
  const auto sc = make_planar_scenario<double>();
  auto env = exact_env(sc);
  SimConfig<double> cfg;
  cfg.x0 = vec2(0.0, 4.0);  // center of the unsafe disk
  CHECK_THROWS_AS(simulate(cfg, env), DomainError);
}

TEST_CASE("halt policy stops at the first infeasible step with the certificate logged") {
  const auto sc = make_planar_scenario<double>();
  const Oracle<double> oracle{sc.truth};
  auto dataset = std::make_shared<Dataset<double>>(2, 2);
  Rng rng(3);
  const Box<double> near_start(vec2(1.5, 5.5), vec2(2.5, 6.5));
  while (dataset->size() < 10) {
    const VectorD p = near_start.sample(rng);
    if (sc.barrier.h(p) >= 0.0) dataset->insert_from(oracle, p);
  }

  SimEnv<double> env = exact_env(sc);
  env.model = nn_model(sc, *dataset, LipschitzConstants<double>{});
  env.dataset = dataset.get();

  SimConfig<double> cfg;
  cfg.x0 = vec2(2.0, 6.0);
  const auto traj = simulate(cfg, env);

  CHECK(traj.termination == Termination::Infeasible);
  REQUIRE(!traj.steps.empty());
  const auto& last = traj.steps.back();
  CHECK(last.status == SolveStatus::Infeasible);
  CHECK(last.phase1_t >= -1e-9);
  CHECK(!last.control_applied);
  CHECK(traj.acquisitions.empty());
}

TEST_CASE("acquire policy: triggers, re-solves and dataset growth") {
  const auto sc = make_planar_scenario<double>();
  const Oracle<double> oracle{sc.truth};
  auto dataset = std::make_shared<Dataset<double>>(2, 2);
  Rng rng(3);
  const Box<double> near_start(vec2(1.5, 5.5), vec2(2.5, 6.5));
  while (dataset->size() < 25) {
    const VectorD p = near_start.sample(rng);
    if (sc.barrier.h(p) >= 0.0) dataset->insert_from(oracle, p);
  }

  SimEnv<double> env = exact_env(sc);
  env.model = nn_model(sc, *dataset, LipschitzConstants<double>{});
  env.dataset = dataset.get();
  env.oracle = &oracle;
  env.workspace = Box<double>::cube(2, -6.0, 10.0);

  SimConfig<double> cfg;
  cfg.x0 = vec2(2.0, 6.0);
  cfg.stop_policy = StopPolicy::AcquireOnInfeasible;
  const auto traj = simulate(cfg, env);

  CHECK(traj.termination == Termination::Converged);
  CHECK(!traj.acquisitions.empty());
  CHECK(traj.min_h() >= -1e-6);

  // dataset size is nondecreasing and increases only at acquisition times
  std::size_t prev = 0;
  for (const auto& s : traj.steps) {
    CHECK(s.dataset_size >= prev);
    prev = s.dataset_size;
  }
  for (std::size_t k = 0; k + 1 < traj.steps.size(); ++k) {
    if (traj.steps[k + 1].dataset_size > traj.steps[k].dataset_size) {
      bool has_event = false;
      for (const auto& a : traj.acquisitions)
        if (a.t > traj.steps[k].t && a.t <= traj.steps[k + 1].t + 1e-12) has_event = true;
      CHECK(has_event);
    }
  }
  // every acquisition step ends feasible after the re-solve
  for (const auto& a : traj.acquisitions) {
    bool found = false;
    for (const auto& s : traj.steps)
      if (s.t == a.t) {
        found = true;
        CHECK(s.status == SolveStatus::Feasible);
        CHECK(s.control_applied);
      }
    CHECK(found);
  }
}

TEST_CASE("fixed seed reproduces a byte-identical trajectory CSV") {
  const auto sc = make_planar_scenario<double>();
  auto run_once = [&]() {
    const Oracle<double> oracle{sc.truth};
    auto dataset = std::make_shared<Dataset<double>>(2, 2);
    Rng rng(11);
    const Box<double> near_start(vec2(1.5, 5.5), vec2(2.5, 6.5));
    while (dataset->size() < 25) {
      const VectorD p = near_start.sample(rng);
      if (sc.barrier.h(p) >= 0.0) dataset->insert_from(oracle, p);
    }
    SimEnv<double> env = exact_env(sc);
    env.model = nn_model(sc, *dataset, LipschitzConstants<double>{});
    env.dataset = dataset.get();
    env.oracle = &oracle;
    env.workspace = Box<double>::cube(2, -6.0, 10.0);
    SimConfig<double> cfg;
    cfg.x0 = vec2(2.0, 6.0);
    cfg.t_end = 3.0;
    cfg.stop_policy = StopPolicy::AcquireOnInfeasible;
    return trajectory_csv(simulate(cfg, env));
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("offline experiment: nested datasets and closest approach") {
  const auto sc = make_planar_scenario<double>();
  OfflineExperimentConfig<double> cfg;
  cfg.stages = {{25, Box<double>(vec2(0.5, 4.5), vec2(3.5, 7.5))},
                {100, Box<double>(vec2(-0.5, 0.5), vec2(3.5, 7.5))},
                {400, Box<double>(vec2(-2.0, -1.0), vec2(4.0, 8.0))}};
  cfg.sim.x0 = vec2(2.0, 6.0);
  cfg.seed = 1;
  const auto runs = experiment_offline_n(sc, cfg);
  REQUIRE(runs.size() == 3);
  CHECK(runs[0].n_points == 25);
  CHECK(runs[2].n_points == 400);
  // nested: the larger dataset starts with the smaller one's points
  for (int i = 0; i < 25; ++i) CHECK(runs[0].dataset->point(i) == runs[2].dataset->point(i));
  // more data never hurts in this seeded configuration
  CHECK(runs[1].closest_approach <= runs[0].closest_approach + 1e-12);
  CHECK(runs[2].closest_approach <= runs[1].closest_approach + 1e-12);
}

TEST_CASE("offline: dense data along the exact path converges like the exact run") {
  const auto sc = make_planar_scenario<double>();
  // exact run to harvest the path
  auto env = exact_env(sc);
  SimConfig<double> cfg;
  cfg.x0 = vec2(2.0, 6.0);
  const auto exact_traj = simulate(cfg, env);
  REQUIRE(exact_traj.termination == Termination::Converged);

  const Oracle<double> oracle{sc.truth};
  auto dataset = std::make_shared<Dataset<double>>(2, 2);
  const AcquisitionPattern<double> pattern{0.05, true};
  const Box<double> workspace = Box<double>::cube(2, -6.0, 10.0);
  for (const auto& s : exact_traj.steps)
    for (const auto& p : pattern.points(s.x))
      if (workspace.contains(p) && sc.barrier.h(p) >= 0.0) dataset->insert_from(oracle, p);

  SimEnv<double> env2 = exact_env(sc);
  env2.model = nn_model(sc, *dataset, LipschitzConstants<double>{});
  env2.dataset = dataset.get();
  const auto traj = simulate(cfg, env2);
  CHECK(traj.termination == Termination::Converged);
  CHECK(traj.final_state.norm() <= 0.05);
}

TEST_CASE("online experiment protocol") {
  const auto sc = make_planar_scenario<double>();
  OnlineExperimentConfig<double> cfg;
  cfg.initial_conditions = {vec2(2.0, 6.0), vec2(-2.0, 6.0), vec2(2.0, 2.0)};
  cfg.workspace = Box<double>(vec2(-5.0, -1.0), vec2(5.0, 9.0));
  cfg.sim.x0 = vec2(2.0, 6.0);
  cfg.seed = 1;
  const auto runs = experiment_online(sc, cfg);
  REQUIRE(runs.size() == 3);
  for (const auto& r : runs) {
    CHECK(r.initial_size == 25);
    CHECK(r.trajectory.termination == Termination::Converged);
    CHECK(r.trajectory.min_h() >= -1e-6);
    CHECK(!r.trajectory.acquisitions.empty());
    CHECK(r.dataset->size() >= r.initial_size);
  }
}
