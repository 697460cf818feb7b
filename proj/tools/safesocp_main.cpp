// Command-line front end: build the stability/safety cone pair from a
// configured model, solve it at a state, map the feasibility conditions
// over a grid, run closed-loop simulations and the two experiment
// protocols, and evaluate the single-cone universal formula.
//
// Exit codes: 0 success, 2 infeasible with --strict, 3 configuration
// error, 4 numerical failure.

#include "safesocp/config.hpp"
#include "safesocp/io.hpp"
#include "safesocp/plots.hpp"
#include "safesocp/universal.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>

namespace {

using namespace safesocp;

struct ModelBundle {
  Scenario<double> scenario;
  WorstCaseModel<double> model;
  std::shared_ptr<Dataset<double>> dataset;  // null for the exact model
};

ModelBundle build_model(const RunConfig& cfg) {
  ModelBundle mb;
  mb.scenario = scenario_from_config(cfg);
  mb.scenario.cbf = cbf_from_config(cfg);
  if (cfg.model_kind == "exact") {
    mb.model = exact_model(mb.scenario);
  } else {
    if (cfg.dataset_csv.empty())
      throw ConfigError("model.kind = dataset requires model.dataset_csv");
    mb.dataset = std::make_shared<Dataset<double>>(
        read_dataset_csv<double>(cfg.dataset_csv, mb.scenario.dims.n, mb.scenario.dims.m));
    mb.model = nn_model(mb.scenario, *mb.dataset, cfg.lip);
  }
  return mb;
}

BoundB<double> bound_from_config(const RunConfig& cfg, const Scenario<double>& sc) {
  if (cfg.bound_mode == "constant") return BoundB<double>::constant(cfg.bound_value);
  return BoundB<double>::analysis_pointwise(sc.truth, sc.clf, sc.cbf, sc.barrier,
                                            cfg.bound_factor, cfg.solver,
                                            SlackInfeasiblePolicy::MarkUnbounded);
}

int cmd_solve(const RunConfig& cfg, const std::vector<double>& state, bool strict, bool oracle) {
  ModelBundle mb = build_model(cfg);
  VectorD x(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) x[static_cast<Eigen::Index>(i)] = state[i];
  const auto prog = worstcase_pair(mb.model, mb.scenario.clf, mb.scenario.cbf, x);
  const auto res = solve_min_norm(prog, cfg.solver);

  std::printf("status: %s\n", to_string(res.status));
  std::printf("phase1_t: %s\n", format_double(res.phase1_value).c_str());
  if (res.status == SolveStatus::Feasible) {
    std::printf("u_star:");
    for (Eigen::Index i = 0; i < res.u_star.size(); ++i)
      std::printf(" %s", format_double(res.u_star[i]).c_str());
    std::printf("\nkkt_residual: %s\n", format_double(res.kkt_residual).c_str());
    for (int i = 0; i < prog.p(); ++i)
      std::printf("residual[%d]: %s\n", i,
                  format_double(socc_residual(prog.constraints[i], res.u_star)).c_str());
  }
  if (x.norm() > 0) {
    const auto B = bound_from_config(cfg, mb.scenario);
    const auto cm = check_worstcase_compat<double>(mb.model, mb.scenario.clf, mb.scenario.cbf, B, x);
    std::printf("clf_margin: %s (%s)\n", format_double(cm.clf_margin).c_str(),
                cm.holds_clf ? "holds" : "fails");
    std::printf("cbf_margin: %s (%s)\n", format_double(cm.cbf_margin).c_str(),
                cm.holds_cbf ? "holds" : "fails");
  }
  if (oracle && res.status == SolveStatus::Feasible) {
    if (prog.m > 3) throw DomainError("--oracle requires m <= 3");
    const VectorD u_oracle = brute_force_min_norm(prog, 5.0, 1e-3);
    std::printf("oracle_norm_gap: %s\n",
                format_double(std::abs(u_oracle.norm() - res.u_star.norm())).c_str());
  }
  if (strict && res.status != SolveStatus::Feasible) return 2;
  if (res.status == SolveStatus::MaxIterations) return 4;
  return 0;
}

int cmd_feasmap(const RunConfig& cfg) {
  ModelBundle mb = build_model(cfg);
  const auto& sc = mb.scenario;
  const GridSpec<double> grid(cfg.feasmap_box, {cfg.feasmap_nx, cfg.feasmap_ny});
  const BoundB<double> B = bound_from_config(cfg, sc);

  auto margin_fn = [&](const VectorD& x) {
    return check_worstcase_compat<double>(mb.model, sc.clf, sc.cbf, B, x);
  };
  auto pair_fn = [&](const VectorD& x) { return worstcase_pair(mb.model, sc.clf, sc.cbf, x); };
  auto skip = [&](const VectorD& x) { return mb.model.hhat(x) - mb.model.e_h(x) < 0.0; };

  const auto cells = feasibility_map<double>(margin_fn, pair_fn, grid,
                                             cfg.feasmap_origin_exclusion, skip, cfg.solver,
                                             thread_cap());
  const std::filesystem::path out(cfg.output_dir);
  write_file_atomic(out / "feasmap.csv", feasmap_csv(cells));
  write_file_atomic(out / "feasmap.svg", feasmap_svg(cells, grid));

  long held = 0, sound_violations = 0;
  for (const auto& c : cells) {
    if (c.margins.holds()) {
      ++held;
      if (!(c.phase1_t < 0.0)) ++sound_violations;
    }
  }
  std::printf("cells: %zu, conditions hold: %ld, hold-but-infeasible: %ld\n", cells.size(), held,
              sound_violations);
  std::printf("wrote %s and %s\n", (out / "feasmap.csv").c_str(), (out / "feasmap.svg").c_str());
  return sound_violations == 0 ? 0 : 4;
}

int cmd_simulate(const RunConfig& cfg) {
  ModelBundle mb = build_model(cfg);
  auto& sc = mb.scenario;
  const Oracle<double> oracle{sc.truth};

  SimEnv<double> env;
  env.truth = sc.truth;
  env.model = mb.model;
  env.clf = sc.clf;
  env.cbf = sc.cbf;
  env.barrier = sc.barrier;
  env.solver = cfg.solver;
  env.bound = bound_from_config(cfg, sc);
  env.workspace = cfg.workspace;
  env.pattern = cfg.pattern;
  if (mb.dataset) env.dataset = mb.dataset.get();
  if (cfg.sim.stop_policy == StopPolicy::AcquireOnInfeasible) {
    if (!mb.dataset) throw ConfigError("acquire_on_infeasible requires model.kind = dataset");
    env.oracle = &oracle;
  }

  const auto traj = simulate(cfg.sim, env);
  const std::filesystem::path out(cfg.output_dir);
  write_file_atomic(out / "trajectory.csv", trajectory_csv(traj));
  if (!traj.acquisitions.empty())
    write_file_atomic(out / "acquisitions.csv", acquisitions_csv(traj));

  SvgCanvas svg(cfg.feasmap_box.lo[0], cfg.feasmap_box.hi[0], cfg.feasmap_box.lo[1],
                cfg.feasmap_box.hi[1]);
  draw_scenario_background<double>(svg);
  if (mb.dataset) draw_dataset(svg, *mb.dataset, "#888888");
  draw_trajectory(svg, traj, trajectory_palette(0));
  draw_condition_failures(svg, traj);
  draw_acquisitions(svg, traj);
  svg.save(out / "trajectory.svg");

  std::printf("termination: %s after %zu steps (t = %s)\n", to_string(traj.termination),
              traj.steps.size(), format_double(traj.final_time).c_str());
  std::printf("min h: %s, closest approach: %s\n", format_double(traj.min_h()).c_str(),
              format_double(traj.closest_approach()).c_str());
  std::printf("wrote %s\n", (out / "trajectory.csv").c_str());
  return traj.termination == Termination::SolverFailure ? 4 : 0;
}

int cmd_experiment(const RunConfig& cfg, const std::string& type) {
  ModelBundle mb = build_model(cfg);
  auto& sc = mb.scenario;
  const std::filesystem::path out(cfg.output_dir);

  if (type == "offline") {
    OfflineExperimentConfig<double> ecfg;
    for (std::size_t i = 0; i < cfg.offline_n.size(); ++i)
      ecfg.stages.push_back({cfg.offline_n[i], cfg.offline_regions[i]});
    ecfg.sim = cfg.sim;
    ecfg.sim.stop_policy = StopPolicy::HaltOnInfeasible;
    ecfg.lip = cfg.lip;

    std::ostringstream summary;
    summary << "seed,n,closest_approach,steps,termination,first_condition_failure\n";
    SvgCanvas svg(cfg.feasmap_box.lo[0], cfg.feasmap_box.hi[0], cfg.feasmap_box.lo[1],
                  cfg.feasmap_box.hi[1]);
    draw_scenario_background<double>(svg);
    for (int s = 0; s < cfg.offline_seeds; ++s) {
      ecfg.seed = cfg.seed + static_cast<std::uint64_t>(s);
      const auto runs = experiment_offline_n(sc, ecfg, cfg.solver);
      for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        summary << ecfg.seed << ',' << r.n_points << ',' << format_double(r.closest_approach)
                << ',' << r.trajectory.steps.size() << ',' << to_string(r.trajectory.termination)
                << ',' << r.first_condition_failure << '\n';
        write_file_atomic(out / ("offline_n" + std::to_string(r.n_points) + "_seed" +
                                 std::to_string(ecfg.seed) + ".csv"),
                          trajectory_csv(r.trajectory));
        if (s == 0) {
          draw_dataset(svg, *r.dataset, "#bbbbbb", i == 0 ? 0 : runs[i - 1].dataset->size());
          draw_trajectory(svg, r.trajectory, trajectory_palette(i));
          draw_condition_failures(svg, r.trajectory);
        }
      }
    }
    write_file_atomic(out / "offline_summary.csv", summary.str());
    svg.save(out / "offline.svg");
    std::printf("wrote %s\n", (out / "offline_summary.csv").c_str());
    return 0;
  }

  if (type == "online") {
    OnlineExperimentConfig<double> ecfg;
    ecfg.initial_conditions = cfg.online_x0;
    ecfg.initial_points = cfg.online_initial_points;
    ecfg.initial_halfwidth = cfg.online_initial_halfwidth;
    ecfg.sim = cfg.sim;
    ecfg.sim.stop_policy = StopPolicy::AcquireOnInfeasible;
    ecfg.lip = cfg.lip;
    ecfg.workspace = cfg.workspace;
    ecfg.pattern = cfg.pattern;
    ecfg.seed = cfg.seed;

    const auto runs = experiment_online(sc, ecfg, cfg.solver);
    SvgCanvas svg(cfg.feasmap_box.lo[0], cfg.feasmap_box.hi[0], cfg.feasmap_box.lo[1],
                  cfg.feasmap_box.hi[1]);
    draw_scenario_background<double>(svg);
    std::ostringstream summary;
    summary << "run,x0_1,x0_2,steps,termination,acquisitions,dataset_final\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& r = runs[i];
      summary << i << ',' << format_double(r.x0[0]) << ',' << format_double(r.x0[1]) << ','
              << r.trajectory.steps.size() << ',' << to_string(r.trajectory.termination) << ','
              << r.trajectory.acquisitions.size() << ',' << r.dataset->size() << '\n';
      write_file_atomic(out / ("online_run" + std::to_string(i) + ".csv"),
                        trajectory_csv(r.trajectory));
      write_file_atomic(out / ("online_run" + std::to_string(i) + "_acquisitions.csv"),
                        acquisitions_csv(r.trajectory));
      draw_dataset(svg, *r.dataset, "#bbbbbb", 0, r.initial_size);
      draw_trajectory(svg, r.trajectory, trajectory_palette(i));
      draw_acquisitions(svg, r.trajectory);
    }
    write_file_atomic(out / "online_summary.csv", summary.str());
    svg.save(out / "online.svg");
    std::printf("wrote %s\n", (out / "online_summary.csv").c_str());
    return 0;
  }

  throw ConfigError("experiment type must be 'offline' or 'online'");
}

int cmd_universal(const RunConfig& cfg, const std::string& which, const std::vector<double>& state,
                  double a, const std::vector<double>& bvec, double c) {
  Socc<double> cone;
  if (!bvec.empty()) {
    RowVector<double> b(bvec.size());
    for (std::size_t i = 0; i < bvec.size(); ++i) b[static_cast<Eigen::Index>(i)] = bvec[i];
    cone = embed_worstcase<double>(a, b, c, static_cast<int>(bvec.size()));
  } else {
    if (state.empty()) throw ConfigError("universal: need either --b or --state");
    ModelBundle mb = build_model(cfg);
    VectorD x(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) x[static_cast<Eigen::Index>(i)] = state[i];
    const auto coeffs = which == "cbf" ? worstcase_cbf_coeffs(mb.model, mb.scenario.cbf, x)
                                       : worstcase_clf_coeffs(mb.model, mb.scenario.clf, x);
    cone = embed_worstcase(coeffs, mb.scenario.dims.m);
  }

  const double im_res = check_image_condition(cone);
  std::printf("im_residual: %s\n", format_double(im_res).c_str());
  auto [u_s, mid] = universal_control(cone, 1e-9, true, cfg.solver);
  std::printf("tilde_b:");
  for (Eigen::Index i = 0; i < mid.tilde_b.size(); ++i)
    std::printf(" %s", format_double(mid.tilde_b[i]).c_str());
  std::printf("\ntilde_c: %s\nbar_b: %s\n", format_double(mid.tilde_c).c_str(),
              format_double(mid.bar_b).c_str());
  std::printf("u_s:");
  for (Eigen::Index i = 0; i < u_s.size(); ++i) std::printf(" %s", format_double(u_s[i]).c_str());
  std::printf("\nresidual: %s\n", format_double(socc_residual(cone, u_s)).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe stabilization under uncertainty: cone construction, min-norm solves, "
               "feasibility margins, closed-loop experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, which = "clf", exp_type = "offline";
  std::uint64_t seed = 0;
  bool have_seed = false, strict = false, oracle = false;
  std::vector<double> state, bvec;
  double a = 0.0, c = 0.0;

  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
    have_seed = true;
  });
  app.add_option("--out", out_dir, "override the output directory");

  auto* solve = app.add_subcommand("solve", "solve the cone pair at a state");
  solve->add_option("--state", state, "state coordinates")->expected(-1);
  solve->add_flag("--strict", strict, "exit 2 when infeasible");
  solve->add_flag("--oracle", oracle, "cross-check against the grid-search oracle (m <= 3)");

  auto* feasmap = app.add_subcommand("feasmap", "margin conditions + phase-I over a grid");

  auto* simulate = app.add_subcommand("simulate", "one closed-loop run");

  auto* experiment = app.add_subcommand("experiment", "offline-N or online protocol");
  experiment->add_option("--type", exp_type, "offline | online");

  auto* universal = app.add_subcommand("universal", "single-cone universal formula");
  universal->add_option("--which", which, "clf | cbf (model cone at --state)");
  universal->add_option("--state", state, "state coordinates")->expected(-1);
  universal->add_option("--a", a, "worst-case cone: a >= 0");
  universal->add_option("--b", bvec, "worst-case cone row b")->expected(-1);
  universal->add_option("--c", c, "worst-case cone offset c");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (have_seed) cfg.seed = seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    if (solve->parsed()) {
      if (state.empty()) throw safesocp::ConfigError("solve: --state is required");
      return cmd_solve(cfg, state, strict, oracle);
    }
    if (feasmap->parsed()) return cmd_feasmap(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (experiment->parsed()) return cmd_experiment(cfg, exp_type);
    if (universal->parsed()) return cmd_universal(cfg, which, state, a, bvec, c);
  } catch (const safesocp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
