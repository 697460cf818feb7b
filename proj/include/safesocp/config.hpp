#pragma once

// File-backed run configuration: a single JSON document, schema-validated
// with unknown keys rejected. Every field has a default; the file only
// needs the parts it overrides.

#include "safesocp/scenario.hpp"
#include "safesocp/sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>

namespace safesocp {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct RunConfig {
  // system
  std::string system = "planar-eq15";  // builtin name, or "linear" with A/B
  MatrixD A;                           // used when system == "linear"
  MatrixD B;

  // certificates
  double alpha_slope = 1.0;
  double eta_h = 0.1;
  double zeta_slope = 0.0;  // 0 disables the slack zeta

  // solver
  SolverConfig<double> solver;

  // model
  std::string model_kind = "exact";  // "exact" | "dataset"
  std::string dataset_csv;
  LipschitzConstants<double> lip;

  // bound B for the margin checks
  std::string bound_mode = "analysis";  // "constant" | "analysis"
  double bound_value = 3.0;
  double bound_factor = 1.5;

  // simulation
  SimConfig<double> sim;

  // feasibility map
  Box<double> feasmap_box = Box<double>(make_vec(-5.0, -1.0), make_vec(5.0, 9.0));
  int feasmap_nx = 100;
  int feasmap_ny = 100;
  double feasmap_origin_exclusion = 1e-2;

  // offline experiment
  std::vector<int> offline_n = {25, 100, 400};
  std::vector<Box<double>> offline_regions = {
      Box<double>(make_vec(0.5, 4.5), make_vec(3.5, 7.5)),
      Box<double>(make_vec(-0.5, 0.5), make_vec(3.5, 7.5)),
      Box<double>(make_vec(-2.0, -1.0), make_vec(4.0, 8.0))};
  int offline_seeds = 5;

  // online experiment
  std::vector<VectorD> online_x0 = {make_vec(2.0, 6.0), make_vec(-2.0, 6.0), make_vec(2.0, 2.0)};
  int online_initial_points = 25;
  double online_initial_halfwidth = 0.5;
  Box<double> workspace = Box<double>(make_vec(-5.0, -1.0), make_vec(5.0, 9.0));
  AcquisitionPattern<double> pattern;

  std::string output_dir = "out";
  std::uint64_t seed = 1;

  static VectorD make_vec(double a, double b) {
    VectorD v(2);
    v << a, b;
    return v;
  }

  RunConfig() {
    sim.x0 = make_vec(2.0, 6.0);
  }
};

namespace detail {

inline void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

inline VectorD json_vec(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a nonempty array");
  VectorD v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline MatrixD json_mat(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(where + ": expected an array of rows");
  const std::size_t rows = j.size(), cols = j[0].size();
  MatrixD m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw ConfigError(where + ": ragged rows");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  }
  return m;
}

inline Box<double> json_box(const nlohmann::json& j, const std::string& where) {
  require_keys(j, {"lo", "hi"}, where);
  return Box<double>(json_vec(j.at("lo"), where + ".lo"), json_vec(j.at("hi"), where + ".hi"));
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::require_keys;
  RunConfig cfg;
  require_keys(j, {"system", "certificates", "solver", "model", "bound_b", "sim", "feasmap",
                   "offline", "online", "workspace", "output_dir", "seed"},
               "config");

  if (j.contains("system")) {
    const auto& s = j.at("system");
    require_keys(s, {"builtin", "A", "B"}, "system");
    if (s.contains("builtin")) cfg.system = s.at("builtin").get<std::string>();
    if (s.contains("A")) cfg.A = detail::json_mat(s.at("A"), "system.A");
    if (s.contains("B")) cfg.B = detail::json_mat(s.at("B"), "system.B");
    if (cfg.A.size() > 0 || cfg.B.size() > 0) {
      if (cfg.A.size() == 0 || cfg.B.size() == 0)
        throw ConfigError("system: both A and B are required for a linear system");
      cfg.system = "linear";
    }
  }
  if (j.contains("certificates")) {
    const auto& c = j.at("certificates");
    require_keys(c, {"alpha_slope", "eta_h", "zeta_slope"}, "certificates");
    if (c.contains("alpha_slope")) cfg.alpha_slope = c.at("alpha_slope").get<double>();
    if (c.contains("eta_h")) cfg.eta_h = c.at("eta_h").get<double>();
    if (c.contains("zeta_slope")) cfg.zeta_slope = c.at("zeta_slope").get<double>();
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    require_keys(s, {"tol_feas", "tol_kkt", "tol_strict", "max_iterations"}, "solver");
    if (s.contains("tol_feas")) cfg.solver.tol_feas = s.at("tol_feas").get<double>();
    if (s.contains("tol_kkt")) cfg.solver.tol_kkt = s.at("tol_kkt").get<double>();
    if (s.contains("tol_strict")) cfg.solver.tol_strict = s.at("tol_strict").get<double>();
    if (s.contains("max_iterations")) cfg.solver.max_iterations = s.at("max_iterations").get<int>();
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    require_keys(m, {"kind", "dataset_csv", "k_f", "k_g"}, "model");
    if (m.contains("kind")) cfg.model_kind = m.at("kind").get<std::string>();
    if (m.contains("dataset_csv")) cfg.dataset_csv = m.at("dataset_csv").get<std::string>();
    if (m.contains("k_f")) cfg.lip.k_f = m.at("k_f").get<double>();
    if (m.contains("k_g")) cfg.lip.k_g = m.at("k_g").get<double>();
    if (cfg.model_kind != "exact" && cfg.model_kind != "dataset")
      throw ConfigError("model.kind must be 'exact' or 'dataset'");
  }
  if (j.contains("bound_b")) {
    const auto& b = j.at("bound_b");
    require_keys(b, {"mode", "value", "factor"}, "bound_b");
    if (b.contains("mode")) cfg.bound_mode = b.at("mode").get<std::string>();
    if (b.contains("value")) cfg.bound_value = b.at("value").get<double>();
    if (b.contains("factor")) cfg.bound_factor = b.at("factor").get<double>();
    if (cfg.bound_mode != "constant" && cfg.bound_mode != "analysis")
      throw ConfigError("bound_b.mode must be 'constant' or 'analysis'");
  }
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    require_keys(s,
                 {"x0", "t_end", "control_period", "substeps", "stop_policy",
                  "convergence_radius"},
                 "sim");
    if (s.contains("x0")) cfg.sim.x0 = detail::json_vec(s.at("x0"), "sim.x0");
    if (s.contains("t_end")) cfg.sim.t_end = s.at("t_end").get<double>();
    if (s.contains("control_period")) cfg.sim.control_period = s.at("control_period").get<double>();
    if (s.contains("substeps")) cfg.sim.substeps = s.at("substeps").get<int>();
    if (s.contains("stop_policy")) {
      const std::string p = s.at("stop_policy").get<std::string>();
      if (p == "halt_on_infeasible") cfg.sim.stop_policy = StopPolicy::HaltOnInfeasible;
      else if (p == "acquire_on_infeasible") cfg.sim.stop_policy = StopPolicy::AcquireOnInfeasible;
      else throw ConfigError("sim.stop_policy must be halt_on_infeasible or acquire_on_infeasible");
    }
    if (s.contains("convergence_radius"))
      cfg.sim.convergence_radius = s.at("convergence_radius").get<double>();
  }
  if (j.contains("feasmap")) {
    const auto& f = j.at("feasmap");
    require_keys(f, {"box", "nx", "ny", "origin_exclusion"}, "feasmap");
    if (f.contains("box")) cfg.feasmap_box = detail::json_box(f.at("box"), "feasmap.box");
    if (f.contains("nx")) cfg.feasmap_nx = f.at("nx").get<int>();
    if (f.contains("ny")) cfg.feasmap_ny = f.at("ny").get<int>();
    if (f.contains("origin_exclusion"))
      cfg.feasmap_origin_exclusion = f.at("origin_exclusion").get<double>();
  }
  if (j.contains("offline")) {
    const auto& o = j.at("offline");
    require_keys(o, {"n_values", "regions", "seeds"}, "offline");
    if (o.contains("n_values")) {
      cfg.offline_n.clear();
      for (const auto& v : o.at("n_values")) cfg.offline_n.push_back(v.get<int>());
    }
    if (o.contains("regions")) {
      cfg.offline_regions.clear();
      int idx = 0;
      for (const auto& r : o.at("regions"))
        cfg.offline_regions.push_back(
            detail::json_box(r, "offline.regions[" + std::to_string(idx++) + "]"));
    }
    if (o.contains("seeds")) cfg.offline_seeds = o.at("seeds").get<int>();
    if (cfg.offline_n.size() != cfg.offline_regions.size())
      throw ConfigError("offline: n_values and regions must have equal length");
  }
  if (j.contains("online")) {
    const auto& o = j.at("online");
    require_keys(o, {"initial_conditions", "initial_points", "initial_halfwidth",
                     "pattern_radius"},
                 "online");
    if (o.contains("initial_conditions")) {
      cfg.online_x0.clear();
      int idx = 0;
      for (const auto& v : o.at("initial_conditions"))
        cfg.online_x0.push_back(
            detail::json_vec(v, "online.initial_conditions[" + std::to_string(idx++) + "]"));
    }
    if (o.contains("initial_points")) cfg.online_initial_points = o.at("initial_points").get<int>();
    if (o.contains("initial_halfwidth"))
      cfg.online_initial_halfwidth = o.at("initial_halfwidth").get<double>();
    if (o.contains("pattern_radius")) cfg.pattern.radius = o.at("pattern_radius").get<double>();
  }
  if (j.contains("workspace")) cfg.workspace = detail::json_box(j.at("workspace"), "workspace");
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

/// Build the scenario a config describes.
inline Scenario<double> scenario_from_config(const RunConfig& cfg) {
  if (cfg.system == "planar-eq15" || cfg.system == "planar")
    return make_planar_scenario<double>(cfg.eta_h, cfg.alpha_slope);
  if (cfg.system == "linear") {
    if (cfg.A.size() == 0 || cfg.B.size() == 0)
      throw ConfigError("linear system requires A and B matrices");
    // user systems reuse the planar barrier only if 2-D; otherwise no CBF data
    if (cfg.A.rows() != 2)
      throw ConfigError("linear system currently supports n = 2 (planar barrier)");
    auto planar = make_planar_scenario<double>(cfg.eta_h, cfg.alpha_slope);
    auto sc = make_linear_scenario<double>(cfg.A, cfg.B, planar.barrier.h, planar.barrier.gradh,
                                           cfg.eta_h, cfg.alpha_slope);
    return sc;
  }
  throw ConfigError("unknown system '" + cfg.system + "'");
}

inline CbfSpec<double> cbf_from_config(const RunConfig& cfg) {
  std::optional<ClassK<double>> zeta;
  if (cfg.zeta_slope > 0.0) zeta = ClassK<double>::linear(cfg.zeta_slope);
  return CbfSpec<double>(ClassK<double>::linear(cfg.alpha_slope), cfg.eta_h, zeta);
}

/// Thread cap: SAFESOCP_THREADS env var, else 1.
inline int thread_cap() {
  if (const char* env = std::getenv("SAFESOCP_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

}  // namespace safesocp
