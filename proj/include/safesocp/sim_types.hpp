#pragma once

// Configuration and logging types for closed-loop runs.

#include "safesocp/socp.hpp"

namespace safesocp {

enum class StopPolicy { HaltOnInfeasible, AcquireOnInfeasible };

enum class Termination { TimeLimit, Converged, Infeasible, BlowUp, SolverFailure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::TimeLimit: return "time_limit";
    case Termination::Converged: return "converged";
    case Termination::Infeasible: return "infeasible";
    case Termination::BlowUp: return "blow_up";
    default: return "solver_failure";
  }
}

template <typename Scalar>
struct SimConfig {
  Vector<Scalar> x0;
  Scalar t_end = Scalar(10);
  Scalar control_period = Scalar(0.01);
  int substeps = 10;
  StopPolicy stop_policy = StopPolicy::HaltOnInfeasible;
  Scalar convergence_radius = Scalar(0.05);
  Scalar blowup_norm = Scalar(1e6);

  void validate() const {
    if (!(control_period > Scalar(0))) throw DomainError("SimConfig: control_period must be > 0");
    if (substeps < 1) throw DomainError("SimConfig: substeps must be >= 1");
    if (x0.size() == 0) throw DomainError("SimConfig: x0 is empty");
  }
};

template <typename Scalar>
struct TrajectoryStep {
  Scalar t = Scalar(0);
  Vector<Scalar> x;
  Vector<Scalar> u;  // NaN when no control was applied at this step
  bool control_applied = false;
  SolveStatus status = SolveStatus::Infeasible;
  Scalar phase1_t = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar clf_margin = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar cbf_margin = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar h = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar V = std::numeric_limits<Scalar>::quiet_NaN();
  std::size_t dataset_size = 0;
};

template <typename Scalar>
struct AcquisitionEvent {
  Scalar t = Scalar(0);
  Vector<Scalar> center;
  int points_added = 0;
  std::size_t dataset_size_after = 0;
};

template <typename Scalar>
struct Trajectory {
  std::vector<TrajectoryStep<Scalar>> steps;
  std::vector<AcquisitionEvent<Scalar>> acquisitions;
  Termination termination = Termination::TimeLimit;
  Scalar final_time = Scalar(0);
  Vector<Scalar> final_state;

  Scalar min_h() const {
    Scalar m = std::numeric_limits<Scalar>::infinity();
    for (const auto& s : steps) m = std::min(m, s.h);
    return m;
  }

  Scalar closest_approach() const {
    Scalar m = std::numeric_limits<Scalar>::infinity();
    for (const auto& s : steps) m = std::min(m, s.x.norm());
    if (final_state.size() > 0) m = std::min(m, final_state.norm());
    return m;
  }
};

}  // namespace safesocp
