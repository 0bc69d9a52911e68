#pragma once

#include <string>
#include <vector>

#include "humanflow/mav.hpp"
#include "humanflow/scene.hpp"
#include "humanflow/sqp.hpp"

namespace hf {

/// Point obstacle with a keep-out radius (safety distance already folded in).
struct ObstacleSphere {
  Eigen::Vector3d center;
  double radius;
};

/// One sampled human future: per control step k = 0..T the set of spheres the
/// MAV position must stay outside of.
struct Scenario {
  std::vector<std::vector<ObstacleSphere>> obstacles;  // size T+1
};

/// Build a scenario from stacked joint positions, rows k = 0..T, columns
/// (x0,y0,z0, x1,...), one sphere of radius `dist` per joint.
Scenario scenario_from_joints(const Eigen::MatrixXd& joints, double dist);

struct MpcInstance {
  std::vector<Scenario> scenarios;
  MavStateVec x0 = MavStateVec::Zero();
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  const Esdf* esdf = nullptr;
};

struct MpcSolution {
  std::vector<Eigen::VectorXd> controls;  // per scenario, 3T each
  Eigen::Vector3d u0 = Eigen::Vector3d::Zero();
  bool feasible = false;
  bool start_collision = false;  // precondition failed: x0 inside an obstacle
  std::string status;
  std::string solver_status;  // detail from the SQP iteration
  double objective = 0.0;
  double max_violation = 0.0;
  long iterations = 0;
};

/// Scenario MPC over sampled human futures with the first control shared
/// across scenarios. Solves min E_i[sum_k ||p_k - g||^2] subject to sphere
/// distance constraints, optional ESDF clearance, per-axis velocity bounds,
/// and control box bounds. `solve_single` optimizes one control sequence
/// feasible against every scenario at once (the conservative variant).
class ScenarioMpc {
 public:
  explicit ScenarioMpc(const MavParams& params);

  const MavParams& params() const { return params_; }
  const DiscreteDynamics& dynamics() const { return dyn_; }

  MpcSolution solve(const MpcInstance& inst) const;
  MpcSolution solve_single(const MpcInstance& inst) const;

  SqpOptions sqp_options;

 private:
  MpcSolution solve_impl(const MpcInstance& inst, bool single) const;

  MavParams params_;
  DiscreteDynamics dyn_;
  // Objective Hessians depend only on the dynamics and variable layout, so
  // they are cached per scenario count (index 0 = single-sequence layout).
  mutable std::vector<Eigen::MatrixXd> q_cache_;
};

enum class BaselineKind { DcStatic, DcConstVel, DcForecast, Frs, FullAvoidance };

BaselineKind baseline_kind_from_string(const std::string& name);
std::string to_string(BaselineKind kind);

/// What the planners see at decision time.
struct PlannerObs {
  Eigen::MatrixXd last_joints;       // J x 3, most recent observed pose
  Eigen::MatrixXd joint_velocities;  // J x 3, instantaneous estimate (m/s)
  std::vector<Eigen::MatrixXd> forecasts;  // (T+1) x (J*3) joint tracks
  MavStateVec x0 = MavStateVec::Zero();
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  const Esdf* esdf = nullptr;
  double human_vmax = 1.5;  // reachable-set growth rate, m/s
};

/// Table-style baseline planners sharing the scenario-MPC solver. dc_* use a
/// deterministic single-scenario human model (static joints, constant
/// velocity, or the first forecast sample); frs keeps the MAV outside a
/// sphere around the last human root growing at `human_vmax`; full_avoidance
/// optimizes one sequence against all forecast samples.
MpcSolution baseline_plan(BaselineKind kind, const PlannerObs& obs,
                          const ScenarioMpc& mpc);

}  // namespace hf
