#include "humanflow/scenario_mpc.hpp"

#include <cmath>
#include <stdexcept>

namespace hf {

namespace {

// Variable layout: w = [u0 (3), tail scenario 0 (3(T-1)), tail scenario 1, ...].
// For a single-sequence solve the layout degenerates to n = 1 (w = u_{0:T-1}).
long var_offset(long i, long k, long T) {
  return k == 0 ? 0 : 3 + 3 * ((T - 1) * i + (k - 1));
}

struct ConstraintEntry {
  enum Kind { Sphere, EsdfClearance, Velocity } kind;
  long scenario;  // trajectory index in the variable layout
  long step;      // 1..T
  long obstacle = 0;
  int axis = 0;
  double sign = 1.0;
};

struct Evaluator {
  const DiscreteDynamics* dyn;
  const MavParams* prm;
  const MpcInstance* inst;
  long n_traj;  // trajectories in the layout
  std::vector<ConstraintEntry> entries;
  // Obstacles per layout-trajectory; for single-sequence solves trajectory 0
  // carries the union of all scenarios' spheres.
  std::vector<const Scenario*> scenario_for_traj;
  bool single = false;

  mutable Eigen::VectorXd cached_w;
  mutable std::vector<Eigen::MatrixXd> states;  // per trajectory, (T+1) x 10

  Eigen::VectorXd controls_for(const Eigen::VectorXd& w, long i) const {
    const long T = dyn->horizon;
    Eigen::VectorXd u(3 * T);
    for (long k = 0; k < T; ++k)
      u.segment<3>(3 * k) = w.segment<3>(var_offset(i, k, T));
    return u;
  }

  void refresh(const Eigen::VectorXd& w) const {
    if (cached_w.size() == w.size() && cached_w == w) return;
    cached_w = w;
    states.resize(static_cast<size_t>(n_traj));
    for (long i = 0; i < n_traj; ++i)
      states[static_cast<size_t>(i)] = rollout(*dyn, inst->x0, controls_for(w, i));
  }

  double value(const ConstraintEntry& e, Eigen::Vector3d* dir_out) const {
    const Eigen::MatrixXd& X = states[static_cast<size_t>(e.scenario)];
    switch (e.kind) {
      case ConstraintEntry::Sphere: {
        const auto& obs = single
            ? inst->scenarios[static_cast<size_t>(e.obstacle >> 16)]
                  .obstacles[static_cast<size_t>(e.step)]
                  [static_cast<size_t>(e.obstacle & 0xffff)]
            : inst->scenarios[static_cast<size_t>(e.scenario)]
                  .obstacles[static_cast<size_t>(e.step)]
                  [static_cast<size_t>(e.obstacle)];
        const Eigen::Vector3d p = X.row(e.step).head<3>();
        Eigen::Vector3d delta = p - obs.center;
        double norm = delta.norm();
        if (dir_out) {
          if (norm < 1e-9)
            *dir_out = Eigen::Vector3d::UnitZ();  // degenerate; any direction
          else
            *dir_out = delta / norm;
        }
        return norm - obs.radius;
      }
      case ConstraintEntry::EsdfClearance: {
        const Eigen::Vector3d p = X.row(e.step).head<3>();
        const EsdfQuery q = esdf_query(*inst->esdf, p);
        if (dir_out) *dir_out = q.gradient;
        return q.distance - prm->safety_dist;
      }
      case ConstraintEntry::Velocity: {
        const double v = X(e.step, 3 + e.axis);
        if (dir_out) *dir_out = Eigen::Vector3d::Zero();  // unused
        return prm->velocity_max - e.sign * v;
      }
    }
    return 0.0;
  }

  void eval_g(const Eigen::VectorXd& w, Eigen::VectorXd& g) const {
    refresh(w);
    g.resize(static_cast<long>(entries.size()));
    for (size_t r = 0; r < entries.size(); ++r)
      g(static_cast<long>(r)) = value(entries[r], nullptr);
  }

  void eval_grad(const Eigen::VectorXd& w, long row,
                 Eigen::Ref<Eigen::VectorXd> grad) const {
    refresh(w);
    const ConstraintEntry& e = entries[static_cast<size_t>(row)];
    const long T = dyn->horizon;
    grad.setZero();
    if (e.kind == ConstraintEntry::Velocity) {
      const long state_row = 10 * e.step + 3 + e.axis;
      for (long j = 0; j < e.step; ++j)
        grad.segment<3>(var_offset(e.scenario, j, T)) -=
            e.sign * dyn->Gamma.row(state_row).segment<3>(3 * j).transpose();
      return;
    }
    Eigen::Vector3d dir;
    const double v = value(e, &dir);
    (void)v;
    if (!dir.allFinite())
      throw std::runtime_error("scenario_mpc: NaN in constraint Jacobian");
    for (long j = 0; j < e.step; ++j)
      grad.segment<3>(var_offset(e.scenario, j, T)) +=
          dyn->Gamma.block<3, 3>(10 * e.step, 3 * j).transpose() * dir;
  }
};

}  // namespace

Scenario scenario_from_joints(const Eigen::MatrixXd& joints, double dist) {
  Scenario s;
  const long steps = joints.rows();
  const long J = joints.cols() / 3;
  s.obstacles.resize(static_cast<size_t>(steps));
  for (long k = 0; k < steps; ++k) {
    auto& row = s.obstacles[static_cast<size_t>(k)];
    row.reserve(static_cast<size_t>(J));
    for (long j = 0; j < J; ++j)
      row.push_back({joints.row(k).segment<3>(3 * j).transpose(), dist});
  }
  return s;
}

ScenarioMpc::ScenarioMpc(const MavParams& params)
    : params_(params), dyn_(discretize(params)) {
  sqp_options.feasibility_tol = 1e-4;
}

MpcSolution ScenarioMpc::solve(const MpcInstance& inst) const {
  return solve_impl(inst, false);
}

MpcSolution ScenarioMpc::solve_single(const MpcInstance& inst) const {
  return solve_impl(inst, true);
}

MpcSolution ScenarioMpc::solve_impl(const MpcInstance& inst, bool single) const {
  if (inst.scenarios.empty())
    throw std::invalid_argument("scenario_mpc: empty scenario set");
  const long T = dyn_.horizon;
  const long n = static_cast<long>(inst.scenarios.size());
  const long n_traj = single ? 1 : n;
  const long m = 3 + 3 * (T - 1) * n_traj;

  // Objective: mean over trajectories of sum_k ||p_k - g||^2, an exact
  // quadratic in w through the stacked dynamics. The Hessian depends only on
  // Gamma and the layout, so cache it per trajectory count.
  if (q_cache_.size() <= static_cast<size_t>(n_traj))
    q_cache_.resize(static_cast<size_t>(n_traj) + 1);
  Eigen::MatrixXd& Q = q_cache_[static_cast<size_t>(n_traj)];
  if (Q.rows() != m) {
    Q.setZero(m, m);
    const double scale = 2.0 / static_cast<double>(n_traj);
    for (long i = 0; i < n_traj; ++i)
      for (long k = 1; k <= T; ++k)
        for (long j1 = 0; j1 < k; ++j1) {
          const Eigen::Matrix3d G1 = dyn_.Gamma.block<3, 3>(10 * k, 3 * j1);
          for (long j2 = 0; j2 < k; ++j2)
            Q.block<3, 3>(var_offset(i, j1, T), var_offset(i, j2, T)) +=
                scale * G1.transpose() * dyn_.Gamma.block<3, 3>(10 * k, 3 * j2);
        }
  }

  const Eigen::VectorXd free_states = dyn_.Phi * inst.x0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
  double f0 = 0.0;
  for (long k = 0; k <= T; ++k) {
    const Eigen::Vector3d resid =
        free_states.segment<3>(10 * k) - inst.goal;
    f0 += resid.squaredNorm();
    for (long i = 0; i < n_traj; ++i)
      for (long j = 0; j < k; ++j)
        c.segment<3>(var_offset(i, j, T)) +=
            (2.0 / static_cast<double>(n_traj)) *
            dyn_.Gamma.block<3, 3>(10 * k, 3 * j).transpose() * resid;
  }

  MpcSolution sol;
  // Precondition: x0 clear of every scenario's step-0 spheres.
  const Eigen::Vector3d p0 = inst.x0.head<3>();
  for (const auto& sc : inst.scenarios)
    if (!sc.obstacles.empty())
      for (const auto& obs : sc.obstacles[0])
        if ((p0 - obs.center).norm() <= obs.radius) sol.start_collision = true;
  if (inst.esdf) {
    const EsdfQuery q0 = esdf_query(*inst.esdf, p0);
    if (q0.distance < params_.safety_dist) sol.start_collision = true;
  }

  Evaluator ev;
  ev.dyn = &dyn_;
  ev.prm = &params_;
  ev.inst = &inst;
  ev.n_traj = n_traj;
  ev.single = single;
  for (long i = 0; i < n_traj; ++i)
    for (long k = 1; k <= T; ++k) {
      if (single) {
        for (long s = 0; s < n; ++s) {
          const auto& obs = inst.scenarios[static_cast<size_t>(s)].obstacles;
          if (static_cast<long>(obs.size()) <= k) continue;
          for (size_t o = 0; o < obs[static_cast<size_t>(k)].size(); ++o)
            ev.entries.push_back({ConstraintEntry::Sphere, i, k,
                                  (s << 16) | static_cast<long>(o), 0, 1.0});
        }
      } else {
        const auto& obs = inst.scenarios[static_cast<size_t>(i)].obstacles;
        if (static_cast<long>(obs.size()) > k)
          for (size_t o = 0; o < obs[static_cast<size_t>(k)].size(); ++o)
            ev.entries.push_back({ConstraintEntry::Sphere, i, k,
                                  static_cast<long>(o), 0, 1.0});
      }
      if (inst.esdf)
        ev.entries.push_back({ConstraintEntry::EsdfClearance, i, k, 0, 0, 1.0});
      for (int a = 0; a < 3; ++a) {
        ev.entries.push_back({ConstraintEntry::Velocity, i, k, 0, a, 1.0});
        ev.entries.push_back({ConstraintEntry::Velocity, i, k, 0, a, -1.0});
      }
    }

  SqpProblem prob;
  prob.num_vars = m;
  prob.Q = Q;
  prob.c = c;
  prob.f0 = f0;
  prob.lower.resize(m);
  prob.upper.resize(m);
  for (long v = 0; v < m; v += 3) {
    prob.lower(v) = -params_.thrust_max;
    prob.upper(v) = params_.thrust_max;
    prob.lower.segment<2>(v + 1).setConstant(-params_.attitude_max);
    prob.upper.segment<2>(v + 1).setConstant(params_.attitude_max);
  }
  prob.num_constraints = static_cast<long>(ev.entries.size());
  prob.eval_g = [&ev](const Eigen::VectorXd& w, Eigen::VectorXd& g) {
    ev.eval_g(w, g);
  };
  prob.eval_grad = [&ev](const Eigen::VectorXd& w, long i,
                         Eigen::Ref<Eigen::VectorXd> grad) {
    ev.eval_grad(w, i, grad);
  };

  // Warm start: clipped unconstrained minimizer (the straight-to-goal plan),
  // plus laterally/vertically biased variants. Obstacles dead ahead create a
  // symmetric saddle where the straight start stalls against the sphere; the
  // biased starts break the tie deterministically.
  Eigen::MatrixXd Qreg = Q;
  Qreg.diagonal().array() += 1e-9;
  const Eigen::LLT<Eigen::MatrixXd> Qllt(Qreg);
  Eigen::VectorXd w_straight = Qllt.solve(-c);
  w_straight = w_straight.cwiseMax(prob.lower).cwiseMin(prob.upper);

  Eigen::Vector3d lateral = (inst.goal - p0).cross(Eigen::Vector3d::UnitZ());
  if (lateral.norm() < 1e-9) lateral = Eigen::Vector3d::UnitY();
  lateral.normalize();
  // Map a world-direction bias onto attitude/thrust references over the
  // first half of the horizon: pitch drives +x, roll drives -y.
  auto biased = [&](const Eigen::Vector3d& dir, double mag) {
    Eigen::VectorXd w = w_straight;
    for (long i = 0; i < n_traj; ++i)
      for (long k = 0; k < T / 2; ++k) {
        const long off = var_offset(i, k, T);
        w(off) += mag * 3.0 * dir.z();
        w(off + 1) += mag * dir.x();
        w(off + 2) += mag * -dir.y();
      }
    w = w.cwiseMax(prob.lower).cwiseMin(prob.upper);
    return w;
  };

  const std::vector<Eigen::VectorXd> starts = {
      w_straight, biased(lateral, 0.15), biased(-lateral, 0.15),
      biased(Eigen::Vector3d::UnitZ(), 0.15),
      biased(-Eigen::Vector3d::UnitZ(), 0.15)};
  SqpResult res;
  bool have = false;
  for (const auto& s : starts) {
    const SqpResult r = solve_sqp(prob, s, sqp_options);
    const bool better =
        !have || (r.feasible && !res.feasible) ||
        (r.feasible == res.feasible &&
         (r.feasible ? r.objective < res.objective
                     : r.max_violation < res.max_violation));
    if (better) res = r;
    have = true;
  }

  sol.u0 = res.w.head<3>();
  sol.controls.resize(static_cast<size_t>(n_traj));
  for (long i = 0; i < n_traj; ++i)
    sol.controls[static_cast<size_t>(i)] = ev.controls_for(res.w, i);
  sol.solver_status = res.status;
  sol.objective = res.objective;
  sol.max_violation = res.max_violation;
  sol.iterations = res.iterations;
  sol.feasible = res.feasible && !sol.start_collision;
  sol.status = sol.start_collision ? "infeasible start"
               : sol.feasible      ? "feasible"
                                   : "infeasible";
  return sol;
}

BaselineKind baseline_kind_from_string(const std::string& name) {
  if (name == "dc_static") return BaselineKind::DcStatic;
  if (name == "dc_constvel") return BaselineKind::DcConstVel;
  if (name == "dc_forecast") return BaselineKind::DcForecast;
  if (name == "frs") return BaselineKind::Frs;
  if (name == "full_avoidance") return BaselineKind::FullAvoidance;
  throw std::invalid_argument("unknown planner kind: " + name);
}

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::DcStatic: return "dc_static";
    case BaselineKind::DcConstVel: return "dc_constvel";
    case BaselineKind::DcForecast: return "dc_forecast";
    case BaselineKind::Frs: return "frs";
    case BaselineKind::FullAvoidance: return "full_avoidance";
  }
  return "?";
}

MpcSolution baseline_plan(BaselineKind kind, const PlannerObs& obs,
                          const ScenarioMpc& mpc) {
  const long T = mpc.dynamics().horizon;
  const double dt = mpc.dynamics().dt;
  const double d = mpc.params().safety_dist;
  const long J = obs.last_joints.rows();

  MpcInstance inst;
  inst.x0 = obs.x0;
  inst.goal = obs.goal;
  inst.esdf = obs.esdf;

  auto joints_track = [&](bool constvel) {
    Eigen::MatrixXd track(T + 1, 3 * J);
    for (long k = 0; k <= T; ++k)
      for (long j = 0; j < J; ++j) {
        Eigen::Vector3d p = obs.last_joints.row(j).transpose();
        if (constvel)
          p += obs.joint_velocities.row(j).transpose() * (dt * static_cast<double>(k));
        track.row(k).segment<3>(3 * j) = p.transpose();
      }
    return track;
  };

  switch (kind) {
    case BaselineKind::DcStatic:
      inst.scenarios.push_back(scenario_from_joints(joints_track(false), d));
      return mpc.solve(inst);
    case BaselineKind::DcConstVel:
      inst.scenarios.push_back(scenario_from_joints(joints_track(true), d));
      return mpc.solve(inst);
    case BaselineKind::DcForecast:
      if (obs.forecasts.empty())
        inst.scenarios.push_back(scenario_from_joints(joints_track(false), d));
      else
        inst.scenarios.push_back(scenario_from_joints(obs.forecasts[0], d));
      return mpc.solve(inst);
    case BaselineKind::Frs: {
      const Eigen::Vector3d root = obs.last_joints.row(0).transpose();
      double r0 = 0.0;
      for (long j = 0; j < J; ++j)
        r0 = std::max(r0, (obs.last_joints.row(j).transpose() - root).norm());
      Scenario s;
      s.obstacles.resize(static_cast<size_t>(T + 1));
      for (long k = 0; k <= T; ++k)
        s.obstacles[static_cast<size_t>(k)].push_back(
            {root, r0 + d + obs.human_vmax * dt * static_cast<double>(k)});
      inst.scenarios.push_back(std::move(s));
      return mpc.solve(inst);
    }
    case BaselineKind::FullAvoidance: {
      if (obs.forecasts.empty())
        inst.scenarios.push_back(scenario_from_joints(joints_track(false), d));
      else
        for (const auto& f : obs.forecasts)
          inst.scenarios.push_back(scenario_from_joints(f, d));
      return mpc.solve_single(inst);
    }
  }
  throw std::logic_error("baseline_plan: unreachable");
}

}  // namespace hf
