#include "humanflow/sim.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace hf {

PlannerKind planner_kind_from_string(const std::string& name) {
  if (name == "dc_static") return PlannerKind::DcStatic;
  if (name == "dc_constvel") return PlannerKind::DcConstVel;
  if (name == "dc_forecast") return PlannerKind::DcForecast;
  if (name == "frs") return PlannerKind::Frs;
  if (name == "full_avoidance") return PlannerKind::FullAvoidance;
  if (name == "flow") return PlannerKind::Flow;
  if (name == "flow_raw") return PlannerKind::FlowRaw;
  throw std::invalid_argument("unknown planner: " + name);
}

std::string to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::DcStatic: return "dc_static";
    case PlannerKind::DcConstVel: return "dc_constvel";
    case PlannerKind::DcForecast: return "dc_forecast";
    case PlannerKind::Frs: return "frs";
    case PlannerKind::FullAvoidance: return "full_avoidance";
    case PlannerKind::Flow: return "flow";
    case PlannerKind::FlowRaw: return "flow_raw";
  }
  return "?";
}

MotionSequence window_at(const MotionSequence& stream, long current,
                         long frames, long past) {
  MotionSequence win(frames, stream.joints, stream.fps);
  for (long t = 0; t < frames; ++t) {
    const long f = current - past + 1 + t;
    const long fc = std::clamp(f, 0L, stream.frames - 1);
    for (long j = 0; j < stream.joints; ++j) {
      win.set_pos(t, j, stream.pos(fc, j));
      const bool visible = f >= 0 && f <= current;
      win.set_observed(t, j, visible ? stream.observed(f, j) : 0);
    }
  }
  return win;
}

namespace {

double min_joint_distance(const Eigen::Vector3d& p, const MotionSequence& seq,
                          long frame) {
  double dmin = std::numeric_limits<double>::infinity();
  for (long j = 0; j < seq.joints; ++j)
    dmin = std::min(dmin, (p - seq.pos(frame, j)).norm());
  return dmin;
}

MavParams mav_params(const RunConfig& cfg) {
  MavParams mp;
  mp.horizon = cfg.mav_horizon;
  mp.dt = cfg.mav_dt;
  mp.safety_dist = cfg.safety_dist;
  return mp;
}

/// Rows `past-1 .. past-1+T` of a sampled completion as the (T+1) x (J*3)
/// joint track the scenario builder expects.
Eigen::MatrixXd forecast_track(const MotionSequence& sample, long past,
                               long horizon) {
  const long J = sample.joints;
  Eigen::MatrixXd m(horizon + 1, J * 3);
  for (long k = 0; k <= horizon; ++k) {
    const long f = std::min(past - 1 + k, sample.frames - 1);
    for (long j = 0; j < J; ++j)
      m.block<1, 3>(k, 3 * j) = sample.pos(f, j).transpose();
  }
  return m;
}

}  // namespace

EpisodeSetup make_episode(const MotionClip& replay, double noise_k,
                          const RunConfig& cfg, const Skeleton& skel,
                          Rng& rng) {
  EpisodeSetup setup;
  setup.replay = &replay;
  setup.noise_k = noise_k;
  if (noise_k > 0.0) {
    CorruptConfig cc;
    cc.noise_level = noise_k;
    cc.frame_dropout_p = 0.0;
    cc.part_dropout_p = 0.0;
    cc.forecast_p = 0.0;
    setup.corrupted = corrupt(skel, replay.poses, cc, rng, replay.seq.fps);
  } else {
    setup.corrupted = replay.seq;
  }

  // Cross the human's path: start and goal straddle a point the human
  // occupies a few seconds in.
  const double t_star = rng.uniform(2.0, 4.0);
  const long f_star = std::clamp(static_cast<long>(t_star * replay.seq.fps),
                                 0L, replay.seq.frames - 1);
  const Eigen::Vector3d h = replay.seq.pos(f_star, 0);
  for (int attempt = 0; attempt < 20; ++attempt) {
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    const Eigen::Vector3d d(std::cos(theta), std::sin(theta), 0.0);
    const double r1 = rng.uniform(2.0, 3.5), r2 = rng.uniform(2.0, 3.5);
    setup.x0 = MavState{};
    setup.x0.position =
        Eigen::Vector3d(h.x(), h.y(), 0.0) + r1 * d +
        Eigen::Vector3d(0.0, 0.0, rng.uniform(0.9, 1.2));
    setup.goal = Eigen::Vector3d(h.x(), h.y(), 0.0) - r2 * d +
                 Eigen::Vector3d(0.0, 0.0, rng.uniform(0.9, 1.2));
    if (min_joint_distance(setup.x0.position, replay.seq, 0) >=
        cfg.safety_dist + 0.5)
      break;
  }
  return setup;
}

EpisodeResult run_episode(const Planner& planner, const EpisodeSetup& setup,
                          const RunConfig& cfg, const Skeleton& skel,
                          Rng& rng) {
  const MavParams mp = mav_params(cfg);
  const DiscreteDynamics dyn =
      planner.mpc ? planner.mpc->dynamics() : discretize(mp);
  const MotionSequence& truth = setup.replay->seq;
  const MotionSequence filled = prefill_world(setup.corrupted, skel);
  const long max_steps =
      static_cast<long>(std::lround(cfg.episode_cap / mp.dt));
  const bool needs_window = planner.kind == PlannerKind::DcForecast ||
                            planner.kind == PlannerKind::FullAvoidance ||
                            planner.kind == PlannerKind::Flow ||
                            planner.kind == PlannerKind::FlowRaw;
  const long win_frames =
      planner.model ? planner.model->codec_config().frames
                    : (planner.policy ? planner.policy->config().tokens : 48);
  const long past = win_frames - mp.horizon;

  EpisodeResult res;
  MavState st = setup.x0;
  res.outcome.min_distance = min_joint_distance(st.position, truth, 0);
  if (res.outcome.min_distance < cfg.safety_dist) {
    res.outcome.collided = true;
    return res;
  }

  for (long s = 0; s < max_steps; ++s) {
    const long frame = std::min(s, truth.frames - 1);
    Eigen::Vector3d u0 = Eigen::Vector3d::Zero();
    MotionSequence window;
    if (needs_window) window = window_at(setup.corrupted, frame, win_frames, past);

    switch (planner.kind) {
      case PlannerKind::Flow: {
        const FlowPolicyObs obs = build_obs(window, nullptr, st, setup.goal,
                                            0.0, *planner.model, skel);
        u0 = planner.policy->act(obs, rng, planner.flow_steps)[0];
        break;
      }
      case PlannerKind::FlowRaw: {
        const FlowPolicyObs obs = build_obs_raw(
            window, st, setup.goal, 0.0, skel, planner.policy->config().d_s);
        u0 = planner.policy->act(obs, rng, planner.flow_steps)[0];
        break;
      }
      default: {
        PlannerObs obs;
        const long J = truth.joints;
        obs.last_joints.resize(J, 3);
        obs.joint_velocities.setZero(J, 3);
        for (long j = 0; j < J; ++j) {
          obs.last_joints.row(j) = filled.pos(frame, j).transpose();
          if (frame > 0)
            obs.joint_velocities.row(j) =
                ((filled.pos(frame, j) - filled.pos(frame - 1, j)) *
                 filled.fps)
                    .transpose();
        }
        obs.x0 = st.to_vec();
        obs.goal = setup.goal;
        if (planner.kind == PlannerKind::DcForecast ||
            planner.kind == PlannerKind::FullAvoidance) {
          const long n = planner.kind == PlannerKind::DcForecast
                             ? 1
                             : planner.forecast_samples;
          const auto samples =
              planner.model->sample(window, nullptr, n, rng, skel);
          for (const auto& sample : samples)
            obs.forecasts.push_back(forecast_track(sample, past, mp.horizon));
        }
        BaselineKind bk = BaselineKind::DcStatic;
        switch (planner.kind) {
          case PlannerKind::DcConstVel: bk = BaselineKind::DcConstVel; break;
          case PlannerKind::DcForecast: bk = BaselineKind::DcForecast; break;
          case PlannerKind::Frs: bk = BaselineKind::Frs; break;
          case PlannerKind::FullAvoidance: bk = BaselineKind::FullAvoidance; break;
          default: break;
        }
        u0 = baseline_plan(bk, obs, *planner.mpc).u0;
        break;
      }
    }

    // Control-bound invariant, asserted every executed step.
    u0.x() = std::clamp(u0.x(), -mp.thrust_max, mp.thrust_max);
    u0.y() = std::clamp(u0.y(), -mp.attitude_max, mp.attitude_max);
    u0.z() = std::clamp(u0.z(), -mp.attitude_max, mp.attitude_max);

    const MavStateVec xv = dyn.A * st.to_vec() + dyn.B * u0;
    st = MavState::from_vec(xv);
    const long next_frame = std::min(s + 1, truth.frames - 1);
    const double dmin = min_joint_distance(st.position, truth, next_frame);
    res.log.push_back({st, u0, dmin});
    res.outcome.min_distance = std::min(res.outcome.min_distance, dmin);
    if (dmin < cfg.safety_dist) {
      res.outcome.collided = true;
      break;
    }
    if ((st.position - setup.goal).norm() <= cfg.goal_radius) {
      res.outcome.reached_goal = true;
      res.outcome.time_to_goal = static_cast<double>(s + 1) * mp.dt;
      break;
    }
  }
  return res;
}

std::vector<NavRow> bench_nav(const std::vector<Planner>& planners,
                              const std::vector<MotionClip>& replays,
                              const RunConfig& cfg, const Skeleton& skel,
                              const Rng& master) {
  std::vector<NavRow> rows;
  for (size_t pi = 0; pi < planners.size(); ++pi) {
    for (size_t ki = 0; ki < cfg.nav_noise.size(); ++ki) {
      const double k = cfg.nav_noise[ki];
      std::vector<EpisodeOutcome> outcomes;
      for (long i = 0; i < cfg.nav_episodes; ++i) {
        Rng setup_rng = master.split(1000 + static_cast<uint64_t>(i) * 16 + ki);
        const EpisodeSetup setup = make_episode(
            replays[static_cast<size_t>(i) % replays.size()], k, cfg, skel,
            setup_rng);
        Rng run_rng = master.split(100000 + pi * 65536 +
                                   static_cast<uint64_t>(i) * 16 + ki);
        outcomes.push_back(
            run_episode(planners[pi], setup, cfg, skel, run_rng).outcome);
      }
      rows.push_back({to_string(planners[pi].kind), k, nav_metrics(outcomes)});
    }
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string();
}

}  // namespace

std::string nav_csv(const std::vector<NavRow>& rows) {
  std::ostringstream os;
  os << "planner,noise,collision_avoid_pct,ttg_p25,ttg_p50,ttg_p75,"
        "episodes,goal_reached,timeouts\n";
  for (const auto& r : rows)
    os << r.planner << ',' << fmt(r.noise_k) << ','
       << fmt(r.metrics.collision_avoid_pct) << ','
       << fmt_opt(r.metrics.ttg_p25) << ',' << fmt_opt(r.metrics.ttg_p50)
       << ',' << fmt_opt(r.metrics.ttg_p75) << ',' << r.metrics.episodes
       << ',' << r.metrics.goal_reached << ',' << r.metrics.timeouts << '\n';
  return os.str();
}

std::string tracking_csv(const std::vector<TrackingRow>& rows) {
  std::ostringstream os;
  os << "protocol,noise,gmpjpe_vis_mean,gmpjpe_vis_std,gmpjpe_occ_mean,"
        "gmpjpe_occ_std,gmpjpe_all_mean,gmpjpe_all_std,accel_mean,accel_std,"
        "skate_mean,dist_mean,zoh_occ_mean,zoh_accel_mean\n";
  for (const auto& r : rows)
    os << r.protocol << ',' << fmt(r.noise_k) << ',' << fmt(r.gmpjpe_vis_mean)
       << ',' << fmt(r.gmpjpe_vis_std) << ',' << fmt(r.gmpjpe_occ_mean) << ','
       << fmt(r.gmpjpe_occ_std) << ',' << fmt(r.gmpjpe_all_mean) << ','
       << fmt(r.gmpjpe_all_std) << ',' << fmt(r.accel_mean) << ','
       << fmt(r.accel_std) << ',' << fmt(r.skate_mean) << ','
       << fmt(r.dist_mean) << ',' << fmt(r.baseline_occ_mean) << ','
       << fmt(r.baseline_accel_mean) << '\n';
  return os.str();
}

GenResult generate_dataset(const std::vector<MotionClip>& corpus,
                           const DiffusionModel& model, const RunConfig& cfg,
                           const Skeleton& skel, const Rng& master) {
  if (corpus.empty())
    throw std::invalid_argument("generate_dataset: empty corpus");
  const MavParams mp = mav_params(cfg);
  ScenarioMpc mpc(mp);
  const long frames = model.codec_config().frames;
  const long past = frames - mp.horizon;
  const double dist = cfg.safety_dist + cfg.gen_safety_margin;
  const double noise_levels[] = {0.0, 3.0, 5.0};

  GenResult out;
  for (long idx = 0; idx < cfg.dataset_records; ++idx) {
    ++out.attempted;
    Rng rng = master.split(static_cast<uint64_t>(idx));
    const MotionClip& clip = corpus[static_cast<size_t>(
        rng.uniform_int(0, static_cast<long>(corpus.size()) - 1))];
    CorruptConfig cc;
    cc.noise_level = noise_levels[rng.uniform_int(0, 2)];
    cc.frame_dropout_p = 0.1;
    cc.part_dropout_p = 0.1;
    cc.forecast_p = 0.0;
    MotionSequence stream = corrupt(skel, clip.poses, cc, rng, clip.seq.fps);
    // Anywhere from a single observed frame (episode start) to a full past
    // history, so the policy sees the closed-loop observation distribution.
    const long current = rng.uniform_int(0, past - 1);
    const MotionSequence window = window_at(stream, current, frames, past);

    const auto samples =
        model.sample(window, nullptr, cfg.dataset_scenarios, rng, skel);
    MpcInstance inst;
    for (const auto& sample : samples)
      inst.scenarios.push_back(
          scenario_from_joints(forecast_track(sample, past, mp.horizon), dist));

    const Eigen::Vector3d h = prefill_world(window, skel).pos(past - 1, 0);
    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    const Eigen::Vector3d d(std::cos(theta), std::sin(theta), 0.0);
    const double r1 = rng.uniform(cfg.annulus_min, cfg.annulus_max);
    const double r2 = rng.uniform(cfg.annulus_min, cfg.annulus_max);
    MavState x0;
    x0.position = Eigen::Vector3d(h.x(), h.y(), 0.0) + r1 * d +
                  Eigen::Vector3d(0.0, 0.0, rng.uniform(0.9, 1.3));
    x0.velocity = Eigen::Vector3d(rng.normal(0.0, 0.3), rng.normal(0.0, 0.3),
                                  rng.normal(0.0, 0.1));
    const Eigen::Vector3d goal =
        Eigen::Vector3d(h.x(), h.y(), 0.0) - r2 * d +
        Eigen::Vector3d(0.0, 0.0, rng.uniform(0.9, 1.3));
    inst.x0 = x0.to_vec();
    inst.goal = goal;

    const MpcSolution sol = mpc.solve(inst);
    if (!sol.feasible) {
      ++out.skipped;
      continue;
    }
    // Write-time gate: identical shared first control and per-scenario
    // feasibility under an independent rollout.
    bool ok = sol.controls.size() == inst.scenarios.size();
    for (const auto& u : sol.controls)
      ok = ok && (u.head<3>() - sol.controls[0].head<3>()).norm() == 0.0;
    for (size_t i = 0; ok && i < sol.controls.size(); ++i) {
      const Eigen::MatrixXd states =
          rollout(mpc.dynamics(), inst.x0, sol.controls[i]);
      for (long kk = 1; kk <= mp.horizon && ok; ++kk) {
        const Eigen::Vector3d p = states.row(kk).head<3>().transpose();
        for (const auto& sph :
             inst.scenarios[i].obstacles[static_cast<size_t>(kk)])
          ok = ok && (p - sph.center).norm() - sph.radius >= -1e-4;
      }
    }
    if (!ok) {
      ++out.skipped;
      continue;
    }

    GenItem item;
    item.rec.x0 = inst.x0;
    item.rec.goal = goal;
    item.rec.controls = sol.controls;
    item.rec.motion_ref = static_cast<long>(out.items.size());
    item.window = window;
    out.items.push_back(std::move(item));
  }
  return out;
}

void dataset_to_pairs(const GenResult& gen, const DiffusionModel& model,
                      const FlowPolicy& policy, const Skeleton& skel,
                      bool raw_obs, std::vector<FlowPolicyObs>& obs,
                      std::vector<PolicyPair>& pairs) {
  obs.clear();
  pairs.clear();
  for (const auto& item : gen.items) {
    const MavState x0 = MavState::from_vec(item.rec.x0);
    FlowPolicyObs o =
        raw_obs ? build_obs_raw(item.window, x0, item.rec.goal, 0.0, skel,
                                policy.config().d_s)
                : build_obs(item.window, nullptr, x0, item.rec.goal, 0.0,
                            model, skel);
    const long oi = static_cast<long>(obs.size());
    obs.push_back(std::move(o));
    for (const auto& u : item.rec.controls)
      pairs.push_back({oi, policy.normalize(u)});
  }
}

}  // namespace hf
