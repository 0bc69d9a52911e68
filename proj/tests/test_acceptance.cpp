// Acceptance suite: every release criterion in one binary, each case printing
// an explicit PASS/FAIL line. Heavy artifacts (trained model, policy, nav
// suite) are built once and shared by the later criteria, in file order.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <memory>

#include "humanflow/sim.hpp"
#include "humanflow/synth.hpp"

using namespace hf;
using Clock = std::chrono::steady_clock;

namespace {

double secs_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[criterion %2d] %s — %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
}

// ---- shared heavyweight artifacts -----------------------------------------

constexpr long kCorpusSequences = 64;
constexpr long kCorpusFrames = 48;
constexpr long kCodecIters = 1500;
constexpr long kDiffusionIters = 2500;
constexpr long kBatch = 16;
constexpr long kTrackSequences = 16;
constexpr long kTrackSamples = 5;
constexpr long kDatasetRecords = 350;
constexpr long kDatasetScenarios = 10;
constexpr long kPolicyIters = 8000;
constexpr long kNavEpisodes = 50;

RunConfig shared_config() {
  RunConfig cfg;
  cfg.corpus_sequences = kCorpusSequences;
  cfg.corpus_frames = kCorpusFrames;
  cfg.codec_iters = kCodecIters;
  cfg.diffusion_iters = kDiffusionIters;
  cfg.batch = kBatch;
  cfg.track_sequences = kTrackSequences;
  cfg.track_samples = kTrackSamples;
  cfg.dataset_records = kDatasetRecords;
  cfg.dataset_scenarios = kDatasetScenarios;
  cfg.policy_iters = kPolicyIters;
  cfg.nav_episodes = kNavEpisodes;
  cfg.nav_noise = {0.0, 5.0};
  return cfg;
}

struct SharedState {
  std::vector<MotionClip> corpus;
  ParamStore ps;
  std::unique_ptr<DiffusionModel> model;
  bool model_trained = false;
  double train_secs = 0.0;

  ParamStore policy_ps;
  std::unique_ptr<FlowPolicy> policy;
  bool policy_trained = false;

  // Row layout: planner index-major, then noise level {0, 5}.
  // Planners: 0 flow(10 steps), 1 flow(7 steps), 2 dc_static, 3 frs,
  // 4 full_avoidance.
  std::vector<NavRow> nav_rows;
};

SharedState& shared() {
  static SharedState s;
  return s;
}

const NavRow& nav_row(long planner_index, long noise_index) {
  return shared().nav_rows[static_cast<size_t>(planner_index * 2 +
                                               noise_index)];
}

std::vector<MotionClip> nav_replays(const Skeleton& skel, Rng& rng) {
  std::vector<MotionClip> replays;
  for (long i = 0; i < kNavEpisodes; ++i)
    replays.push_back(synth_clip(
        skel, i % 3 == 2 ? MotionKind::TurningWalk : MotionKind::StraightWalk,
        200, 10.0, 0.6 + 0.7 * static_cast<double>(i % 25) / 24.0, rng));
  return replays;
}

// Deterministic moving-sphere scenario for the solver criteria.
Scenario line_scenario(const Eigen::Vector3d& root, const Eigen::Vector3d& vel,
                       long horizon, double dt, double dist) {
  Eigen::MatrixXd joints(horizon + 1, 3);
  for (long k = 0; k <= horizon; ++k)
    joints.row(k) = (root + vel * (dt * static_cast<double>(k))).transpose();
  return scenario_from_joints(joints, dist);
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("criterion 1: gradient checks for every learned component") {
  const auto t0 = Clock::now();
  const Skeleton& skel = Skeleton::standard();
  Rng data_rng(301);

  double worst = 0.0;
  {
    CodecConfig cc;
    cc.frames = 16;
    DenoiserConfig dc;
    ParamStore ps;
    Rng mrng(302);
    DiffusionModel model(cc, dc, ps, mrng);
    std::vector<MotionClip> clips;
    for (int i = 0; i < 2; ++i)
      clips.push_back(synth_clip(skel, MotionKind::StraightWalk, 16, 10.0,
                                 0.8 + 0.2 * i, data_rng));
    OccupancyGrid scene = human_crop(
        synth_scene(SceneKind::FurnitureRoom, data_rng), clips[0].seq.pos(0, 0),
        3.2, 16);
    std::vector<TrainItem> batch = {{&clips[0], &scene}, {&clips[1], &scene}};
    CorruptConfig cc2;
    cc2.noise_level = 3.0;
    Rng loss_rng(303);
    auto loss = [&] {
      Rng r = loss_rng;
      return model.train_loss(batch, cc2, r, skel).total;
    };
    std::vector<std::pair<std::string, Tensor>> params(ps.all().begin(),
                                                       ps.all().end());
    Rng pick(304);
    GradCheckResult res = grad_check(loss, params, 1e-5, 96, &pick);
    worst = std::max(worst, res.max_rel_err);
  }
  {
    FlowPolicyConfig pc;
    pc.horizon = 8;
    MavParams mav;
    mav.horizon = 8;
    ParamStore ps;
    Rng rng(305);
    FlowPolicy policy(pc, mav, ps, rng);
    std::vector<FlowPolicyObs> obs(2);
    Rng orng(306);
    for (auto& o : obs)
      for (long i = 0; i < pc.obs_dim(); ++i) o.data.push_back(orng.normal());
    Tensor targets = Tensor::randn({2, pc.action_dim()}, orng);
    Rng loss_rng(307);
    auto loss = [&] {
      Rng r = loss_rng;
      return policy.fm_loss(obs_batch(obs), targets, r);
    };
    std::vector<std::pair<std::string, Tensor>> params(ps.all().begin(),
                                                       ps.all().end());
    Rng pick(308);
    GradCheckResult res = grad_check(loss, params, 1e-5, 96, &pick);
    worst = std::max(worst, res.max_rel_err);
  }

  const double elapsed = secs_since(t0);
  const bool pass = worst < 1e-4 && elapsed < 120.0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "gradient audit: max rel err %.3e (< 1e-4), %.1fs (< 120s)",
                worst, elapsed);
  report(1, pass, buf);
  CHECK(worst < 1e-4);
  CHECK(elapsed < 120.0);
}

TEST_CASE("criterion 2: discretization matches dense RK4 integration") {
  MavParams params;
  DiscreteDynamics dyn = discretize(params);
  Rng rng(311);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    MavStateVec x;
    for (int a = 0; a < 10; ++a) x[a] = rng.uniform(-2.0, 2.0);
    MavInput u(rng.uniform(-params.thrust_max, params.thrust_max),
               rng.uniform(-params.attitude_max, params.attitude_max),
               rng.uniform(-params.attitude_max, params.attitude_max));
    MavStateVec exact = dyn.A * x + dyn.B * u;
    MavStateVec rk4 = integrate_rk4(params, x, u, params.dt, 1000);
    worst = std::max(worst, (exact - rk4).lpNorm<Eigen::Infinity>());
  }
  const bool pass = worst < 1e-6;
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "zero-order-hold A,B vs 1000-substep RK4: max err %.3e (< 1e-6)",
                worst);
  report(2, pass, buf);
  CHECK(worst < 1e-6);
}

TEST_CASE("criterion 3: ESDF is exact against brute force") {
  Rng rng(321);
  double worst = 0.0;
  for (int g = 0; g < 20; ++g) {
    OccupancyGrid grid(rng.uniform_int(2, 16), rng.uniform_int(2, 16),
                       rng.uniform_int(2, 16), 0.1,
                       Eigen::Vector3d(rng.normal(), rng.normal(),
                                       rng.normal()));
    const double p_occ = rng.uniform(0.0, 0.2);
    for (auto& v : grid.states) {
      const double u = rng.uniform();
      v = u < p_occ ? Voxel::Occupied
                    : (u < p_occ + 0.1 ? Voxel::Unknown : Voxel::Free);
    }
    Esdf esdf = compute_esdf(grid);
    const double diag =
        grid.voxel_size * Eigen::Vector3d(static_cast<double>(grid.nx),
                                          static_cast<double>(grid.ny),
                                          static_cast<double>(grid.nz))
                              .norm();
    for (long i = 0; i < grid.nx; ++i)
      for (long j = 0; j < grid.ny; ++j)
        for (long k = 0; k < grid.nz; ++k) {
          double best = diag;
          for (long a = 0; a < grid.nx; ++a)
            for (long b = 0; b < grid.ny; ++b)
              for (long c = 0; c < grid.nz; ++c)
                if (grid.at(a, b, c) == Voxel::Occupied)
                  best = std::min(best,
                                  (grid.center(a, b, c) - grid.center(i, j, k))
                                      .norm());
          worst = std::max(worst, std::abs(best - esdf.at(i, j, k)));
        }
  }
  const bool pass = worst < 1e-9;
  char buf[120];
  std::snprintf(buf, sizeof(buf),
                "20 random grids (side <= 16): max |esdf - brute| %.3e (< 1e-9)",
                worst);
  report(3, pass, buf);
  CHECK(worst < 1e-9);
}

TEST_CASE("criterion 4: scenario MPC feasibility audit on 100 instances") {
  MavParams params;
  ScenarioMpc mpc(params);
  Rng rng(331);
  long feasible = 0, audited = 0;
  double worst_violation = 0.0, worst_u0_gap = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    MpcInstance inst;
    inst.x0[0] = rng.uniform(-0.5, 0.5);
    inst.x0[1] = rng.uniform(-0.5, 0.5);
    inst.x0[2] = rng.uniform(0.8, 1.2);
    inst.goal = {rng.uniform(2.0, 3.5), rng.uniform(-1.0, 1.0),
                 rng.uniform(0.8, 1.2)};
    const long n = rng.uniform_int(2, 5);
    for (long s = 0; s < n; ++s) {
      Eigen::Vector3d root(rng.uniform(1.0, 2.5), rng.uniform(-0.8, 0.8),
                           1.0);
      Eigen::Vector3d vel(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
                          0.0);
      if ((root - inst.x0.head<3>()).norm() < params.safety_dist + 0.2)
        root.x() += 1.0;
      inst.scenarios.push_back(line_scenario(root, vel, params.horizon,
                                             params.dt, params.safety_dist));
    }
    MpcSolution sol = mpc.solve(inst);
    if (!sol.feasible) continue;
    ++feasible;
    for (size_t s = 0; s < inst.scenarios.size(); ++s) {
      ++audited;
      worst_u0_gap = std::max(
          worst_u0_gap, (sol.controls[s].head<3>() - sol.u0).norm());
      // Independent rollout: step recursion, not the solver's stacked form.
      Eigen::MatrixXd xs = rollout(mpc.dynamics(), inst.x0, sol.controls[s]);
      for (long k = 0; k <= params.horizon; ++k) {
        const Eigen::Vector3d p = xs.row(k).head<3>().transpose();
        for (const auto& ob :
             inst.scenarios[s].obstacles[static_cast<size_t>(k)])
          worst_violation = std::max(
              worst_violation, ob.radius - (p - ob.center).norm());
        for (int a = 3; a < 6; ++a)
          worst_violation = std::max(worst_violation,
                                     std::abs(xs(k, a)) - params.velocity_max);
      }
      for (long k = 0; k < params.horizon; ++k) {
        worst_violation =
            std::max(worst_violation,
                     std::abs(sol.controls[s][3 * k]) - params.thrust_max);
        worst_violation = std::max(
            worst_violation,
            std::abs(sol.controls[s][3 * k + 1]) - params.attitude_max);
        worst_violation = std::max(
            worst_violation,
            std::abs(sol.controls[s][3 * k + 2]) - params.attitude_max);
      }
    }
  }
  const bool pass =
      feasible >= 50 && worst_violation <= 1e-4 && worst_u0_gap == 0.0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "%ld/100 feasible, %ld scenario rollouts, worst violation "
                "%.3e (<= 1e-4), shared-u0 gap %.1e (bitwise)",
                feasible, audited, worst_violation, worst_u0_gap);
  report(4, pass, buf);
  CHECK(feasible >= 50);
  CHECK(worst_violation <= 1e-4);
  CHECK(worst_u0_gap == 0.0);
}

TEST_CASE("criterion 5: diffusion schedule and inference stride") {
  DdpmSchedule s = DdpmSchedule::make();
  bool pass = s.beta.size() == 100;
  pass = pass && std::abs(s.beta.front() - 1e-4) < 1e-15;
  pass = pass && std::abs(s.beta.back() - 2e-2) < 1e-15;
  for (size_t t = 1; t + 1 < s.beta.size(); ++t)
    pass = pass && std::abs((s.beta[t] - s.beta[t - 1]) -
                            (s.beta[1] - s.beta[0])) < 1e-12;
  std::vector<long> ts = s.inference_timesteps();
  pass = pass && ts.size() == 10;
  for (int i = 0; i < 10 && pass; ++i)
    pass = pass && ts[static_cast<size_t>(i)] == 100 - 10 * i;
  report(5, pass,
         "beta linear 1e-4..2e-2 over 100 steps; 10 even-stride inference "
         "steps {100,90,...,10}");
  CHECK(pass);
}

TEST_CASE("criterion 10: metric implementations against brute-force oracles") {
  Rng rng(341);
  bool pass = true;

  // Brute-force GMPJPE on random data.
  MotionSequence gt(5, Skeleton::kJoints, 10.0);
  MotionSequence pred(5, Skeleton::kJoints, 10.0);
  for (auto& p : gt.positions) p = rng.normal();
  for (auto& p : pred.positions) p = rng.normal();
  std::fill(gt.mask.begin(), gt.mask.end(), 1);
  std::vector<uint8_t> mask(gt.mask.size());
  for (auto& m : mask) m = rng.uniform() < 0.6 ? 1 : 0;
  GmpjpeResult r = gmpjpe(pred, gt, mask);
  double sum_vis = 0.0, sum_occ = 0.0;
  long n_vis = 0, n_occ = 0;
  for (long t = 0; t < gt.frames; ++t)
    for (long j = 0; j < gt.joints; ++j) {
      const double err = (pred.pos(t, j) - gt.pos(t, j)).norm() * 1000.0;
      if (mask[static_cast<size_t>(t * gt.joints + j)]) {
        sum_vis += err;
        ++n_vis;
      } else {
        sum_occ += err;
        ++n_occ;
      }
    }
  pass = pass && std::abs(*r.vis - sum_vis / n_vis) < 1e-9;
  pass = pass && std::abs(*r.occ - sum_occ / n_occ) < 1e-9;
  pass = pass &&
         std::abs(*r.all - (sum_vis + sum_occ) / (n_vis + n_occ)) < 1e-9;

  // Hand cases frozen independently of the implementation.
  MotionSequence off = gt;
  for (long t = 0; t < off.frames; ++t)
    for (long j = 0; j < off.joints; ++j)
      off.set_pos(t, j, gt.pos(t, j) + Eigen::Vector3d(0.03, 0.0, 0.0));
  pass = pass && std::abs(*gmpjpe(off, gt, gt.mask).all - 30.0) < 1e-9;

  const double a = 0.7, ts2 = 1.0 / gt.fps;
  MotionSequence quad = gt;
  for (long t = 0; t < quad.frames; ++t)
    for (long j = 0; j < quad.joints; ++j)
      quad.set_pos(t, j,
                   gt.pos(t, j) +
                       Eigen::Vector3d(a * t * t * ts2 * ts2, 0.0, 0.0));
  pass = pass && std::abs(accel_error(quad, gt) - 2.0 * a) < 1e-9;
  pass = pass && accel_error(gt, gt) == 0.0;

  const Skeleton& skel = Skeleton::standard();
  MotionSequence pen(4, Skeleton::kJoints, 10.0);
  std::fill(pen.mask.begin(), pen.mask.end(), 1);
  for (long t = 0; t < pen.frames; ++t)
    for (long j = 0; j < pen.joints; ++j)
      pen.set_pos(t, j, Eigen::Vector3d(0, 0, 0.5));
  const auto toes = skel.toe_joints();
  for (long t = 0; t < pen.frames; ++t) {
    pen.set_pos(t, toes[0], Eigen::Vector3d(0, 0, -0.005));
    pen.set_pos(t, toes[1], Eigen::Vector3d(0, 0, 0.0));
  }
  pass = pass && std::abs(ground_penetration(pen, skel) - 2.5) < 1e-12;

  pass = pass &&
         std::abs(percentile_linear({4.0, 2.0, 1.0, 3.0}, 25.0) - 1.75) <
             1e-12;

  report(10, pass,
         "GMPJPE/accel/penetration/percentile match brute-force oracles to "
         "1e-9 plus hand cases");
  CHECK(pass);
}

// ---- heavyweight pipeline -------------------------------------------------

TEST_CASE("criterion 6: tracking beats the zero-order-hold baseline") {
  SharedState& s = shared();
  const Skeleton& skel = Skeleton::standard();
  RunConfig cfg = shared_config();
  const auto t0 = Clock::now();

  Rng corpus_rng(401);
  SynthConfig sc;
  sc.sequences = cfg.corpus_sequences;
  sc.frames = cfg.corpus_frames;
  s.corpus = synth_corpus(skel, sc, corpus_rng);

  CodecConfig cc;
  cc.frames = cfg.corpus_frames;
  DenoiserConfig dc;
  Rng mrng(402);
  s.model = std::make_unique<DiffusionModel>(cc, dc, s.ps, mrng);
  Rng train_rng(403);
  TrainLog l1 = train_codec_stage(*s.model, s.ps, s.corpus, cfg, skel,
                                  train_rng);
  TrainLog l2 = train_diffusion_stage(*s.model, s.ps, s.corpus, {}, cfg, skel,
                                      train_rng);
  s.model_trained = true;

  std::vector<MotionClip> eval_corpus;
  Rng eval_rng(404);
  for (long i = 0; i < cfg.track_sequences; ++i)
    eval_corpus.push_back(synth_clip(
        skel, i % 2 ? MotionKind::TurningWalk : MotionKind::StraightWalk,
        cfg.corpus_frames, 10.0, 0.6 + 0.1 * static_cast<double>(i % 8),
        eval_rng));
  TrackSampler sampler = [&](const MotionSequence& obs, long n, Rng& r) {
    return s.model->sample(obs, nullptr, n, r, skel);
  };
  Rng bench_rng(405);
  TrackingRow row =
      benchmark_tracking(eval_corpus, TrackProtocol::OccTenPercent, 3.0,
                         sampler, cfg.track_samples, skel, bench_rng);
  s.train_secs = secs_since(t0);

  const double ratio = row.gmpjpe_occ_mean / row.baseline_occ_mean;
  const bool pass = ratio <= 0.7 && row.accel_mean <= row.baseline_accel_mean &&
                    s.train_secs < 3600.0;
  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "occluded GMPJPE %.1f vs ZOH %.1f (ratio %.3f <= 0.7), accel "
                "%.3f vs %.3f, %.0fs (< 3600s); losses %.3f / %.3f",
                row.gmpjpe_occ_mean, row.baseline_occ_mean, ratio,
                row.accel_mean, row.baseline_accel_mean, s.train_secs,
                l1.final_avg(), l2.final_avg());
  report(6, pass, buf);
  CHECK(ratio <= 0.7);
  CHECK(row.accel_mean <= row.baseline_accel_mean);
  CHECK(s.train_secs < 3600.0);
}

TEST_CASE("criterion 7: flow policy is safe and competitive in closed loop") {
  SharedState& s = shared();
  REQUIRE(s.model_trained);
  const Skeleton& skel = Skeleton::standard();
  RunConfig cfg = shared_config();

  // Offline supervision and behavior cloning.
  Rng gen_rng(411);
  GenResult gen = generate_dataset(s.corpus, *s.model, cfg, skel, gen_rng);
  REQUIRE(gen.items.size() > 0);
  FlowPolicyConfig pc;
  pc.horizon = cfg.mav_horizon;
  pc.flow_steps = cfg.flow_steps;
  MavParams mav;
  Rng prng(412);
  s.policy = std::make_unique<FlowPolicy>(pc, mav, s.policy_ps, prng);
  std::vector<FlowPolicyObs> obs;
  std::vector<PolicyPair> pairs;
  dataset_to_pairs(gen, *s.model, *s.policy, skel, false, obs, pairs);
  Rng train_rng(413);
  TrainLog log =
      train_policy_stage(*s.policy, s.policy_ps, obs, pairs, cfg, train_rng);
  s.policy_trained = true;
  std::printf("  [pipeline] dataset %zu records (%ld attempts), %zu pairs, "
              "policy loss %.3f -> %.3f\n",
              gen.items.size(), gen.attempted, pairs.size(), log.loss.front(),
              log.final_avg());
  std::fflush(stdout);

  // One shared nav suite for criteria 7, 8 and 9.
  Rng replay_rng(414);
  std::vector<MotionClip> replays = nav_replays(skel, replay_rng);
  ScenarioMpc mpc(mav);
  Planner p_flow10{PlannerKind::Flow, s.model.get(), s.policy.get(), nullptr,
                   cfg.forecast_samples, 10};
  Planner p_flow7{PlannerKind::Flow, s.model.get(), s.policy.get(), nullptr,
                  cfg.forecast_samples, 7};
  Planner p_static{PlannerKind::DcStatic, nullptr, nullptr, &mpc,
                   cfg.forecast_samples, 0};
  Planner p_frs{PlannerKind::Frs, nullptr, nullptr, &mpc,
                cfg.forecast_samples, 0};
  Planner p_full{PlannerKind::FullAvoidance, s.model.get(), nullptr, &mpc,
                 cfg.forecast_samples, 0};
  Rng nav_master(415);
  s.nav_rows = bench_nav({p_flow10, p_flow7, p_static, p_frs, p_full},
                         replays, cfg, skel, nav_master);
  std::printf("%s", nav_csv(s.nav_rows).c_str());
  std::fflush(stdout);

  bool pass = true;
  char buf[280];
  std::string detail;
  for (long ki = 0; ki < 2; ++ki) {
    const NavRow& flow = nav_row(0, ki);
    const NavRow& full = nav_row(4, ki);
    const bool safe = flow.metrics.collision_avoid_pct == 100.0;
    const bool has_ttg =
        flow.metrics.ttg_p50.has_value() && full.metrics.ttg_p50.has_value();
    const bool fast =
        has_ttg && *flow.metrics.ttg_p50 <= *full.metrics.ttg_p50;
    pass = pass && safe && fast;
    std::snprintf(buf, sizeof(buf),
                  "k=%.0f: flow avoid %.1f%% (need 100), median TTG %.2fs vs "
                  "full_avoidance %.2fs; ",
                  flow.noise_k, flow.metrics.collision_avoid_pct,
                  has_ttg ? *flow.metrics.ttg_p50 : -1.0,
                  has_ttg ? *full.metrics.ttg_p50 : -1.0);
    detail += buf;
  }
  report(7, pass, detail);
  CHECK(pass);
}

TEST_CASE("criterion 8: static-human assumption fails where forecasts succeed") {
  SharedState& s = shared();
  REQUIRE(s.nav_rows.size() == 10);
  const NavRow& dc = nav_row(2, 0);
  const NavRow& frs = nav_row(3, 0);
  const NavRow& full = nav_row(4, 0);
  const bool pass = dc.metrics.collision_avoid_pct < 100.0 &&
                    frs.metrics.collision_avoid_pct == 100.0 &&
                    full.metrics.collision_avoid_pct == 100.0;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "noise-free crossing suite: dc_static %.1f%% (< 100), frs "
                "%.1f%% (= 100), full_avoidance %.1f%% (= 100)",
                dc.metrics.collision_avoid_pct,
                frs.metrics.collision_avoid_pct,
                full.metrics.collision_avoid_pct);
  report(8, pass, buf);
  CHECK(pass);
}

TEST_CASE("criterion 9: more flow steps never cost safety") {
  SharedState& s = shared();
  REQUIRE(s.nav_rows.size() == 10);
  bool pass = true;
  std::string detail;
  for (long ki = 0; ki < 2; ++ki) {
    const NavRow& f10 = nav_row(0, ki);
    const NavRow& f7 = nav_row(1, ki);
    pass = pass && f10.metrics.collision_avoid_pct >=
                       f7.metrics.collision_avoid_pct;
    char buf[120];
    std::snprintf(buf, sizeof(buf),
                  "k=%.0f: avoid %.1f%% @10 steps vs %.1f%% @7 steps; ",
                  f10.noise_k, f10.metrics.collision_avoid_pct,
                  f7.metrics.collision_avoid_pct);
    detail += buf;
  }
  report(9, pass, detail);
  CHECK(pass);
}

TEST_CASE("criterion 11: evaluation pipeline is byte-deterministic") {
  SharedState& s = shared();
  REQUIRE(s.model_trained);
  REQUIRE(s.policy_trained);
  const Skeleton& skel = Skeleton::standard();
  RunConfig cfg = shared_config();
  cfg.nav_episodes = 8;
  cfg.nav_noise = {0.0};
  cfg.track_sequences = 6;
  cfg.track_samples = 2;

  TrackSampler sampler = [&](const MotionSequence& obs, long n, Rng& r) {
    return s.model->sample(obs, nullptr, n, r, skel);
  };
  auto run_tracking = [&] {
    std::vector<MotionClip> eval_corpus;
    Rng eval_rng(421);
    for (long i = 0; i < cfg.track_sequences; ++i)
      eval_corpus.push_back(synth_clip(
          skel, i % 2 ? MotionKind::TurningWalk : MotionKind::StraightWalk,
          cfg.corpus_frames, 10.0, 0.7 + 0.1 * static_cast<double>(i),
          eval_rng));
    Rng bench_rng(422);
    return tracking_csv({benchmark_tracking(
        eval_corpus, TrackProtocol::OccTenPercent, 3.0, sampler,
        cfg.track_samples, skel, bench_rng)});
  };
  auto run_nav = [&] {
    Rng replay_rng(423);
    std::vector<MotionClip> replays;
    for (long i = 0; i < cfg.nav_episodes; ++i)
      replays.push_back(synth_clip(skel, MotionKind::StraightWalk, 200, 10.0,
                                   0.7 + 0.05 * static_cast<double>(i),
                                   replay_rng));
    MavParams mav;
    ScenarioMpc mpc(mav);
    Planner p_flow{PlannerKind::Flow, s.model.get(), s.policy.get(), nullptr,
                   cfg.forecast_samples, 10};
    Planner p_frs{PlannerKind::Frs, nullptr, nullptr, &mpc,
                  cfg.forecast_samples, 0};
    Rng nav_master(424);
    return nav_csv(bench_nav({p_flow, p_frs}, replays, cfg, skel, nav_master));
  };

  const std::string track_a = run_tracking();
  const std::string track_b = run_tracking();
  const std::string nav_a = run_nav();
  const std::string nav_b = run_nav();
  const bool pass = track_a == track_b && nav_a == nav_b;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "tracking CSV identical: %s; nav CSV identical: %s",
                track_a == track_b ? "yes" : "NO",
                nav_a == nav_b ? "yes" : "NO");
  report(11, pass, buf);
  CHECK(track_a == track_b);
  CHECK(nav_a == nav_b);
}
