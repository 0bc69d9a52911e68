// humanflow: artifact plumbing around the core library. Subcommands cover
// data generation, staged training, evaluation, and self-checks; every
// command reads one optional config file plus key=value overrides and works
// under a single output directory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "humanflow/checkpoint.hpp"
#include "humanflow/motion_io.hpp"
#include "humanflow/sim.hpp"

namespace fs = std::filesystem;
using namespace hf;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = "out";
  long seed = -1;
  long horizon = -1;
  double dt = -1.0;
  double safety_dist = -1.0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Config file (key = value lines)");
  cmd->add_option("--set", c.overrides, "Config override key=value")
      ->take_all();
  cmd->add_option("--out", c.out, "Output / artifact directory");
  cmd->add_option("--seed", c.seed, "Master seed override");
  cmd->add_option("--horizon", c.horizon, "MAV control horizon override");
  cmd->add_option("--dt", c.dt, "MAV sampling time override");
  cmd->add_option("--safety-dist", c.safety_dist, "Safety distance override");
}

RunConfig build_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg.load_file(c.config_path);
  cfg.apply_overrides(c.overrides);
  if (c.seed >= 0) cfg.seed = static_cast<uint64_t>(c.seed);
  if (c.horizon > 0) cfg.mav_horizon = c.horizon;
  if (c.dt > 0.0) cfg.mav_dt = c.dt;
  if (c.safety_dist > 0.0) cfg.safety_dist = c.safety_dist;
  return cfg;
}

MavParams mav_params(const RunConfig& cfg) {
  MavParams p;
  p.horizon = cfg.mav_horizon;
  p.dt = cfg.mav_dt;
  p.safety_dist = cfg.safety_dist;
  return p;
}

// Deterministic stream assignment off the master seed; documented here so
// eval runs are reproducible independent of call order.
enum Stream : uint64_t {
  kCorpus = 1,
  kModelInit = 2,
  kCodecTrain = 3,
  kDiffTrain = 4,
  kTrackEval = 5,
  kDatasetGen = 6,
  kPolicyInit = 7,
  kPolicyTrain = 8,
  kNavReplays = 9,
  kNavMaster = 10,
  kScenes = 11,
  kCheck = 12,
};

Rng stream(const RunConfig& cfg, Stream s) { return Rng(cfg.seed).split(s); }

std::vector<MotionClip> make_corpus(const RunConfig& cfg,
                                    const Skeleton& skel) {
  SynthConfig sc;
  sc.sequences = cfg.corpus_sequences;
  sc.frames = cfg.corpus_frames;
  sc.fps = cfg.fps;
  Rng rng = stream(cfg, kCorpus);
  return synth_corpus(skel, sc, rng);
}

std::vector<MotionClip> make_replays(const RunConfig& cfg,
                                     const Skeleton& skel) {
  Rng rng = stream(cfg, kNavReplays);
  std::vector<MotionClip> replays;
  const long frames =
      static_cast<long>(cfg.episode_cap * cfg.fps) + cfg.corpus_frames;
  for (long i = 0; i < cfg.nav_episodes; ++i) {
    const MotionKind kind =
        i % 3 == 2 ? MotionKind::TurningWalk : MotionKind::StraightWalk;
    replays.push_back(
        synth_clip(skel, kind, frames, cfg.fps, rng.uniform(0.6, 1.3), rng));
  }
  return replays;
}

DiffusionModel make_model(const RunConfig& cfg, ParamStore& ps) {
  CodecConfig cc;
  cc.frames = cfg.corpus_frames;
  DenoiserConfig dc;
  Rng rng = stream(cfg, kModelInit);
  return DiffusionModel(cc, dc, ps, rng);
}

FlowPolicy make_policy(const RunConfig& cfg, bool raw, ParamStore& ps) {
  FlowPolicyConfig pc;
  pc.horizon = cfg.mav_horizon;
  pc.flow_steps = cfg.flow_steps;
  if (raw) {
    pc.token_dim = Skeleton::kJoints * 3;
    pc.tokens = cfg.corpus_frames;
  }
  Rng rng = stream(cfg, kPolicyInit);
  return FlowPolicy(pc, mav_params(cfg), ps, rng);
}

int require_artifact(const std::string& path, const char* what) {
  if (fs::exists(path)) return 0;
  std::fprintf(stderr, "error: missing %s: %s\n", what, path.c_str());
  return 1;
}

int load_model_checkpoint(const RunConfig& cfg, const std::string& dir,
                          ParamStore& ps) {
  if (int rc = require_artifact(dir + "/manifest.txt", "model checkpoint"))
    return rc;
  (void)cfg;
  load_checkpoint(dir, ps);
  return 0;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string window_path(const std::string& out, long i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "win_%05ld.hfmo", i);
  return out + "/windows/" + buf;
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(const RunConfig& cfg, const std::string& out) {
  const Skeleton& skel = Skeleton::standard();
  fs::create_directories(out + "/corpus");
  fs::create_directories(out + "/scenes");
  auto corpus = make_corpus(cfg, skel);
  for (size_t i = 0; i < corpus.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%03zu", i);
    write_motion(out + "/corpus/" + buf + ".hfmo", corpus[i].seq);
    write_contacts(out + "/corpus/" + buf + ".hffc", corpus[i].contacts);
  }
  Rng rng = stream(cfg, kScenes);
  const std::pair<SceneKind, const char*> kinds[] = {
      {SceneKind::EmptyRoom, "empty_room"},
      {SceneKind::CorridorWithPillar, "corridor_pillar"},
      {SceneKind::FurnitureRoom, "furniture_room"}};
  for (const auto& [kind, name] : kinds)
    write_grid(out + "/scenes/" + name + ".hfog", synth_scene(kind, rng));
  std::printf("gen-data: %zu clips, 3 scenes -> %s\n", corpus.size(),
              out.c_str());
  return 0;
}

int cmd_train_codec(const RunConfig& cfg, const std::string& out) {
  const Skeleton& skel = Skeleton::standard();
  auto corpus = make_corpus(cfg, skel);
  ParamStore ps;
  DiffusionModel model = make_model(cfg, ps);
  Rng rng = stream(cfg, kCodecTrain);
  TrainLog log = train_codec_stage(model, ps, corpus, cfg, skel, rng);
  fs::create_directories(out);
  save_checkpoint(out + "/codec", ps,
                  {{"stage", "codec"},
                   {"loss_final", std::to_string(log.final_avg())}});
  std::printf("train-codec: %ld iters, loss %.4f -> %.4f\n", cfg.codec_iters,
              log.loss.front(), log.final_avg());
  return 0;
}

int cmd_train_diffusion(const RunConfig& cfg, const std::string& out) {
  const Skeleton& skel = Skeleton::standard();
  auto corpus = make_corpus(cfg, skel);
  ParamStore ps;
  DiffusionModel model = make_model(cfg, ps);
  if (int rc = require_artifact(out + "/codec/manifest.txt",
                                "codec checkpoint (run train-codec)"))
    return rc;
  load_checkpoint(out + "/codec", ps);
  Rng rng = stream(cfg, kDiffTrain);
  TrainLog log = train_diffusion_stage(model, ps, corpus, {}, cfg, skel, rng);
  save_checkpoint(out + "/model", ps,
                  {{"stage", "diffusion"},
                   {"loss_final", std::to_string(log.final_avg())}});
  std::printf("train-diffusion: %ld iters, loss %.4f -> %.4f\n",
              cfg.diffusion_iters, log.loss.front(), log.final_avg());
  return 0;
}

int cmd_eval_tracking(const RunConfig& cfg, const std::string& out) {
  const Skeleton& skel = Skeleton::standard();
  ParamStore ps;
  DiffusionModel model = make_model(cfg, ps);
  if (int rc = load_model_checkpoint(cfg, out + "/model", ps)) return rc;

  Rng rng = stream(cfg, kTrackEval);
  std::vector<MotionClip> eval_corpus;
  for (long i = 0; i < cfg.track_sequences; ++i)
    eval_corpus.push_back(synth_clip(
        skel, i % 2 ? MotionKind::TurningWalk : MotionKind::StraightWalk,
        cfg.corpus_frames, cfg.fps, rng.uniform(0.5, 1.3), rng));
  TrackSampler sampler = [&](const MotionSequence& obs, long n, Rng& r) {
    return model.sample(obs, nullptr, n, r, skel);
  };
  const TrackProtocol protocol = cfg.track_protocol == "occl"
                                     ? TrackProtocol::OccLower
                                     : TrackProtocol::OccTenPercent;
  TrackingRow row = benchmark_tracking(eval_corpus, protocol, cfg.track_noise,
                                       sampler, cfg.track_samples, skel, rng);
  const std::string csv = tracking_csv({row});
  write_text(out + "/tracking.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return 0;
}

int cmd_gen_trajectories(const RunConfig& cfg, const std::string& out) {
  const Skeleton& skel = Skeleton::standard();
  ParamStore ps;
  DiffusionModel model = make_model(cfg, ps);
  if (int rc = load_model_checkpoint(cfg, out + "/model", ps)) return rc;

  auto corpus = make_corpus(cfg, skel);
  GenResult gen =
      generate_dataset(corpus, model, cfg, skel, stream(cfg, kDatasetGen));
  fs::create_directories(out + "/windows");
  std::vector<TrajectoryRecord> records;
  for (size_t i = 0; i < gen.items.size(); ++i) {
    records.push_back(gen.items[i].rec);
    write_motion(window_path(out, static_cast<long>(i)), gen.items[i].window);
  }
  write_dataset(out + "/dataset.hftj", records, cfg.mav_horizon);
  std::printf("gen-trajectories: %zu records (%ld skipped of %ld) -> %s\n",
              records.size(), gen.skipped, gen.attempted,
              (out + "/dataset.hftj").c_str());
  return 0;
}

int cmd_train_policy(const RunConfig& cfg, const std::string& out, bool raw) {
  const Skeleton& skel = Skeleton::standard();
  ParamStore ps;
  DiffusionModel model = make_model(cfg, ps);
  if (int rc = load_model_checkpoint(cfg, out + "/model", ps)) return rc;
  if (int rc = require_artifact(out + "/dataset.hftj",
                                "trajectory dataset (run gen-trajectories)"))
    return rc;

  long horizon = 0;
  auto records = read_dataset(out + "/dataset.hftj", horizon);
  GenResult gen;
  for (size_t i = 0; i < records.size(); ++i) {
    GenItem item;
    item.rec = records[i];
    const std::string wpath = window_path(out, records[i].motion_ref);
    if (int rc = require_artifact(wpath, "observation window")) return rc;
    item.window = read_motion(wpath);
    gen.items.push_back(std::move(item));
  }

  ParamStore pps;
  FlowPolicy policy = make_policy(cfg, raw, pps);
  std::vector<FlowPolicyObs> obs;
  std::vector<PolicyPair> pairs;
  dataset_to_pairs(gen, model, policy, skel, raw, obs, pairs);
  Rng rng = stream(cfg, kPolicyTrain);
  TrainLog log = train_policy_stage(policy, pps, obs, pairs, cfg, rng);
  const std::string dir = out + (raw ? "/policy_raw" : "/policy");
  save_checkpoint(dir, pps,
                  {{"stage", raw ? "policy_raw" : "policy"},
                   {"loss_final", std::to_string(log.final_avg())}});
  std::printf("train-policy%s: %zu pairs, %ld iters, loss %.4f -> %.4f\n",
              raw ? " (raw)" : "", pairs.size(), cfg.policy_iters,
              log.loss.front(), log.final_avg());
  return 0;
}

int cmd_eval_policy(const RunConfig& cfg, const std::string& out,
                    const std::string& planner_list, bool dump) {
  const Skeleton& skel = Skeleton::standard();
  ParamStore ps;
  DiffusionModel model = make_model(cfg, ps);
  if (int rc = load_model_checkpoint(cfg, out + "/model", ps)) return rc;
  const MavParams mp = mav_params(cfg);
  ScenarioMpc mpc(mp);

  std::vector<std::string> names;
  for (size_t a = 0, b; a < planner_list.size(); a = b + 1) {
    b = planner_list.find(',', a);
    if (b == std::string::npos) b = planner_list.size();
    if (b > a) names.push_back(planner_list.substr(a, b - a));
  }

  ParamStore pps, pps_raw;
  FlowPolicy policy = make_policy(cfg, false, pps);
  FlowPolicy policy_raw = make_policy(cfg, true, pps_raw);
  std::vector<Planner> planners;
  for (const auto& name : names) {
    Planner p;
    p.kind = planner_kind_from_string(name);
    p.forecast_samples = cfg.forecast_samples;
    switch (p.kind) {
      case PlannerKind::Flow:
        if (int rc = require_artifact(out + "/policy/manifest.txt",
                                      "policy checkpoint (run train-policy)"))
          return rc;
        load_checkpoint(out + "/policy", pps);
        p.model = &model;
        p.policy = &policy;
        p.flow_steps = cfg.flow_steps;
        break;
      case PlannerKind::FlowRaw:
        if (int rc = require_artifact(
                out + "/policy_raw/manifest.txt",
                "raw-policy checkpoint (run train-policy --raw)"))
          return rc;
        load_checkpoint(out + "/policy_raw", pps_raw);
        p.policy = &policy_raw;
        p.flow_steps = cfg.flow_steps;
        break;
      case PlannerKind::DcForecast:
      case PlannerKind::FullAvoidance:
        p.model = &model;
        p.mpc = &mpc;
        break;
      default:
        p.mpc = &mpc;
    }
    planners.push_back(p);
  }

  auto replays = make_replays(cfg, skel);
  const Rng master = stream(cfg, kNavMaster);
  auto rows = bench_nav(planners, replays, cfg, skel, master);
  const std::string csv = nav_csv(rows);
  write_text(out + "/nav.csv", csv);
  std::fputs(csv.c_str(), stdout);

  if (dump) {
    // Re-run each episode with the same stream assignment bench_nav uses and
    // dump the MAV path as a J = 1 motion file.
    fs::create_directories(out + "/episodes");
    for (size_t ki = 0; ki < cfg.nav_noise.size(); ++ki) {
      for (long i = 0; i < cfg.nav_episodes; ++i) {
        Rng setup_rng = master.split(1000 + static_cast<uint64_t>(i) * 16 + ki);
        EpisodeSetup setup =
            make_episode(replays[i % replays.size()], cfg.nav_noise[ki], cfg,
                         skel, setup_rng);
        for (size_t pi = 0; pi < planners.size(); ++pi) {
          Rng run_rng = master.split(100000 + pi * 65536 +
                                     static_cast<uint64_t>(i) * 16 + ki);
          EpisodeResult res =
              run_episode(planners[pi], setup, cfg, skel, run_rng);
          MotionSequence path(static_cast<long>(res.log.size()), 1, cfg.fps);
          for (size_t s = 0; s < res.log.size(); ++s) {
            path.set_pos(static_cast<long>(s), 0, res.log[s].state.position);
            path.set_observed(static_cast<long>(s), 0, 1);
          }
          char buf[96];
          std::snprintf(buf, sizeof(buf), "%s_k%g_ep%03ld.hfmo",
                        to_string(planners[pi].kind).c_str(),
                        cfg.nav_noise[ki], i);
          write_motion(out + "/episodes/" + buf, path);
        }
      }
    }
  }
  return 0;
}

int cmd_grad_check(const RunConfig& cfg) {
  const Skeleton& skel = Skeleton::standard();
  Rng data_rng = stream(cfg, kCheck);

  // Small shapes keep finite differences fast without changing any layer type.
  RunConfig small = cfg;
  small.corpus_frames = 16;
  small.mav_horizon = 8;
  ParamStore ps;
  DiffusionModel model = make_model(small, ps);
  std::vector<MotionClip> clips;
  for (int i = 0; i < 2; ++i)
    clips.push_back(synth_clip(skel, MotionKind::StraightWalk, 16, 10.0,
                               0.8 + 0.2 * i, data_rng));
  OccupancyGrid scene = human_crop(synth_scene(SceneKind::FurnitureRoom,
                                               data_rng),
                                   clips[0].seq.pos(0, 0), 3.2, 16);
  std::vector<TrainItem> batch = {{&clips[0], &scene}, {&clips[1], &scene}};
  CorruptConfig cc;
  cc.noise_level = 3.0;

  bool ok = true;
  {
    Rng loss_rng = data_rng.split(1);
    auto loss = [&] {
      Rng r = loss_rng;  // identical corruption draw per evaluation
      return model.train_loss(batch, cc, r, skel).total;
    };
    std::vector<std::pair<std::string, Tensor>> params(ps.all().begin(),
                                                       ps.all().end());
    Rng pick = data_rng.split(2);
    GradCheckResult res = grad_check(loss, params, 1e-5, 96, &pick);
    std::printf("grad-check motion model: max rel err %.3e (%s, %ld coords)\n",
                res.max_rel_err, res.worst_param.c_str(), res.checked_coords);
    ok = ok && res.max_rel_err < 1e-4;
  }
  {
    ParamStore pps;
    FlowPolicy policy = make_policy(small, false, pps);
    Rng orng = data_rng.split(3);
    const long dim = policy.config().obs_dim();
    std::vector<FlowPolicyObs> obs(2);
    Tensor targets = Tensor::randn({2, policy.config().action_dim()}, orng);
    for (auto& o : obs)
      for (long i = 0; i < dim; ++i) o.data.push_back(orng.normal());
    Rng loss_rng = data_rng.split(4);
    auto loss = [&] {
      Rng r = loss_rng;
      return policy.fm_loss(obs_batch(obs), targets, r);
    };
    std::vector<std::pair<std::string, Tensor>> params(pps.all().begin(),
                                                       pps.all().end());
    Rng pick = data_rng.split(5);
    GradCheckResult res = grad_check(loss, params, 1e-5, 96, &pick);
    std::printf("grad-check flow policy: max rel err %.3e (%s, %ld coords)\n",
                res.max_rel_err, res.worst_param.c_str(), res.checked_coords);
    ok = ok && res.max_rel_err < 1e-4;
  }
  std::printf("grad-check: %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int cmd_esdf_check(const RunConfig& cfg) {
  Rng rng = stream(cfg, kCheck);
  bool ok = true;
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
    double max_err = 0.0;
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
                  best = std::min(
                      best, (grid.center(a, b, c) - grid.center(i, j, k))
                                .norm());
          max_err = std::max(max_err, std::abs(best - esdf.at(i, j, k)));
        }
    std::printf("esdf-check grid %2d (%ldx%ldx%ld): max err %.3e\n", g,
                grid.nx, grid.ny, grid.nz, max_err);
    ok = ok && max_err < 1e-9;
  }
  std::printf("esdf-check: %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HumanFlow pipeline: motion tracking, offline trajectory "
               "generation, flow-matching MAV policy"};
  app.require_subcommand(1);

  Common c;
  struct {
    bool raw = false;
    bool dump = false;
    std::string planners =
        "dc_static,dc_constvel,dc_forecast,frs,full_avoidance,flow";
    std::string protocol;
    double noise = -1.0;
  } opt;

  auto* gen_data = app.add_subcommand("gen-data", "Synthesize motion corpus and scenes");
  auto* train_codec = app.add_subcommand("train-codec", "Stage 1: motion autoencoder");
  auto* train_diffusion = app.add_subcommand("train-diffusion", "Stage 2: latent denoiser");
  auto* eval_tracking = app.add_subcommand("eval-tracking", "Tracking benchmark CSV");
  auto* gen_traj = app.add_subcommand("gen-trajectories", "Offline scenario-MPC dataset");
  auto* train_policy = app.add_subcommand("train-policy", "Stage 3: flow-matching policy");
  auto* eval_policy = app.add_subcommand("eval-policy", "Closed-loop navigation benchmark CSV");
  auto* grad_check_cmd = app.add_subcommand("grad-check", "Finite-difference gradient audit");
  auto* esdf_check_cmd = app.add_subcommand("esdf-check", "ESDF vs brute force audit");

  for (auto* cmd : {gen_data, train_codec, train_diffusion, eval_tracking,
                    gen_traj, train_policy, eval_policy, grad_check_cmd,
                    esdf_check_cmd})
    add_common(cmd, c);
  train_policy->add_flag("--raw", opt.raw,
                         "Past-joints ablation (raw observations)");
  eval_policy->add_option("--planners", opt.planners,
                          "Comma-separated planner list");
  eval_policy->add_flag("--dump-episodes", opt.dump,
                        "Write per-episode MAV paths");
  eval_tracking->add_option("--protocol", opt.protocol, "occ10 | occl");
  eval_tracking->add_option("--noise", opt.noise, "Noise level k");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n\n%s", e.what(), app.help().c_str());
    return 2;
  }

  try {
    RunConfig cfg = build_config(c);
    if (!opt.protocol.empty()) cfg.apply("track.protocol", opt.protocol);
    if (opt.noise >= 0.0) cfg.track_noise = opt.noise;
    fs::create_directories(c.out);

    if (gen_data->parsed()) return cmd_gen_data(cfg, c.out);
    if (train_codec->parsed()) return cmd_train_codec(cfg, c.out);
    if (train_diffusion->parsed()) return cmd_train_diffusion(cfg, c.out);
    if (eval_tracking->parsed()) return cmd_eval_tracking(cfg, c.out);
    if (gen_traj->parsed()) return cmd_gen_trajectories(cfg, c.out);
    if (train_policy->parsed()) return cmd_train_policy(cfg, c.out, opt.raw);
    if (eval_policy->parsed())
      return cmd_eval_policy(cfg, c.out, opt.planners, opt.dump);
    if (grad_check_cmd->parsed()) return cmd_grad_check(cfg);
    if (esdf_check_cmd->parsed()) return cmd_esdf_check(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
