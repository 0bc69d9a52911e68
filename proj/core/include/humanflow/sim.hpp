#pragma once

#include "humanflow/config.hpp"
#include "humanflow/dataset.hpp"
#include "humanflow/metrics.hpp"
#include "humanflow/policy.hpp"
#include "humanflow/scenario_mpc.hpp"
#include "humanflow/train.hpp"

namespace hf {

enum class PlannerKind {
  DcStatic,
  DcConstVel,
  DcForecast,
  Frs,
  FullAvoidance,
  Flow,
  FlowRaw  // past-joints ablation: same capacity, raw-joint observations
};

PlannerKind planner_kind_from_string(const std::string& name);
std::string to_string(PlannerKind kind);

/// Everything a planner needs at decision time; unused members may stay
/// null for kinds that do not touch them.
struct Planner {
  PlannerKind kind = PlannerKind::DcStatic;
  const DiffusionModel* model = nullptr;  // forecasts / frozen encoders
  const FlowPolicy* policy = nullptr;     // flow variants
  const ScenarioMpc* mpc = nullptr;       // optimization-based planners
  long forecast_samples = 10;
  int flow_steps = 0;  // 0 = policy default
};

/// Shared episode initial conditions; identical across planners so suites
/// are comparable.
struct EpisodeSetup {
  const MotionClip* replay = nullptr;  // ground-truth human motion
  MotionSequence corrupted;            // what perception delivers
  MavState x0;
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  double noise_k = 0.0;
};

struct StepLog {
  MavState state;
  Eigen::Vector3d u0 = Eigen::Vector3d::Zero();
  double min_human_dist = 0.0;
};

struct EpisodeResult {
  EpisodeOutcome outcome;
  std::vector<StepLog> log;
};

/// Past `past` frames (inclusive of `current`) of the stream plus a masked
/// future suffix, as one `frames`-long window ending `frames - past` steps
/// ahead of `current`. Frames before the stream start are masked.
MotionSequence window_at(const MotionSequence& stream, long current,
                         long frames, long past);

/// Crossing-style initial conditions: start and goal on opposite sides of a
/// point the human will occupy a few seconds in, so the direct route
/// conflicts with the human's path.
EpisodeSetup make_episode(const MotionClip& replay, double noise_k,
                          const RunConfig& cfg, const Skeleton& skel, Rng& rng);

/// 10 Hz receding-horizon loop; terminates on goal (radius
/// cfg.goal_radius), collision (safety_dist against true joints), or the
/// episode cap.
EpisodeResult run_episode(const Planner& planner, const EpisodeSetup& setup,
                          const RunConfig& cfg, const Skeleton& skel, Rng& rng);

struct NavRow {
  std::string planner;
  double noise_k = 0.0;
  NavMetrics metrics;
};

/// Every planner over the shared episode suite at each configured noise
/// level. Episode initial conditions depend only on (episode index, noise);
/// planner stochasticity uses independent streams.
std::vector<NavRow> bench_nav(const std::vector<Planner>& planners,
                              const std::vector<MotionClip>& replays,
                              const RunConfig& cfg, const Skeleton& skel,
                              const Rng& master);

std::string nav_csv(const std::vector<NavRow>& rows);
std::string tracking_csv(const std::vector<TrackingRow>& rows);

/// One generated planning instance: the record plus the observed window it
/// was planned from (window index == record.motion_ref).
struct GenItem {
  TrajectoryRecord rec;
  MotionSequence window;
};

struct GenResult {
  std::vector<GenItem> items;
  long attempted = 0;
  long skipped = 0;
};

/// Offline scenario-MPC supervision: corrupt + suffix-mask a corpus window,
/// forecast n futures, sample start/goal in a feasible annulus around the
/// human, solve the shared-first-control problem, keep feasible instances.
GenResult generate_dataset(const std::vector<MotionClip>& corpus,
                           const DiffusionModel& model, const RunConfig& cfg,
                           const Skeleton& skel, const Rng& master);

/// Expand generated instances into flow-matching training pairs (one per
/// scenario control sequence) with precomputed observations.
void dataset_to_pairs(const GenResult& gen, const DiffusionModel& model,
                      const FlowPolicy& policy, const Skeleton& skel,
                      bool raw_obs, std::vector<FlowPolicyObs>& obs,
                      std::vector<PolicyPair>& pairs);

}  // namespace hf
