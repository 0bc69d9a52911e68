#pragma once

#include "humanflow/config.hpp"
#include "humanflow/dataset.hpp"
#include "humanflow/diffusion.hpp"
#include "humanflow/policy.hpp"

namespace hf {

struct TrainLog {
  std::vector<double> loss;  // one entry per iteration
  double final_avg(long window = 50) const;
};

/// Stage 1: autoencoder on clean sequences (clean encoder + decoder only).
TrainLog train_codec_stage(const DiffusionModel& model, ParamStore& ps,
                           const std::vector<MotionClip>& corpus,
                           const RunConfig& cfg, const Skeleton& skel,
                           Rng& rng);

/// Stage 2: denoiser + noisy encoder (+ scene encoder when scenes are
/// attached) against frozen codec weights.
TrainLog train_diffusion_stage(const DiffusionModel& model, ParamStore& ps,
                               const std::vector<MotionClip>& corpus,
                               const std::vector<const OccupancyGrid*>& scenes,
                               const RunConfig& cfg, const Skeleton& skel,
                               Rng& rng);

/// Flow-matching behavior cloning from precomputed observations; each
/// record contributes one pair per scenario control sequence.
struct PolicyPair {
  long obs_index = 0;
  Eigen::VectorXd target;  // normalized controls in [-1,1]
};

TrainLog train_policy_stage(const FlowPolicy& policy, ParamStore& ps,
                            const std::vector<FlowPolicyObs>& observations,
                            const std::vector<PolicyPair>& pairs,
                            const RunConfig& cfg, Rng& rng);

}  // namespace hf
