#pragma once

#include "humanflow/diffusion.hpp"
#include "humanflow/mav.hpp"

namespace hf {

/// Flat policy observation: [vec(z) (tokens*token_dim), vec(z_S) (d_s),
/// goal in navigation frame (3), velocity in navigation frame (3), pitch,
/// roll]. The navigation frame is the world frame rotated about z by the
/// MAV yaw and centered at the MAV position.
struct FlowPolicyObs {
  std::vector<double> data;
  long size() const { return static_cast<long>(data.size()); }
};

struct FlowPolicyConfig {
  long token_dim = 32;  // latent width per sequence token (d_z, or J*3 raw)
  long tokens = 12;     // sequence tokens (T' latent steps, or T raw frames)
  long d_s = 32;        // scene latent width
  long horizon = 20;    // control steps T
  int flow_steps = 10;  // Euler substeps at inference

  // goal(3) + v(3) + pitch + roll + human root offset in nav frame (3)
  long extras() const { return 11; }
  long time_features() const { return 9; }  // t plus 4 sin/cos octaves
  long obs_dim() const { return tokens * token_dim + d_s + extras(); }
  long action_dim() const { return 3 * horizon; }
};

/// Observation in the navigation frame. The human window is translated by
/// the negated MAV xy position (the frozen encoder consumes MAV-relative
/// coordinates); goal and velocity are rotated into the frame. `scene` may
/// be null (zero scene latent).
FlowPolicyObs build_obs(const MotionSequence& window, const OccupancyGrid* scene,
                        const MavState& x0, const Eigen::Vector3d& goal,
                        double yaw, const DiffusionModel& model,
                        const Skeleton& skel);

/// Raw-joint ablation observation: the compressor consumes per-frame joint
/// positions (MAV-relative) instead of frozen latents; token_dim = J*3,
/// tokens = window frames; the scene slot is zero.
FlowPolicyObs build_obs_raw(const MotionSequence& window, const MavState& x0,
                            const Eigen::Vector3d& goal, double yaw,
                            const Skeleton& skel, long d_s);

/// Flow-matching policy over normalized control sequences y in [-1,1]^{3T}.
/// The vector field v(y, t, o) is an MLP: sequence tokens pass through a
/// shared 64-32-8 compressor and are flattened; the scene latent passes
/// through its own 64-32-8 compressor; the head maps [y, cond, t] through
/// 256-128-64 to 3T.
class FlowPolicy {
 public:
  FlowPolicy(const FlowPolicyConfig& cfg, const MavParams& mav, ParamStore& ps,
             Rng& rng);

  const FlowPolicyConfig& config() const { return cfg_; }

  /// v(y, t, o) for a batch: y (B, 3T), obs (B, obs_dim), t (B).
  Tensor velocity(const Tensor& y, const Tensor& obs,
                  const std::vector<double>& t) const;

  /// Flow-matching loss over a batch of (obs, normalized target controls):
  /// y(t) = (1-t) y0 + t y1 with y0 ~ N(0,I), t ~ U(0,1); MSE against
  /// y1 - y0.
  Tensor fm_loss(const Tensor& obs, const Tensor& targets, Rng& rng) const;

  /// Euler integration of dy/dt = v from y(0) ~ N(0,I); de-normalized and
  /// clamped controls, one Vector3d per step.
  std::vector<Eigen::Vector3d> act(const FlowPolicyObs& obs, Rng& rng,
                                   int steps = 0) const;

  /// [-1,1] <-> physical control bounds.
  Eigen::VectorXd normalize(const Eigen::VectorXd& u) const;
  Eigen::VectorXd denormalize(const Eigen::VectorXd& y) const;

 private:
  Tensor run_mlp(const std::vector<Linear>& layers, const Tensor& x,
                 bool relu_last) const;

  FlowPolicyConfig cfg_;
  MavParams mav_;
  std::vector<Linear> token_mlp_, scene_mlp_, head_, gate_;
  Linear time_trunk_;
};

/// Convenience: stack observations / targets into batch tensors.
Tensor obs_batch(const std::vector<FlowPolicyObs>& obs);

}  // namespace hf
