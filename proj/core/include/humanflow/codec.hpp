#pragma once

#include <utility>
#include <vector>

#include "humanflow/motion.hpp"
#include "humanflow/nn.hpp"
#include "humanflow/skeleton.hpp"

namespace hf {

struct CodecConfig {
  long frames = 48;
  long joints = 22;
  long d_z = 32;
  int depth = 2;
  int heads = 4;
  double lambda_vel = 1.0;
  double lambda_bone = 0.1;

  long features() const { return joints * 3; }
  long latent_frames() const { return frames / 4; }  // two stride-2 blocks
};

/// Mean pose: rest pose translated so the lowest joint touches the ground.
std::vector<Eigen::Vector3d> mean_pose(const Skeleton& skel);

/// Pre-fill for noisy/partial sequences: unobserved joints in a partially
/// observed frame take mean-pose positions; fully masked frames copy the
/// previous pre-filled frame (zero-order hold); a leading fully-masked
/// prefix (or an all-masked sequence) uses the mean pose.
MotionSequence prefill(const MotionSequence& seq, const Skeleton& skel);

/// (T, J*3) -> tensor (1, T, F) or batched (B, T, F).
Tensor motion_to_tensor(const MotionSequence& seq);
Tensor motion_batch_to_tensor(const std::vector<MotionSequence>& seqs);
MotionSequence tensor_to_motion(const Tensor& x, long batch_index, double fps);

/// Temporal autoencoder: two stride-2 conv blocks (k3s2 + k1) halve the
/// frame count twice, then a pre-LN transformer over the latent steps; the
/// decoder mirrors with nearest-neighbor upsampling. A separate encoder of
/// the same shape handles pre-filled noisy input.
class MotionCodec {
 public:
  MotionCodec(const CodecConfig& cfg, ParamStore& ps, Rng& rng);

  Tensor encode(const Tensor& h) const;        // (B, T, F) -> (B, T', d_z)
  Tensor encode_noisy(const Tensor& h) const;  // same shapes, separate params
  Tensor decode(const Tensor& z) const;        // (B, T', d_z) -> (B, T, F)

  const CodecConfig& config() const { return cfg_; }

 private:
  struct EncoderTower {
    Conv1dLayer c1a, c1b, c2a, c2b;
    TransformerStack stack;
  };
  EncoderTower make_tower(ParamStore& ps, const std::string& prefix, Rng& rng);
  Tensor run_tower(const EncoderTower& tower, const Tensor& h) const;

  CodecConfig cfg_;
  EncoderTower enc_, enc_noisy_;
  TransformerStack dec_stack_;
  Conv1dLayer dec_c1a_, dec_c1b_, dec_c2a_, dec_c2b_;
  Tensor pos_latent_;  // (T', d_z) sinusoidal table
};

using BoneEdges = std::vector<std::pair<int, int>>;  // (child, parent)
BoneEdges skeleton_edges(const Skeleton& skel);

/// Mean over frames and joints of the squared 3D error norm (3x the
/// elementwise MSE).
Tensor position_loss(const Tensor& pred, const Tensor& target);

/// MSE of finite-difference velocities (m/s).
Tensor velocity_loss(const Tensor& pred, const Tensor& target, double fps);

/// Mean squared temporal change of bone lengths, averaged over edges and
/// frame pairs.
Tensor bone_loss(const Tensor& pred, const BoneEdges& edges);

/// Contact-gated squared foot velocity, normalized by (#foot joints x frame
/// pairs); `contact` is row-major (T x foot_ids.size()) shared across the
/// batch, or (B x T x foot_ids.size()) per element; pairs (t, t+1) gate by
/// the label at t.
Tensor foot_contact_loss(const Tensor& pred, const std::vector<int>& foot_ids,
                         const std::vector<uint8_t>& contact, double fps);

struct AeLossTerms {
  Tensor total, mse, vel, bone;
};

AeLossTerms ae_loss(const Tensor& pred, const Tensor& target,
                    const Skeleton& skel, double fps, const CodecConfig& cfg);

}  // namespace hf
