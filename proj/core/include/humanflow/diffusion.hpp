#pragma once

#include <functional>
#include <optional>

#include "humanflow/codec.hpp"
#include "humanflow/corrupt.hpp"
#include "humanflow/scene.hpp"
#include "humanflow/synth.hpp"

namespace hf {

struct DdpmSchedule {
  long train_steps = 100;
  long inference_steps = 10;
  std::vector<double> beta, alpha, alpha_bar;

  static DdpmSchedule make(long train_steps = 100, long inference_steps = 10,
                           double beta_start = 1e-4, double beta_end = 2e-2);

  /// Evenly strided inference timesteps, descending: {N, N-N/k, ..., N/k}.
  std::vector<long> inference_timesteps() const;
};

struct DenoiserConfig {
  long hidden = 64;
  int depth = 2;
  int heads = 4;
  long d_s = 32;  // scene latent width
};

/// 3D conv tower (1 -> 8 -> 16 -> 32 channels), global average pool, linear
/// projection to the scene latent.
class SceneEncoder {
 public:
  SceneEncoder() = default;
  SceneEncoder(ParamStore& ps, long d_s, Rng& rng);

  Tensor forward(const Tensor& grid) const;  // (B,1,D,H,W) -> (B, d_s)

  /// Scalar coding free=0, occupied=1, unknown=0.5 as a (1,1,nx,ny,nz) tensor.
  static Tensor grid_to_tensor(const OccupancyGrid& grid);

 private:
  Conv3dLayer c1_, c2_, c3_;
  Linear proj_;
};

/// Transformer denoiser with x0-prediction. Tokens are latent steps; input
/// is concat(z_t, z_noisy) projected to the hidden width, plus sinusoidal
/// positions, a learned observed/unobserved mask embedding per latent step,
/// and a timestep embedding. Scene conditioning enters via per-layer FiLM;
/// without a scene the modulation is zero.
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(const CodecConfig& codec_cfg, const DenoiserConfig& cfg,
           ParamStore& ps, Rng& rng);

  /// z_t, z_noisy (B,T',d_z); mask_ids (B*T') in {0,1}; t (B) in [1,N];
  /// scene latent optional (B,d_s).
  Tensor forward(const Tensor& z_t, const Tensor& z_noisy,
                 const std::vector<long>& mask_ids,
                 const std::vector<long>& timesteps, long train_steps,
                 const Tensor* scene_latent) const;

 private:
  CodecConfig codec_cfg_;
  DenoiserConfig cfg_;
  Linear in_proj_, out_proj_, time_proj_;
  Tensor mask_table_;  // (2, hidden)
  std::vector<TransformerLayer> layers_;
  std::vector<Linear> film_;
  Tensor pos_;  // (T', hidden)
};

struct DiffusionLossTerms {
  Tensor total, diff, vel, foot, bone;
};

struct TrainItem {
  const MotionClip* clip = nullptr;      // clean sequence + poses + contacts
  const OccupancyGrid* scene = nullptr;  // human-centric crop, optional
};

/// Pre-fill in world coordinates: canonicalize by the first observed root
/// xy, pre-fill, translate back.
MotionSequence prefill_world(const MotionSequence& observed,
                             const Skeleton& skel);

enum class TrackProtocol { OccLower, OccTenPercent };

struct TrackingRow {
  std::string protocol;
  double noise_k = 0.0;
  double gmpjpe_vis_mean = 0.0, gmpjpe_vis_std = 0.0;
  double gmpjpe_occ_mean = 0.0, gmpjpe_occ_std = 0.0;
  double gmpjpe_all_mean = 0.0, gmpjpe_all_std = 0.0;
  double accel_mean = 0.0, accel_std = 0.0;
  double skate_mean = 0.0, dist_mean = 0.0;
  // Zero-order-hold pre-fill baseline on the same masked inputs.
  double baseline_occ_mean = 0.0, baseline_accel_mean = 0.0;
};

/// Latent diffusion over codec latents: joint tracking, infilling and
/// forecasting of human motion conditioned on corrupted observations and
/// optional scene context.
class DiffusionModel {
 public:
  DiffusionModel(const CodecConfig& codec_cfg, const DenoiserConfig& den_cfg,
                 ParamStore& ps, Rng& rng);

  const MotionCodec& codec() const { return codec_; }
  const SceneEncoder& scene_encoder() const { return scene_; }
  const DdpmSchedule& schedule() const { return sched_; }
  const CodecConfig& codec_config() const { return codec_.config(); }

  double lambda_vel = 1.0, lambda_foot = 0.1, lambda_bone = 0.1;

  /// One training forward pass over a batch: corrupt, pre-fill, encode,
  /// noise at a per-sample uniform timestep, denoise, decode, kinematic
  /// losses. Caller runs backward + the optimizer step.
  /// `xy_jitter` adds a uniform random xy shift (meters) after
  /// canonicalization so the encoders tolerate off-origin inputs.
  DiffusionLossTerms train_loss(const std::vector<TrainItem>& batch,
                                const CorruptConfig& corrupt_cfg, Rng& rng,
                                const Skeleton& skel,
                                double xy_jitter = 0.0) const;

  /// Ancestral DDPM sampling over the strided inference timesteps;
  /// conditions on the pre-filled observation and mask. Returns n decoded
  /// sequences in world coordinates.
  std::vector<MotionSequence> sample(const MotionSequence& observed,
                                     const OccupancyGrid* scene,
                                     long n_samples, Rng& rng,
                                     const Skeleton& skel) const;

  /// Zero-order-hold pre-fill used as conditioning and as the tracking
  /// baseline (canonicalization applied and undone internally).
  MotionSequence prefill_baseline(const MotionSequence& observed,
                                  const Skeleton& skel) const;

 private:
  MotionCodec codec_;
  SceneEncoder scene_;
  Denoiser den_;
  DdpmSchedule sched_;
};

/// A sampler maps an observed (masked, noisy) sequence to n completions;
/// the benchmark also accepts oracles for harness self-tests.
using TrackSampler = std::function<std::vector<MotionSequence>(
    const MotionSequence& observed, long n_samples, Rng& rng)>;

/// Apply the protocol mask + joint noise at level k to each ground-truth
/// sequence, run the sampler, and aggregate metrics (mean +- std over
/// sequences). The zero-order-hold pre-fill is scored as the baseline.
TrackingRow benchmark_tracking(const std::vector<MotionClip>& corpus,
                               TrackProtocol protocol, double noise_k,
                               const TrackSampler& sampler, long n_samples,
                               const Skeleton& skel, Rng& rng);

}  // namespace hf
