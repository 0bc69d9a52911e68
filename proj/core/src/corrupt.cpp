#include "humanflow/corrupt.hpp"

#include <algorithm>
#include <cmath>

namespace hf {

namespace {
constexpr double kDegToRad = 0.017453292519943295;
}

MotionSequence corrupt(const Skeleton& skel,
                       const std::vector<PoseParams>& clean_poses,
                       const CorruptConfig& cfg, Rng& rng, double fps) {
  const long T = static_cast<long>(clean_poses.size());
  const double sigma_rot = cfg.noise_level * cfg.strength * kDegToRad;
  const double sigma_trans = cfg.noise_level * cfg.strength * 0.01;  // cm -> m

  std::vector<PoseParams> noisy = clean_poses;
  if (sigma_rot > 0.0 || sigma_trans > 0.0) {
    for (auto& pose : noisy) {
      for (auto& a : pose.joint_angles)
        for (int c = 0; c < 3; ++c) a[c] += rng.normal(0.0, sigma_rot);
      for (int c = 0; c < 3; ++c)
        pose.root_translation[c] += rng.normal(0.0, sigma_trans);
    }
  }
  MotionSequence seq = sequence_from_poses(skel, noisy, fps);

  const double p_frame = cfg.frame_dropout_p * cfg.strength;
  const double p_part = cfg.part_dropout_p * cfg.strength;
  const double p_forecast = cfg.forecast_p * cfg.strength;

  if (T >= 2 && rng.uniform() < p_frame) {
    const long span = rng.uniform_int(1, std::max<long>(1, T / 4));
    const long start = rng.uniform_int(0, T - span);
    for (long t = start; t < start + span; ++t)
      for (long j = 0; j < seq.joints; ++j) seq.set_observed(t, j, 0);
  }
  if (T >= 2 && rng.uniform() < p_part) {
    static const JointGroup kGroups[] = {JointGroup::LeftLeg,
                                         JointGroup::RightLeg,
                                         JointGroup::Torso,
                                         JointGroup::LeftArm,
                                         JointGroup::RightArm,
                                         JointGroup::Head};
    const auto joints = skel.group(kGroups[rng.uniform_int(0, 5)]);
    const long span = rng.uniform_int(1, std::max<long>(1, T / 2));
    const long start = rng.uniform_int(0, T - span);
    for (long t = start; t < start + span; ++t)
      for (int j : joints) seq.set_observed(t, j, 0);
  }
  if (T >= 2 && rng.uniform() < p_forecast) {
    const long first_masked = rng.uniform_int(T / 2, T - 1);
    mask_suffix(seq, first_masked);
  }
  return seq;
}

void mask_lower_body(const Skeleton& skel, MotionSequence& seq) {
  for (JointGroup g : {JointGroup::LeftLeg, JointGroup::RightLeg})
    for (int j : skel.group(g))
      for (long t = 0; t < seq.frames; ++t) seq.set_observed(t, j, 0);
}

void mask_contiguous_fraction(MotionSequence& seq, double fraction, Rng& rng) {
  const long span =
      std::min(seq.frames,
               static_cast<long>(std::llround(fraction * double(seq.frames))));
  if (span <= 0) return;
  const long start = rng.uniform_int(0, seq.frames - span);
  for (long t = start; t < start + span; ++t)
    for (long j = 0; j < seq.joints; ++j) seq.set_observed(t, j, 0);
}

void mask_suffix(MotionSequence& seq, long first_masked_frame) {
  for (long t = std::max<long>(0, first_masked_frame); t < seq.frames; ++t)
    for (long j = 0; j < seq.joints; ++j) seq.set_observed(t, j, 0);
}

double cosine_ramp(long iter, long total) {
  if (total <= 0 || iter >= total) return 1.0;
  if (iter < 0) return 0.0;
  const double x = static_cast<double>(iter) / static_cast<double>(total);
  return 0.5 * (1.0 - std::cos(3.14159265358979323846 * x));
}

}  // namespace hf
