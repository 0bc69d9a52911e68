#include "humanflow/synth.hpp"

#include <algorithm>
#include <cmath>

namespace hf {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Root height so that the lowest of `candidate_toes` touches z = 0.
double grounded_root_z(const Skeleton& skel, PoseParams pose,
                       const std::vector<int>& candidate_toes) {
  pose.root_translation.z() = 0.0;
  const auto pos = forward_kinematics(skel, pose);
  double zmin = 1e9;
  for (int j : candidate_toes)
    zmin = std::min(zmin, pos[static_cast<size_t>(j)].z());
  return -zmin;
}

MotionClip finalize(const Skeleton& skel, std::vector<PoseParams> poses,
                    std::vector<std::array<uint8_t, 2>> leg_contact,
                    double fps, MotionKind kind) {
  MotionClip clip;
  clip.kind = kind;
  clip.poses = std::move(poses);
  clip.seq = sequence_from_poses(skel, clip.poses, fps);
  clip.contacts.frames = clip.seq.frames;
  clip.contacts.foot_joint_ids = skel.foot_joints();  // {8, 9, 12, 13}
  clip.contacts.contact.resize(
      static_cast<size_t>(clip.seq.frames) * clip.contacts.foot_joint_ids.size());
  for (long t = 0; t < clip.seq.frames; ++t) {
    const auto& lc = leg_contact[static_cast<size_t>(t)];
    // foot_joint_ids order: l_ankle, l_toe, r_ankle, r_toe.
    clip.contacts.contact[static_cast<size_t>(t) * 4 + 0] = lc[0];
    clip.contacts.contact[static_cast<size_t>(t) * 4 + 1] = lc[0];
    clip.contacts.contact[static_cast<size_t>(t) * 4 + 2] = lc[1];
    clip.contacts.contact[static_cast<size_t>(t) * 4 + 3] = lc[1];
  }
  return clip;
}

MotionClip make_walk(const Skeleton& skel, long frames, double fps,
                     double speed, double turn_rate, Rng& rng,
                     MotionKind kind) {
  const double dt = 1.0 / fps;
  const double heading0 = rng.uniform(-kPi, kPi);
  const double phase0 = rng.uniform(0.0, 2.0 * kPi);
  const double cycle_freq = std::max(0.8, speed / 0.7);  // full gait cycles/s
  const double leg_len = 0.82;
  const double hip_amp =
      std::min(0.5, speed / (4.0 * cycle_freq * leg_len));
  const double knee_amp = 0.55;

  std::vector<PoseParams> poses;
  std::vector<std::array<uint8_t, 2>> contact;
  double x = rng.uniform(-1.0, 1.0), y = rng.uniform(-1.0, 1.0);
  for (long t = 0; t < frames; ++t) {
    const double time = t * dt;
    const double heading = heading0 + turn_rate * time;
    const double phi = phase0 + 2.0 * kPi * cycle_freq * time;

    PoseParams p = PoseParams::rest();
    p.joint_angles[0] = Eigen::Vector3d(0, 0, heading);
    // Hip swing about the y axis; knee flexion only during swing.
    const double hl = hip_amp * std::sin(phi);
    const double hr = hip_amp * std::sin(phi + kPi);
    p.joint_angles[6] = Eigen::Vector3d(0, hl, 0);
    p.joint_angles[10] = Eigen::Vector3d(0, hr, 0);
    const double swing_l = std::max(0.0, std::cos(phi));
    const double swing_r = std::max(0.0, std::cos(phi + kPi));
    p.joint_angles[7] = Eigen::Vector3d(0, -knee_amp * swing_l, 0);
    p.joint_angles[11] = Eigen::Vector3d(0, -knee_amp * swing_r, 0);
    // Counter-phase arm swing.
    p.joint_angles[15] = Eigen::Vector3d(0.15 * std::sin(phi + kPi), 0, 0);
    p.joint_angles[19] = Eigen::Vector3d(0.15 * std::sin(phi), 0, 0);

    const bool stance_l = std::cos(phi) < 0.0;
    const bool stance_r = std::cos(phi + kPi) < 0.0;
    std::vector<int> ground_toes;
    if (stance_l) ground_toes.push_back(9);
    if (stance_r) ground_toes.push_back(13);
    if (ground_toes.empty()) ground_toes = {9, 13};

    p.root_translation = Eigen::Vector3d(x, y, 0);
    p.root_translation.z() = grounded_root_z(skel, p, ground_toes);
    poses.push_back(p);
    contact.push_back({static_cast<uint8_t>(stance_l ? 1 : 0),
                       static_cast<uint8_t>(stance_r ? 1 : 0)});

    x += speed * std::cos(heading) * dt;
    y += speed * std::sin(heading) * dt;
  }
  return finalize(skel, std::move(poses), std::move(contact), fps, kind);
}

MotionClip make_idle(const Skeleton& skel, long frames, double fps, Rng& rng) {
  const double dt = 1.0 / fps;
  const double heading = rng.uniform(-kPi, kPi);
  const double sway_freq = rng.uniform(0.2, 0.5);
  const double x = rng.uniform(-1.0, 1.0), y = rng.uniform(-1.0, 1.0);

  PoseParams base = PoseParams::rest();
  base.joint_angles[0] = Eigen::Vector3d(0, 0, heading);
  base.root_translation = Eigen::Vector3d(x, y, 0);
  const double root_z = grounded_root_z(skel, base, skel.toe_joints());

  std::vector<PoseParams> poses;
  std::vector<std::array<uint8_t, 2>> contact;
  for (long t = 0; t < frames; ++t) {
    const double s = 0.06 * std::sin(2.0 * kPi * sway_freq * t * dt);
    PoseParams p = base;
    p.root_translation.z() = root_z;
    // Upper-body sway only; the legs stay planted.
    p.joint_angles[1] = Eigen::Vector3d(s, 0, 0);
    p.joint_angles[2] = Eigen::Vector3d(s * 0.5, 0, 0);
    p.joint_angles[15] = Eigen::Vector3d(2.0 * s, 0, 0);
    p.joint_angles[19] = Eigen::Vector3d(-2.0 * s, 0, 0);
    poses.push_back(p);
    contact.push_back({1, 1});
  }
  return finalize(skel, std::move(poses), std::move(contact), fps,
                  MotionKind::IdleSway);
}

MotionClip make_sit(const Skeleton& skel, long frames, double fps, Rng& rng) {
  const double heading = rng.uniform(-kPi, kPi);
  const double x = rng.uniform(-1.0, 1.0), y = rng.uniform(-1.0, 1.0);
  const double hip_target = -1.2, knee_target = 1.4;

  std::vector<PoseParams> poses;
  std::vector<std::array<uint8_t, 2>> contact;
  for (long t = 0; t < frames; ++t) {
    // Smoothstep descent over the clip.
    const double u = static_cast<double>(t) / std::max<long>(1, frames - 1);
    const double ease = u * u * (3.0 - 2.0 * u);
    PoseParams p = PoseParams::rest();
    p.joint_angles[0] = Eigen::Vector3d(0, 0, heading);
    for (int hip : {6, 10})
      p.joint_angles[hip] = Eigen::Vector3d(0, hip_target * ease, 0);
    for (int knee : {7, 11})
      p.joint_angles[knee] = Eigen::Vector3d(0, knee_target * ease, 0);
    p.joint_angles[1] = Eigen::Vector3d(0, 0.25 * ease, 0);  // lean forward
    p.root_translation = Eigen::Vector3d(x, y, 0);
    p.root_translation.z() = grounded_root_z(skel, p, skel.toe_joints());
    poses.push_back(p);
    contact.push_back({1, 1});
  }
  return finalize(skel, std::move(poses), std::move(contact), fps,
                  MotionKind::SitDown);
}

}  // namespace

MotionClip synth_clip(const Skeleton& skel, MotionKind kind, long frames,
                      double fps, double walk_speed, Rng& rng) {
  switch (kind) {
    case MotionKind::StraightWalk:
      return make_walk(skel, frames, fps, walk_speed, 0.0, rng, kind);
    case MotionKind::TurningWalk:
      return make_walk(skel, frames, fps, walk_speed,
                       (rng.uniform() < 0.5 ? -1.0 : 1.0) *
                           rng.uniform(0.3, 0.9),
                       rng, kind);
    case MotionKind::IdleSway:
      return make_idle(skel, frames, fps, rng);
    case MotionKind::SitDown:
      return make_sit(skel, frames, fps, rng);
  }
  return make_idle(skel, frames, fps, rng);
}

std::vector<MotionClip> synth_corpus(const Skeleton& skel,
                                     const SynthConfig& cfg, Rng& rng) {
  std::vector<MotionClip> corpus;
  corpus.reserve(static_cast<size_t>(cfg.sequences));
  static const MotionKind kMix[] = {
      MotionKind::StraightWalk, MotionKind::TurningWalk,
      MotionKind::StraightWalk, MotionKind::TurningWalk,
      MotionKind::IdleSway, MotionKind::SitDown};
  for (long i = 0; i < cfg.sequences; ++i) {
    const MotionKind kind = kMix[i % 6];
    const double speed = rng.uniform(cfg.walk_speed_min, cfg.walk_speed_max);
    corpus.push_back(synth_clip(skel, kind, cfg.frames, cfg.fps, speed, rng));
  }
  return corpus;
}

}  // namespace hf
