#include "humanflow/motion.hpp"

namespace hf {

MotionSequence::MotionSequence(long t, long j, double fps_)
    : frames(t), joints(j), fps(fps_) {
  positions.assign(static_cast<size_t>(t * j * 3), 0.0);
  mask.assign(static_cast<size_t>(t * j), 1);
}

bool MotionSequence::frame_observed(long t) const {
  for (long j = 0; j < joints; ++j)
    if (observed(t, j)) return true;
  return false;
}

long MotionSequence::t_obs() const {
  for (long t = frames - 1; t >= 0; --t)
    if (frame_observed(t)) return t;
  return -1;
}

Eigen::Vector3d MotionSequence::first_observed_root() const {
  for (long t = 0; t < frames; ++t)
    if (frame_observed(t)) return pos(t, 0);
  return pos(0, 0);
}

MotionSequence sequence_from_poses(const Skeleton& skel,
                                   const std::vector<PoseParams>& poses,
                                   double fps) {
  MotionSequence seq(static_cast<long>(poses.size()), Skeleton::kJoints, fps);
  for (size_t t = 0; t < poses.size(); ++t) {
    const auto pos = forward_kinematics(skel, poses[t]);
    for (int j = 0; j < Skeleton::kJoints; ++j)
      seq.set_pos(static_cast<long>(t), j, pos[static_cast<size_t>(j)]);
  }
  return seq;
}

}  // namespace hf
