#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "humanflow/skeleton.hpp"

namespace hf {

/// T x J x 3 world-frame joint positions with a per-joint-per-frame
/// observation mask (1 = observed). Positions under mask 0 stay populated;
/// consumers decide how to treat them.
struct MotionSequence {
  long frames = 0;
  long joints = Skeleton::kJoints;
  double fps = 10.0;
  std::vector<double> positions;   // frames*joints*3, row-major (t, j, xyz)
  std::vector<uint8_t> mask;       // frames*joints

  MotionSequence() = default;
  MotionSequence(long t, long j, double fps = 10.0);

  Eigen::Vector3d pos(long t, long j) const {
    const size_t base = static_cast<size_t>((t * joints + j) * 3);
    return {positions[base], positions[base + 1], positions[base + 2]};
  }
  void set_pos(long t, long j, const Eigen::Vector3d& p) {
    const size_t base = static_cast<size_t>((t * joints + j) * 3);
    positions[base] = p.x();
    positions[base + 1] = p.y();
    positions[base + 2] = p.z();
  }
  uint8_t observed(long t, long j) const {
    return mask[static_cast<size_t>(t * joints + j)];
  }
  void set_observed(long t, long j, uint8_t v) {
    mask[static_cast<size_t>(t * joints + j)] = v;
  }
  bool frame_observed(long t) const;

  /// Last frame index with any observed joint; -1 if fully masked.
  long t_obs() const;

  /// Root position of the first frame with any observed joint (first frame
  /// if none observed).
  Eigen::Vector3d first_observed_root() const;
};

/// Binary contact flags for the skeleton's foot joints, frame-major.
struct FootContactLabels {
  long frames = 0;
  std::vector<int> foot_joint_ids;        // indices into the skeleton
  std::vector<uint8_t> contact;           // frames * foot_joint_ids.size()

  uint8_t in_contact(long t, size_t foot_idx) const {
    return contact[static_cast<size_t>(t) * foot_joint_ids.size() + foot_idx];
  }
};

/// FK applied frame-by-frame.
MotionSequence sequence_from_poses(const Skeleton& skel,
                                   const std::vector<PoseParams>& poses,
                                   double fps = 10.0);

}  // namespace hf
