#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace hf {

enum class JointGroup { LeftLeg, RightLeg, Torso, LeftArm, RightArm, Head };

/// Fixed 22-joint kinematic tree with hand-authored rest offsets
/// approximating adult human proportions. Root is the pelvis (joint 0).
struct Skeleton {
  static constexpr int kJoints = 22;
  static constexpr int kBones = kJoints - 1;

  std::array<int, kJoints> parent;                 // -1 for root
  std::array<Eigen::Vector3d, kJoints> offset;     // rest bone offset, meters
  std::array<std::string, kJoints> name;

  std::vector<int> group(JointGroup g) const;
  std::vector<int> foot_joints() const;   // ankles + toes
  std::vector<int> toe_joints() const;
  std::vector<int> ankle_joints() const;

  /// Rest-pose joint positions with root at the origin.
  std::vector<Eigen::Vector3d> rest_positions() const;

  static const Skeleton& standard();
};

/// Root translation plus per-joint local Euler XYZ (intrinsic) angles.
struct PoseParams {
  Eigen::Vector3d root_translation = Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> joint_angles;  // radians, size J

  static PoseParams rest(int joints = Skeleton::kJoints);
};

/// World joint positions:
///   W_root = R_0, p_root = translation,
///   p_j = p_parent + W_parent * offset_j,  W_j = W_parent * R_j.
std::vector<Eigen::Vector3d> forward_kinematics(const Skeleton& skel,
                                                const PoseParams& pose);

Eigen::Matrix3d euler_xyz_to_matrix(const Eigen::Vector3d& angles);

}  // namespace hf
