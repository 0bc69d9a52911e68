#include "humanflow/skeleton.hpp"

namespace hf {

namespace {

Skeleton build_standard() {
  Skeleton s;
  auto set = [&](int j, const char* n, int parent, double x, double y,
                 double z) {
    s.name[static_cast<size_t>(j)] = n;
    s.parent[static_cast<size_t>(j)] = parent;
    s.offset[static_cast<size_t>(j)] = Eigen::Vector3d(x, y, z);
  };
  // x forward, y left, z up.
  set(0, "pelvis", -1, 0, 0, 0);
  set(1, "spine1", 0, 0, 0, 0.12);
  set(2, "spine2", 1, 0, 0, 0.13);
  set(3, "spine3", 2, 0, 0, 0.13);
  set(4, "neck", 3, 0, 0, 0.12);
  set(5, "head", 4, 0, 0, 0.15);
  set(6, "l_hip", 0, 0, 0.09, -0.05);
  set(7, "l_knee", 6, 0, 0, -0.40);
  set(8, "l_ankle", 7, 0, 0, -0.42);
  set(9, "l_toe", 8, 0.14, 0, -0.06);
  set(10, "r_hip", 0, 0, -0.09, -0.05);
  set(11, "r_knee", 10, 0, 0, -0.40);
  set(12, "r_ankle", 11, 0, 0, -0.42);
  set(13, "r_toe", 12, 0.14, 0, -0.06);
  set(14, "l_collar", 3, 0, 0.08, 0.05);
  set(15, "l_shoulder", 14, 0, 0.10, 0);
  set(16, "l_elbow", 15, 0, 0.26, 0);
  set(17, "l_wrist", 16, 0, 0.25, 0);
  set(18, "r_collar", 3, 0, -0.08, 0.05);
  set(19, "r_shoulder", 18, 0, -0.10, 0);
  set(20, "r_elbow", 19, 0, -0.26, 0);
  set(21, "r_wrist", 20, 0, -0.25, 0);
  return s;
}

}  // namespace

const Skeleton& Skeleton::standard() {
  static const Skeleton s = build_standard();
  return s;
}

std::vector<int> Skeleton::group(JointGroup g) const {
  switch (g) {
    case JointGroup::LeftLeg:
      return {6, 7, 8, 9};
    case JointGroup::RightLeg:
      return {10, 11, 12, 13};
    case JointGroup::Torso:
      return {0, 1, 2, 3};
    case JointGroup::LeftArm:
      return {14, 15, 16, 17};
    case JointGroup::RightArm:
      return {18, 19, 20, 21};
    case JointGroup::Head:
      return {4, 5};
  }
  return {};
}

std::vector<int> Skeleton::foot_joints() const { return {8, 9, 12, 13}; }
std::vector<int> Skeleton::toe_joints() const { return {9, 13}; }
std::vector<int> Skeleton::ankle_joints() const { return {8, 12}; }

std::vector<Eigen::Vector3d> Skeleton::rest_positions() const {
  return forward_kinematics(*this, PoseParams::rest());
}

PoseParams PoseParams::rest(int joints) {
  PoseParams p;
  p.joint_angles.assign(static_cast<size_t>(joints), Eigen::Vector3d::Zero());
  return p;
}

Eigen::Matrix3d euler_xyz_to_matrix(const Eigen::Vector3d& a) {
  return (Eigen::AngleAxisd(a.x(), Eigen::Vector3d::UnitX()) *
          Eigen::AngleAxisd(a.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(a.z(), Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

std::vector<Eigen::Vector3d> forward_kinematics(const Skeleton& skel,
                                                const PoseParams& pose) {
  if (pose.joint_angles.size() != static_cast<size_t>(Skeleton::kJoints))
    throw std::invalid_argument(
        "forward_kinematics: pose has " +
        std::to_string(pose.joint_angles.size()) + " joints, skeleton has " +
        std::to_string(Skeleton::kJoints));
  std::vector<Eigen::Vector3d> pos(Skeleton::kJoints);
  std::vector<Eigen::Matrix3d> rot(Skeleton::kJoints);
  for (int j = 0; j < Skeleton::kJoints; ++j) {
    const Eigen::Matrix3d local =
        euler_xyz_to_matrix(pose.joint_angles[static_cast<size_t>(j)]);
    const int p = skel.parent[static_cast<size_t>(j)];
    if (p < 0) {
      pos[static_cast<size_t>(j)] = pose.root_translation;
      rot[static_cast<size_t>(j)] = local;
    } else {
      pos[static_cast<size_t>(j)] =
          pos[static_cast<size_t>(p)] +
          rot[static_cast<size_t>(p)] * skel.offset[static_cast<size_t>(j)];
      rot[static_cast<size_t>(j)] = rot[static_cast<size_t>(p)] * local;
    }
  }
  return pos;
}

}  // namespace hf
