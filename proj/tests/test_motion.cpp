#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "humanflow/corrupt.hpp"
#include "humanflow/motion_io.hpp"
#include "humanflow/synth.hpp"

using namespace hf;

namespace {
double bone_len(const std::vector<Eigen::Vector3d>& p, const Skeleton& s,
                int j) {
  return (p[static_cast<size_t>(j)] -
          p[static_cast<size_t>(s.parent[static_cast<size_t>(j)])])
      .norm();
}
}  // namespace

TEST_CASE("skeleton is a 22-joint tree with foot joints in the leg groups") {
  const Skeleton& s = Skeleton::standard();
  CHECK(s.parent[0] == -1);
  for (int j = 1; j < Skeleton::kJoints; ++j) {
    CHECK(s.parent[static_cast<size_t>(j)] >= 0);
    CHECK(s.parent[static_cast<size_t>(j)] < j);
    CHECK(s.offset[static_cast<size_t>(j)].norm() > 0.0);
  }
  auto legs = s.group(JointGroup::LeftLeg);
  auto right = s.group(JointGroup::RightLeg);
  legs.insert(legs.end(), right.begin(), right.end());
  for (int f : s.foot_joints())
    CHECK(std::count(legs.begin(), legs.end(), f) == 1);
}

TEST_CASE("FK identity and rigid-shift cases") {
  const Skeleton& s = Skeleton::standard();
  PoseParams rest = PoseParams::rest();
  auto p0 = forward_kinematics(s, rest);
  auto rest_pos = s.rest_positions();
  for (int j = 0; j < Skeleton::kJoints; ++j)
    CHECK((p0[static_cast<size_t>(j)] - rest_pos[static_cast<size_t>(j)])
              .norm() == doctest::Approx(0.0));

  rest.root_translation = {1.0, 0.0, 0.0};
  auto p1 = forward_kinematics(s, rest);
  for (int j = 0; j < Skeleton::kJoints; ++j)
    CHECK((p1[static_cast<size_t>(j)] - p0[static_cast<size_t>(j)] -
           Eigen::Vector3d(1, 0, 0))
              .norm() < 1e-12);
}

TEST_CASE("FK 90-degree root z-rotation equals rotated rest pose") {
  const Skeleton& s = Skeleton::standard();
  PoseParams pose = PoseParams::rest();
  pose.joint_angles[0] = {0.0, 0.0, M_PI / 2.0};
  auto p = forward_kinematics(s, pose);
  Eigen::Matrix3d rz;
  rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  auto rest_pos = s.rest_positions();
  for (int j = 0; j < Skeleton::kJoints; ++j)
    CHECK((p[static_cast<size_t>(j)] - rz * rest_pos[static_cast<size_t>(j)])
              .norm() < 1e-12);
}

TEST_CASE("FK preserves bone lengths for random poses") {
  const Skeleton& s = Skeleton::standard();
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    PoseParams pose = PoseParams::rest();
    pose.root_translation = {rng.normal(), rng.normal(), rng.normal()};
    for (auto& a : pose.joint_angles)
      a = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
           rng.uniform(-1.0, 1.0)};
    auto p = forward_kinematics(s, pose);
    for (int j = 1; j < Skeleton::kJoints; ++j)
      CHECK(std::abs(bone_len(p, s, j) -
                     s.offset[static_cast<size_t>(j)].norm()) < 1e-9);
  }
}

TEST_CASE("corrupt with k = 0 and no dropout is the identity with full mask") {
  const Skeleton& s = Skeleton::standard();
  Rng rng(6);
  MotionClip clip = synth_clip(s, MotionKind::StraightWalk, 12, 10.0, 1.0, rng);
  CorruptConfig cfg;
  cfg.noise_level = 0.0;
  cfg.frame_dropout_p = 0.0;
  cfg.part_dropout_p = 0.0;
  cfg.forecast_p = 0.0;
  MotionSequence out = corrupt(s, clip.poses, cfg, rng);
  for (long t = 0; t < out.frames; ++t)
    for (long j = 0; j < out.joints; ++j) {
      CHECK(out.observed(t, j) == 1);
      CHECK((out.pos(t, j) - clip.seq.pos(t, j)).norm() == 0.0);
    }
}

TEST_CASE("corrupt k = 5 root translation noise is ~5 cm per axis") {
  const Skeleton& s = Skeleton::standard();
  Rng rng(7);
  std::vector<PoseParams> poses(1, PoseParams::rest());
  CorruptConfig cfg;
  cfg.noise_level = 5.0;
  cfg.frame_dropout_p = 0.0;
  cfg.part_dropout_p = 0.0;
  cfg.forecast_p = 0.0;
  double sq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    MotionSequence out = corrupt(s, poses, cfg, rng);
    sq += std::pow(out.pos(0, 0).x(), 2.0);
  }
  // Per-axis stddev of the root x coordinate.
  const double stddev = std::sqrt(sq / n);
  CHECK(stddev == doctest::Approx(0.05).epsilon(0.05));
}

TEST_CASE("corrupt noise accumulates down the kinematic tree") {
  const Skeleton& s = Skeleton::standard();
  Rng rng(8);
  std::vector<PoseParams> poses(1, PoseParams::rest());
  CorruptConfig cfg;
  cfg.noise_level = 5.0;
  cfg.frame_dropout_p = 0.0;
  cfg.part_dropout_p = 0.0;
  cfg.forecast_p = 0.0;
  auto clean = forward_kinematics(s, poses[0]);
  // Wrist (leaf of the arm chain) vs. first spine joint (root-adjacent).
  const auto arm = s.group(JointGroup::LeftArm);
  const int leaf = arm.back();
  const auto torso = s.group(JointGroup::Torso);
  const int near_root = torso.front();
  double err_leaf = 0.0, err_near = 0.0;
  for (int i = 0; i < 1000; ++i) {
    MotionSequence out = corrupt(s, poses, cfg, rng);
    err_leaf +=
        (out.pos(0, leaf) - clean[static_cast<size_t>(leaf)]).norm();
    err_near +=
        (out.pos(0, near_root) - clean[static_cast<size_t>(near_root)]).norm();
  }
  CHECK(err_leaf > err_near);
}

TEST_CASE("corrupt perturbation magnitude is monotone in k") {
  const Skeleton& s = Skeleton::standard();
  Rng rng(9);
  std::vector<PoseParams> poses(1, PoseParams::rest());
  auto clean = forward_kinematics(s, poses[0]);
  double prev = -1.0;
  for (double k : {0.0, 3.0, 5.0, 7.0}) {
    CorruptConfig cfg;
    cfg.noise_level = k;
    cfg.frame_dropout_p = 0.0;
    cfg.part_dropout_p = 0.0;
    cfg.forecast_p = 0.0;
    double err = 0.0;
    for (int i = 0; i < 1000; ++i) {
      MotionSequence out = corrupt(s, poses, cfg, rng);
      for (long j = 0; j < out.joints; ++j)
        err += (out.pos(0, j) - clean[static_cast<size_t>(j)]).norm();
    }
    CHECK(err >= prev);
    prev = err;
  }
}

TEST_CASE("synth walk covers configured distance with rigid bones") {
  const Skeleton& s = Skeleton::standard();
  Rng rng(10);
  MotionClip clip = synth_clip(s, MotionKind::StraightWalk, 48, 10.0, 1.0, rng);
  const double dist =
      (clip.seq.pos(47, 0) - clip.seq.pos(0, 0)).head<2>().norm();
  CHECK(dist == doctest::Approx(4.7).epsilon(0.01));  // 47 transitions at 1 m/s
  for (int j = 1; j < Skeleton::kJoints; ++j) {
    double mn = 1e9, mx = -1e9;
    for (long t = 0; t < clip.seq.frames; ++t) {
      const double l =
          (clip.seq.pos(t, j) -
           clip.seq.pos(t, s.parent[static_cast<size_t>(j)]))
              .norm();
      mn = std::min(mn, l);
      mx = std::max(mx, l);
    }
    CHECK(mx - mn < 1e-6);
  }
}

TEST_CASE("idle clip keeps all-frame foot contact") {
  const Skeleton& s = Skeleton::standard();
  Rng rng(11);
  MotionClip clip = synth_clip(s, MotionKind::IdleSway, 24, 10.0, 0.0, rng);
  for (long t = 0; t < clip.contacts.frames; ++t)
    for (size_t f = 0; f < clip.contacts.foot_joint_ids.size(); ++f)
      CHECK(clip.contacts.in_contact(t, f) == 1);
}

TEST_CASE("motion file round trip and error classes") {
  const Skeleton& s = Skeleton::standard();
  Rng rng(12);
  MotionClip clip = synth_clip(s, MotionKind::TurningWalk, 16, 10.0, 0.9, rng);
  clip.seq.set_observed(3, 5, 0);
  const auto dir = std::filesystem::temp_directory_path() / "hf_motion_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "clip.hfmo").string();
  write_motion(path, clip.seq);
  MotionSequence back = read_motion(path);
  CHECK(back.frames == clip.seq.frames);
  CHECK(back.mask == clip.seq.mask);
  for (size_t i = 0; i < back.positions.size(); ++i)
    CHECK(back.positions[i] ==
          static_cast<double>(static_cast<float>(clip.seq.positions[i])));

  // Bad magic.
  const std::string bad = (dir / "bad.hfmo").string();
  { std::ofstream(bad, std::ios::binary) << "NOPE1234"; }
  try {
    read_motion(bad);
    CHECK(false);
  } catch (const MotionIoError& e) {
    CHECK(e.kind == MotionIoError::Kind::BadMagic);
  }
  // Truncated payload.
  const std::string trunc = (dir / "trunc.hfmo").string();
  {
    std::ifstream in(path, std::ios::binary);
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    std::ofstream(trunc, std::ios::binary)
        << data.substr(0, data.size() / 2);
  }
  try {
    read_motion(trunc);
    CHECK(false);
  } catch (const MotionIoError& e) {
    CHECK(e.kind == MotionIoError::Kind::Truncated);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("contact sidecar round trip") {
  const Skeleton& s = Skeleton::standard();
  Rng rng(13);
  MotionClip clip = synth_clip(s, MotionKind::StraightWalk, 16, 10.0, 1.1, rng);
  const auto dir = std::filesystem::temp_directory_path() / "hf_contact_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "clip.hffc").string();
  write_contacts(path, clip.contacts);
  FootContactLabels back = read_contacts(path);
  CHECK(back.frames == clip.contacts.frames);
  CHECK(back.foot_joint_ids == clip.contacts.foot_joint_ids);
  CHECK(back.contact == clip.contacts.contact);
  std::filesystem::remove_all(dir);
}
