#include "humanflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hf {

GmpjpeResult gmpjpe(const MotionSequence& pred, const MotionSequence& gt,
                    const std::vector<uint8_t>& mask) {
  if (pred.frames != gt.frames || pred.joints != gt.joints)
    throw std::invalid_argument("gmpjpe: shape mismatch");
  if (mask.size() != static_cast<size_t>(gt.frames * gt.joints))
    throw std::invalid_argument("gmpjpe: mask size mismatch");
  double sum_vis = 0, sum_occ = 0;
  long n_vis = 0, n_occ = 0;
  for (long t = 0; t < gt.frames; ++t)
    for (long j = 0; j < gt.joints; ++j) {
      const double err = (pred.pos(t, j) - gt.pos(t, j)).norm();
      if (mask[static_cast<size_t>(t * gt.joints + j)]) {
        sum_vis += err;
        ++n_vis;
      } else {
        sum_occ += err;
        ++n_occ;
      }
    }
  GmpjpeResult r;
  if (n_vis) r.vis = 1000.0 * sum_vis / static_cast<double>(n_vis);
  if (n_occ) r.occ = 1000.0 * sum_occ / static_cast<double>(n_occ);
  if (n_vis + n_occ)
    r.all = 1000.0 * (sum_vis + sum_occ) / static_cast<double>(n_vis + n_occ);
  return r;
}

double accel_error(const MotionSequence& pred, const MotionSequence& gt) {
  if (pred.frames != gt.frames || pred.joints != gt.joints)
    throw std::invalid_argument("accel_error: shape mismatch");
  if (gt.frames < 3)
    throw std::invalid_argument("accel_error: needs at least 3 frames");
  const double dt2 = 1.0 / (gt.fps * gt.fps);
  double sum = 0;
  long n = 0;
  for (long t = 1; t + 1 < gt.frames; ++t)
    for (long j = 0; j < gt.joints; ++j) {
      const Eigen::Vector3d ap =
          (pred.pos(t + 1, j) - 2.0 * pred.pos(t, j) + pred.pos(t - 1, j)) /
          dt2;
      const Eigen::Vector3d ag =
          (gt.pos(t + 1, j) - 2.0 * gt.pos(t, j) + gt.pos(t - 1, j)) / dt2;
      sum += (ap - ag).norm();
      ++n;
    }
  return sum / static_cast<double>(n);
}

double skating_ratio(const MotionSequence& seq, const Skeleton& skel) {
  if (seq.frames < 2) return 0.0;
  const auto feet = skel.foot_joints();
  const auto toes = skel.toe_joints();
  const auto ankles = skel.ankle_joints();
  long flagged = 0;
  for (long t = 0; t + 1 < seq.frames; ++t) {
    bool all_fast = true;
    for (int j : feet) {
      const double v = (seq.pos(t + 1, j) - seq.pos(t, j)).norm() * seq.fps;
      if (v <= 0.10) {
        all_fast = false;
        break;
      }
    }
    if (!all_fast) continue;
    bool near_ground = true;
    for (int j : toes)
      if (std::min(seq.pos(t, j).z(), seq.pos(t + 1, j).z()) >= 0.10)
        near_ground = false;
    for (int j : ankles)
      if (std::min(seq.pos(t, j).z(), seq.pos(t + 1, j).z()) >= 0.15)
        near_ground = false;
    if (near_ground) ++flagged;
  }
  return static_cast<double>(flagged) / static_cast<double>(seq.frames - 1);
}

double ground_penetration(const MotionSequence& seq, const Skeleton& skel) {
  const auto toes = skel.toe_joints();
  double sum = 0;
  long n = 0;
  for (long t = 0; t < seq.frames; ++t)
    for (int j : toes) {
      sum += std::max(0.0, -seq.pos(t, j).z());
      ++n;
    }
  return 1000.0 * sum / static_cast<double>(n);
}

double percentile_linear(std::vector<double> values, double pct) {
  if (values.empty())
    throw std::invalid_argument("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  const long lo = static_cast<long>(std::floor(rank));
  const long hi = std::min<long>(lo + 1, static_cast<long>(values.size()) - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[static_cast<size_t>(lo)] * (1.0 - frac) +
         values[static_cast<size_t>(hi)] * frac;
}

NavMetrics nav_metrics(const std::vector<EpisodeOutcome>& episodes) {
  NavMetrics m;
  m.episodes = static_cast<long>(episodes.size());
  if (episodes.empty()) return m;
  long safe = 0;
  std::vector<double> times;
  for (const auto& e : episodes) {
    if (!e.collided) ++safe;
    if (e.reached_goal) {
      ++m.goal_reached;
      times.push_back(e.time_to_goal);
    } else {
      ++m.timeouts;
    }
  }
  m.collision_avoid_pct =
      100.0 * static_cast<double>(safe) / static_cast<double>(m.episodes);
  if (!times.empty()) {
    m.ttg_p25 = percentile_linear(times, 25.0);
    m.ttg_p50 = percentile_linear(times, 50.0);
    m.ttg_p75 = percentile_linear(times, 75.0);
  }
  return m;
}

}  // namespace hf
