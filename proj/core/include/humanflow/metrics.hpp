#pragma once

#include <optional>
#include <vector>

#include "humanflow/motion.hpp"

namespace hf {

struct GmpjpeResult {
  // Millimeters; absent when the respective mask population is empty.
  std::optional<double> vis;
  std::optional<double> occ;
  std::optional<double> all;
};

/// Mean Euclidean joint error (no alignment), split by the observation
/// mask of the ground-truth input: vis = mask 1, occ = mask 0.
GmpjpeResult gmpjpe(const MotionSequence& pred, const MotionSequence& gt,
                    const std::vector<uint8_t>& mask);

/// Mean norm of the second-finite-difference acceleration mismatch, m/s^2.
double accel_error(const MotionSequence& pred, const MotionSequence& gt);

/// Fraction of frame transitions where all foot joints move faster than
/// 10 cm/s while toes are below 10 cm and ankles below 15 cm.
double skating_ratio(const MotionSequence& seq, const Skeleton& skel);

/// Mean toe-joint penetration below the ground plane, millimeters.
double ground_penetration(const MotionSequence& seq, const Skeleton& skel);

struct EpisodeOutcome {
  bool reached_goal = false;
  bool collided = false;       // min distance below threshold at any step
  double time_to_goal = 0.0;   // seconds, valid when reached_goal
  double min_distance = 0.0;   // over the whole episode
};

struct NavMetrics {
  double collision_avoid_pct = 0.0;
  std::optional<double> ttg_p25, ttg_p50, ttg_p75;
  long episodes = 0;
  long goal_reached = 0;
  long timeouts = 0;
};

/// Percentiles use linear interpolation between order statistics and are
/// computed over episodes that reached the goal.
NavMetrics nav_metrics(const std::vector<EpisodeOutcome>& episodes);

double percentile_linear(std::vector<double> values, double pct);

}  // namespace hf
