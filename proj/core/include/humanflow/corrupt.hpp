#pragma once

#include "humanflow/motion.hpp"
#include "humanflow/rng.hpp"

namespace hf {

/// Corruption applied to clean pose-parameter sequences: Euler-angle noise
/// of k degrees, root-translation noise of k centimeters (re-run through FK
/// so error accumulates down the tree), then stochastic masking.
struct CorruptConfig {
  double noise_level = 0.0;        // k: (k deg, k deg, k cm)
  double frame_dropout_p = 0.3;    // one contiguous span of full frames
  double part_dropout_p = 0.2;     // one joint group over a contiguous span
  double forecast_p = 0.8;         // mask a suffix of frames
  double strength = 1.0;           // scales noise and dropout probabilities
};

MotionSequence corrupt(const Skeleton& skel,
                       const std::vector<PoseParams>& clean_poses,
                       const CorruptConfig& cfg, Rng& rng, double fps = 10.0);

/// Masking-only variants used by the benchmark protocols.
void mask_lower_body(const Skeleton& skel, MotionSequence& seq);
void mask_contiguous_fraction(MotionSequence& seq, double fraction, Rng& rng);
void mask_suffix(MotionSequence& seq, long first_masked_frame);

/// Cosine ramp from 0 to 1 over `total` iterations.
double cosine_ramp(long iter, long total);

}  // namespace hf
