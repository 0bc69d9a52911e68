#pragma once

#include "humanflow/motion.hpp"
#include "humanflow/rng.hpp"

namespace hf {

enum class MotionKind { StraightWalk, TurningWalk, IdleSway, SitDown };

struct MotionClip {
  MotionSequence seq;
  FootContactLabels contacts;
  std::vector<PoseParams> poses;
  MotionKind kind = MotionKind::StraightWalk;
};

struct SynthConfig {
  long sequences = 64;
  long frames = 48;
  double fps = 10.0;
  double walk_speed_min = 0.5;   // m/s
  double walk_speed_max = 1.4;
};

/// One procedural clip. Walks place the stance toe on the ground plane
/// (z = 0) by solving the root height per frame; bone lengths are exact by
/// construction (FK over a rigid skeleton).
MotionClip synth_clip(const Skeleton& skel, MotionKind kind, long frames,
                      double fps, double walk_speed, Rng& rng);

std::vector<MotionClip> synth_corpus(const Skeleton& skel,
                                     const SynthConfig& cfg, Rng& rng);

}  // namespace hf
