#pragma once

#include <stdexcept>
#include <string>

#include "humanflow/motion.hpp"

namespace hf {

/// Motion file errors, reported distinctly per failure class.
struct MotionIoError : std::runtime_error {
  enum class Kind { BadMagic, Truncated, BadDimensions, Io };
  Kind kind;
  MotionIoError(Kind k, const std::string& what)
      : std::runtime_error(what), kind(k) {}
};

// Motion file (little-endian): magic "HFMO", version u32 = 1, T u32, J u32,
// fps f32, T*J*3 f32 positions, T*J u8 mask.
void write_motion(const std::string& path, const MotionSequence& seq);
MotionSequence read_motion(const std::string& path);

// Contact-label sidecar: magic "HFFC", version u32 = 1, T u32, F u32,
// F u32 foot joint ids, T*F u8 flags.
void write_contacts(const std::string& path, const FootContactLabels& labels);
FootContactLabels read_contacts(const std::string& path);

}  // namespace hf
