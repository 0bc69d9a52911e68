#include "humanflow/motion_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace hf {

namespace {

using Kind = MotionIoError::Kind;

constexpr uint32_t kVersion = 1;
constexpr long kMaxDim = 100000000;  // guards T*J*3 against overflow

void put_u32(std::ofstream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

void put_f32(std::ofstream& os, float v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t get_u32(std::ifstream& is, const std::string& what) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw MotionIoError(Kind::Truncated, "truncated " + what);
  return v;
}

float get_f32(std::ifstream& is, const std::string& what) {
  float v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw MotionIoError(Kind::Truncated, "truncated " + what);
  return v;
}

void check_magic(std::ifstream& is, const char* expect,
                 const std::string& path) {
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  if (!is) throw MotionIoError(Kind::Truncated, "truncated header: " + path);
  if (std::memcmp(magic, expect, 4) != 0)
    throw MotionIoError(Kind::BadMagic,
                        "bad magic in " + path + " (expected " + expect + ")");
}

}  // namespace

void write_motion(const std::string& path, const MotionSequence& seq) {
  if (seq.frames < 1 || seq.joints < 1)
    throw MotionIoError(Kind::BadDimensions, "refusing to write empty motion");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MotionIoError(Kind::Io, "cannot open for write: " + path);
  os.write("HFMO", 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<uint32_t>(seq.frames));
  put_u32(os, static_cast<uint32_t>(seq.joints));
  put_f32(os, static_cast<float>(seq.fps));
  for (double v : seq.positions) put_f32(os, static_cast<float>(v));
  os.write(reinterpret_cast<const char*>(seq.mask.data()),
           static_cast<std::streamsize>(seq.mask.size()));
  if (!os) throw MotionIoError(Kind::Io, "write failure: " + path);
}

MotionSequence read_motion(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MotionIoError(Kind::Io, "cannot open: " + path);
  check_magic(is, "HFMO", path);
  const uint32_t version = get_u32(is, "version");
  if (version != kVersion)
    throw MotionIoError(Kind::BadDimensions,
                        "unsupported motion file version " +
                            std::to_string(version));
  const long t = get_u32(is, "frame count");
  const long j = get_u32(is, "joint count");
  if (t < 1 || j < 1 || t > kMaxDim || j > kMaxDim || t * j * 3 > kMaxDim)
    throw MotionIoError(Kind::BadDimensions,
                        "invalid dimensions T=" + std::to_string(t) +
                            " J=" + std::to_string(j) + " in " + path);
  MotionSequence seq(t, j, static_cast<double>(get_f32(is, "fps")));
  for (auto& v : seq.positions) v = static_cast<double>(get_f32(is, "positions"));
  is.read(reinterpret_cast<char*>(seq.mask.data()),
          static_cast<std::streamsize>(seq.mask.size()));
  if (!is) throw MotionIoError(Kind::Truncated, "truncated mask: " + path);
  return seq;
}

void write_contacts(const std::string& path, const FootContactLabels& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw MotionIoError(Kind::Io, "cannot open for write: " + path);
  os.write("HFFC", 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<uint32_t>(labels.frames));
  put_u32(os, static_cast<uint32_t>(labels.foot_joint_ids.size()));
  for (int id : labels.foot_joint_ids) put_u32(os, static_cast<uint32_t>(id));
  os.write(reinterpret_cast<const char*>(labels.contact.data()),
           static_cast<std::streamsize>(labels.contact.size()));
  if (!os) throw MotionIoError(Kind::Io, "write failure: " + path);
}

FootContactLabels read_contacts(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MotionIoError(Kind::Io, "cannot open: " + path);
  check_magic(is, "HFFC", path);
  const uint32_t version = get_u32(is, "version");
  if (version != kVersion)
    throw MotionIoError(Kind::BadDimensions,
                        "unsupported contact file version " +
                            std::to_string(version));
  FootContactLabels labels;
  labels.frames = get_u32(is, "frame count");
  const long nf = get_u32(is, "foot count");
  if (labels.frames < 1 || nf < 1 || labels.frames * nf > kMaxDim)
    throw MotionIoError(Kind::BadDimensions, "invalid contact dims in " + path);
  for (long i = 0; i < nf; ++i)
    labels.foot_joint_ids.push_back(
        static_cast<int>(get_u32(is, "foot joint id")));
  labels.contact.resize(static_cast<size_t>(labels.frames * nf));
  is.read(reinterpret_cast<char*>(labels.contact.data()),
          static_cast<std::streamsize>(labels.contact.size()));
  if (!is) throw MotionIoError(Kind::Truncated, "truncated contacts: " + path);
  return labels;
}

}  // namespace hf
