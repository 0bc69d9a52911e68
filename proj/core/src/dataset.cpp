#include "humanflow/dataset.hpp"

#include <cstring>
#include <fstream>

namespace hf {

namespace {

constexpr uint32_t kVersion = 1;

void put_u32(std::ofstream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

void put_i32(std::ofstream& os, int32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

void put_f32(std::ofstream& os, float v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t get_u32(std::ifstream& is, const char* what) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw DatasetError(std::string("dataset: truncated ") + what);
  return v;
}

int32_t get_i32(std::ifstream& is, const char* what) {
  int32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw DatasetError(std::string("dataset: truncated ") + what);
  return v;
}

float get_f32(std::ifstream& is, const char* what) {
  float v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw DatasetError(std::string("dataset: truncated ") + what);
  return v;
}

}  // namespace

void write_dataset(const std::string& path,
                   const std::vector<TrajectoryRecord>& records, long horizon) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DatasetError("dataset: cannot open for write: " + path);
  os.write("HFTJ", 4);
  put_u32(os, kVersion);
  put_u32(os, static_cast<uint32_t>(records.size()));
  put_u32(os, static_cast<uint32_t>(horizon));
  for (const auto& r : records) {
    for (int i = 0; i < 10; ++i) put_f32(os, static_cast<float>(r.x0[i]));
    for (int i = 0; i < 3; ++i) put_f32(os, static_cast<float>(r.goal[i]));
    put_u32(os, static_cast<uint32_t>(r.controls.size()));
    for (const auto& u : r.controls) {
      if (u.size() != 3 * horizon)
        throw DatasetError("dataset: control length != 3*horizon");
      for (long i = 0; i < u.size(); ++i)
        put_f32(os, static_cast<float>(u[i]));
    }
    put_i32(os, static_cast<int32_t>(r.motion_ref));
    put_i32(os, static_cast<int32_t>(r.grid_ref));
  }
  if (!os) throw DatasetError("dataset: write failed: " + path);
}

std::vector<TrajectoryRecord> read_dataset(const std::string& path,
                                           long& horizon) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetError("dataset: cannot open: " + path);
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "HFTJ", 4) != 0)
    throw DatasetError("dataset: bad magic in " + path);
  const uint32_t version = get_u32(is, "version");
  if (version != kVersion)
    throw DatasetError("dataset: unsupported version " + std::to_string(version));
  const uint32_t count = get_u32(is, "record count");
  horizon = get_u32(is, "horizon");
  std::vector<TrajectoryRecord> records(count);
  for (auto& r : records) {
    for (int i = 0; i < 10; ++i) r.x0[i] = get_f32(is, "x0");
    for (int i = 0; i < 3; ++i) r.goal[i] = get_f32(is, "goal");
    const uint32_t n = get_u32(is, "scenario count");
    r.controls.resize(n);
    for (auto& u : r.controls) {
      u.resize(3 * horizon);
      for (long i = 0; i < u.size(); ++i) u[i] = get_f32(is, "controls");
    }
    r.motion_ref = get_i32(is, "motion ref");
    r.grid_ref = get_i32(is, "grid ref");
  }
  return records;
}

}  // namespace hf
