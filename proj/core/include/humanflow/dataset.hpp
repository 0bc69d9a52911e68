#pragma once

#include <string>
#include <vector>

#include "humanflow/mav.hpp"

namespace hf {

struct DatasetError : std::runtime_error {
  explicit DatasetError(const std::string& what) : std::runtime_error(what) {}
};

/// One offline-optimized planning instance: shared-first-control scenario
/// solutions for `n` sampled futures. `motion_ref` indexes the observed
/// motion window in the sidecar archive; `grid_ref` is -1 without a scene.
struct TrajectoryRecord {
  MavStateVec x0 = MavStateVec::Zero();
  Eigen::Vector3d goal = Eigen::Vector3d::Zero();
  std::vector<Eigen::VectorXd> controls;  // n scenarios, each 3*T
  long motion_ref = -1;
  long grid_ref = -1;
};

// Trajectory dataset (little-endian): magic "HFTJ", version u32 = 1,
// record count u32, horizon u32; per record: x0 10*f32, g 3*f32, n u32,
// n * T*3 f32 controls, motion_ref i32, grid_ref i32.
void write_dataset(const std::string& path,
                   const std::vector<TrajectoryRecord>& records, long horizon);
std::vector<TrajectoryRecord> read_dataset(const std::string& path,
                                           long& horizon);

}  // namespace hf
