#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "humanflow/rng.hpp"

namespace hf {

enum class Voxel : uint8_t { Free = 0, Occupied = 1, Unknown = 2 };

/// Ternary voxel grid. Voxel (i,j,k) has its center at
/// origin + voxel_size * (i+0.5, j+0.5, k+0.5).
struct OccupancyGrid {
  long nx = 0, ny = 0, nz = 0;
  double voxel_size = 0.1;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  std::vector<Voxel> states;

  OccupancyGrid() = default;
  OccupancyGrid(long nx, long ny, long nz, double voxel_size,
                const Eigen::Vector3d& origin);

  long count() const { return nx * ny * nz; }
  size_t index(long i, long j, long k) const {
    return static_cast<size_t>((i * ny + j) * nz + k);
  }
  Voxel at(long i, long j, long k) const { return states[index(i, j, k)]; }
  void set(long i, long j, long k, Voxel v) { states[index(i, j, k)] = v; }
  Eigen::Vector3d center(long i, long j, long k) const {
    return origin + voxel_size * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
  }
  /// Scalar coding for the scene encoder: free 0, occupied 1, unknown 0.5.
  double scalar_code(long i, long j, long k) const;
};

/// Distance (meters) to the nearest occupied voxel center, per voxel.
/// All-free grids clamp to the grid diagonal length.
struct Esdf {
  long nx = 0, ny = 0, nz = 0;
  double voxel_size = 0.1;
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  std::vector<double> distance;

  size_t index(long i, long j, long k) const {
    return static_cast<size_t>((i * ny + j) * nz + k);
  }
  double at(long i, long j, long k) const { return distance[index(i, j, k)]; }
};

struct EsdfQuery {
  double distance = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  bool clamped = false;  // query point was outside the interpolation domain
};

/// Exact Euclidean distance transform (3-pass squared-distance transform).
/// Unknown voxels count as non-occupied; flip with `unknown_is_occupied`.
Esdf compute_esdf(const OccupancyGrid& grid, bool unknown_is_occupied = false);

/// Trilinear interpolation between voxel centers with the analytic
/// trilinear gradient. Out-of-domain points clamp and set the flag.
EsdfQuery esdf_query(const Esdf& esdf, const Eigen::Vector3d& point);

/// Axis-aligned cube of side `extent` centered at `center`, resampled by
/// nearest neighbor to out_dims^3. Voxels outside the source become unknown.
OccupancyGrid human_crop(const OccupancyGrid& grid,
                         const Eigen::Vector3d& center, double extent,
                         long out_dims);

/// Marks one contiguous axis-aligned sub-box (~`fraction` of the volume)
/// as unknown.
OccupancyGrid mask_scene(const OccupancyGrid& grid, double fraction, Rng& rng);

enum class SceneKind { EmptyRoom, CorridorWithPillar, FurnitureRoom };

OccupancyGrid synth_scene(SceneKind kind, Rng& rng);
SceneKind scene_kind_from_string(const std::string& name);

// Grid file (little-endian): magic "HFOG", version u32, dims 3*u32,
// voxel f32, origin 3*f32, nx*ny*nz u8 states.
void write_grid(const std::string& path, const OccupancyGrid& grid);
OccupancyGrid read_grid(const std::string& path);

}  // namespace hf
