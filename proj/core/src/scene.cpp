#include "humanflow/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace hf {

OccupancyGrid::OccupancyGrid(long nx_, long ny_, long nz_, double voxel_size_,
                             const Eigen::Vector3d& origin_)
    : nx(nx_), ny(ny_), nz(nz_), voxel_size(voxel_size_), origin(origin_) {
  if (nx < 1 || ny < 1 || nz < 1)
    throw std::invalid_argument("OccupancyGrid: dims must be >= 1");
  if (voxel_size <= 0)
    throw std::invalid_argument("OccupancyGrid: voxel size must be > 0");
  states.assign(static_cast<size_t>(count()), Voxel::Free);
}

double OccupancyGrid::scalar_code(long i, long j, long k) const {
  switch (at(i, j, k)) {
    case Voxel::Free:
      return 0.0;
    case Voxel::Occupied:
      return 1.0;
    case Voxel::Unknown:
      return 0.5;
  }
  return 0.0;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Felzenszwalb-Huttenlocher 1D squared distance transform (lower envelope
// of parabolas). f and d are length n; v and z are scratch.
void dt1d(const double* f, double* d, long n, long* v, double* z) {
  long k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (long q = 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    double s;
    while (true) {
      if (f[v[k]] == kInf) {
        // No finite parabola yet; replace.
        if (k == 0) {
          v[0] = q;
          z[1] = kInf;
          goto next_q;
        }
        --k;
        continue;
      }
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  next_q:;
  }
  k = 0;
  for (long q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = (f[v[k]] == kInf) ? kInf : dq * dq + f[v[k]];
  }
}

}  // namespace

Esdf compute_esdf(const OccupancyGrid& grid, bool unknown_is_occupied) {
  Esdf esdf;
  esdf.nx = grid.nx;
  esdf.ny = grid.ny;
  esdf.nz = grid.nz;
  esdf.voxel_size = grid.voxel_size;
  esdf.origin = grid.origin;
  const long nx = grid.nx, ny = grid.ny, nz = grid.nz;
  std::vector<double> sq(static_cast<size_t>(grid.count()));
  for (long i = 0; i < nx; ++i)
    for (long j = 0; j < ny; ++j)
      for (long k = 0; k < nz; ++k) {
        const Voxel v = grid.at(i, j, k);
        const bool occ =
            v == Voxel::Occupied || (unknown_is_occupied && v == Voxel::Unknown);
        sq[grid.index(i, j, k)] = occ ? 0.0 : kInf;
      }

  const long nmax = std::max({nx, ny, nz});
  std::vector<double> f(static_cast<size_t>(nmax)), d(static_cast<size_t>(nmax)),
      zbuf(static_cast<size_t>(nmax + 1));
  std::vector<long> vbuf(static_cast<size_t>(nmax));

  // Along z.
  for (long i = 0; i < nx; ++i)
    for (long j = 0; j < ny; ++j) {
      for (long k = 0; k < nz; ++k) f[static_cast<size_t>(k)] = sq[grid.index(i, j, k)];
      dt1d(f.data(), d.data(), nz, vbuf.data(), zbuf.data());
      for (long k = 0; k < nz; ++k) sq[grid.index(i, j, k)] = d[static_cast<size_t>(k)];
    }
  // Along y.
  for (long i = 0; i < nx; ++i)
    for (long k = 0; k < nz; ++k) {
      for (long j = 0; j < ny; ++j) f[static_cast<size_t>(j)] = sq[grid.index(i, j, k)];
      dt1d(f.data(), d.data(), ny, vbuf.data(), zbuf.data());
      for (long j = 0; j < ny; ++j) sq[grid.index(i, j, k)] = d[static_cast<size_t>(j)];
    }
  // Along x.
  for (long j = 0; j < ny; ++j)
    for (long k = 0; k < nz; ++k) {
      for (long i = 0; i < nx; ++i) f[static_cast<size_t>(i)] = sq[grid.index(i, j, k)];
      dt1d(f.data(), d.data(), nx, vbuf.data(), zbuf.data());
      for (long i = 0; i < nx; ++i) sq[grid.index(i, j, k)] = d[static_cast<size_t>(i)];
    }

  const double clamp_dist =
      grid.voxel_size *
      std::sqrt(static_cast<double>(nx * nx + ny * ny + nz * nz));
  esdf.distance.resize(sq.size());
  for (size_t idx = 0; idx < sq.size(); ++idx)
    esdf.distance[idx] =
        std::min(clamp_dist, grid.voxel_size * std::sqrt(sq[idx]));
  return esdf;
}

EsdfQuery esdf_query(const Esdf& esdf, const Eigen::Vector3d& point) {
  EsdfQuery q;
  // Continuous coordinates in units of voxels, relative to voxel centers.
  Eigen::Vector3d u = (point - esdf.origin) / esdf.voxel_size -
                      Eigen::Vector3d(0.5, 0.5, 0.5);
  const double limits[3] = {static_cast<double>(esdf.nx - 1),
                            static_cast<double>(esdf.ny - 1),
                            static_cast<double>(esdf.nz - 1)};
  for (int a = 0; a < 3; ++a) {
    if (u[a] < 0.0) {
      u[a] = 0.0;
      q.clamped = true;
    } else if (u[a] > limits[a]) {
      u[a] = limits[a];
      q.clamped = true;
    }
  }
  long i0 = std::min<long>(esdf.nx - 2, static_cast<long>(std::floor(u.x())));
  long j0 = std::min<long>(esdf.ny - 2, static_cast<long>(std::floor(u.y())));
  long k0 = std::min<long>(esdf.nz - 2, static_cast<long>(std::floor(u.z())));
  i0 = std::max<long>(0, i0);
  j0 = std::max<long>(0, j0);
  k0 = std::max<long>(0, k0);
  const double fx = u.x() - i0, fy = u.y() - j0, fz = u.z() - k0;

  auto v = [&](long di, long dj, long dk) {
    return esdf.at(std::min(i0 + di, esdf.nx - 1),
                   std::min(j0 + dj, esdf.ny - 1),
                   std::min(k0 + dk, esdf.nz - 1));
  };
  const double c000 = v(0, 0, 0), c100 = v(1, 0, 0), c010 = v(0, 1, 0),
               c110 = v(1, 1, 0), c001 = v(0, 0, 1), c101 = v(1, 0, 1),
               c011 = v(0, 1, 1), c111 = v(1, 1, 1);

  const double c00 = c000 * (1 - fx) + c100 * fx;
  const double c10 = c010 * (1 - fx) + c110 * fx;
  const double c01 = c001 * (1 - fx) + c101 * fx;
  const double c11 = c011 * (1 - fx) + c111 * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  q.distance = c0 * (1 - fz) + c1 * fz;

  const double inv = 1.0 / esdf.voxel_size;
  q.gradient.x() =
      inv * (((c100 - c000) * (1 - fy) + (c110 - c010) * fy) * (1 - fz) +
             ((c101 - c001) * (1 - fy) + (c111 - c011) * fy) * fz);
  q.gradient.y() = inv * ((c10 - c00) * (1 - fz) + (c11 - c01) * fz);
  q.gradient.z() = inv * (c1 - c0);
  return q;
}

OccupancyGrid human_crop(const OccupancyGrid& grid,
                         const Eigen::Vector3d& center, double extent,
                         long out_dims) {
  if (extent <= 0) throw std::invalid_argument("human_crop: extent must be > 0");
  const double vs = extent / static_cast<double>(out_dims);
  OccupancyGrid out(out_dims, out_dims, out_dims, vs,
                    center - 0.5 * extent * Eigen::Vector3d::Ones());
  for (long i = 0; i < out_dims; ++i)
    for (long j = 0; j < out_dims; ++j)
      for (long k = 0; k < out_dims; ++k) {
        const Eigen::Vector3d p = out.center(i, j, k);
        const Eigen::Vector3d rel = (p - grid.origin) / grid.voxel_size;
        const long si = static_cast<long>(std::floor(rel.x()));
        const long sj = static_cast<long>(std::floor(rel.y()));
        const long sk = static_cast<long>(std::floor(rel.z()));
        if (si < 0 || si >= grid.nx || sj < 0 || sj >= grid.ny || sk < 0 ||
            sk >= grid.nz)
          out.set(i, j, k, Voxel::Unknown);
        else
          out.set(i, j, k, grid.at(si, sj, sk));
      }
  return out;
}

OccupancyGrid mask_scene(const OccupancyGrid& grid, double fraction, Rng& rng) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("mask_scene: fraction must be in [0,1]");
  OccupancyGrid out = grid;
  if (fraction == 0.0) return out;
  const double side = std::cbrt(fraction);
  long lx = std::clamp<long>(std::lround(side * grid.nx), 1, grid.nx);
  long ly = std::clamp<long>(std::lround(side * grid.ny), 1, grid.ny);
  // Third axis chosen to best match the target volume.
  const double target = fraction * static_cast<double>(grid.count());
  long lz = std::clamp<long>(
      std::lround(target / static_cast<double>(lx * ly)), 1, grid.nz);
  const long sx = rng.uniform_int(0, grid.nx - lx);
  const long sy = rng.uniform_int(0, grid.ny - ly);
  const long sz = rng.uniform_int(0, grid.nz - lz);
  for (long i = sx; i < sx + lx; ++i)
    for (long j = sy; j < sy + ly; ++j)
      for (long k = sz; k < sz + lz; ++k) out.set(i, j, k, Voxel::Unknown);
  return out;
}

namespace {

void fill_box(OccupancyGrid& g, long i0, long i1, long j0, long j1, long k0,
              long k1, Voxel v) {
  for (long i = std::max<long>(0, i0); i < std::min(g.nx, i1); ++i)
    for (long j = std::max<long>(0, j0); j < std::min(g.ny, j1); ++j)
      for (long k = std::max<long>(0, k0); k < std::min(g.nz, k1); ++k)
        g.set(i, j, k, v);
}

void add_walls_and_floor(OccupancyGrid& g) {
  fill_box(g, 0, g.nx, 0, g.ny, 0, 1, Voxel::Occupied);           // floor
  fill_box(g, 0, 1, 0, g.ny, 0, g.nz, Voxel::Occupied);           // walls
  fill_box(g, g.nx - 1, g.nx, 0, g.ny, 0, g.nz, Voxel::Occupied);
  fill_box(g, 0, g.nx, 0, 1, 0, g.nz, Voxel::Occupied);
  fill_box(g, 0, g.nx, g.ny - 1, g.ny, 0, g.nz, Voxel::Occupied);
}

}  // namespace

OccupancyGrid synth_scene(SceneKind kind, Rng& rng) {
  const double vs = 0.2;
  switch (kind) {
    case SceneKind::EmptyRoom: {
      OccupancyGrid g(40, 40, 18, vs, Eigen::Vector3d(-4.0, -4.0, -vs));
      add_walls_and_floor(g);
      return g;
    }
    case SceneKind::CorridorWithPillar: {
      OccupancyGrid g(56, 20, 16, vs, Eigen::Vector3d(-5.6, -2.0, -vs));
      add_walls_and_floor(g);
      // One square pillar mid-corridor, full height.
      const long ci = g.nx / 2 - 1;
      const long cj = g.ny / 2 - 1;
      fill_box(g, ci, ci + 3, cj, cj + 3, 1, g.nz, Voxel::Occupied);
      return g;
    }
    case SceneKind::FurnitureRoom: {
      OccupancyGrid g(40, 40, 18, vs, Eigen::Vector3d(-4.0, -4.0, -vs));
      add_walls_and_floor(g);
      const long boxes = 3 + rng.uniform_int(0, 2);
      for (long b = 0; b < boxes; ++b) {
        const long wi = rng.uniform_int(2, 6);
        const long wj = rng.uniform_int(2, 6);
        const long wk = rng.uniform_int(2, 5);
        const long i0 = rng.uniform_int(2, g.nx - wi - 2);
        const long j0 = rng.uniform_int(2, g.ny - wj - 2);
        fill_box(g, i0, i0 + wi, j0, j0 + wj, 1, 1 + wk, Voxel::Occupied);
      }
      return g;
    }
  }
  throw std::invalid_argument("synth_scene: unknown kind");
}

SceneKind scene_kind_from_string(const std::string& name) {
  if (name == "empty-room") return SceneKind::EmptyRoom;
  if (name == "corridor-with-pillar") return SceneKind::CorridorWithPillar;
  if (name == "furniture-room") return SceneKind::FurnitureRoom;
  throw std::invalid_argument("unknown scene kind: " + name);
}

namespace {

void put_u32(std::ofstream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
void put_f32(std::ofstream& os, float v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

}  // namespace

void write_grid(const std::string& path, const OccupancyGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_grid: cannot open " + path);
  os.write("HFOG", 4);
  put_u32(os, 1);
  put_u32(os, static_cast<uint32_t>(grid.nx));
  put_u32(os, static_cast<uint32_t>(grid.ny));
  put_u32(os, static_cast<uint32_t>(grid.nz));
  put_f32(os, static_cast<float>(grid.voxel_size));
  for (int a = 0; a < 3; ++a)
    put_f32(os, static_cast<float>(grid.origin[a]));
  os.write(reinterpret_cast<const char*>(grid.states.data()),
           static_cast<std::streamsize>(grid.states.size()));
  if (!os) throw std::runtime_error("write_grid: write failure " + path);
}

OccupancyGrid read_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_grid: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "HFOG", 4) != 0)
    throw std::runtime_error("read_grid: bad magic in " + path);
  auto get_u32 = [&] {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get_f32 = [&] {
    float v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  const uint32_t version = get_u32();
  if (version != 1)
    throw std::runtime_error("read_grid: unsupported version in " + path);
  const long nx = get_u32(), ny = get_u32(), nz = get_u32();
  const double vs = static_cast<double>(get_f32());
  Eigen::Vector3d origin;
  for (int a = 0; a < 3; ++a) origin[a] = static_cast<double>(get_f32());
  if (!is || nx < 1 || ny < 1 || nz < 1 || vs <= 0)
    throw std::runtime_error("read_grid: invalid header in " + path);
  OccupancyGrid g(nx, ny, nz, vs, origin);
  is.read(reinterpret_cast<char*>(g.states.data()),
          static_cast<std::streamsize>(g.states.size()));
  if (!is) throw std::runtime_error("read_grid: truncated states in " + path);
  for (Voxel v : g.states)
    if (static_cast<uint8_t>(v) > 2)
      throw std::runtime_error("read_grid: invalid voxel state in " + path);
  return g;
}

}  // namespace hf
