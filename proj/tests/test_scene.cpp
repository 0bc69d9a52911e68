#include <doctest.h>

#include <filesystem>

#include "humanflow/scene.hpp"

using namespace hf;

namespace {

// O(n^2) reference: nearest occupied voxel center, clamped to the diagonal.
double brute_distance(const OccupancyGrid& g, long i, long j, long k) {
  const double diag =
      g.voxel_size * Eigen::Vector3d(static_cast<double>(g.nx),
                                     static_cast<double>(g.ny),
                                     static_cast<double>(g.nz))
                         .norm();
  double best = diag;
  for (long a = 0; a < g.nx; ++a)
    for (long b = 0; b < g.ny; ++b)
      for (long c = 0; c < g.nz; ++c)
        if (g.at(a, b, c) == Voxel::Occupied)
          best = std::min(best,
                          (g.center(a, b, c) - g.center(i, j, k)).norm());
  return best;
}

OccupancyGrid random_grid(Rng& rng, long max_dim = 16) {
  OccupancyGrid g(rng.uniform_int(2, max_dim), rng.uniform_int(2, max_dim),
                  rng.uniform_int(2, max_dim), 0.1,
                  Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()));
  const double p_occ = rng.uniform(0.0, 0.25);
  for (auto& v : g.states) {
    const double u = rng.uniform();
    v = u < p_occ ? Voxel::Occupied
                  : (u < p_occ + 0.1 ? Voxel::Unknown : Voxel::Free);
  }
  return g;
}

}  // namespace

TEST_CASE("ESDF: single occupied voxel, face neighbor at one voxel size") {
  OccupancyGrid g(5, 5, 5, 0.1, Eigen::Vector3d::Zero());
  g.states.assign(static_cast<size_t>(g.count()), Voxel::Free);
  g.set(2, 2, 2, Voxel::Occupied);
  Esdf e = compute_esdf(g);
  CHECK(e.at(2, 2, 2) == 0.0);
  CHECK(e.at(3, 2, 2) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(e.at(3, 3, 2) == doctest::Approx(0.1 * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("ESDF: all-free grid clamps to the diagonal") {
  OccupancyGrid g(8, 8, 8, 0.1, Eigen::Vector3d::Zero());
  g.states.assign(static_cast<size_t>(g.count()), Voxel::Free);
  Esdf e = compute_esdf(g);
  const double diag = 0.1 * std::sqrt(3.0 * 64.0);
  for (double d : e.distance) CHECK(d == doctest::Approx(diag).epsilon(1e-12));
}

TEST_CASE("ESDF equals brute force on random grids (unknown non-occupied)") {
  Rng rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    OccupancyGrid g = random_grid(rng, 10);
    Esdf e = compute_esdf(g);
    for (long i = 0; i < g.nx; ++i)
      for (long j = 0; j < g.ny; ++j)
        for (long k = 0; k < g.nz; ++k)
          CHECK(std::abs(e.at(i, j, k) - brute_distance(g, i, j, k)) < 1e-9);
  }
}

TEST_CASE("ESDF unknown_is_occupied treats unknown voxels as obstacles") {
  OccupancyGrid g(4, 4, 4, 0.1, Eigen::Vector3d::Zero());
  g.states.assign(static_cast<size_t>(g.count()), Voxel::Free);
  g.set(1, 1, 1, Voxel::Unknown);
  Esdf opt = compute_esdf(g, false);
  Esdf pes = compute_esdf(g, true);
  CHECK(opt.at(1, 1, 1) > 0.0);
  CHECK(pes.at(1, 1, 1) == 0.0);
}

TEST_CASE("ESDF is 1-Lipschitz across adjacent voxels") {
  Rng rng(22);
  OccupancyGrid g = random_grid(rng, 12);
  Esdf e = compute_esdf(g);
  const double bound = g.voxel_size * std::sqrt(3.0) + 1e-12;
  for (long i = 0; i + 1 < g.nx; ++i)
    for (long j = 0; j < g.ny; ++j)
      for (long k = 0; k < g.nz; ++k)
        CHECK(std::abs(e.at(i, j, k) - e.at(i + 1, j, k)) <= bound);
}

TEST_CASE("esdf_query: voxel center exact, midpoint linear, gradient vs FD") {
  Rng rng(23);
  OccupancyGrid g(8, 8, 8, 0.1, Eigen::Vector3d(0.3, -0.2, 0.1));
  g.states.assign(static_cast<size_t>(g.count()), Voxel::Free);
  g.set(1, 2, 3, Voxel::Occupied);
  g.set(6, 5, 4, Voxel::Occupied);
  Esdf e = compute_esdf(g);

  CHECK(esdf_query(e, g.center(4, 4, 4)).distance ==
        doctest::Approx(e.at(4, 4, 4)).epsilon(1e-12));
  const Eigen::Vector3d mid = 0.5 * (g.center(3, 4, 4) + g.center(4, 4, 4));
  CHECK(esdf_query(e, mid).distance ==
        doctest::Approx(0.5 * (e.at(3, 4, 4) + e.at(4, 4, 4))).epsilon(1e-12));

  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Vector3d p = g.origin + Eigen::Vector3d(rng.uniform(0.06, 0.74),
                                                   rng.uniform(0.06, 0.74),
                                                   rng.uniform(0.06, 0.74));
    EsdfQuery q = esdf_query(e, p);
    CHECK(!q.clamped);
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::Vector3d dp = Eigen::Vector3d::Zero();
      dp[axis] = 1e-7;
      const double fd = (esdf_query(e, p + dp).distance -
                         esdf_query(e, p - dp).distance) /
                        2e-7;
      CHECK(std::abs(q.gradient[axis] - fd) < 1e-6);
    }
  }

  EsdfQuery outside = esdf_query(e, g.origin - Eigen::Vector3d(1, 1, 1));
  CHECK(outside.clamped);
}

TEST_CASE("human_crop: interior copy, corner unknown fraction, equivariance") {
  OccupancyGrid g(20, 20, 20, 0.1, Eigen::Vector3d::Zero());
  g.states.assign(static_cast<size_t>(g.count()), Voxel::Free);
  OccupancyGrid inside = human_crop(g, Eigen::Vector3d(1.0, 1.0, 1.0), 0.8, 8);
  for (auto v : inside.states) CHECK(v == Voxel::Free);

  OccupancyGrid corner = human_crop(g, Eigen::Vector3d::Zero(), 0.8, 8);
  long unknown = 0;
  for (auto v : corner.states) unknown += v == Voxel::Unknown;
  CHECK(unknown >= corner.count() * 7 / 8);

  Rng rng(24);
  OccupancyGrid src = random_grid(rng, 12);
  const Eigen::Vector3d root(0.4, 0.3, 0.2);
  const Eigen::Vector3d shift(3.0, -1.0, 2.0);
  OccupancyGrid a = human_crop(src, root, 0.7, 8);
  OccupancyGrid moved = src;
  moved.origin += shift;
  OccupancyGrid b = human_crop(moved, root + shift, 0.7, 8);
  CHECK(a.states == b.states);
}

TEST_CASE("mask_scene fraction semantics") {
  Rng rng(25);
  OccupancyGrid g(16, 16, 16, 0.1, Eigen::Vector3d::Zero());
  g.states.assign(static_cast<size_t>(g.count()), Voxel::Free);
  OccupancyGrid zero = mask_scene(g, 0.0, rng);
  CHECK(zero.states == g.states);
  OccupancyGrid full = mask_scene(g, 1.0, rng);
  for (auto v : full.states) CHECK(v == Voxel::Unknown);
  OccupancyGrid part = mask_scene(g, 0.3, rng);
  long unknown = 0;
  for (auto v : part.states) unknown += v == Voxel::Unknown;
  CHECK(std::abs(static_cast<double>(unknown) - 0.3 * 4096.0) <
        0.1 * 0.3 * 4096.0);
}

TEST_CASE("synth_scene kinds and grid file round trip") {
  Rng rng(26);
  OccupancyGrid empty = synth_scene(SceneKind::EmptyRoom, rng);
  // Interior (one voxel in from every boundary) is free.
  for (long i = 1; i + 1 < empty.nx; ++i)
    for (long j = 1; j + 1 < empty.ny; ++j)
      for (long k = 1; k + 1 < empty.nz; ++k)
        CHECK(empty.at(i, j, k) == Voxel::Free);

  OccupancyGrid corridor = synth_scene(SceneKind::CorridorWithPillar, rng);
  long occupied_interior = 0;
  for (long i = 1; i + 1 < corridor.nx; ++i)
    for (long j = 1; j + 1 < corridor.ny; ++j)
      for (long k = 1; k + 1 < corridor.nz; ++k)
        occupied_interior += corridor.at(i, j, k) == Voxel::Occupied;
  CHECK(occupied_interior > 0);

  const auto dir = std::filesystem::temp_directory_path() / "hf_grid_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "scene.hfog").string();
  OccupancyGrid g = random_grid(rng, 10);
  write_grid(path, g);
  OccupancyGrid back = read_grid(path);
  CHECK(back.nx == g.nx);
  CHECK(back.states == g.states);
  CHECK((back.origin - g.origin).norm() < 1e-6);
  std::filesystem::remove_all(dir);
}
