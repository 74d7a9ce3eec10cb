// Synthetic fixtures shared by the solver tests and the acceptance suite.

#pragma once

#include <random>
#include <vector>

#include "semloc/semantic_map.hpp"
#include "semloc/synth.hpp"

namespace fixture {

using namespace semloc;

struct World {
  SceneSpec spec;
  SemanticPointCloud points;
  VoxelEdgeMap edges;
};

/// Flat urban-ish scene on a 0.5 m lattice; edge voxels of the same size so
/// voxel centers sit on lattice points horizontally.
inline SceneSpec urban_scene(std::uint64_t seed, double extent = 400.0) {
  SceneSpec s;
  s.seed = seed;
  s.extent = extent;
  s.density = 4.0;
  s.buildings = static_cast<int>(extent * extent / 4000.0);
  s.strips = static_cast<int>(extent / 60.0);
  s.discs = static_cast<int>(extent * extent / 8000.0);
  s.vehicles = static_cast<int>(extent * extent / 4000.0);
  return s;
}

inline World make_world(const SceneSpec& spec, double voxel = 0.5) {
  World w{spec, generate_world(spec), {}};
  w.edges = voxelize_and_prune(w.points, voxel);
  return w;
}

/// Frame center drawn so that the whole search window stays inside the world.
inline Vec2 random_center(std::mt19937_64& rng, double extent, double keep_out) {
  std::uniform_real_distribution<double> u(-extent / 2 + keep_out, extent / 2 - keep_out);
  return {u(rng), u(rng)};
}

}  // namespace fixture
