// Synthetic worlds and observations with known ground truth.
//
// Worlds are built on a square lattice of spacing 1/sqrt(density) covering
// [-extent/2, extent/2]^2. Each lattice cell takes the label of the last
// primitive covering it, in the order: ground, strips, discs, vehicles,
// buildings. Buildings are extruded: a roof at their height plus walls along
// the footprint boundary down to the ground.

#pragma once

#include <cstdint>
#include <optional>

#include "semloc/crossmodal.hpp"
#include "semloc/geometry.hpp"
#include "semloc/mask.hpp"
#include "semloc/point_cloud.hpp"

namespace semloc {

struct SceneSpec {
  std::uint64_t seed = 1;
  double extent = 400.0;   // side of the square world (m)
  double density = 4.0;    // lattice points per m^2
  ClassId ground_class = id(SemanticClass::LowVegetation);

  int buildings = 30;
  double building_size_min = 10.0;
  double building_size_max = 35.0;
  double building_height_min = 0.0;
  double building_height_max = 0.0;
  double building_coverage = 0.0;  // > 0: place buildings until this footprint fraction is reached

  int strips = 6;  // impervious roads
  double strip_width_min = 6.0;
  double strip_width_max = 12.0;

  int discs = 20;  // water / tree / low-vegetation / pervious patches
  double disc_radius_min = 4.0;
  double disc_radius_max = 20.0;

  int vehicles = 0;

  double altitude_min = 200.0;  // frame altitude range (m)
  double altitude_max = 200.0;

  void validate() const;
  double lattice_spacing() const;
};

struct CorruptionSpec {
  double flip_rate = 0.0;                 // per-pixel probability of resampling the label
  std::optional<ConfusionMatrix> confusion;  // flip distribution; none = uniform over other classes
  int flip_scale = 1;                     // flips are decided per (block, class) with this block size (px)
  double boundary_jitter = 0.0;           // max boundary displacement (px)
  double dropout = 0.0;                   // probability that a class is erased to ignore

  void validate() const;
};

SemanticPointCloud generate_world(const SceneSpec& spec);

/// Square image with fx = fy and the principal point at the image center.
CameraIntrinsics synthetic_intrinsics(int size, double focal);

/// Straight-down camera: image +u is east, +v is south.
ViewGeometry nadir_view(const CameraIntrinsics& intr, double height, Vec2 prior = Vec2::Zero());

/// Ideal segmentation: z-buffered splat of the labeled points, holes filled
/// from the nearest rendered pixel within 2 px (ties: smaller depth), else
/// ignore.
SegmentationMask render_truth_mask(const SemanticPointCloud& map, const ViewGeometry& view, PlanarTranslation t_true,
                                   int num_classes = kDefaultNumClasses);

/// Applies boundary jitter, label flips and class dropout, in that order.
/// Deterministic in (mask, spec, seed).
SegmentationMask corrupt_mask(const SegmentationMask& mask, const CorruptionSpec& spec, std::uint64_t seed);

/// Counter-based hash to [0, 1); exposed for reproducible sampling in tools.
double unit_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace semloc
