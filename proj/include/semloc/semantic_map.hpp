// Map construction: multi-view label fusion onto a colored cloud and
// class-transition voxel pruning.

#pragma once

#include <array>
#include <span>
#include <vector>

#include "semloc/geometry.hpp"
#include "semloc/mask.hpp"
#include "semloc/point_cloud.hpp"

namespace semloc {

/// A segmented image with its full camera pose. Mask size must equal the
/// intrinsics image size.
struct LabeledView {
  SegmentationMask mask;
  CameraIntrinsics intrinsics;
  RigidPose world_to_camera;

  void validate() const;
};

struct FuseOptions {
  int num_classes = kDefaultNumClasses;
  // A point is visible in a view when its depth is within this tolerance of
  // the z-buffer minimum at its pixel. 0 keeps exactly one point per pixel.
  double depth_tolerance = 0.0;
};

/// Argmax over per-class counts; the lowest class id wins ties. Returns
/// kIgnoreLabel when every count is zero.
ClassId majority_label(std::span<const std::uint32_t> counts);

/// Majority-vote labels over every view in which each point survives the
/// z-buffer. Points with no votes are dropped; throws NoEvidenceError when
/// nothing survives.
SemanticPointCloud fuse_labels(const ColoredPointCloud& cloud, std::span<const LabeledView> views,
                               const FuseOptions& options = {});

using VoxelKey = std::array<int, 3>;

struct EdgeVoxel {
  VoxelKey key;
  ClassId cls = 0;
  std::uint32_t members = 0;
};

/// Class-transition voxels of a labeled map, sorted by key.
struct VoxelEdgeMap {
  double voxel_size = 0.5;
  Vec3 datum = Vec3::Zero();
  std::vector<EdgeVoxel> voxels;
  std::size_t input_voxels = 0;  // occupied voxels before pruning

  bool empty() const { return voxels.empty(); }
  double retained_fraction() const;
  Vec3 center(const VoxelKey& key) const;
  /// One point per retained voxel at the voxel center.
  SemanticPointCloud as_cloud() const;
};

VoxelKey voxel_of(const Vec3& p, double voxel_size);

/// Voxelizes the map (majority class per voxel, lowest id on ties) and keeps
/// the voxels with at least one occupied 6-neighbour of a different class.
VoxelEdgeMap voxelize_and_prune(const SemanticPointCloud& map, double voxel_size,
                                int num_classes = kDefaultNumClasses);

}  // namespace semloc
