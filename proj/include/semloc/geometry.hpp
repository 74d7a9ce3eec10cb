// Camera model, rigid transforms and z-buffered projection of labeled points.
//
// Frames: the world is right-handed ENU (x east, y north, z up) with the map
// datum at the origin. A camera is placed at body position
//
//     b(t) = (prior.x + t.x, prior.y + t.y, height)
//
// with body-to-world attitude R_wb, and camera-to-body extrinsics
// (R_cb, t_cb), i.e. x_b = R_cb x_c + t_cb. A world point maps to the camera
// frame as
//
//     x_c = R_cb^T (R_wb^T (x_w - b(t)) - t_cb).
//
// Camera axes follow the usual vision convention: +z along the optical axis,
// +x towards increasing u, +y towards increasing v. Pixel centers sit at
// integer coordinates.

#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "semloc/point_cloud.hpp"
#include "semloc/types.hpp"

namespace semloc {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  /// Brown-Conrady coefficients in the order k1, k2, k3, p1, p2.
  std::array<double, 5> dist{0.0, 0.0, 0.0, 0.0, 0.0};

  bool has_distortion() const;
  /// Throws InputError when an invariant is violated.
  void validate() const;
};

/// Rotation plus translation acting as x -> R x + t. The rotation is checked
/// for orthonormality (tolerance 1e-9) and det = +1 on construction.
class RigidPose {
 public:
  RigidPose() = default;
  RigidPose(const Mat3& rotation, const Vec3& translation);

  static RigidPose identity() { return RigidPose(); }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& x) const { return rotation_ * x + translation_; }
  RigidPose inverse() const;
  /// (this * other).apply(x) == this->apply(other.apply(x))
  RigidPose operator*(const RigidPose& other) const;

 private:
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

bool is_rotation(const Mat3& m, double tol = 1e-9);

/// Horizontal offset of the camera in the world frame, relative to the
/// navigation prior (metres).
struct PlanarTranslation {
  double tx = 0.0;
  double ty = 0.0;

  bool operator==(const PlanarTranslation&) const = default;
};

struct ViewGeometry {
  Mat3 attitude = Mat3::Identity();  // R_wb
  RigidPose cam_to_body;             // (R_cb, t_cb)
  double height = 0.0;               // camera body height above datum (m)
  CameraIntrinsics intrinsics;
  Vec2 prior = Vec2::Zero();         // navigation prior (x, y); t is relative to it

  void validate() const;

  /// World-to-camera transform for candidate translation t.
  RigidPose world_to_camera(PlanarTranslation t) const;
  Vec3 body_position(PlanarTranslation t) const;
};

Vec3 world_to_camera(const Vec3& point, const ViewGeometry& view, PlanarTranslation t);
Vec3 camera_to_world(const Vec3& point, const ViewGeometry& view, PlanarTranslation t);

/// Brown-Conrady distortion of normalized image coordinates.
Vec2 distort_normalized(const Vec2& xy, const std::array<double, 5>& dist);

/// Pinhole projection with distortion. Returns nullopt when the depth is not
/// positive or the pixel falls outside [0, width) x [0, height).
std::optional<Vec2> project_pixel(const Vec3& cam_point, const CameraIntrinsics& intr);

struct ProjectedPoint {
  double u = 0.0;
  double v = 0.0;
  ClassId cls = 0;
  double depth = 0.0;
  std::uint32_t source = 0;  // index into the rendered cloud
};

/// Pi(t): one entry per occupied integer pixel (minimum depth wins).
struct ProjectedSemanticPoints {
  std::vector<ProjectedPoint> entries;
  PlanarTranslation t;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }
};

/// Integer pixel a projected coordinate is binned to for z-buffering.
inline int pixel_bin(double coord, int extent) {
  const int p = static_cast<int>(coord + 0.5);
  return p < extent ? p : extent - 1;
}

/// Reusable z-buffered renderer. Keeps per-pixel scratch between calls so
/// repeated renders at the same resolution do not touch the whole image.
class PointRenderer {
 public:
  /// Renders `points` (or the listed subset) under `world_to_cam`.
  void render(std::span<const LabeledPoint> points, const RigidPose& world_to_cam,
              const CameraIntrinsics& intr, ProjectedSemanticPoints& out,
              const std::vector<std::uint32_t>* subset = nullptr);

 private:
  void prepare(int width, int height);

  int width_ = 0;
  int height_ = 0;
  std::uint32_t stamp_ = 0;
  std::vector<std::uint32_t> pixel_stamp_;
  std::vector<std::uint32_t> pixel_slot_;
};

ProjectedSemanticPoints render_labeled_points(const SemanticPointCloud& cloud, const ViewGeometry& view,
                                              PlanarTranslation t);

/// Indices of points that can project into the image for some translation in
/// center +- half_extent (per axis). Conservative: never drops a point that
/// could be visible.
std::vector<std::uint32_t> cull_for_search(std::span<const LabeledPoint> points, const ViewGeometry& view,
                                           PlanarTranslation center, double half_extent);

}  // namespace semloc
