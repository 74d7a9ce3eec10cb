#include "semloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/LU>

namespace semloc {

bool CameraIntrinsics::has_distortion() const {
  return std::any_of(dist.begin(), dist.end(), [](double c) { return c != 0.0; });
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InputError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InputError("image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw InputError("principal point outside the image");
  for (double c : dist)
    if (!std::isfinite(c)) throw InputError("distortion coefficient is not finite");
}

bool is_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  const Mat3 should_be_identity = m.transpose() * m;
  if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(m.determinant() - 1.0) <= tol;
}

RigidPose::RigidPose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation_)) throw InputError("rotation is not orthonormal with det +1");
  if (!translation_.allFinite()) throw InputError("translation is not finite");
}

RigidPose RigidPose::inverse() const {
  RigidPose inv;
  inv.rotation_ = rotation_.transpose();
  inv.translation_ = -(inv.rotation_ * translation_);
  return inv;
}

RigidPose RigidPose::operator*(const RigidPose& other) const {
  RigidPose out;
  out.rotation_ = rotation_ * other.rotation_;
  out.translation_ = rotation_ * other.translation_ + translation_;
  return out;
}

void ViewGeometry::validate() const {
  intrinsics.validate();
  if (!is_rotation(attitude)) throw InputError("attitude is not a rotation");
  if (!is_rotation(attitude * cam_to_body.rotation())) throw InputError("composed rotation is not a rotation");
  if (!std::isfinite(height)) throw InputError("camera height is not finite");
  if (!prior.allFinite()) throw InputError("navigation prior is not finite");
}

Vec3 ViewGeometry::body_position(PlanarTranslation t) const {
  return {prior.x() + t.tx, prior.y() + t.ty, height};
}

RigidPose ViewGeometry::world_to_camera(PlanarTranslation t) const {
  // x_c = R_cb^T R_wb^T x_w - R_cb^T R_wb^T b - R_cb^T t_cb
  const Mat3 rcb_t = cam_to_body.rotation().transpose();
  const Mat3 r = rcb_t * attitude.transpose();
  const Vec3 offset = -(r * body_position(t)) - rcb_t * cam_to_body.translation();
  return RigidPose(r, offset);
}

Vec3 world_to_camera(const Vec3& point, const ViewGeometry& view, PlanarTranslation t) {
  const Vec3 body = view.attitude.transpose() * (point - view.body_position(t));
  return view.cam_to_body.rotation().transpose() * (body - view.cam_to_body.translation());
}

Vec3 camera_to_world(const Vec3& point, const ViewGeometry& view, PlanarTranslation t) {
  const Vec3 body = view.cam_to_body.rotation() * point + view.cam_to_body.translation();
  return view.attitude * body + view.body_position(t);
}

Vec2 distort_normalized(const Vec2& xy, const std::array<double, 5>& dist) {
  const double k1 = dist[0], k2 = dist[1], k3 = dist[2], p1 = dist[3], p2 = dist[4];
  const double x = xy.x(), y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  return {x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
          y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y};
}

namespace {

// Shared by project_pixel and the renderer; `distorted` selects the branch so
// the zero-distortion path is the bare pinhole formula.
inline bool project_into(const Vec3& p, const CameraIntrinsics& intr, bool distorted, double& u, double& v) {
  if (!(p.z() > 0.0)) return false;
  if (distorted) {
    const Vec2 d = distort_normalized({p.x() / p.z(), p.y() / p.z()}, intr.dist);
    u = intr.fx * d.x() + intr.cx;
    v = intr.fy * d.y() + intr.cy;
  } else {
    u = intr.fx * (p.x() / p.z()) + intr.cx;
    v = intr.fy * (p.y() / p.z()) + intr.cy;
  }
  return u >= 0.0 && v >= 0.0 && u < intr.width && v < intr.height;
}

}  // namespace

std::optional<Vec2> project_pixel(const Vec3& cam_point, const CameraIntrinsics& intr) {
  double u = 0.0, v = 0.0;
  if (!project_into(cam_point, intr, intr.has_distortion(), u, v)) return std::nullopt;
  return Vec2(u, v);
}

void PointRenderer::prepare(int width, int height) {
  if (width != width_ || height != height_) {
    width_ = width;
    height_ = height;
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    pixel_stamp_.assign(n, 0);
    pixel_slot_.assign(n, 0);
    stamp_ = 0;
  }
  if (++stamp_ == 0) {
    std::fill(pixel_stamp_.begin(), pixel_stamp_.end(), 0);
    stamp_ = 1;
  }
}

void PointRenderer::render(std::span<const LabeledPoint> points, const RigidPose& world_to_cam,
                           const CameraIntrinsics& intr, ProjectedSemanticPoints& out,
                           const std::vector<std::uint32_t>* subset) {
  prepare(intr.width, intr.height);
  out.entries.clear();
  const bool distorted = intr.has_distortion();
  const Mat3& r = world_to_cam.rotation();
  const Vec3& t = world_to_cam.translation();

  auto visit = [&](std::uint32_t i) {
    const LabeledPoint& lp = points[i];
    const Vec3 pc = r * lp.position + t;
    double u, v;
    if (!project_into(pc, intr, distorted, u, v)) return;
    const auto pix = static_cast<std::size_t>(pixel_bin(v, intr.height)) * static_cast<std::size_t>(intr.width) +
                     static_cast<std::size_t>(pixel_bin(u, intr.width));
    if (pixel_stamp_[pix] != stamp_) {
      pixel_stamp_[pix] = stamp_;
      pixel_slot_[pix] = static_cast<std::uint32_t>(out.entries.size());
      out.entries.push_back({u, v, lp.cls, pc.z(), i});
      return;
    }
    ProjectedPoint& cur = out.entries[pixel_slot_[pix]];
    // strict: equal depth keeps the earlier point
    if (pc.z() < cur.depth) cur = {u, v, lp.cls, pc.z(), i};
  };

  if (subset) {
    for (std::uint32_t i : *subset) visit(i);
  } else {
    for (std::uint32_t i = 0; i < points.size(); ++i) visit(i);
  }
}

ProjectedSemanticPoints render_labeled_points(const SemanticPointCloud& cloud, const ViewGeometry& view,
                                              PlanarTranslation t) {
  PointRenderer renderer;
  ProjectedSemanticPoints out;
  renderer.render(cloud.points, view.world_to_camera(t), view.intrinsics, out);
  out.t = t;
  return out;
}

std::vector<std::uint32_t> cull_for_search(std::span<const LabeledPoint> points, const ViewGeometry& view,
                                           PlanarTranslation center, double half_extent) {
  const RigidPose w2c = view.world_to_camera(center);
  const Mat3& r = w2c.rotation();
  // Moving the camera by (dx, dy) shifts camera coordinates by -(r.col(0) dx + r.col(1) dy).
  Vec3 slack;
  for (int i = 0; i < 3; ++i) slack[i] = half_extent * (std::abs(r(i, 0)) + std::abs(r(i, 1)));

  const CameraIntrinsics& intr = view.intrinsics;
  const bool lateral = !intr.has_distortion();
  std::vector<std::uint32_t> keep;
  keep.reserve(points.size() / 4);
  for (std::uint32_t i = 0; i < points.size(); ++i) {
    const Vec3 pc = w2c.apply(points[i].position);
    const double z_lo = pc.z() - slack.z(), z_hi = pc.z() + slack.z();
    if (z_hi <= 0.0) continue;
    if (lateral && z_lo > 0.0) {
      const double x_lo = pc.x() - slack.x(), x_hi = pc.x() + slack.x();
      const double y_lo = pc.y() - slack.y(), y_hi = pc.y() + slack.y();
      const double u_lo = intr.fx * std::min(x_lo / z_lo, x_lo / z_hi) + intr.cx;
      const double u_hi = intr.fx * std::max(x_hi / z_lo, x_hi / z_hi) + intr.cx;
      const double v_lo = intr.fy * std::min(y_lo / z_lo, y_lo / z_hi) + intr.cy;
      const double v_hi = intr.fy * std::max(y_hi / z_lo, y_hi / z_hi) + intr.cy;
      // one pixel of margin absorbs rounding in the interval bounds
      if (u_hi < -1.0 || v_hi < -1.0 || u_lo > intr.width + 1.0 || v_lo > intr.height + 1.0) continue;
    }
    keep.push_back(i);
  }
  return keep;
}

}  // namespace semloc
