// Brute-force reference implementations used only by the tests. Each one
// follows the definition directly (nested loops, no indexing structures) so
// it shares no code path with the library.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "semloc/alignment.hpp"
#include "semloc/crossmodal.hpp"
#include "semloc/evaluation.hpp"
#include "semloc/geometry.hpp"
#include "semloc/mask.hpp"
#include "semloc/point_cloud.hpp"
#include "semloc/semantic_map.hpp"

namespace oracle {

using namespace semloc;

inline bool is_edge(const SegmentationMask& m, int x, int y) {
  const ClassId c = m.at(x, y);
  if (c == kIgnoreLabel) return false;
  const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  for (int i = 0; i < 4; ++i) {
    const int nx = x + dx[i], ny = y + dy[i];
    if (!m.contains(nx, ny)) continue;
    const ClassId n = m.at(nx, ny);
    if (n != kIgnoreLabel && n != c) return true;
  }
  return false;
}

/// Edge pixels of class k in row-major order.
inline std::vector<Pixel> edges_of(const SegmentationMask& m, int k) {
  std::vector<Pixel> out;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y) == k && is_edge(m, x, y)) out.push_back({x, y});
  return out;
}

/// min(d_max, distance to the nearest class-k edge pixel), d_max when none.
inline double field_at(const std::vector<Pixel>& edges, int x, int y, double d_max) {
  double best = d_max;
  for (const Pixel& e : edges) {
    const double d = std::sqrt(double(e.x - x) * (e.x - x) + double(e.y - y) * (e.y - y));
    best = std::min(best, d);
  }
  return best;
}

inline double bilinear(const std::vector<Pixel>& edges, int w, int h, double u, double v, double d_max) {
  const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = u - x0, fy = v - y0;
  const double f00 = field_at(edges, x0, y0, d_max), f10 = field_at(edges, x1, y0, d_max);
  const double f01 = field_at(edges, x0, y1, d_max), f11 = field_at(edges, x1, y1, d_max);
  return (1 - fx) * (1 - fy) * f00 + fx * (1 - fy) * f10 + (1 - fx) * fy * f01 + fx * fy * f11;
}

inline double huber(double d, double delta) {
  return std::abs(d) <= delta ? d * d / 2.0 : delta * (std::abs(d) - delta / 2.0);
}

/// Forward weights: C rows, identity in hard mode.
inline double forward_weight(const LossConfig& cfg, int y, int k) {
  if (!cfg.confusion) return y == k ? 1.0 : 0.0;
  return (*cfg.confusion)(y, k);
}

/// Reverse weights: normalized C column (posterior) or C row.
inline double reverse_weight(const LossConfig& cfg, int j, int k) {
  if (!cfg.confusion) return j == k ? 1.0 : 0.0;
  const ConfusionMatrix& c = *cfg.confusion;
  if (cfg.reverse_weighting == ReverseWeighting::Row) return c(j, k);
  double col = 0.0;
  for (int t = 0; t < c.size(); ++t) col += c(t, j);
  if (col <= 0.0) return j == k ? 1.0 : 0.0;
  return c(k, j) / col;
}

inline double forward_loss(const std::vector<ProjectedPoint>& proj, const SegmentationMask& m, const LossConfig& cfg) {
  double sum = 0.0;
  for (const ProjectedPoint& p : proj)
    for (int k = 0; k < m.num_classes(); ++k) {
      const double w = forward_weight(cfg, p.cls, k);
      if (w != 0.0) sum += w * huber(bilinear(edges_of(m, k), m.width(), m.height(), p.u, p.v, cfg.d_max), cfg.delta);
    }
  return sum / static_cast<double>(proj.size());
}

inline double reverse_loss(const std::vector<ProjectedPoint>& proj, const SegmentationMask& m, const LossConfig& cfg) {
  double sum = 0.0;
  std::size_t n = 0;
  for (int j = 0; j < m.num_classes(); ++j)
    for (const Pixel& e : edges_of(m, j)) {
      ++n;
      for (int k = 0; k < m.num_classes(); ++k) {
        const double w = reverse_weight(cfg, j, k);
        if (w == 0.0) continue;
        double best = cfg.d_max;
        for (const ProjectedPoint& p : proj)
          if (p.cls == k) best = std::min(best, std::hypot(p.u - e.x, p.v - e.y));
        sum += w * huber(best, cfg.delta);
      }
    }
  return sum / static_cast<double>(n);
}

/// Camera coordinates straight from the pose definition.
inline Vec3 to_camera(const Vec3& xw, const ViewGeometry& view, PlanarTranslation t) {
  const Vec3 b(view.prior.x() + t.tx, view.prior.y() + t.ty, view.height);
  return view.cam_to_body.rotation().transpose() *
         (view.attitude.transpose() * (xw - b) - view.cam_to_body.translation());
}

inline bool project(const Vec3& pc, const CameraIntrinsics& in, double& u, double& v) {
  if (pc.z() <= 0) return false;
  double x = pc.x() / pc.z(), y = pc.y() / pc.z();
  const double r2 = x * x + y * y;
  const double k1 = in.dist[0], k2 = in.dist[1], k3 = in.dist[2], p1 = in.dist[3], p2 = in.dist[4];
  const double radial = 1 + k1 * r2 + k2 * r2 * r2 + k3 * r2 * r2 * r2;
  const double xd = x * radial + 2 * p1 * x * y + p2 * (r2 + 2 * x * x);
  const double yd = y * radial + p1 * (r2 + 2 * y * y) + 2 * p2 * x * y;
  u = in.fx * xd + in.cx;
  v = in.fy * yd + in.cy;
  return u >= 0 && v >= 0 && u < in.width && v < in.height;
}

/// Pixel key -> winning point: the nearest point per rounded pixel, the lower
/// index on equal depth.
inline std::map<std::pair<int, int>, ProjectedPoint> zbuffer(const std::vector<LabeledPoint>& pts,
                                                             const ViewGeometry& view, PlanarTranslation t) {
  std::map<std::pair<int, int>, ProjectedPoint> best;
  const CameraIntrinsics& in = view.intrinsics;
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    const Vec3 pc = to_camera(pts[i].position, view, t);
    double u, v;
    if (!project(pc, in, u, v)) continue;
    const int px = std::min(static_cast<int>(std::floor(u + 0.5)), in.width - 1);
    const int py = std::min(static_cast<int>(std::floor(v + 0.5)), in.height - 1);
    auto it = best.find({px, py});
    if (it == best.end() || pc.z() < it->second.depth) best[{px, py}] = {u, v, pts[i].cls, pc.z(), i};
  }
  return best;
}

inline std::vector<ProjectedPoint> zbuffer_list(const std::vector<LabeledPoint>& pts, const ViewGeometry& view,
                                                PlanarTranslation t) {
  std::vector<ProjectedPoint> out;
  for (const auto& [key, p] : zbuffer(pts, view, t)) out.push_back(p);
  return out;
}

/// Per-point votes over all views, counting a view when the point is the
/// z-buffer winner at its pixel (or within depth_tolerance of it).
inline std::vector<std::vector<std::uint32_t>> vote_counts(const ColoredPointCloud& cloud,
                                                           const std::vector<LabeledView>& views, int K,
                                                           double depth_tolerance) {
  std::vector<std::vector<std::uint32_t>> votes(cloud.points.size(), std::vector<std::uint32_t>(K, 0));
  for (const LabeledView& view : views) {
    const CameraIntrinsics& in = view.intrinsics;
    std::map<std::pair<int, int>, double> zmin;
    std::vector<std::pair<std::pair<int, int>, double>> where(cloud.points.size(), {{-1, -1}, -1.0});
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      const Vec3 pc = view.world_to_camera.rotation() * cloud.points[i].position + view.world_to_camera.translation();
      double u, v;
      if (!project(pc, in, u, v)) continue;
      const std::pair<int, int> key{std::min(static_cast<int>(std::floor(u + 0.5)), in.width - 1),
                                    std::min(static_cast<int>(std::floor(v + 0.5)), in.height - 1)};
      where[i] = {key, pc.z()};
      auto it = zmin.find(key);
      if (it == zmin.end() || pc.z() < it->second) zmin[key] = pc.z();
    }
    std::map<std::pair<int, int>, bool> taken;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      if (where[i].second < 0) continue;
      const auto key = where[i].first;
      const double z = where[i].second;
      bool visible;
      if (depth_tolerance > 0.0) {
        visible = z <= zmin[key] + depth_tolerance;
      } else {
        // exactly one point per pixel: the first one at the minimum depth
        visible = z == zmin[key] && !taken[key];
        if (visible) taken[key] = true;
      }
      if (!visible) continue;
      const ClassId label = view.mask.at(key.first, key.second);
      if (label != kIgnoreLabel) ++votes[i][label];
    }
  }
  return votes;
}

inline ClassId argmax_low(const std::vector<std::uint32_t>& c) {
  std::uint32_t best = 0;
  ClassId arg = kIgnoreLabel;
  for (std::size_t k = 0; k < c.size(); ++k)
    if (c[k] > best) best = c[k], arg = static_cast<ClassId>(k);
  return arg;
}

/// Voxel key -> majority class, then the voxels with a differently labeled
/// occupied face neighbour.
inline std::map<std::array<int, 3>, ClassId> prune(const SemanticPointCloud& map, double size, int K) {
  std::map<std::array<int, 3>, std::vector<std::uint32_t>> counts;
  for (const LabeledPoint& p : map.points) {
    if (p.cls == kIgnoreLabel) continue;
    const std::array<int, 3> key{static_cast<int>(std::floor(p.position.x() / size)),
                                 static_cast<int>(std::floor(p.position.y() / size)),
                                 static_cast<int>(std::floor(p.position.z() / size))};
    auto& c = counts[key];
    c.resize(K, 0);
    ++c[p.cls];
  }
  std::map<std::array<int, 3>, ClassId> label;
  for (const auto& [key, c] : counts) label[key] = argmax_low(c);
  std::map<std::array<int, 3>, ClassId> kept;
  for (const auto& [key, cls] : label) {
    for (int a = 0; a < 3; ++a)
      for (int s = -1; s <= 1; s += 2) {
        auto n = key;
        n[a] += s;
        auto it = label.find(n);
        if (it != label.end() && it->second != cls) kept[key] = cls;
      }
  }
  return kept;
}

/// Textbook formulas, recomputed from scratch.
struct Stats {
  double rmse_x, rmse_y, rmse_2d, median, p75, under2, over5;
};

inline double interp_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] * (1.0 - (pos - i)) + v[i + 1] * (pos - i);
}

inline Stats stats(const std::vector<Vec2>& e, bool bias_correct) {
  double mx = 0, my = 0;
  for (const Vec2& x : e) mx += x.x(), my += x.y();
  mx /= e.size(), my /= e.size();
  if (!bias_correct) mx = my = 0;
  double sx = 0, sy = 0;
  std::vector<double> norms;
  double under = 0, over = 0;
  for (const Vec2& x : e) {
    const double dx = x.x() - mx, dy = x.y() - my;
    sx += dx * dx;
    sy += dy * dy;
    const double n = std::sqrt(dx * dx + dy * dy);
    norms.push_back(n);
    if (n < 2) under += 1;
    if (n > 5) over += 1;
  }
  const double N = static_cast<double>(e.size());
  return {std::sqrt(sx / N), std::sqrt(sy / N), std::sqrt((sx + sy) / N), interp_quantile(norms, 0.5),
          interp_quantile(norms, 0.75), under / N, over / N};
}

inline SegmentationMask random_mask(std::mt19937_64& rng, int w, int h, int K, double ignore_p = 0.05,
                                    int blobs = 12) {
  // Voronoi-like blobs so edges form contours rather than noise.
  std::uniform_real_distribution<double> ux(0, w), uy(0, h), u01(0, 1);
  std::uniform_int_distribution<int> uk(0, K - 1);
  std::vector<std::array<double, 3>> seeds;
  for (int i = 0; i < blobs; ++i) seeds.push_back({ux(rng), uy(rng), double(uk(rng))});
  SegmentationMask m(w, h, kIgnoreLabel, K);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double best = 1e300;
      int cls = 0;
      for (const auto& s : seeds) {
        const double d = (s[0] - x) * (s[0] - x) + (s[1] - y) * (s[1] - y);
        if (d < best) best = d, cls = static_cast<int>(s[2]);
      }
      m.at(x, y) = u01(rng) < ignore_p ? kIgnoreLabel : static_cast<ClassId>(cls);
    }
  return m;
}

}  // namespace oracle
