#include "semloc/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>

#include "parallel.hpp"

namespace semloc {

void SearchConfig::validate() const {
  if (!(radius > 0.0)) throw InputError("search radius must be positive");
  if (spacings.empty()) throw InputError("search needs at least one grid spacing");
  for (std::size_t i = 0; i < spacings.size(); ++i) {
    if (!(spacings[i] > 0.0)) throw InputError("grid spacings must be positive");
    if (i > 0 && !(spacings[i] < spacings[i - 1])) throw InputError("grid spacings must be strictly decreasing");
  }
  if (!(refine_halfwidth > 0.0)) throw InputError("refine half-width must be positive");
  if (threads < 1) throw InputError("thread count must be >= 1");
}

FrameObjective::FrameObjective(std::span<const LabeledPoint> map, const SegmentationMask& mask,
                               const ViewGeometry& view, const LossConfig& cfg)
    : map_(map), view_(view), cfg_(cfg), num_classes_(mask.num_classes()) {
  cfg_.validate();
  view_.validate();
  if (mask.width() != view.intrinsics.width || mask.height() != view.intrinsics.height)
    throw InputError("mask size does not match the camera intrinsics");
  if (cfg_.confusion && cfg_.confusion->size() != num_classes_)
    throw InputError("confusion matrix size does not match the mask class count");
  for (const LabeledPoint& p : map_)
    if (p.cls >= num_classes_) throw InputError("map point class outside [0, K)");
  edges_ = extract_edges(mask);
  fields_ = build_distance_fields(edges_, cfg_.d_max);
}

std::optional<LossTerms> FrameObjective::evaluate(PlanarTranslation t, Workspace& ws,
                                                  const std::vector<std::uint32_t>* subset) const {
  ws.renderer.render(map_, view_.world_to_camera(t), view_.intrinsics, ws.proj, subset);
  ws.proj.t = t;
  if (cfg_.lambda_f > 0.0 && ws.proj.empty()) return std::nullopt;
  if (cfg_.lambda_r > 0.0 && edges_.total() == 0) return std::nullopt;
  return ws.eval.total(ws.proj, edges_, fields_);
}

std::vector<std::uint32_t> FrameObjective::cull(PlanarTranslation center, double half_extent) const {
  return cull_for_search(map_, view_, center, half_extent);
}

bool better_candidate(double loss_a, PlanarTranslation a, double loss_b, PlanarTranslation b) {
  if (loss_a != loss_b) return loss_a < loss_b;
  const double na = a.tx * a.tx + a.ty * a.ty, nb = b.tx * b.tx + b.ty * b.ty;
  if (na != nb) return na < nb;
  if (a.tx != b.tx) return a.tx < b.tx;
  return a.ty < b.ty;
}

namespace {

struct Scored {
  PlanarTranslation t;
  std::optional<LossTerms> terms;
};

// Grid of center + (i, j) * spacing for |i|, |j| <= steps, clipped to the region.
std::vector<PlanarTranslation> stage_grid(PlanarTranslation center, double spacing, long steps, double radius) {
  std::vector<PlanarTranslation> out;
  const double limit = radius * (1.0 + 1e-12);
  for (long i = -steps; i <= steps; ++i) {
    const double tx = center.tx + static_cast<double>(i) * spacing;
    if (std::abs(tx) > limit) continue;
    for (long j = -steps; j <= steps; ++j) {
      const double ty = center.ty + static_cast<double>(j) * spacing;
      if (std::abs(ty) > limit) continue;
      out.push_back({tx, ty});
    }
  }
  return out;
}

}  // namespace

LocalizationResult localize_frame(const SemanticPointCloud& map_points, const SegmentationMask& mask,
                                  const ViewGeometry& view, const LossConfig& loss_cfg,
                                  const SearchConfig& search_cfg) {
  const auto started = std::chrono::steady_clock::now();
  search_cfg.validate();
  if (map_points.empty()) throw InputError("localization map is empty");
  const FrameObjective objective(map_points.points, mask, view, loss_cfg);

  LocalizationResult result;
  result.edge_count = objective.edge_count();
  if (result.edge_count < search_cfg.gate_threshold) {
    result.gated = true;
    result.gate_reason = "edge count " + std::to_string(result.edge_count) + " below gate threshold " +
                         std::to_string(search_cfg.gate_threshold);
  }

  std::vector<std::unique_ptr<FrameObjective::Workspace>> workspaces;
  for (int i = 0; i < search_cfg.threads; ++i) workspaces.push_back(std::make_unique<FrameObjective::Workspace>(objective));

  bool have_best = false;
  PlanarTranslation best_t;
  LossTerms best_terms;
  const double eps = 1e-9;

  for (std::size_t s = 0; s < search_cfg.spacings.size(); ++s) {
    const double spacing = search_cfg.spacings[s];
    PlanarTranslation center{0.0, 0.0};
    double half = search_cfg.radius;
    if (s > 0) {
      center = best_t;
      half = search_cfg.refine_halfwidth * search_cfg.spacings[s - 1];
    }
    const auto steps = static_cast<long>(std::floor(half / spacing + eps));
    const std::vector<PlanarTranslation> grid = stage_grid(center, spacing, steps, search_cfg.radius);
    const std::vector<std::uint32_t> subset = objective.cull(center, half);

    std::vector<Scored> scored(grid.size());
    detail::parallel_chunks(grid.size(), search_cfg.threads, [&](std::size_t b, std::size_t e, int w) {
      for (std::size_t i = b; i < e; ++i) scored[i] = {grid[i], objective.evaluate(grid[i], *workspaces[w], &subset)};
    });

    bool stage_found = false;
    for (const Scored& c : scored) {
      if (!c.terms) continue;
      if (!stage_found || better_candidate(c.terms->total, c.t, best_terms.total, best_t)) {
        // the previous best lies on this grid, so the stage winner never regresses
        best_t = c.t;
        best_terms = *c.terms;
        stage_found = true;
      }
    }
    if (!stage_found) {
      if (!have_best) throw NoEvidenceError("no candidate translation projects any map point into the image");
    }
    have_best = true;
    result.trace.push_back({spacing, best_t, best_terms.total, grid.size()});
  }

  result.t_star = best_t;
  result.loss = best_terms.total;
  result.forward = best_terms.forward;
  result.reverse = best_terms.reverse;
  result.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

LocalizationResult localize_frame(const VoxelEdgeMap& map, const SegmentationMask& mask, const ViewGeometry& view,
                                  const LossConfig& loss_cfg, const SearchConfig& search_cfg) {
  return localize_frame(map.as_cloud(), mask, view, loss_cfg, search_cfg);
}

std::vector<FrameOutcome> localize_trajectory(const VoxelEdgeMap& map, std::span<const Frame> frames,
                                              const LossConfig& loss_cfg, const SearchConfig& search_cfg,
                                              int workers) {
  if (frames.empty()) throw InputError("trajectory has no frames");
  const SemanticPointCloud points = map.as_cloud();
  std::vector<FrameOutcome> out(frames.size());
  detail::parallel_chunks(frames.size(), workers, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t i = b; i < e; ++i) {
      out[i].id = frames[i].id;
      try {
        out[i].result = localize_frame(points, frames[i].mask, frames[i].view, loss_cfg, search_cfg);
      } catch (const std::exception& ex) {
        out[i].error = ex.what();
      }
    }
  });
  return out;
}

}  // namespace semloc
