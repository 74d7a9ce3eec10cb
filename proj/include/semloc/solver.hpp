// Bounded coarse-to-fine grid search over planar translation.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semloc/alignment.hpp"
#include "semloc/semantic_map.hpp"

namespace semloc {

struct SearchConfig {
  double radius = 30.0;                        // half-width r of the search square (m)
  std::vector<double> spacings{4.0, 1.0, 0.25};  // strictly decreasing (m)
  double refine_halfwidth = 2.0;               // later windows span +- this many previous spacings
  std::size_t gate_threshold = 8000;           // minimum total edge pixels
  int threads = 1;                             // candidate evaluation workers

  void validate() const;
};

struct StageTrace {
  double spacing = 0.0;
  PlanarTranslation best;
  double loss = 0.0;
  std::size_t candidates = 0;
};

struct LocalizationResult {
  PlanarTranslation t_star;
  double loss = 0.0;
  double forward = 0.0;
  double reverse = 0.0;
  std::size_t edge_count = 0;
  bool gated = false;
  std::string gate_reason;
  std::vector<StageTrace> trace;
  double wall_time_s = 0.0;
};

/// Everything about one observation that stays fixed across candidates: edge
/// sets, distance fields and the map points. Evaluation is const and takes a
/// caller-owned workspace, so one objective can be shared by several workers.
class FrameObjective {
 public:
  FrameObjective(std::span<const LabeledPoint> map, const SegmentationMask& mask, const ViewGeometry& view,
                 const LossConfig& cfg);

  struct Workspace {
    explicit Workspace(const FrameObjective& obj) : eval(obj.cfg_, obj.num_classes_) {}
    PointRenderer renderer;
    ProjectedSemanticPoints proj;
    LossEvaluator eval;
  };

  std::size_t edge_count() const { return edges_.total(); }
  const ClassEdgeSets& edges() const { return edges_; }
  const DistanceFieldStack& fields() const { return fields_; }

  /// Objective at t; nullopt when a weighted term has no evidence there.
  /// `subset` restricts rendering to pre-culled map indices.
  std::optional<LossTerms> evaluate(PlanarTranslation t, Workspace& ws,
                                    const std::vector<std::uint32_t>* subset = nullptr) const;

  std::vector<std::uint32_t> cull(PlanarTranslation center, double half_extent) const;

 private:
  std::span<const LabeledPoint> map_;
  ViewGeometry view_;
  LossConfig cfg_;
  int num_classes_;
  ClassEdgeSets edges_;
  DistanceFieldStack fields_;
};

/// Strict ordering used to pick a stage winner: lower loss, then smaller
/// |t|, then lexicographic (tx, ty).
bool better_candidate(double loss_a, PlanarTranslation a, double loss_b, PlanarTranslation b);

LocalizationResult localize_frame(const SemanticPointCloud& map_points, const SegmentationMask& mask,
                                  const ViewGeometry& view, const LossConfig& loss_cfg,
                                  const SearchConfig& search_cfg);
LocalizationResult localize_frame(const VoxelEdgeMap& map, const SegmentationMask& mask, const ViewGeometry& view,
                                  const LossConfig& loss_cfg, const SearchConfig& search_cfg);

struct Frame {
  std::string id;
  SegmentationMask mask;
  ViewGeometry view;
};

struct FrameOutcome {
  std::string id;
  std::optional<LocalizationResult> result;
  std::string error;  // set when result is empty
};

/// Independent per-frame localization. Failures are recorded per frame; the
/// batch never aborts. Output order matches input order for any worker count.
std::vector<FrameOutcome> localize_trajectory(const VoxelEdgeMap& map, std::span<const Frame> frames,
                                              const LossConfig& loss_cfg, const SearchConfig& search_cfg,
                                              int workers = 1);

}  // namespace semloc
