// Trajectory accuracy metrics: bias-corrected RMSE statistics, edge-count
// binning and evidence-gate sweeps.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semloc/types.hpp"

namespace semloc {

struct FrameError {
  std::string frame_id;
  std::string dataset;  // optional grouping tag
  Vec2 estimate = Vec2::Zero();
  Vec2 truth = Vec2::Zero();
  std::size_t edge_count = 0;
  bool gated = false;

  Vec2 error() const { return estimate - truth; }
};

struct TrajectoryMetrics {
  std::size_t n = 0;
  double rmse_x = 0.0;
  double rmse_y = 0.0;
  double rmse_2d = 0.0;
  double median_2d = 0.0;
  double p75_2d = 0.0;
  double pct_under_2m = 0.0;  // fraction in [0, 1]
  double pct_over_5m = 0.0;
  double mean_2d = 0.0;
  double std_2d = 0.0;        // population convention
  Vec2 bias = Vec2::Zero();   // mean error vector of the input set
  Vec2 residual_mean = Vec2::Zero();  // mean of the errors the statistics were computed on
};

/// Percentile by linear interpolation between order statistics (q in [0,1]).
double percentile(std::vector<double> values, double q);

/// With bias_correct, the mean error vector is removed before every
/// statistic. Throws InputError on an empty set.
TrajectoryMetrics compute_metrics(std::span<const FrameError> errors, bool bias_correct);

/// Like compute_metrics, but removes each dataset's own mean error before
/// pooling.
TrajectoryMetrics compute_metrics_per_dataset_bias(std::span<const FrameError> errors);

/// 2D error norms after optional global bias removal, in input order.
std::vector<double> corrected_norms(std::span<const FrameError> errors, bool bias_correct);

struct EdgeBin {
  long lo = 0;  // inclusive edge-count range
  long hi = 0;
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t n = 0;
};

/// Bins [origin + i*width, origin + (i+1)*width - 1] spanning every frame;
/// empty interior bins are reported with n = 0.
std::vector<EdgeBin> bin_by_edges(std::span<const FrameError> errors, long width, long origin,
                                  bool bias_correct = true);

struct GateRow {
  std::size_t threshold = 0;
  double retained_fraction = 0.0;
  std::optional<TrajectoryMetrics> metrics;  // empty when nothing is retained
};

/// Drops frames with edge_count < threshold and recomputes the metrics.
std::vector<GateRow> gate_sweep(std::span<const FrameError> errors, std::span<const std::size_t> thresholds,
                                bool bias_correct = true);

}  // namespace semloc
