// Semantic Chamfer objective between projected map points and per-class
// segmentation edges.
//
//   forward:  mean over projected points p_i of  sum_k w(y_i,k) rho(d(p_i, E_k))
//   reverse:  mean over edge pixels e_j     of  sum_k W(y_j,k) rho(d(e_j, P_k))
//   total:    lambda_f * forward + lambda_r * reverse
//
// In hard mode both weightings are the identity. rho is the Huber penalty on
// the distance clamped at d_max.

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "semloc/crossmodal.hpp"
#include "semloc/geometry.hpp"
#include "semloc/mask.hpp"

namespace semloc {

struct Pixel {
  int x = 0;
  int y = 0;

  auto operator<=>(const Pixel&) const = default;
};

/// Per-class edge pixels E_k. A pixel with label k is an edge when one of its
/// 4-neighbours carries a different, non-ignore label.
struct ClassEdgeSets {
  int width = 0;
  int height = 0;
  std::vector<std::vector<Pixel>> per_class;

  int num_classes() const { return static_cast<int>(per_class.size()); }
  std::size_t total() const;
};

ClassEdgeSets extract_edges(const SegmentationMask& mask);

/// Exact squared Euclidean distance transform (two separable lower-envelope
/// passes). `seeds` is row-major; non-zero marks a seed. Cells with no seed
/// anywhere in the image hold +infinity.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& seeds, int width, int height);

/// Per-class distance fields clamped at d_max. Empty classes are uniformly
/// d_max.
class DistanceFieldStack {
 public:
  DistanceFieldStack() = default;
  DistanceFieldStack(int width, int height, double d_max, std::vector<std::vector<double>> fields);

  int width() const { return width_; }
  int height() const { return height_; }
  double d_max() const { return d_max_; }
  int num_classes() const { return static_cast<int>(fields_.size()); }

  double at(int k, int x, int y) const {
    return fields_[static_cast<std::size_t>(k)][static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                                                static_cast<std::size_t>(x)];
  }
  /// Bilinear interpolation at a subpixel location inside [0,w) x [0,h).
  double sample(int k, double u, double v) const;

 private:
  int width_ = 0;
  int height_ = 0;
  double d_max_ = 0.0;
  std::vector<std::vector<double>> fields_;
};

DistanceFieldStack build_distance_fields(const ClassEdgeSets& edges, double d_max);

/// d^2/2 below delta, delta (d - delta/2) above.
inline double huber(double d, double delta) { return d <= delta ? 0.5 * d * d : delta * (d - 0.5 * delta); }

enum class ReverseWeighting {
  Posterior,  // W(j,k) = Pr(true k | predicted j) under a uniform class prior
  Row,        // W(j,k) = C(j,k)
};

struct LossConfig {
  double delta = 2.0;  // Huber threshold (px)
  double d_max = 5.0;  // distance clamp (px)
  double lambda_f = 1.0;
  double lambda_r = 1.0;
  std::optional<ConfusionMatrix> confusion;
  ReverseWeighting reverse_weighting = ReverseWeighting::Posterior;

  void validate() const;
};

/// The K x K weights applied in the reverse term for a given confusion matrix.
/// A predicted class that no true class ever maps to gets an identity row.
Eigen::MatrixXd reverse_weights(const ConfusionMatrix& c, ReverseWeighting mode);

struct LossTerms {
  double forward = 0.0;
  double reverse = 0.0;
  double total = 0.0;
};

/// Reusable evaluator for one LossConfig. Holds the spatial index used for
/// nearest projected point queries so repeated evaluations do not allocate.
/// Not thread-safe; use one per worker.
class LossEvaluator {
 public:
  LossEvaluator(const LossConfig& cfg, int num_classes);

  /// Throws NoEvidenceError when `proj` is empty.
  double forward(const ProjectedSemanticPoints& proj, const DistanceFieldStack& fields) const;
  /// Throws NoEvidenceError when there are no edge pixels.
  double reverse(const ClassEdgeSets& edges, const ProjectedSemanticPoints& proj);
  /// Zero-weight terms are skipped; a weighted term without evidence throws.
  LossTerms total(const ProjectedSemanticPoints& proj, const ClassEdgeSets& edges, const DistanceFieldStack& fields);

  const LossConfig& config() const { return cfg_; }

 private:
  void index_points(const ProjectedSemanticPoints& proj, int width, int height);
  double nearest(int k, double x, double y) const;

  struct Weight {
    int k;
    double w;
  };

  LossConfig cfg_;
  int num_classes_;
  std::vector<std::vector<Weight>> forward_w_;
  std::vector<std::vector<Weight>> reverse_w_;

  // bucket grid over the image, cell size d_max, one grid per class
  double cell_ = 1.0;
  int grid_w_ = 0;
  int grid_h_ = 0;
  std::vector<std::uint32_t> cell_start_;
  std::vector<double> bucket_xy_;
  std::vector<std::uint32_t> cell_of_;
};

double forward_loss(const ProjectedSemanticPoints& proj, const DistanceFieldStack& fields, const LossConfig& cfg);
double reverse_loss(const ClassEdgeSets& edges, const ProjectedSemanticPoints& proj, const LossConfig& cfg);
LossTerms total_loss(const ProjectedSemanticPoints& proj, const ClassEdgeSets& edges,
                     const DistanceFieldStack& fields, const LossConfig& cfg);

}  // namespace semloc
