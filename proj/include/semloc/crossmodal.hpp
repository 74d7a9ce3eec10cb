// Cross-modal label transfer: global homography between paired cameras,
// nearest-neighbour label warping and empirical confusion statistics.

#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "semloc/mask.hpp"
#include "semloc/types.hpp"

namespace semloc {

/// Row-stochastic K x K matrix; entry (y, k) = Pr(predicted k | true y).
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  /// Validates non-negativity and unit row sums (tolerance 1e-9).
  explicit ConfusionMatrix(Eigen::MatrixXd m);

  static ConfusionMatrix identity(int k = kDefaultNumClasses);

  int size() const { return static_cast<int>(m_.rows()); }
  double operator()(int y, int k) const { return m_(y, k); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  bool is_identity() const;

 private:
  Eigen::MatrixXd m_;
};

/// 3x3 projective map normalized so that H(2,2) = 1.
class Homography {
 public:
  Homography() = default;
  /// Normalizes and checks |det| > 1e-12; throws DegenerateError otherwise.
  explicit Homography(const Mat3& h);

  const Mat3& matrix() const { return h_; }
  Vec2 apply(const Vec2& p) const;
  Homography inverse() const;

 private:
  Mat3 h_ = Mat3::Identity();
};

struct Correspondence {
  Vec2 src;
  Vec2 dst;
};
using CorrespondenceSet = std::vector<Correspondence>;

struct HomographyFit {
  Homography h;
  double rms_px = 0.0;  // reprojection RMS of src -> dst
};

/// Normalized DLT least-squares fit (centroid shift, mean distance sqrt(2)).
/// Throws DegenerateError on fewer than 4 pairs or a rank-deficient system.
HomographyFit fit_homography(const CorrespondenceSet& corr);

/// Inverse-warps `mask` through H (source -> target) into an out_w x out_h
/// target crop whose top-left corner is (x0, y0). Nearest-neighbour
/// sampling; pixels whose preimage falls outside the source become ignore.
SegmentationMask warp_mask(const SegmentationMask& mask, const Homography& h, int out_w, int out_h, int x0 = 0,
                           int y0 = 0);

/// Tallies (true y, predicted k) over pixels where neither label is ignore
/// and normalizes rows. Classes never seen in truth get an identity row.
ConfusionMatrix estimate_confusion(std::span<const SegmentationMask> pred, std::span<const SegmentationMask> truth,
                                   int num_classes = kDefaultNumClasses);

}  // namespace semloc
