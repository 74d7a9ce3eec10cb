#include "semloc/crossmodal.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace semloc {

ConfusionMatrix::ConfusionMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() == 0 || m_.rows() != m_.cols()) throw InputError("confusion matrix must be square and nonempty");
  for (Eigen::Index y = 0; y < m_.rows(); ++y) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < m_.cols(); ++k) {
      if (!(m_(y, k) >= 0.0) || !std::isfinite(m_(y, k)))
        throw InputError("confusion matrix entry (" + std::to_string(y) + "," + std::to_string(k) + ") is negative");
      sum += m_(y, k);
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw InputError("confusion matrix row " + std::to_string(y) + " sums to " + std::to_string(sum));
  }
}

ConfusionMatrix ConfusionMatrix::identity(int k) { return ConfusionMatrix(Eigen::MatrixXd::Identity(k, k)); }

bool ConfusionMatrix::is_identity() const {
  return m_.size() > 0 && m_ == Eigen::MatrixXd::Identity(m_.rows(), m_.cols());
}

Homography::Homography(const Mat3& h) {
  if (!h.allFinite()) throw DegenerateError("homography has non-finite entries");
  if (std::abs(h(2, 2)) < 1e-15) throw DegenerateError("homography cannot be normalized: H(2,2) is zero");
  h_ = h / h(2, 2);
  if (std::abs(h_.determinant()) <= 1e-12) throw DegenerateError("homography is singular");
}

Vec2 Homography::apply(const Vec2& p) const {
  const Vec3 q = h_ * Vec3(p.x(), p.y(), 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

Homography Homography::inverse() const { return Homography(h_.inverse()); }

namespace {

// Similarity taking the points to zero centroid and mean distance sqrt(2).
Mat3 normalizing_transform(const std::vector<Vec2>& pts) {
  Vec2 centroid = Vec2::Zero();
  for (const Vec2& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const Vec2& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0)) throw DegenerateError("correspondence points are coincident");
  const double s = std::sqrt(2.0) / mean_dist;
  Mat3 t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

bool collinear(const Vec2& a, const Vec2& b, const Vec2& c, double scale) {
  const double cross = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
  return std::abs(cross) <= 1e-9 * scale * scale;
}

}  // namespace

HomographyFit fit_homography(const CorrespondenceSet& corr) {
  const std::size_t n = corr.size();
  if (n < 4) throw DegenerateError("homography needs at least 4 correspondences, got " + std::to_string(n));

  std::vector<Vec2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = corr[i].src;
    dst[i] = corr[i].dst;
    if (!src[i].allFinite() || !dst[i].allFinite()) throw InputError("correspondence has non-finite coordinates");
  }
  const Mat3 ts = normalizing_transform(src);
  const Mat3 td = normalizing_transform(dst);

  if (n == 4) {
    // With the minimal set any collinear triple leaves the system rank deficient.
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = a + 1; b < 4; ++b)
        for (std::size_t c = b + 1; c < 4; ++c)
          if (collinear(src[a], src[b], src[c], 1.0 / ts(0, 0)) || collinear(dst[a], dst[b], dst[c], 1.0 / td(0, 0)))
            throw DegenerateError("three of the four correspondences are collinear");
  }

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 s = ts * Vec3(src[i].x(), src[i].y(), 1.0);
    const Vec3 d = td * Vec3(dst[i].x(), dst[i].y(), 1.0);
    const auto r = static_cast<Eigen::Index>(2 * i);
    a(r, 0) = -s.x();
    a(r, 1) = -s.y();
    a(r, 2) = -1.0;
    a(r, 6) = s.x() * d.x();
    a(r, 7) = s.y() * d.x();
    a(r, 8) = d.x();
    a(r + 1, 3) = -s.x();
    a(r + 1, 4) = -s.y();
    a(r + 1, 5) = -1.0;
    a(r + 1, 6) = s.x() * d.y();
    a(r + 1, 7) = s.y() * d.y();
    a(r + 1, 8) = d.y();
  }

  // The minimal set gives 8 rows; pad with a zero row so V spans all 9 columns.
  if (a.rows() < 9) {
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(9, 9);
    padded.topRows(a.rows()) = a;
    a = std::move(padded);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv(7) <= 1e-10 * sv(0)) throw DegenerateError("correspondences are rank deficient (nullspace dimension > 1)");

  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Homography fitted(td.inverse() * hn * ts);

  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) sq += (fitted.apply(src[i]) - dst[i]).squaredNorm();
  return {fitted, std::sqrt(sq / static_cast<double>(n))};
}

SegmentationMask warp_mask(const SegmentationMask& mask, const Homography& h, int out_w, int out_h, int x0, int y0) {
  SegmentationMask out(out_w, out_h, kIgnoreLabel, mask.num_classes());
  const Mat3 inv = h.matrix().inverse();
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const Vec3 q = inv * Vec3(x + x0, y + y0, 1.0);
      if (!(q.z() != 0.0)) continue;
      const double sx = std::floor(q.x() / q.z() + 0.5);
      const double sy = std::floor(q.y() / q.z() + 0.5);
      if (!(sx >= 0.0 && sy >= 0.0 && sx < mask.width() && sy < mask.height())) continue;
      out.at(x, y) = mask.at(static_cast<int>(sx), static_cast<int>(sy));
    }
  }
  return out;
}

ConfusionMatrix estimate_confusion(std::span<const SegmentationMask> pred, std::span<const SegmentationMask> truth,
                                   int num_classes) {
  if (pred.size() != truth.size()) throw InputError("prediction and truth lists differ in length");
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(num_classes, num_classes);
  double valid = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].width() != truth[i].width() || pred[i].height() != truth[i].height())
      throw InputError("mask pair " + std::to_string(i) + " differs in size");
    const auto p = pred[i].data();
    const auto t = truth[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (p[j] == kIgnoreLabel || t[j] == kIgnoreLabel) continue;
      if (p[j] >= num_classes || t[j] >= num_classes) throw InputError("mask label outside [0, K)");
      counts(t[j], p[j]) += 1.0;
      valid += 1.0;
    }
  }
  if (valid == 0.0) throw NoEvidenceError("no valid pixels to estimate a confusion matrix from");
  for (int y = 0; y < num_classes; ++y) {
    const double row = counts.row(y).sum();
    if (row == 0.0) {
      counts.row(y).setZero();
      counts(y, y) = 1.0;
    } else {
      counts.row(y) /= row;
    }
  }
  return ConfusionMatrix(std::move(counts));
}

}  // namespace semloc
