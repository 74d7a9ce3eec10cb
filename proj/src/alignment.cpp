#include "semloc/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace semloc {

std::size_t ClassEdgeSets::total() const {
  std::size_t n = 0;
  for (const auto& e : per_class) n += e.size();
  return n;
}

ClassEdgeSets extract_edges(const SegmentationMask& mask) {
  ClassEdgeSets out;
  out.width = mask.width();
  out.height = mask.height();
  out.per_class.resize(static_cast<std::size_t>(mask.num_classes()));
  const int w = mask.width(), h = mask.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const ClassId c = mask.at(x, y);
      if (c == kIgnoreLabel) continue;
      if (c >= mask.num_classes()) throw InputError("mask label outside [0, K)");
      auto differs = [&](int nx, int ny) {
        if (!mask.contains(nx, ny)) return false;
        const ClassId n = mask.at(nx, ny);
        return n != kIgnoreLabel && n != c;
      };
      if (differs(x - 1, y) || differs(x + 1, y) || differs(x, y - 1) || differs(x, y + 1))
        out.per_class[c].push_back({x, y});
    }
  }
  return out;
}

namespace {

constexpr double kFar = 1e20;

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line.
void envelope_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& seeds, int width, int height) {
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<double> grid(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = seeds[i] ? 0.0 : kFar;
    any = any || seeds[i];
  }
  if (!any) {
    std::fill(grid.begin(), grid.end(), std::numeric_limits<double>::infinity());
    return grid;
  }

  const int longest = std::max(width, height);
  std::vector<int> v(static_cast<std::size_t>(longest));
  std::vector<double> z(static_cast<std::size_t>(longest) + 1);
  std::vector<double> line(static_cast<std::size_t>(longest)), out(static_cast<std::size_t>(longest));

  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) line[y] = grid[static_cast<std::size_t>(y) * width + x];
    envelope_1d(line.data(), out.data(), height, v, z);
    for (int y = 0; y < height; ++y) grid[static_cast<std::size_t>(y) * width + x] = out[y];
  }
  for (int y = 0; y < height; ++y) {
    double* row = grid.data() + static_cast<std::size_t>(y) * width;
    std::copy(row, row + width, line.begin());
    envelope_1d(line.data(), row, width, v, z);
  }
  return grid;
}

DistanceFieldStack::DistanceFieldStack(int width, int height, double d_max, std::vector<std::vector<double>> fields)
    : width_(width), height_(height), d_max_(d_max), fields_(std::move(fields)) {}

double DistanceFieldStack::sample(int k, double u, double v) const {
  const int x0 = static_cast<int>(u), y0 = static_cast<int>(v);
  const int x1 = std::min(x0 + 1, width_ - 1), y1 = std::min(y0 + 1, height_ - 1);
  const double ax = u - x0, ay = v - y0;
  const double top = at(k, x0, y0) + ax * (at(k, x1, y0) - at(k, x0, y0));
  const double bottom = at(k, x0, y1) + ax * (at(k, x1, y1) - at(k, x0, y1));
  return top + ay * (bottom - top);
}

DistanceFieldStack build_distance_fields(const ClassEdgeSets& edges, double d_max) {
  if (!(d_max > 0.0)) throw InputError("distance clamp must be positive");
  const auto n = static_cast<std::size_t>(edges.width) * static_cast<std::size_t>(edges.height);
  std::vector<std::vector<double>> fields(edges.per_class.size());
  std::vector<std::uint8_t> seeds(n);
  for (std::size_t k = 0; k < edges.per_class.size(); ++k) {
    fields[k].assign(n, d_max);
    if (edges.per_class[k].empty()) continue;
    std::fill(seeds.begin(), seeds.end(), 0);
    for (const Pixel& p : edges.per_class[k]) seeds[static_cast<std::size_t>(p.y) * edges.width + p.x] = 1;
    const std::vector<double> sq = squared_distance_transform(seeds, edges.width, edges.height);
    for (std::size_t i = 0; i < n; ++i) fields[k][i] = std::min(std::sqrt(sq[i]), d_max);
  }
  return DistanceFieldStack(edges.width, edges.height, d_max, std::move(fields));
}

void LossConfig::validate() const {
  if (!(delta > 0.0)) throw InputError("Huber threshold delta must be positive");
  if (!(d_max >= delta)) throw InputError("distance clamp d_max must be >= delta");
  if (!(lambda_f >= 0.0) || !(lambda_r >= 0.0)) throw InputError("term weights must be non-negative");
  if (lambda_f == 0.0 && lambda_r == 0.0) throw InputError("at least one term weight must be positive");
}

Eigen::MatrixXd reverse_weights(const ConfusionMatrix& c, ReverseWeighting mode) {
  const int k = c.size();
  if (mode == ReverseWeighting::Row) return c.matrix();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, k);
  for (int j = 0; j < k; ++j) {
    const double col = c.matrix().col(j).sum();
    if (col <= 0.0) {
      w(j, j) = 1.0;
      continue;
    }
    for (int t = 0; t < k; ++t) w(j, t) = c(t, j) / col;
  }
  return w;
}

LossEvaluator::LossEvaluator(const LossConfig& cfg, int num_classes) : cfg_(cfg), num_classes_(num_classes) {
  cfg_.validate();
  forward_w_.resize(static_cast<std::size_t>(num_classes));
  reverse_w_.resize(static_cast<std::size_t>(num_classes));
  if (!cfg_.confusion) {
    for (int k = 0; k < num_classes; ++k) {
      forward_w_[k] = {{k, 1.0}};
      reverse_w_[k] = {{k, 1.0}};
    }
  } else {
    const ConfusionMatrix& c = *cfg_.confusion;
    if (c.size() != num_classes)
      throw InputError("confusion matrix is " + std::to_string(c.size()) + "x" + std::to_string(c.size()) +
                       " but the class count is " + std::to_string(num_classes));
    const Eigen::MatrixXd rw = reverse_weights(c, cfg_.reverse_weighting);
    for (int y = 0; y < num_classes; ++y) {
      for (int k = 0; k < num_classes; ++k) {
        if (c(y, k) != 0.0) forward_w_[y].push_back({k, c(y, k)});
        if (rw(y, k) != 0.0) reverse_w_[y].push_back({k, rw(y, k)});
      }
    }
  }
  cell_ = cfg_.d_max;
}

double LossEvaluator::forward(const ProjectedSemanticPoints& proj, const DistanceFieldStack& fields) const {
  if (proj.empty()) throw NoEvidenceError("forward term: no projected map points");
  if (fields.num_classes() != num_classes_) throw InputError("distance field class count mismatch");
  const double delta = cfg_.delta;
  double sum = 0.0;
  for (const ProjectedPoint& p : proj.entries) {
    if (p.cls >= num_classes_) throw InputError("projected point class outside [0, K)");
    double s = 0.0;
    for (const Weight& w : forward_w_[p.cls]) s += w.w * huber(fields.sample(w.k, p.u, p.v), delta);
    sum += s;
  }
  return sum / static_cast<double>(proj.size());
}

void LossEvaluator::index_points(const ProjectedSemanticPoints& proj, int width, int height) {
  grid_w_ = static_cast<int>(width / cell_) + 1;
  grid_h_ = static_cast<int>(height / cell_) + 1;
  const std::size_t cells = static_cast<std::size_t>(num_classes_) * grid_w_ * grid_h_;
  cell_start_.assign(cells + 1, 0);
  cell_of_.resize(proj.size());
  for (std::size_t i = 0; i < proj.size(); ++i) {
    const ProjectedPoint& p = proj.entries[i];
    if (p.cls >= num_classes_) throw InputError("projected point class outside [0, K)");
    const int cx = std::min(static_cast<int>(p.u / cell_), grid_w_ - 1);
    const int cy = std::min(static_cast<int>(p.v / cell_), grid_h_ - 1);
    const std::size_t cell = (static_cast<std::size_t>(p.cls) * grid_h_ + cy) * grid_w_ + cx;
    cell_of_[i] = static_cast<std::uint32_t>(cell);
    ++cell_start_[cell + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
  bucket_xy_.resize(2 * proj.size());
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < proj.size(); ++i) {
    const std::uint32_t slot = fill[cell_of_[i]]++;
    bucket_xy_[2 * slot] = proj.entries[i].u;
    bucket_xy_[2 * slot + 1] = proj.entries[i].v;
  }
}

double LossEvaluator::nearest(int k, double x, double y) const {
  const int cx = std::min(static_cast<int>(x / cell_), grid_w_ - 1);
  const int cy = std::min(static_cast<int>(y / cell_), grid_h_ - 1);
  double best = cfg_.d_max * cfg_.d_max;
  for (int gy = std::max(cy - 1, 0); gy <= std::min(cy + 1, grid_h_ - 1); ++gy) {
    const std::size_t row = (static_cast<std::size_t>(k) * grid_h_ + gy) * grid_w_;
    const std::uint32_t begin = cell_start_[row + std::max(cx - 1, 0)];
    const std::uint32_t end = cell_start_[row + std::min(cx + 1, grid_w_ - 1) + 1];
    for (std::uint32_t s = begin; s < end; ++s) {
      const double dx = bucket_xy_[2 * s] - x, dy = bucket_xy_[2 * s + 1] - y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) best = d2;
    }
  }
  return std::sqrt(best);
}

double LossEvaluator::reverse(const ClassEdgeSets& edges, const ProjectedSemanticPoints& proj) {
  const std::size_t total = edges.total();
  if (total == 0) throw NoEvidenceError("reverse term: no segmentation edge pixels");
  if (edges.num_classes() != num_classes_) throw InputError("edge set class count mismatch");
  index_points(proj, edges.width, edges.height);
  const double delta = cfg_.delta;
  double sum = 0.0;
  for (int j = 0; j < num_classes_; ++j) {
    for (const Pixel& e : edges.per_class[j]) {
      double s = 0.0;
      for (const Weight& w : reverse_w_[j]) s += w.w * huber(nearest(w.k, e.x, e.y), delta);
      sum += s;
    }
  }
  return sum / static_cast<double>(total);
}

LossTerms LossEvaluator::total(const ProjectedSemanticPoints& proj, const ClassEdgeSets& edges,
                               const DistanceFieldStack& fields) {
  LossTerms t;
  if (cfg_.lambda_f > 0.0) t.forward = forward(proj, fields);
  if (cfg_.lambda_r > 0.0) t.reverse = reverse(edges, proj);
  t.total = cfg_.lambda_f * t.forward + cfg_.lambda_r * t.reverse;
  return t;
}

double forward_loss(const ProjectedSemanticPoints& proj, const DistanceFieldStack& fields, const LossConfig& cfg) {
  return LossEvaluator(cfg, fields.num_classes()).forward(proj, fields);
}

double reverse_loss(const ClassEdgeSets& edges, const ProjectedSemanticPoints& proj, const LossConfig& cfg) {
  LossEvaluator eval(cfg, edges.num_classes());
  return eval.reverse(edges, proj);
}

LossTerms total_loss(const ProjectedSemanticPoints& proj, const ClassEdgeSets& edges,
                     const DistanceFieldStack& fields, const LossConfig& cfg) {
  LossEvaluator eval(cfg, edges.num_classes());
  return eval.total(proj, edges, fields);
}

}  // namespace semloc
