#include "semloc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace semloc {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

Vec2 mean_error(std::span<const FrameError> errors) {
  Vec2 sum = Vec2::Zero();
  for (const FrameError& e : errors) sum += e.error();
  return sum / static_cast<double>(errors.size());
}

TrajectoryMetrics summarize(const std::vector<Vec2>& residuals, const Vec2& bias) {
  TrajectoryMetrics m;
  m.n = residuals.size();
  m.bias = bias;
  const auto n = static_cast<double>(m.n);
  double sx = 0.0, sy = 0.0;
  Vec2 sum = Vec2::Zero();
  std::vector<double> norms;
  norms.reserve(m.n);
  for (const Vec2& r : residuals) {
    sx += r.x() * r.x();
    sy += r.y() * r.y();
    sum += r;
    norms.push_back(r.norm());
  }
  m.rmse_x = std::sqrt(sx / n);
  m.rmse_y = std::sqrt(sy / n);
  m.rmse_2d = std::sqrt((sx + sy) / n);
  m.residual_mean = sum / n;
  m.median_2d = percentile(norms, 0.5);
  m.p75_2d = percentile(norms, 0.75);
  double under = 0.0, over = 0.0, total = 0.0;
  for (double d : norms) {
    under += d < 2.0 ? 1.0 : 0.0;
    over += d > 5.0 ? 1.0 : 0.0;
    total += d;
  }
  m.pct_under_2m = under / n;
  m.pct_over_5m = over / n;
  m.mean_2d = total / n;
  double var = 0.0;
  for (double d : norms) var += (d - m.mean_2d) * (d - m.mean_2d);
  m.std_2d = std::sqrt(var / n);
  return m;
}

}  // namespace

TrajectoryMetrics compute_metrics(std::span<const FrameError> errors, bool bias_correct) {
  if (errors.empty()) throw InputError("metrics need at least one frame");
  const Vec2 bias = mean_error(errors);
  const Vec2 shift = bias_correct ? bias : Vec2::Zero();
  std::vector<Vec2> residuals;
  residuals.reserve(errors.size());
  for (const FrameError& e : errors) residuals.push_back(e.error() - shift);
  return summarize(residuals, bias);
}

TrajectoryMetrics compute_metrics_per_dataset_bias(std::span<const FrameError> errors) {
  if (errors.empty()) throw InputError("metrics need at least one frame");
  std::map<std::string, std::pair<Vec2, std::size_t>> groups;
  for (const FrameError& e : errors) {
    auto& g = groups[e.dataset];
    if (g.second == 0) g.first = Vec2::Zero();
    g.first += e.error();
    ++g.second;
  }
  std::vector<Vec2> residuals;
  residuals.reserve(errors.size());
  for (const FrameError& e : errors) {
    const auto& g = groups[e.dataset];
    residuals.push_back(e.error() - g.first / static_cast<double>(g.second));
  }
  return summarize(residuals, mean_error(errors));
}

std::vector<double> corrected_norms(std::span<const FrameError> errors, bool bias_correct) {
  std::vector<double> out;
  if (errors.empty()) return out;
  const Vec2 shift = bias_correct ? mean_error(errors) : Vec2::Zero();
  out.reserve(errors.size());
  for (const FrameError& e : errors) out.push_back((e.error() - shift).norm());
  return out;
}

std::vector<EdgeBin> bin_by_edges(std::span<const FrameError> errors, long width, long origin, bool bias_correct) {
  if (width <= 0) throw InputError("bin width must be positive");
  std::vector<EdgeBin> bins;
  if (errors.empty()) return bins;
  const std::vector<double> norms = corrected_norms(errors, bias_correct);

  auto index_of = [&](std::size_t count) {
    const long offset = static_cast<long>(count) - origin;
    return offset >= 0 ? offset / width : -((-offset + width - 1) / width);
  };
  long first = index_of(errors[0].edge_count), last = first;
  for (const FrameError& e : errors) {
    first = std::min(first, index_of(e.edge_count));
    last = std::max(last, index_of(e.edge_count));
  }

  std::vector<std::vector<double>> members(static_cast<std::size_t>(last - first + 1));
  for (std::size_t i = 0; i < errors.size(); ++i)
    members[static_cast<std::size_t>(index_of(errors[i].edge_count) - first)].push_back(norms[i]);

  for (long b = first; b <= last; ++b) {
    const auto& m = members[static_cast<std::size_t>(b - first)];
    EdgeBin bin;
    bin.lo = origin + b * width;
    bin.hi = bin.lo + width - 1;
    bin.n = m.size();
    if (!m.empty()) {
      double sum = 0.0;
      for (double d : m) sum += d;
      bin.mean = sum / static_cast<double>(m.size());
      double var = 0.0;
      for (double d : m) var += (d - bin.mean) * (d - bin.mean);
      bin.std = std::sqrt(var / static_cast<double>(m.size()));
    }
    bins.push_back(bin);
  }
  return bins;
}

std::vector<GateRow> gate_sweep(std::span<const FrameError> errors, std::span<const std::size_t> thresholds,
                                bool bias_correct) {
  std::vector<GateRow> rows;
  for (std::size_t threshold : thresholds) {
    std::vector<FrameError> kept;
    for (const FrameError& e : errors)
      if (e.edge_count >= threshold) kept.push_back(e);
    GateRow row;
    row.threshold = threshold;
    row.retained_fraction =
        errors.empty() ? 0.0 : static_cast<double>(kept.size()) / static_cast<double>(errors.size());
    if (!kept.empty()) row.metrics = compute_metrics(kept, bias_correct);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace semloc
