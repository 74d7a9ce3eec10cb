#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "semloc/types.hpp"

namespace semloc {

struct ColoredPoint {
  Vec3 position;
  std::array<std::uint8_t, 3> color{0, 0, 0};
};

/// Geo-referenced colored cloud as produced by photogrammetry. Positions are
/// metres in a local ENU frame whose origin is `datum`.
struct ColoredPointCloud {
  std::vector<ColoredPoint> points;
  Vec3 datum = Vec3::Zero();
};

struct LabeledPoint {
  Vec3 position;
  ClassId cls = 0;
  std::uint16_t support = 1;  // number of views that voted
};

/// The labeled map. Every class id is in [0, K) and support >= 1.
struct SemanticPointCloud {
  std::vector<LabeledPoint> points;
  Vec3 datum = Vec3::Zero();

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

}  // namespace semloc
