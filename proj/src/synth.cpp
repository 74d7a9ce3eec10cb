#include "semloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace semloc {

void SceneSpec::validate() const {
  if (!(extent > 0.0)) throw InputError("scene extent must be positive");
  if (!(density > 0.0)) throw InputError("point density must be positive");
  if (ground_class >= kDefaultNumClasses) throw InputError("ground class outside [0, K)");
  if (buildings < 0 || strips < 0 || discs < 0 || vehicles < 0) throw InputError("primitive counts must be >= 0");
  if (!(building_size_min > 0.0 && building_size_max >= building_size_min))
    throw InputError("invalid building size range");
  if (!(building_height_min >= 0.0 && building_height_max >= building_height_min))
    throw InputError("invalid building height range");
  if (!(building_coverage >= 0.0 && building_coverage < 1.0)) throw InputError("building coverage must be in [0, 1)");
  if (!(strip_width_min > 0.0 && strip_width_max >= strip_width_min)) throw InputError("invalid strip width range");
  if (!(disc_radius_min > 0.0 && disc_radius_max >= disc_radius_min)) throw InputError("invalid disc radius range");
  if (!(altitude_min > 0.0 && altitude_max >= altitude_min)) throw InputError("invalid altitude range");
}

double SceneSpec::lattice_spacing() const { return 1.0 / std::sqrt(density); }

void CorruptionSpec::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(flip_rate) || !prob(dropout)) throw InputError("corruption probabilities must be in [0, 1]");
  if (flip_scale < 1) throw InputError("flip scale must be >= 1 px");
  if (!(boundary_jitter >= 0.0)) throw InputError("boundary jitter must be >= 0");
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Building {
  double x0, y0, x1, y1, height;
};

}  // namespace

double unit_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::uint64_t h = splitmix(splitmix(splitmix(splitmix(seed) ^ a) ^ b) ^ c);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

SemanticPointCloud generate_world(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double s = spec.lattice_spacing();
  const int n = std::max(1, static_cast<int>(std::lround(spec.extent / s)));
  const double half = 0.5 * n * s;
  auto cell_center = [&](int i) { return -half + (i + 0.5) * s; };

  std::vector<ClassId> label(static_cast<std::size_t>(n) * n, spec.ground_class);
  std::vector<int> owner(label.size(), -1);  // building index per cell
  auto at = [&](int i, int j) -> std::size_t { return static_cast<std::size_t>(j) * n + i; };
  auto cell_range = [&](double lo, double hi, int& first, int& last) {
    first = std::max(0, static_cast<int>(std::floor((lo + half) / s)));
    last = std::min(n - 1, static_cast<int>(std::floor((hi + half) / s)));
  };

  for (int r = 0; r < spec.strips; ++r) {
    const double width = uniform(spec.strip_width_min, spec.strip_width_max);
    const double angle = uniform(0.0, M_PI);
    const double px = uniform(-half, half), py = uniform(-half, half);
    const double nx = -std::sin(angle), ny = std::cos(angle);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (std::abs((cell_center(i) - px) * nx + (cell_center(j) - py) * ny) <= 0.5 * width)
          label[at(i, j)] = id(SemanticClass::ImperviousSurface);
  }

  std::vector<ClassId> disc_classes;
  for (SemanticClass c : {SemanticClass::Water, SemanticClass::TreeVegetation, SemanticClass::PerviousSurface,
                          SemanticClass::LowVegetation})
    if (id(c) != spec.ground_class) disc_classes.push_back(id(c));
  for (int d = 0; d < spec.discs; ++d) {
    const double radius = uniform(spec.disc_radius_min, spec.disc_radius_max);
    const double cx = uniform(-half, half), cy = uniform(-half, half);
    const ClassId cls = disc_classes[std::uniform_int_distribution<std::size_t>(0, disc_classes.size() - 1)(rng)];
    int i0, i1, j0, j1;
    cell_range(cx - radius, cx + radius, i0, i1);
    cell_range(cy - radius, cy + radius, j0, j1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        const double dx = cell_center(i) - cx, dy = cell_center(j) - cy;
        if (dx * dx + dy * dy <= radius * radius) label[at(i, j)] = cls;
      }
  }

  for (int v = 0; v < spec.vehicles; ++v) {
    const bool along_x = uniform(0.0, 1.0) < 0.5;
    const double lx = along_x ? 4.5 : 2.0, ly = along_x ? 2.0 : 4.5;
    const double cx = uniform(-half, half), cy = uniform(-half, half);
    int i0, i1, j0, j1;
    cell_range(cx - lx / 2, cx + lx / 2, i0, i1);
    cell_range(cy - ly / 2, cy + ly / 2, j0, j1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) label[at(i, j)] = id(SemanticClass::Vehicle);
  }

  std::vector<Building> buildings;
  std::size_t covered = 0;
  const auto target = static_cast<std::size_t>(spec.building_coverage * static_cast<double>(label.size()));
  const int max_buildings = spec.building_coverage > 0.0 ? 100000 : spec.buildings;
  for (int b = 0; b < max_buildings; ++b) {
    if (spec.building_coverage > 0.0 && covered >= target) break;
    const double w = uniform(spec.building_size_min, spec.building_size_max);
    const double h = uniform(spec.building_size_min, spec.building_size_max);
    const double cx = uniform(-half, half), cy = uniform(-half, half);
    const double height = spec.building_height_max > spec.building_height_min
                              ? uniform(spec.building_height_min, spec.building_height_max)
                              : spec.building_height_min;
    buildings.push_back({cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, height});
    int i0, i1, j0, j1;
    cell_range(cx - w / 2, cx + w / 2, i0, i1);
    cell_range(cy - h / 2, cy + h / 2, j0, j1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        if (label[at(i, j)] != id(SemanticClass::Building)) ++covered;
        label[at(i, j)] = id(SemanticClass::Building);
        owner[at(i, j)] = b;
      }
  }

  SemanticPointCloud world;
  world.points.reserve(label.size() * 11 / 10);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const std::size_t c = at(i, j);
      const double x = cell_center(i), y = cell_center(j);
      if (owner[c] < 0) {
        world.points.push_back({Vec3(x, y, 0.0), label[c], 1});
        continue;
      }
      const double roof = buildings[static_cast<std::size_t>(owner[c])].height;
      world.points.push_back({Vec3(x, y, roof), label[c], 1});
      if (roof <= 0.0) continue;
      const bool boundary = i == 0 || j == 0 || i == n - 1 || j == n - 1 || owner[at(i - 1, j)] != owner[c] ||
                            owner[at(i + 1, j)] != owner[c] || owner[at(i, j - 1)] != owner[c] ||
                            owner[at(i, j + 1)] != owner[c];
      if (!boundary) continue;
      for (double z = 0.0; z < roof - 0.5 * s; z += s) world.points.push_back({Vec3(x, y, z), label[c], 1});
    }
  }
  return world;
}

CameraIntrinsics synthetic_intrinsics(int size, double focal) {
  CameraIntrinsics intr;
  intr.width = intr.height = size;
  intr.fx = intr.fy = focal;
  intr.cx = intr.cy = 0.5 * (size - 1);
  return intr;
}

ViewGeometry nadir_view(const CameraIntrinsics& intr, double height, Vec2 prior) {
  ViewGeometry view;
  view.attitude = Vec3(1.0, -1.0, -1.0).asDiagonal();
  view.height = height;
  view.intrinsics = intr;
  view.prior = prior;
  return view;
}

SegmentationMask render_truth_mask(const SemanticPointCloud& map, const ViewGeometry& view, PlanarTranslation t_true,
                                   int num_classes) {
  if (map.empty()) throw InputError("cannot render an empty map");
  const CameraIntrinsics& intr = view.intrinsics;
  const int w = intr.width, h = intr.height;
  PointRenderer renderer;
  ProjectedSemanticPoints proj;
  renderer.render(map.points, view.world_to_camera(t_true), intr, proj);

  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<ClassId> splat(n, kIgnoreLabel);
  std::vector<double> depth(n, std::numeric_limits<double>::infinity());
  for (const ProjectedPoint& p : proj.entries) {
    const std::size_t pix = static_cast<std::size_t>(pixel_bin(p.v, h)) * w + pixel_bin(p.u, w);
    splat[pix] = p.cls;
    depth[pix] = p.depth;
  }

  SegmentationMask mask(w, h, kIgnoreLabel, num_classes);
  auto out = mask.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * w + x;
      if (splat[pix] != kIgnoreLabel) {
        out[pix] = splat[pix];
        continue;
      }
      int best_d2 = std::numeric_limits<int>::max();
      double best_depth = std::numeric_limits<double>::infinity();
      ClassId best = kIgnoreLabel;
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          const int d2 = dx * dx + dy * dy;
          const int nx = x + dx, ny = y + dy;
          if (d2 > 4 || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
          if (splat[q] == kIgnoreLabel) continue;
          if (d2 < best_d2 || (d2 == best_d2 && depth[q] < best_depth)) {
            best_d2 = d2;
            best_depth = depth[q];
            best = splat[q];
          }
        }
      }
      out[pix] = best;
    }
  }
  return mask;
}

namespace {

// Smooth displacement field: random offsets on a coarse grid, bilinearly
// interpolated.
SegmentationMask jitter(const SegmentationMask& in, double amplitude, std::uint64_t seed) {
  constexpr int kGrid = 16;
  const int w = in.width(), h = in.height();
  const int gw = w / kGrid + 2;
  auto offset = [&](int gx, int gy, int axis) {
    return amplitude * (2.0 * unit_hash(seed, 0x6a177e4ULL, static_cast<std::uint64_t>(gy) * gw + gx,
                                        static_cast<std::uint64_t>(axis)) -
                        1.0);
  };
  SegmentationMask out(w, h, kIgnoreLabel, in.num_classes());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / kGrid, fy = static_cast<double>(y) / kGrid;
      const int gx = static_cast<int>(fx), gy = static_cast<int>(fy);
      const double ax = fx - gx, ay = fy - gy;
      double d[2];
      for (int a = 0; a < 2; ++a) {
        const double top = offset(gx, gy, a) * (1 - ax) + offset(gx + 1, gy, a) * ax;
        const double bottom = offset(gx, gy + 1, a) * (1 - ax) + offset(gx + 1, gy + 1, a) * ax;
        d[a] = top * (1 - ay) + bottom * ay;
      }
      const int sx = std::clamp(static_cast<int>(std::lround(x + d[0])), 0, w - 1);
      const int sy = std::clamp(static_cast<int>(std::lround(y + d[1])), 0, h - 1);
      out.at(x, y) = in.at(sx, sy);
    }
  }
  return out;
}

ClassId sample_flip(ClassId truth, const CorruptionSpec& spec, int num_classes, double u) {
  if (spec.confusion) {
    const ConfusionMatrix& c = *spec.confusion;
    double acc = 0.0;
    for (int k = 0; k < c.size(); ++k) {
      acc += c(truth, k);
      if (u < acc) return static_cast<ClassId>(k);
    }
    for (int k = c.size() - 1; k >= 0; --k)
      if (c(truth, k) > 0.0) return static_cast<ClassId>(k);
    return truth;
  }
  if (num_classes < 2) return truth;
  auto pick = static_cast<int>(u * (num_classes - 1));
  pick = std::min(pick, num_classes - 2);
  return static_cast<ClassId>(pick >= truth ? pick + 1 : pick);
}

}  // namespace

SegmentationMask corrupt_mask(const SegmentationMask& mask, const CorruptionSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.confusion && spec.confusion->size() != mask.num_classes())
    throw InputError("corruption confusion matrix size does not match the mask class count");

  SegmentationMask out = spec.boundary_jitter > 0.0 ? jitter(mask, spec.boundary_jitter, seed) : mask;

  if (spec.flip_rate > 0.0) {
    const int b = spec.flip_scale;
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) {
        const ClassId truth = out.at(x, y);
        if (truth == kIgnoreLabel) continue;
        const std::uint64_t block = (static_cast<std::uint64_t>(y / b) << 32) | static_cast<std::uint64_t>(x / b);
        if (unit_hash(seed, 0xf11bULL, block, truth) >= spec.flip_rate) continue;
        out.at(x, y) = sample_flip(truth, spec, out.num_classes(), unit_hash(seed, 0x5a3bULL, block, truth));
      }
    }
  }

  if (spec.dropout > 0.0) {
    for (auto& px : out.data())
      if (px != kIgnoreLabel && unit_hash(seed, 0xd209ULL, px) < spec.dropout) px = kIgnoreLabel;
  }
  return out;
}

}  // namespace semloc
