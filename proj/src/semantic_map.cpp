#include "semloc/semantic_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

namespace semloc {

void LabeledView::validate() const {
  intrinsics.validate();
  if (mask.width() != intrinsics.width || mask.height() != intrinsics.height)
    throw InputError("mask size " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                     " does not match intrinsics " + std::to_string(intrinsics.width) + "x" +
                     std::to_string(intrinsics.height));
}

ClassId majority_label(std::span<const std::uint32_t> counts) {
  ClassId best = kIgnoreLabel;
  std::uint32_t best_count = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > best_count) {
      best_count = counts[k];
      best = static_cast<ClassId>(k);
    }
  }
  return best;
}

SemanticPointCloud fuse_labels(const ColoredPointCloud& cloud, std::span<const LabeledView> views,
                               const FuseOptions& options) {
  if (views.empty()) throw InputError("label fusion needs at least one view");
  const auto k_classes = static_cast<std::size_t>(options.num_classes);
  const std::size_t n = cloud.points.size();
  std::vector<std::uint32_t> votes(n * k_classes, 0);

  constexpr std::uint32_t kOff = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> pixel(n);
  std::vector<double> depth(n);
  std::vector<double> zmin;
  std::vector<std::uint32_t> winner;

  for (const LabeledView& view : views) {
    view.validate();
    const CameraIntrinsics& intr = view.intrinsics;
    const auto n_pix = static_cast<std::size_t>(intr.width) * static_cast<std::size_t>(intr.height);
    zmin.assign(n_pix, std::numeric_limits<double>::infinity());
    winner.assign(n_pix, kOff);

    for (std::uint32_t i = 0; i < n; ++i) {
      const Vec3 pc = view.world_to_camera.apply(cloud.points[i].position);
      const auto uv = project_pixel(pc, intr);
      if (!uv) {
        pixel[i] = kOff;
        continue;
      }
      const auto pix = static_cast<std::uint32_t>(pixel_bin(uv->y(), intr.height) * intr.width +
                                                  pixel_bin(uv->x(), intr.width));
      pixel[i] = pix;
      depth[i] = pc.z();
      if (pc.z() < zmin[pix]) {
        zmin[pix] = pc.z();
        winner[pix] = i;
      }
    }

    const auto labels = view.mask.data();
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t pix = pixel[i];
      if (pix == kOff) continue;
      const bool visible = options.depth_tolerance > 0.0 ? depth[i] <= zmin[pix] + options.depth_tolerance
                                                         : winner[pix] == i;
      if (!visible) continue;
      const ClassId label = labels[pix];
      if (label == kIgnoreLabel || label >= options.num_classes) continue;
      ++votes[i * k_classes + label];
    }
  }

  SemanticPointCloud out;
  out.datum = cloud.datum;
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const std::uint32_t> counts(votes.data() + i * k_classes, k_classes);
    const ClassId label = majority_label(counts);
    if (label == kIgnoreLabel) continue;
    std::uint32_t total = 0;
    for (std::uint32_t c : counts) total += c;
    out.points.push_back({cloud.points[i].position, label,
                          static_cast<std::uint16_t>(std::min<std::uint32_t>(total, 65535))});
  }
  if (out.points.empty()) throw NoEvidenceError("label fusion produced an empty map: no point received a vote");
  return out;
}

double VoxelEdgeMap::retained_fraction() const {
  return input_voxels == 0 ? 0.0 : static_cast<double>(voxels.size()) / static_cast<double>(input_voxels);
}

Vec3 VoxelEdgeMap::center(const VoxelKey& key) const {
  return {(key[0] + 0.5) * voxel_size, (key[1] + 0.5) * voxel_size, (key[2] + 0.5) * voxel_size};
}

SemanticPointCloud VoxelEdgeMap::as_cloud() const {
  SemanticPointCloud out;
  out.datum = datum;
  out.points.reserve(voxels.size());
  for (const EdgeVoxel& v : voxels)
    out.points.push_back({center(v.key), v.cls, static_cast<std::uint16_t>(std::min<std::uint32_t>(v.members, 65535))});
  return out;
}

VoxelKey voxel_of(const Vec3& p, double voxel_size) {
  VoxelKey key{};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(p[a] / voxel_size);
    if (!(std::abs(f) < (1 << 20))) throw InputError("point outside the voxel index range");
    key[a] = static_cast<int>(f);
  }
  return key;
}

namespace {

// 21 bits per axis, offset to unsigned.
std::uint64_t pack(const VoxelKey& k) {
  constexpr std::int64_t kBias = 1 << 20;
  return (static_cast<std::uint64_t>(k[0] + kBias) << 42) | (static_cast<std::uint64_t>(k[1] + kBias) << 21) |
         static_cast<std::uint64_t>(k[2] + kBias);
}

}  // namespace

VoxelEdgeMap voxelize_and_prune(const SemanticPointCloud& map, double voxel_size, int num_classes) {
  if (!(voxel_size > 0.0)) throw InputError("voxel size must be positive");
  const auto k_classes = static_cast<std::size_t>(num_classes);

  std::unordered_map<std::uint64_t, std::uint32_t> slot_of;
  slot_of.reserve(map.points.size());
  std::vector<VoxelKey> keys;
  std::vector<std::uint32_t> counts;

  for (const LabeledPoint& p : map.points) {
    if (p.cls >= num_classes) throw InputError("map point has class id outside [0, K)");
    const VoxelKey key = voxel_of(p.position, voxel_size);
    auto [it, inserted] = slot_of.try_emplace(pack(key), static_cast<std::uint32_t>(keys.size()));
    if (inserted) {
      keys.push_back(key);
      counts.resize(counts.size() + k_classes, 0);
    }
    ++counts[it->second * k_classes + p.cls];
  }

  std::vector<ClassId> cls(keys.size());
  std::vector<std::uint32_t> members(keys.size(), 0);
  for (std::size_t v = 0; v < keys.size(); ++v) {
    const std::span<const std::uint32_t> c(counts.data() + v * k_classes, k_classes);
    cls[v] = majority_label(c);
    for (std::uint32_t x : c) members[v] += x;
  }

  static constexpr int kNeighbours[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  VoxelEdgeMap out;
  out.voxel_size = voxel_size;
  out.datum = map.datum;
  out.input_voxels = keys.size();
  for (std::size_t v = 0; v < keys.size(); ++v) {
    bool transition = false;
    for (const auto& d : kNeighbours) {
      const VoxelKey nk{keys[v][0] + d[0], keys[v][1] + d[1], keys[v][2] + d[2]};
      const auto it = slot_of.find(pack(nk));
      if (it != slot_of.end() && cls[it->second] != cls[v]) {
        transition = true;
        break;
      }
    }
    if (transition) out.voxels.push_back({keys[v], cls[v], members[v]});
  }
  std::sort(out.voxels.begin(), out.voxels.end(),
            [](const EdgeVoxel& a, const EdgeVoxel& b) { return a.key < b.key; });
  return out;
}

}  // namespace semloc
