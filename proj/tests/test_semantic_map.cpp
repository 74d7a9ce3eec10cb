#include <doctest.h>

#include <algorithm>
#include <random>

#include <Eigen/Geometry>

#include "semloc/semantic_map.hpp"
#include "semloc/synth.hpp"
#include "support/oracles.hpp"
#include "support/scenes.hpp"

using namespace semloc;

namespace {

constexpr ClassId kBuilding = id(SemanticClass::Building);
constexpr ClassId kTree = id(SemanticClass::TreeVegetation);

struct Rig {
  ColoredPointCloud cloud;
  std::vector<LabeledView> views;
};

Rig random_rig(std::uint64_t seed, int n_points, int n_views) {
  std::mt19937_64 rng(seed);
  Rig r;
  std::uniform_real_distribution<double> ux(-15, 15), uz(0, 4);
  for (int i = 0; i < n_points; ++i) r.cloud.points.push_back({Vec3(ux(rng), ux(rng), uz(rng)), {0, 0, 0}});
  for (int v = 0; v < n_views; ++v) {
    const CameraIntrinsics intr = synthetic_intrinsics(48, 45.0);
    const Mat3 r_wc = Eigen::AngleAxisd(0.9 * v, Vec3::UnitZ()).toRotationMatrix() *
                      Eigen::AngleAxisd(M_PI - 0.2 * (v % 3), Vec3::UnitX()).toRotationMatrix();
    const Vec3 c(2.0 * v - 4.0, 1.0 - v, 45.0);
    r.views.push_back({oracle::random_mask(rng, 48, 48, 8, 0.1, 10), intr, RigidPose(r_wc, c).inverse()});
  }
  return r;
}

SemanticPointCloud fuse_oracle(const Rig& r, double tol) {
  const auto votes = oracle::vote_counts(r.cloud, r.views, 8, tol);
  SemanticPointCloud out;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    const ClassId c = oracle::argmax_low(votes[i]);
    if (c == kIgnoreLabel) continue;
    std::uint32_t n = 0;
    for (auto x : votes[i]) n += x;
    out.points.push_back({r.cloud.points[i].position, c, static_cast<std::uint16_t>(n)});
  }
  return out;
}

bool same_points(const SemanticPointCloud& a, const SemanticPointCloud& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.points[i].position != b.points[i].position || a.points[i].cls != b.points[i].cls ||
        a.points[i].support != b.points[i].support)
      return false;
  return true;
}

}  // namespace

TEST_CASE("majority vote and tie rule") {
  std::vector<std::uint32_t> c(8, 0);
  CHECK(majority_label(c) == kIgnoreLabel);
  c[kBuilding] = 2;
  c[kTree] = 1;
  CHECK(majority_label(c) == kBuilding);
  c[kTree] = 2;
  CHECK(majority_label(c) == kBuilding);
  c[0] = 2;
  CHECK(majority_label(c) == 0);
}

TEST_CASE("fusion of three views on one point") {
  // one point straight below three nadir cameras
  ColoredPointCloud cloud;
  cloud.points.push_back({Vec3(0, 0, 0), {1, 2, 3}});
  const CameraIntrinsics intr = synthetic_intrinsics(8, 8.0);
  const Mat3 down = Vec3(1, -1, -1).asDiagonal();
  std::vector<LabeledView> views;
  for (ClassId label : {kBuilding, kTree, kBuilding})
    views.push_back({SegmentationMask(8, 8, label), intr, RigidPose(down, Vec3(0, 0, 10)).inverse()});
  const SemanticPointCloud fused = fuse_labels(cloud, views);
  REQUIRE(fused.size() == 1);
  CHECK(fused.points[0].cls == kBuilding);
  CHECK(fused.points[0].support == 3);

  views.pop_back();
  CHECK(fuse_labels(cloud, views).points[0].cls == kBuilding);
}

TEST_CASE("fusion with no votes is an error") {
  ColoredPointCloud cloud;
  cloud.points.push_back({Vec3(0, 0, 0), {0, 0, 0}});
  const CameraIntrinsics intr = synthetic_intrinsics(8, 8.0);
  const Mat3 down = Vec3(1, -1, -1).asDiagonal();
  std::vector<LabeledView> views{{SegmentationMask(8, 8, kIgnoreLabel), intr, RigidPose(down, Vec3(0, 0, 10)).inverse()}};
  CHECK_THROWS_AS(fuse_labels(cloud, views), NoEvidenceError);
}

TEST_CASE("fusion matches brute-force vote counting") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Rig r = random_rig(seed, 2000, 4);
    CHECK(same_points(fuse_labels(r.cloud, r.views), fuse_oracle(r, 0.0)));
    FuseOptions opt;
    opt.depth_tolerance = 0.5;
    CHECK(same_points(fuse_labels(r.cloud, r.views, opt), fuse_oracle(r, 0.5)));
  }
}

TEST_CASE("fusion is invariant to view order") {
  Rig r = random_rig(21, 1500, 5);
  const SemanticPointCloud base = fuse_labels(r.cloud, r.views);
  std::mt19937_64 rng(22);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(r.views.begin(), r.views.end(), rng);
    CHECK(same_points(fuse_labels(r.cloud, r.views), base));
  }
}

TEST_CASE("an agreeing view never changes fused labels") {
  Rig r = random_rig(31, 1500, 3);
  const SemanticPointCloud base = fuse_labels(r.cloud, r.views);
  // a view that sees the cloud and paints each point's current majority
  LabeledView extra = r.views[0];
  extra.mask = SegmentationMask(48, 48, kIgnoreLabel);
  ProjectedSemanticPoints proj;
  PointRenderer renderer;
  std::vector<LabeledPoint> pts;
  for (const auto& p : base.points) pts.push_back(p);
  renderer.render(pts, extra.world_to_camera, extra.intrinsics, proj);
  for (const ProjectedPoint& p : proj.entries)
    extra.mask.at(pixel_bin(p.u, 48), pixel_bin(p.v, 48)) = p.cls;
  r.views.push_back(extra);
  const SemanticPointCloud after = fuse_labels(r.cloud, r.views);
  std::map<std::array<double, 3>, ClassId> before;
  for (const LabeledPoint& p : base.points) before[{p.position.x(), p.position.y(), p.position.z()}] = p.cls;
  std::size_t compared = 0;
  for (const LabeledPoint& p : after.points) {
    const auto it = before.find({p.position.x(), p.position.y(), p.position.z()});
    if (it == before.end()) continue;  // first labeled by the new view
    CHECK(it->second == p.cls);
    ++compared;
  }
  CHECK(compared == base.size());
}

TEST_CASE("single-class cloud prunes to nothing") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-5, 5);
  SemanticPointCloud map;
  for (int i = 0; i < 4000; ++i) map.points.push_back({Vec3(u(rng), u(rng), u(rng)), kTree, 1});
  const VoxelEdgeMap e = voxelize_and_prune(map, 0.5);
  CHECK(e.empty());
  CHECK(e.input_voxels > 0);
  CHECK(e.retained_fraction() == 0.0);
  CHECK(voxelize_and_prune(SemanticPointCloud{}, 0.5).empty());
}

TEST_CASE("two half-spaces keep the two layers astride the plane") {
  SemanticPointCloud map;
  const double s = 0.5;
  for (int i = -10; i < 10; ++i)
    for (int j = -6; j < 6; ++j)
      for (int k = -3; k < 3; ++k)
        map.points.push_back({Vec3((i + 0.5) * s, (j + 0.5) * s, (k + 0.5) * s), i < 0 ? kBuilding : kTree, 1});
  const VoxelEdgeMap e = voxelize_and_prune(map, s);
  CHECK(e.input_voxels == 20u * 12u * 6u);
  REQUIRE(e.voxels.size() == 2u * 12u * 6u);
  for (const EdgeVoxel& v : e.voxels) {
    CHECK((v.key[0] == -1 || v.key[0] == 0));
    CHECK(v.cls == (v.key[0] < 0 ? kBuilding : kTree));
    CHECK(e.center(v.key).x() == doctest::Approx((v.key[0] + 0.5) * s));
  }
}

TEST_CASE("pruning matches brute-force neighbour scan") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-4, 4);
  std::uniform_int_distribution<int> k(0, 7);
  for (double size : {0.3, 0.5, 1.1}) {
    SemanticPointCloud map;
    for (int i = 0; i < 8000; ++i) {
      const Vec3 p(u(rng), u(rng), u(rng) * 0.5);
      const int cls = (p.x() + p.y() > 0.5 ? 2 : 5) + (k(rng) == 0 ? 1 : 0);
      map.points.push_back({p, static_cast<ClassId>(cls), 1});
    }
    const VoxelEdgeMap e = voxelize_and_prune(map, size);
    const auto brute = oracle::prune(map, size, 8);
    REQUIRE(e.voxels.size() == brute.size());
    std::size_t i = 0;
    for (const auto& [key, cls] : brute) {
      CHECK(e.voxels[i].key == key);
      CHECK(e.voxels[i].cls == cls);
      ++i;
    }
  }
}

TEST_CASE("re-pruning the edge map keeps voxels whose partner survived") {
  const fixture::World w = fixture::make_world(fixture::urban_scene(3, 160.0));
  const SemanticPointCloud once = w.edges.as_cloud();
  const VoxelEdgeMap again = voxelize_and_prune(once, w.edges.voxel_size);
  std::map<VoxelKey, ClassId> first;
  for (const EdgeVoxel& v : w.edges.voxels) first[v.key] = v.cls;
  std::size_t expected = 0;
  for (const auto& [key, cls] : first) {
    bool partner = false;
    for (int a = 0; a < 3; ++a)
      for (int s = -1; s <= 1; s += 2) {
        VoxelKey n = key;
        n[a] += s;
        const auto it = first.find(n);
        partner = partner || (it != first.end() && it->second != cls);
      }
    expected += partner ? 1 : 0;
  }
  CHECK(again.voxels.size() == expected);
  CHECK(expected > w.edges.voxels.size() / 2);
  const VoxelEdgeMap third = voxelize_and_prune(again.as_cloud(), w.edges.voxel_size);
  CHECK(third.voxels.size() <= again.voxels.size());
}

TEST_CASE("synthetic urban scene prunes to a few percent") {
  const fixture::World w = fixture::make_world(fixture::urban_scene(17, 400.0));
  const double f = w.edges.retained_fraction();
  MESSAGE("retained fraction " << f);
  CHECK(f > 0.01);
  CHECK(f < 0.15);
  CHECK(w.edges.retained_fraction() ==
        doctest::Approx(static_cast<double>(w.edges.voxels.size()) / w.edges.input_voxels));
}
