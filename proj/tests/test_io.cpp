#include <doctest.h>

#include <filesystem>
#include <random>

#include "semloc/io.hpp"
#include "support/oracles.hpp"

using namespace semloc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "semloc_test_io";
  fs::create_directories(dir);
  return dir / name;
}

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("semantic PLY round trip is exact") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  SemanticPointCloud c;
  c.datum = Vec3(4.5e5, 5.4e6, 312.25);
  for (int i = 0; i < 1000; ++i)
    c.points.push_back({Vec3(u(rng), u(rng), u(rng)), static_cast<ClassId>(i % 8), static_cast<std::uint16_t>(i)});
  const fs::path p = scratch("sem.ply");
  io::write_semantic_ply(p, c);
  const SemanticPointCloud r = io::read_semantic_ply(p);
  CHECK(r.datum == c.datum);
  REQUIRE(r.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(r.points[i].position == c.points[i].position);
    CHECK(r.points[i].cls == c.points[i].cls);
    CHECK(r.points[i].support == c.points[i].support);
  }
}

TEST_CASE("ascii PLY with float coordinates") {
  const fs::path p = scratch("ascii.ply");
  io::write_text(p,
                 "ply\nformat ascii 1.0\ncomment hello\nelement vertex 2\nproperty float x\nproperty float y\n"
                 "property float z\nproperty uchar class\nend_header\n1 2 3 4\n-1.5 0 2 7\n");
  std::vector<std::string> comments;
  const SemanticPointCloud c = io::read_semantic_ply(p, &comments);
  REQUIRE(c.size() == 2);
  CHECK(c.points[1].position == Vec3(-1.5, 0, 2));
  CHECK(c.points[1].cls == 7);
  CHECK(c.points[0].support == 1);
  CHECK(comments.size() == 1);
}

TEST_CASE("malformed PLY files name the line") {
  const fs::path p = scratch("bad.ply");
  io::write_text(p, "ply\nformat ascii 1.0\nelement vertex 1\nproperty list uchar int idx\nend_header\n");
  CHECK(error_of([&] { io::read_semantic_ply(p); }).find("bad.ply:4") != std::string::npos);
  io::write_text(p, "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
                    "property uchar class\nend_header\n1 2 3 1\n");
  CHECK(error_of([&] { io::read_semantic_ply(p); }).find("truncated") != std::string::npos);
  io::write_text(p, "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n"
                    "property int class\nend_header\n1 2 3 300\n");
  CHECK_THROWS_AS(io::read_semantic_ply(p), InputError);
  io::write_text(p, "not a ply\n");
  CHECK(error_of([&] { io::read_semantic_ply(p); }).find("bad.ply:1") != std::string::npos);
}

TEST_CASE("colored PLY round trip in both encodings") {
  ColoredPointCloud c;
  for (int i = 0; i < 50; ++i)
    c.points.push_back({Vec3(i * 0.5, -i * 0.25, 1.0), {static_cast<std::uint8_t>(i), 10, 200}});
  for (bool ascii : {false, true}) {
    const fs::path p = scratch(ascii ? "col_a.ply" : "col_b.ply");
    io::write_colored_ply(p, c, ascii);
    const ColoredPointCloud r = io::read_colored_ply(p);
    REQUIRE(r.points.size() == c.points.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      CHECK(r.points[i].position == c.points[i].position);
      CHECK(r.points[i].color == c.points[i].color);
    }
  }
}

TEST_CASE("edge map round trip") {
  SemanticPointCloud m;
  for (int i = -6; i < 6; ++i)
    for (int j = -3; j < 3; ++j) m.points.push_back({Vec3(i * 0.5 + 0.1, j * 0.5 + 0.2, 0.1), i < 0 ? ClassId{1} : ClassId{2}, 1});
  const VoxelEdgeMap e = voxelize_and_prune(m, 0.5);
  const fs::path p = scratch("edges.ply");
  io::write_edge_map(p, e);
  const VoxelEdgeMap r = io::read_edge_map(p);
  CHECK(r.voxel_size == e.voxel_size);
  CHECK(r.input_voxels == e.input_voxels);
  REQUIRE(r.voxels.size() == e.voxels.size());
  for (std::size_t i = 0; i < e.voxels.size(); ++i) {
    CHECK(r.voxels[i].key == e.voxels[i].key);
    CHECK(r.voxels[i].cls == e.voxels[i].cls);
  }
}

TEST_CASE("mask PNG round trip") {
  std::mt19937_64 rng(2);
  const SegmentationMask m = oracle::random_mask(rng, 37, 23, 8, 0.2, 7);
  const fs::path p = scratch("m.png");
  io::write_mask_png(p, m);
  CHECK(io::read_mask_png(p) == m);
  CHECK_THROWS_AS(io::read_mask_png(p, 3), InputError);
  CHECK_THROWS_AS(io::read_mask_png(scratch("missing.png")), InputError);
}

TEST_CASE("CSV parsing") {
  const io::CsvTable t = io::parse_csv("# comment\n a , b \n\n1, x\n2,y\n", "t.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].line == 4);
  CHECK(t.number(t.rows[1], 0) == 2.0);
  CHECK(t.cell(t.rows[0], 1) == "x");
  CHECK(error_of([&] { t.number(t.rows[0], 1); }).find("t.csv:4") != std::string::npos);
  CHECK(error_of([&] { t.column("zzz"); }).find("zzz") != std::string::npos);
  CHECK(error_of([] { io::parse_csv("a,b\n1,2,3\n", "w.csv"); }).find("w.csv:2") != std::string::npos);
}

TEST_CASE("intrinsics, views and truth round trip") {
  CameraIntrinsics in = synthetic_intrinsics(320, 250.0);
  in.dist = {-0.1, 0.01, 0.0, 0.001, -0.002};
  const fs::path ip = scratch("intr.csv");
  io::write_intrinsics_csv(ip, {{"cam", in}});
  const auto ir = io::read_intrinsics_csv(ip);
  REQUIRE(ir.count("cam"));
  CHECK(ir.at("cam").fx == in.fx);
  CHECK(ir.at("cam").dist == in.dist);

  io::ViewRecord v;
  v.frame_id = "f7";
  v.image = "masks/f7.png";
  v.center = Vec3(12.5, -3.25, 201.0);
  v.rotation = Vec3(1, -1, -1).asDiagonal();
  v.height = 200.0;
  v.intrinsics_id = "cam";
  const fs::path vp = scratch("views.csv");
  io::write_views_csv(vp, {v});
  const auto vr = io::read_views_csv(vp);
  REQUIRE(vr.size() == 1);
  CHECK(vr[0].frame_id == "f7");
  CHECK(vr[0].center == v.center);
  CHECK(vr[0].rotation == v.rotation);
  CHECK(vr[0].image == vp.parent_path() / "masks/f7.png");
  const ViewGeometry g = io::view_geometry(vr[0], in);
  CHECK(g.prior == Vec2(12.5, -3.25));
  CHECK(g.height == 200.0);
  CHECK((io::view_world_to_camera(vr[0]).apply(v.center)).norm() < 1e-12);

  io::write_text(vp, "frame_id,image,cx_m,cy_m,cz_m,r00,r01,r02,r10,r11,r12,r20,r21,r22,height_m,intrinsics_id\n"
                     "f9,a.png,0,0,10,1,0,0,0,1,0,0,0,,10,cam\n");
  const std::string err = error_of([&] { io::read_views_csv(vp); });
  CHECK(err.find("f9") != std::string::npos);
  CHECK(err.find(":2") != std::string::npos);

  const fs::path tp = scratch("truth.csv");
  io::write_truth_csv(tp, {{"a", {Vec2(1.5, -2.0), "d1"}}, {"b", {Vec2(0.1, 0.2), ""}}});
  const auto tr = io::read_truth_csv(tp);
  CHECK(tr.at("a").position == Vec2(1.5, -2.0));
  CHECK(tr.at("a").dataset == "d1");
  CHECK(tr.at("b").position == Vec2(0.1, 0.2));
}

TEST_CASE("key-value configs") {
  io::KeyValues kv = io::parse_key_values("# loss\ndelta = 3\nd_max=6\nreverse_weighting = row\n", "l.cfg");
  const LossConfig c = io::loss_config_from(kv);
  CHECK(c.delta == 3.0);
  CHECK(c.d_max == 6.0);
  CHECK(c.reverse_weighting == ReverseWeighting::Row);
  io::apply_overrides(kv, {"delta=1.5"});
  CHECK(io::loss_config_from(kv).delta == 1.5);

  const io::KeyValues bad = io::parse_key_values("delta=2\nbogus=1\n", "b.cfg");
  CHECK(error_of([&] { io::loss_config_from(bad); }).find("b.cfg:2") != std::string::npos);
  CHECK_THROWS_AS(io::parse_key_values("no equals sign\n", "x.cfg"), InputError);

  const SearchConfig s = io::search_config_from(io::parse_key_values("spacings=8,2,0.5\nradius=40\n", "s.cfg"));
  CHECK(s.spacings == std::vector<double>{8, 2, 0.5});
  CHECK(s.radius == 40.0);
  CHECK_THROWS_AS(io::search_config_from(io::parse_key_values("spacings=1,2\n", "s.cfg")), InputError);

  const SceneSpec sc = io::scene_spec_from(io::parse_key_values("seed=9\nground_class=Water\n", "sc.cfg"));
  CHECK(sc.seed == 9);
  CHECK(sc.ground_class == id(SemanticClass::Water));
}

TEST_CASE("confusion, homography and correspondences files") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(8, 8);
  m(1, 1) = 0.75;
  m(1, 2) = 0.25;
  const fs::path cp = scratch("conf.csv");
  io::write_confusion_csv(cp, ConfusionMatrix(m));
  CHECK(io::read_confusion_csv(cp).matrix() == m);
  CHECK(io::read_text(cp).find("Building") != std::string::npos);

  Mat3 h;
  h << 1.1, 0.01, 5, -0.02, 0.9, -3, 1e-5, 2e-5, 1;
  const fs::path hp = scratch("h.txt");
  io::write_homography(hp, Homography(h));
  CHECK((io::read_homography(hp).matrix() - h).cwiseAbs().maxCoeff() == 0.0);

  const fs::path pp = scratch("pairs.csv");
  io::write_text(pp, "src_x,src_y,dst_x,dst_y\n0,0,1,1\n2,3,4,5\n");
  const CorrespondenceSet c = io::read_correspondences_csv(pp);
  REQUIRE(c.size() == 2);
  CHECK(c[1].src == Vec2(2, 3));
  CHECK(c[1].dst == Vec2(4, 5));
}

TEST_CASE("result JSON lines round trip") {
  LocalizationResult r;
  r.t_star = {1.25, -0.5};
  r.loss = 0.123456789012345;
  r.forward = 0.1;
  r.reverse = 0.023456789012345;
  r.edge_count = 9001;
  r.gated = true;
  r.gate_reason = "few edges";
  r.trace = {{4.0, {0, 0}, 1.0, 225}, {1.0, {1, -1}, 0.5, 25}};
  r.wall_time_s = 0.5;
  const io::ResultRecord rec{"f1", r, "", Vec2(100.0, 200.0)};
  const io::ResultRecord back = io::result_from_json_line(io::result_to_json_line(rec), "r.jsonl", 1);
  CHECK(back.frame_id == "f1");
  REQUIRE(back.result);
  CHECK(back.result->t_star == r.t_star);
  CHECK(back.result->loss == r.loss);
  CHECK(back.result->gated);
  CHECK(back.result->trace.size() == 2);
  CHECK(back.result->trace[1].best == PlanarTranslation{1, -1});
  CHECK(back.position() == Vec2(101.25, 199.5));

  const io::ResultRecord failed{"f2", std::nullopt, "no evidence", Vec2(1, 2)};
  const io::ResultRecord fb = io::result_from_json_line(io::result_to_json_line(failed), "r.jsonl", 2);
  CHECK_FALSE(fb.result);
  CHECK(fb.error == "no evidence");
  CHECK(error_of([] { io::result_from_json_line("{not json", "r.jsonl", 7); }).find("r.jsonl:7") != std::string::npos);
}
