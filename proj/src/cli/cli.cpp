#include "semloc/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "semloc/crossmodal.hpp"
#include "semloc/evaluation.hpp"
#include "semloc/io.hpp"
#include "semloc/semantic_map.hpp"
#include "semloc/solver.hpp"
#include "semloc/synth.hpp"

namespace semloc::cli {

namespace fs = std::filesystem;

namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  RunManifest manifest;

  void input(const fs::path& p) { manifest.inputs[p.string()] = sha256_file(p); }
  void finish(const fs::path& manifest_path) {
    manifest.finished_utc = utc_now();
    write_manifest(manifest_path, manifest);
  }
};

fs::path manifest_for(const fs::path& output) { return output.string() + ".manifest.json"; }

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Routes "--set prefix.key=value" overrides to the config named by prefix.
std::vector<std::string> overrides_for(const std::vector<std::string>& sets, const std::string& prefix,
                                       const std::set<std::string>& known) {
  std::vector<std::string> out;
  for (const std::string& s : sets) {
    const auto dot = s.find('.');
    if (dot == std::string::npos || !known.count(s.substr(0, dot)))
      throw InputError("override '" + s + "' must start with one of the config names followed by '.'");
    if (s.substr(0, dot) == prefix) out.push_back(s.substr(dot + 1));
  }
  return out;
}

io::KeyValues load_config(const std::string& path, const std::vector<std::string>& overrides, Context& ctx) {
  io::KeyValues kv;
  if (!path.empty()) {
    kv = io::read_key_values(path);
    ctx.input(path);
  }
  io::apply_overrides(kv, overrides);
  return kv;
}

void snapshot(Context& ctx, const std::string& prefix, const io::KeyValues& kv) {
  for (const auto& [k, v] : kv.values) ctx.manifest.config[prefix + "." + k] = v;
}

// ---- map build ----

struct MapBuildArgs {
  std::string cloud, views, intrinsics, out;
  int classes = kDefaultNumClasses;
  double depth_tolerance = 0.0;
};

int cmd_map_build(const MapBuildArgs& a, Context& ctx) {
  ctx.input(a.cloud);
  ctx.input(a.views);
  ctx.input(a.intrinsics);
  ctx.manifest.config["classes"] = std::to_string(a.classes);
  ctx.manifest.config["depth_tolerance"] = fmt(a.depth_tolerance);

  const ColoredPointCloud cloud = io::read_colored_ply(a.cloud);
  const auto intr = io::read_intrinsics_csv(a.intrinsics);
  const auto records = io::read_views_csv(a.views);
  if (records.empty()) throw InputError(a.views + ": no views");
  std::vector<LabeledView> views;
  for (const io::ViewRecord& r : records) {
    auto it = intr.find(r.intrinsics_id);
    if (it == intr.end())
      throw InputError(a.views, r.line, "frame '" + r.frame_id + "': unknown intrinsics id '" + r.intrinsics_id + "'");
    LabeledView v{io::read_mask_png(r.image, a.classes), it->second, io::view_world_to_camera(r)};
    ctx.input(r.image);
    try {
      v.validate();
    } catch (const InputError& e) {
      throw InputError(a.views, r.line, "frame '" + r.frame_id + "': " + e.what());
    }
    views.push_back(std::move(v));
  }
  FuseOptions opt;
  opt.num_classes = a.classes;
  opt.depth_tolerance = a.depth_tolerance;
  const SemanticPointCloud labeled = fuse_labels(cloud, views, opt);
  io::write_semantic_ply(a.out, labeled);
  ctx.manifest.outputs.push_back(a.out);
  ctx.finish(manifest_for(a.out));
  ctx.out << "labeled " << labeled.size() << " of " << cloud.points.size() << " points from " << views.size()
          << " views -> " << a.out << "\n";
  return kOk;
}

// ---- map prune ----

struct MapPruneArgs {
  std::string map, out;
  double voxel_size = 0.5;
  int classes = kDefaultNumClasses;
};

int cmd_map_prune(const MapPruneArgs& a, Context& ctx) {
  ctx.input(a.map);
  ctx.manifest.config["voxel_size"] = fmt(a.voxel_size);
  ctx.manifest.config["classes"] = std::to_string(a.classes);
  const SemanticPointCloud map = io::read_semantic_ply(a.map);
  if (!(a.voxel_size > 0.0)) throw InputError("--voxel-size must be positive");
  const VoxelEdgeMap edges = voxelize_and_prune(map, a.voxel_size, a.classes);
  io::write_edge_map(a.out, edges);
  ctx.manifest.outputs.push_back(a.out);
  ctx.finish(manifest_for(a.out));
  ctx.out << "retained " << edges.voxels.size() << " of " << edges.input_voxels << " voxels (fraction "
          << std::setprecision(6) << edges.retained_fraction() << ") -> " << a.out << "\n";
  if (edges.empty()) {
    ctx.err << "warning: no class-transition voxels; the edge map is empty\n";
    return kDegraded;
  }
  return kOk;
}

// ---- localize ----

struct LocalizeArgs {
  std::string map, frames, intrinsics, loss, search, out;
  std::vector<std::string> sets;
  int workers = 1;
  int classes = kDefaultNumClasses;
};

int cmd_localize(const LocalizeArgs& a, Context& ctx) {
  ctx.input(a.map);
  ctx.input(a.frames);
  ctx.input(a.intrinsics);
  const std::set<std::string> known{"loss", "search"};
  const io::KeyValues loss_kv = load_config(a.loss, overrides_for(a.sets, "loss", known), ctx);
  const io::KeyValues search_kv = load_config(a.search, overrides_for(a.sets, "search", known), ctx);
  const fs::path loss_dir = a.loss.empty() ? fs::path() : fs::path(a.loss).parent_path();
  const LossConfig loss = io::loss_config_from(loss_kv, loss_dir);
  const SearchConfig search = io::search_config_from(search_kv);
  if (loss.confusion) {
    const fs::path c(loss_kv.values.at("confusion"));
    ctx.input(c.is_absolute() ? c : loss_dir / c);
  }
  snapshot(ctx, "loss", loss_kv);
  snapshot(ctx, "search", search_kv);
  ctx.manifest.config["workers"] = std::to_string(a.workers);
  if (a.workers < 1) throw InputError("--workers must be >= 1");

  const VoxelEdgeMap map = io::read_edge_map(a.map);
  if (map.empty()) throw InputError(a.map + ": edge map is empty");
  const auto intr = io::read_intrinsics_csv(a.intrinsics);
  const auto records = io::read_views_csv(a.frames);
  if (records.empty()) throw InputError(a.frames + ": frame list is empty");
  for (const io::ViewRecord& r : records)
    if (!intr.count(r.intrinsics_id))
      throw InputError(a.frames, r.line, "frame '" + r.frame_id + "': unknown intrinsics id '" + r.intrinsics_id + "'");

  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  std::ofstream out(a.out);
  if (!out) throw InputError("cannot open " + a.out + " for writing");

  std::size_t ok = 0, gated = 0, failed = 0;
  double total_time = 0.0;
  for (std::size_t begin = 0; begin < records.size(); begin += static_cast<std::size_t>(a.workers)) {
    const std::size_t end = std::min(records.size(), begin + static_cast<std::size_t>(a.workers));
    std::vector<Frame> batch;
    for (std::size_t i = begin; i < end; ++i) {
      const io::ViewRecord& r = records[i];
      ctx.input(r.image);
      batch.push_back({r.frame_id, io::read_mask_png(r.image, a.classes), io::view_geometry(r, intr.at(r.intrinsics_id))});
    }
    const std::vector<FrameOutcome> outcomes = localize_trajectory(map, batch, loss, search, a.workers);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      io::ResultRecord rec{outcomes[i].id, outcomes[i].result, outcomes[i].error, batch[i].view.prior};
      out << io::result_to_json_line(rec) << "\n";
      if (!rec.result) {
        ++failed;
        ctx.err << "frame '" << rec.frame_id << "' failed: " << rec.error << "\n";
        continue;
      }
      ++ok;
      gated += rec.result->gated ? 1 : 0;
      total_time += rec.result->wall_time_s;
    }
    out.flush();
  }
  out.close();
  ctx.manifest.outputs.push_back(a.out);
  ctx.finish(manifest_for(a.out));
  ctx.out << "localized " << ok << "/" << records.size() << " frames (" << gated << " gated, " << failed
          << " failed), mean " << std::setprecision(3) << (ok ? total_time / static_cast<double>(ok) : 0.0)
          << " s/frame -> " << a.out << "\n";
  return gated + failed > 0 ? kDegraded : kOk;
}

// ---- eval ----

struct EvalArgs {
  std::string results, truth, out_dir;
  bool no_bias_correct = false;
  long bin_width = 5500;
  long bin_origin = 1749;
  std::vector<std::size_t> gates;
};

int cmd_eval(const EvalArgs& a, Context& ctx) {
  ctx.input(a.results);
  ctx.input(a.truth);
  ctx.manifest.config["bias_correct"] = a.no_bias_correct ? "false" : "true";
  ctx.manifest.config["bin_width"] = std::to_string(a.bin_width);
  ctx.manifest.config["bin_origin"] = std::to_string(a.bin_origin);
  std::string gates;
  for (std::size_t g : a.gates) gates += (gates.empty() ? "" : ",") + std::to_string(g);
  ctx.manifest.config["gates"] = gates;

  const auto results = io::read_results_jsonl(a.results);
  const auto truth = io::read_truth_csv(a.truth);
  if (results.empty()) throw InputError(a.results + ": no results");
  std::vector<FrameError> errors;
  std::set<std::string> seen;
  std::size_t failed = 0;
  for (const io::ResultRecord& r : results) {
    auto it = truth.find(r.frame_id);
    if (it == truth.end()) throw InputError(a.truth + ": no ground truth for frame '" + r.frame_id + "'");
    if (!seen.insert(r.frame_id).second) throw InputError(a.results + ": duplicate frame '" + r.frame_id + "'");
    if (!r.result) {
      ++failed;
      continue;
    }
    errors.push_back({r.frame_id, it->second.dataset, r.position(), it->second.position, r.result->edge_count,
                      r.result->gated});
  }
  for (const auto& [id, rec] : truth)
    if (!seen.count(id)) throw InputError(a.results + ": no result for ground-truth frame '" + id + "'");
  if (errors.empty()) throw InputError(a.results + ": every frame failed");

  const bool bc = !a.no_bias_correct;
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::vector<io::SummaryRow> rows;
  std::map<std::string, std::vector<FrameError>> by_dataset;
  for (const FrameError& e : errors) by_dataset[e.dataset].push_back(e);
  if (by_dataset.size() > 1 || !by_dataset.begin()->first.empty())
    for (const auto& [name, set] : by_dataset) rows.push_back({name.empty() ? "(none)" : name, compute_metrics(set, bc)});
  if (bc) {
    rows.push_back({"Total (global bias)", compute_metrics(errors, true)});
    rows.push_back({"Total (per-dataset bias)", compute_metrics_per_dataset_bias(errors)});
  } else {
    rows.push_back({"Total", compute_metrics(errors, false)});
  }

  std::vector<std::size_t> thresholds = a.gates;
  if (thresholds.empty()) thresholds = {0, 8000};
  const auto gate_rows = gate_sweep(errors, thresholds, bc);
  for (const GateRow& g : gate_rows)
    if (g.metrics) rows.push_back({"Total (Gated " + std::to_string(g.threshold) + ")", *g.metrics});

  const fs::path summary = dir / "summary.csv", bins = dir / "bins.csv", gate = dir / "gate.csv",
                 scatter = dir / "error_vs_edges.svg", traj = dir / "trajectory.svg";
  io::write_summary_csv(summary, rows);
  io::write_bins_csv(bins, bin_by_edges(errors, a.bin_width, a.bin_origin, bc));
  io::write_gate_csv(gate, gate_rows);
  io::write_error_scatter_svg(scatter, errors, bc);
  io::write_trajectory_svg(traj, errors);
  for (const fs::path& p : {summary, bins, gate, scatter, traj}) ctx.manifest.outputs.push_back(p.string());
  ctx.finish(dir / "manifest.json");

  const TrajectoryMetrics& total = rows[rows.size() - gate_rows.size() - (bc ? 2 : 1)].metrics;
  ctx.out << "N=" << total.n << " RMSE_2D=" << std::setprecision(4) << total.rmse_2d << " m, median "
          << total.median_2d << " m, P75 " << total.p75_2d << " m -> " << dir.string() << "\n";
  if (failed) {
    ctx.err << "warning: " << failed << " frames had no solution and were excluded\n";
    return kDegraded;
  }
  return kOk;
}

// ---- synth ----

struct SynthArgs {
  std::string scene, corruption, out_dir;
  std::vector<std::string> sets;
  int frames = 10;
  int size = 512;
  double focal = 400.0;
  double offset = 30.0;
  double margin = 80.0;
  std::uint64_t seed = 1;
};

std::array<std::uint8_t, 3> class_colour(ClassId c) {
  static const std::array<std::uint8_t, 3> palette[8] = {{200, 120, 60}, {180, 30, 30}, {128, 128, 128}, {190, 170, 120},
                                                         {20, 110, 20},  {120, 200, 90}, {30, 60, 200},  {240, 220, 0}};
  return c < 8 ? palette[c] : std::array<std::uint8_t, 3>{0, 0, 0};
}

int cmd_synth(const SynthArgs& a, Context& ctx) {
  const std::set<std::string> known{"scene", "corruption"};
  const io::KeyValues scene_kv = load_config(a.scene, overrides_for(a.sets, "scene", known), ctx);
  const io::KeyValues corr_kv = load_config(a.corruption, overrides_for(a.sets, "corruption", known), ctx);
  const fs::path corr_dir = a.corruption.empty() ? fs::path() : fs::path(a.corruption).parent_path();
  const SceneSpec scene = io::scene_spec_from(scene_kv);
  const CorruptionSpec corruption = io::corruption_spec_from(corr_kv, corr_dir);
  snapshot(ctx, "scene", scene_kv);
  snapshot(ctx, "corruption", corr_kv);
  ctx.manifest.config["frames"] = std::to_string(a.frames);
  ctx.manifest.config["size"] = std::to_string(a.size);
  ctx.manifest.config["focal"] = fmt(a.focal);
  ctx.manifest.config["offset"] = fmt(a.offset);
  ctx.manifest.config["margin"] = fmt(a.margin);
  ctx.manifest.config["seed"] = std::to_string(a.seed);
  if (a.frames < 1) throw InputError("--frames must be >= 1");
  if (a.size < 8) throw InputError("--size must be >= 8");
  if (!(a.focal > 0.0)) throw InputError("--focal must be positive");
  if (!(a.offset >= 0.0)) throw InputError("--offset must be >= 0");
  if (!(2.0 * a.margin < scene.extent)) throw InputError("--margin leaves no room inside the scene extent");

  const fs::path dir(a.out_dir);
  fs::create_directories(dir / "masks");
  const SemanticPointCloud world = generate_world(scene);
  ColoredPointCloud colored;
  colored.datum = world.datum;
  for (const LabeledPoint& p : world.points) colored.points.push_back({p.position, class_colour(p.cls)});

  const CameraIntrinsics intr = synthetic_intrinsics(a.size, a.focal);
  std::mt19937_64 rng(a.seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const double lim = scene.extent / 2.0 - a.margin;

  std::vector<io::ViewRecord> frames, mapping;
  std::vector<std::pair<std::string, io::TruthRecord>> truth;
  for (int i = 0; i < a.frames; ++i) {
    std::ostringstream name;
    name << "f" << std::setw(5) << std::setfill('0') << i;
    const double altitude = uniform(scene.altitude_min, scene.altitude_max);
    const Vec2 position(uniform(-lim, lim), uniform(-lim, lim));
    const PlanarTranslation t_true{uniform(-a.offset, a.offset), uniform(-a.offset, a.offset)};
    const Vec2 prior = position - Vec2(t_true.tx, t_true.ty);
    const ViewGeometry view = nadir_view(intr, altitude, prior);
    const SegmentationMask clean = render_truth_mask(world, view, t_true);
    const SegmentationMask mask = corrupt_mask(clean, corruption, a.seed * 1000003ULL + static_cast<std::uint64_t>(i));
    const fs::path mask_rel = fs::path("masks") / (name.str() + ".png");
    const fs::path clean_rel = fs::path("masks") / (name.str() + "_clean.png");
    io::write_mask_png(dir / mask_rel, mask);
    io::write_mask_png(dir / clean_rel, clean);

    io::ViewRecord rec;
    rec.frame_id = name.str();
    rec.image = mask_rel;
    rec.center = Vec3(prior.x(), prior.y(), altitude);
    rec.rotation = view.attitude;
    rec.height = altitude;
    rec.intrinsics_id = "cam0";
    frames.push_back(rec);
    rec.image = clean_rel;
    rec.center = Vec3(position.x(), position.y(), altitude);
    mapping.push_back(rec);
    truth.push_back({name.str(), {position, "synthetic"}});
  }

  const fs::path world_path = dir / "world.ply", cloud_path = dir / "cloud.ply", frames_path = dir / "frames.csv",
                 mapping_path = dir / "mapping_views.csv", truth_path = dir / "truth.csv",
                 intr_path = dir / "intrinsics.csv";
  io::write_semantic_ply(world_path, world);
  io::write_colored_ply(cloud_path, colored);
  io::write_views_csv(frames_path, frames);
  io::write_views_csv(mapping_path, mapping);
  io::write_truth_csv(truth_path, truth);
  io::write_intrinsics_csv(intr_path, {{"cam0", intr}});
  for (const fs::path& p : {world_path, cloud_path, frames_path, mapping_path, truth_path, intr_path})
    ctx.manifest.outputs.push_back(p.string());
  ctx.finish(dir / "manifest.json");
  ctx.out << "world: " << world.size() << " points; " << a.frames << " frames -> " << dir.string() << "\n";
  return kOk;
}

// ---- xmodal ----

struct XmodalArgs {
  std::string pairs, out, mask, homography;
  std::vector<std::string> pred, truth;
  int width = 512, height = 512, x0 = 0, y0 = 0;
  int classes = kDefaultNumClasses;
};

int cmd_xmodal_fit(const XmodalArgs& a, Context& ctx) {
  ctx.input(a.pairs);
  const HomographyFit fit = fit_homography(io::read_correspondences_csv(a.pairs));
  io::write_homography(a.out, fit.h);
  ctx.manifest.outputs.push_back(a.out);
  ctx.finish(manifest_for(a.out));
  ctx.out << "homography fitted, reprojection RMS " << std::setprecision(6) << fit.rms_px << " px -> " << a.out << "\n";
  return kOk;
}

int cmd_xmodal_warp(const XmodalArgs& a, Context& ctx) {
  ctx.input(a.mask);
  ctx.input(a.homography);
  ctx.manifest.config["width"] = std::to_string(a.width);
  ctx.manifest.config["height"] = std::to_string(a.height);
  ctx.manifest.config["x0"] = std::to_string(a.x0);
  ctx.manifest.config["y0"] = std::to_string(a.y0);
  if (a.width < 1 || a.height < 1) throw InputError("output size must be positive");
  const SegmentationMask warped =
      warp_mask(io::read_mask_png(a.mask, a.classes), io::read_homography(a.homography), a.width, a.height, a.x0, a.y0);
  io::write_mask_png(a.out, warped);
  ctx.manifest.outputs.push_back(a.out);
  ctx.finish(manifest_for(a.out));
  ctx.out << "warped " << a.mask << " -> " << a.out << "\n";
  return kOk;
}

int cmd_xmodal_confusion(const XmodalArgs& a, Context& ctx) {
  if (a.pred.size() != a.truth.size()) throw InputError("--pred and --truth need the same number of masks");
  std::vector<SegmentationMask> pred, truth;
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    ctx.input(a.pred[i]);
    ctx.input(a.truth[i]);
    pred.push_back(io::read_mask_png(a.pred[i], a.classes));
    truth.push_back(io::read_mask_png(a.truth[i], a.classes));
  }
  const ConfusionMatrix c = estimate_confusion(pred, truth, a.classes);
  io::write_confusion_csv(a.out, c);
  ctx.manifest.outputs.push_back(a.out);
  ctx.finish(manifest_for(a.out));
  ctx.out << "confusion from " << pred.size() << " mask pairs -> " << a.out << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic map-relative localization toolkit", "semloc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  MapBuildArgs build;
  MapPruneArgs prune;
  LocalizeArgs loc;
  EvalArgs ev;
  SynthArgs syn;
  XmodalArgs xm;

  auto* map = app.add_subcommand("map", "Build and prune semantic maps");
  map->require_subcommand(1);
  auto* map_build = map->add_subcommand("build", "Fuse segmented views onto a colored cloud");
  map_build->add_option("--cloud", build.cloud, "Colored point cloud (PLY)")->required();
  map_build->add_option("--views", build.views, "Views manifest (CSV)")->required();
  map_build->add_option("--intrinsics", build.intrinsics, "Intrinsics table (CSV)")->required();
  map_build->add_option("--out", build.out, "Labeled cloud (PLY)")->required();
  map_build->add_option("--classes", build.classes, "Number of classes");
  map_build->add_option("--depth-tolerance", build.depth_tolerance, "z-buffer depth tolerance (m)");

  auto* map_prune = map->add_subcommand("prune", "Keep class-transition voxels");
  map_prune->add_option("--map", prune.map, "Labeled cloud (PLY)")->required();
  map_prune->add_option("--voxel-size", prune.voxel_size, "Voxel edge length (m)");
  map_prune->add_option("--out", prune.out, "Edge map (PLY)")->required();
  map_prune->add_option("--classes", prune.classes, "Number of classes");

  auto* localize = app.add_subcommand("localize", "Align frames against an edge map");
  localize->add_option("--map", loc.map, "Edge map (PLY)")->required();
  localize->add_option("--frames", loc.frames, "Frames manifest (CSV)")->required();
  localize->add_option("--intrinsics", loc.intrinsics, "Intrinsics table (CSV)")->required();
  localize->add_option("--loss", loc.loss, "Loss config (key=value)");
  localize->add_option("--search", loc.search, "Search config (key=value)");
  localize->add_option("--set", loc.sets, "Override, e.g. loss.delta=3 or search.radius=20");
  localize->add_option("--workers", loc.workers, "Frames solved in parallel");
  localize->add_option("--classes", loc.classes, "Number of classes");
  localize->add_option("--out", loc.out, "Results (JSONL)")->required();

  auto* eval = app.add_subcommand("eval", "Accuracy tables and plots");
  eval->add_option("--results", ev.results, "Results (JSONL)")->required();
  eval->add_option("--truth", ev.truth, "Ground truth (CSV)")->required();
  eval->add_option("--out-dir", ev.out_dir, "Output directory")->required();
  eval->add_flag("--no-bias-correct", ev.no_bias_correct, "Report raw errors");
  eval->add_option("--bin-width", ev.bin_width, "Edge-count bin width");
  eval->add_option("--bin-origin", ev.bin_origin, "Edge-count bin origin");
  eval->add_option("--gate", ev.gates, "Gate thresholds (edge pixels)")->delimiter(',');

  auto* synth = app.add_subcommand("synth", "Generate a synthetic world with frames and truth");
  synth->add_option("--scene", syn.scene, "Scene config (key=value)");
  synth->add_option("--corruption", syn.corruption, "Corruption config (key=value)");
  synth->add_option("--set", syn.sets, "Override, e.g. scene.seed=3 or corruption.flip_rate=0.1");
  synth->add_option("--frames", syn.frames, "Number of frames");
  synth->add_option("--size", syn.size, "Image side (px)");
  synth->add_option("--focal", syn.focal, "Focal length (px)");
  synth->add_option("--offset", syn.offset, "Max prior offset per axis (m)");
  synth->add_option("--margin", syn.margin, "Keep frame centers this far from the world border (m)");
  synth->add_option("--seed", syn.seed, "Trajectory and corruption seed");
  synth->add_option("--out-dir", syn.out_dir, "Output directory")->required();

  auto* xmodal = app.add_subcommand("xmodal", "Cross-modal label transfer");
  xmodal->require_subcommand(1);
  auto* fit = xmodal->add_subcommand("fit", "Fit a homography from correspondences");
  fit->add_option("--pairs", xm.pairs, "src_x,src_y,dst_x,dst_y (CSV)")->required();
  fit->add_option("--out", xm.out, "Homography (text)")->required();
  auto* warp = xmodal->add_subcommand("warp", "Warp a mask through a homography");
  warp->add_option("--mask", xm.mask, "Source mask (PNG)")->required();
  warp->add_option("--homography", xm.homography, "Homography (text)")->required();
  warp->add_option("--width", xm.width, "Output width");
  warp->add_option("--height", xm.height, "Output height");
  warp->add_option("--x0", xm.x0, "Crop origin x");
  warp->add_option("--y0", xm.y0, "Crop origin y");
  warp->add_option("--classes", xm.classes, "Number of classes");
  warp->add_option("--out", xm.out, "Warped mask (PNG)")->required();
  auto* conf = xmodal->add_subcommand("confusion", "Estimate a confusion matrix");
  conf->add_option("--pred", xm.pred, "Predicted masks (PNG)")->required()->delimiter(',');
  conf->add_option("--truth", xm.truth, "Reference masks (PNG)")->required()->delimiter(',');
  conf->add_option("--classes", xm.classes, "Number of classes");
  conf->add_option("--out", xm.out, "Confusion matrix (CSV)")->required();

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  for (std::string& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  Context ctx{out, err, {}};
  ctx.manifest.argv = args;
  ctx.manifest.started_utc = utc_now();
  try {
    if (map_build->parsed()) return ctx.manifest.command = "map build", cmd_map_build(build, ctx);
    if (map_prune->parsed()) return ctx.manifest.command = "map prune", cmd_map_prune(prune, ctx);
    if (localize->parsed()) return ctx.manifest.command = "localize", cmd_localize(loc, ctx);
    if (eval->parsed()) return ctx.manifest.command = "eval", cmd_eval(ev, ctx);
    if (synth->parsed()) return ctx.manifest.command = "synth", cmd_synth(syn, ctx);
    if (fit->parsed()) return ctx.manifest.command = "xmodal fit", cmd_xmodal_fit(xm, ctx);
    if (warp->parsed()) return ctx.manifest.command = "xmodal warp", cmd_xmodal_warp(xm, ctx);
    if (conf->parsed()) return ctx.manifest.command = "xmodal confusion", cmd_xmodal_confusion(xm, ctx);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr); }

}  // namespace semloc::cli
