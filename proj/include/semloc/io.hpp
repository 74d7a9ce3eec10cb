// File formats: PLY clouds, PNG masks, CSV manifests, key=value configs,
// JSONL results and SVG plots. Parse failures throw InputError with the
// offending file and line.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semloc/alignment.hpp"
#include "semloc/crossmodal.hpp"
#include "semloc/evaluation.hpp"
#include "semloc/geometry.hpp"
#include "semloc/mask.hpp"
#include "semloc/point_cloud.hpp"
#include "semloc/semantic_map.hpp"
#include "semloc/solver.hpp"
#include "semloc/synth.hpp"

namespace semloc::io {

namespace fs = std::filesystem;

// ---- PLY ------------------------------------------------------------------

/// Binary little-endian PLY with x, y, z (float64), class (uint8) and
/// support (uint16). The datum is stored as a comment.
void write_semantic_ply(const fs::path& path, const SemanticPointCloud& cloud,
                        const std::vector<std::string>& comments = {});
/// Reads binary_little_endian or ascii PLY. Requires x, y, z and class;
/// support defaults to 1. `comments` receives the header comments.
SemanticPointCloud read_semantic_ply(const fs::path& path, std::vector<std::string>* comments = nullptr);

/// x, y, z (float64) and red, green, blue (uint8).
void write_colored_ply(const fs::path& path, const ColoredPointCloud& cloud, bool ascii = false);
/// Accepts float or double coordinates; colors default to 0 when absent.
ColoredPointCloud read_colored_ply(const fs::path& path);

/// Retained voxels as a semantic PLY at voxel centers (support = member
/// count) with voxel_size and input_voxels comments.
void write_edge_map(const fs::path& path, const VoxelEdgeMap& map);
VoxelEdgeMap read_edge_map(const fs::path& path);

// ---- masks ----------------------------------------------------------------

/// 8-bit single-channel PNG; value = class id, 255 = ignore.
void write_mask_png(const fs::path& path, const SegmentationMask& mask);
SegmentationMask read_mask_png(const fs::path& path, int num_classes = kDefaultNumClasses);

// ---- CSV ------------------------------------------------------------------

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> cells;
};

struct CsvTable {
  std::string source;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  /// Column index by name; throws InputError naming the missing column.
  std::size_t column(const std::string& name) const;
  std::optional<std::size_t> find_column(const std::string& name) const;
  const std::string& cell(const CsvRow& row, std::size_t col) const;
  double number(const CsvRow& row, std::size_t col) const;
  long integer(const CsvRow& row, std::size_t col) const;
};

/// Comma separated, first row is the header, blank lines and lines starting
/// with '#' are skipped. Cells are whitespace-trimmed.
CsvTable read_csv(const fs::path& path);
CsvTable parse_csv(const std::string& text, const std::string& source);

// ---- cameras and views ------------------------------------------------------

/// id,fx,fy,cx,cy,width,height[,k1,k2,k3,p1,p2]
std::map<std::string, CameraIntrinsics> read_intrinsics_csv(const fs::path& path);
void write_intrinsics_csv(const fs::path& path, const std::map<std::string, CameraIntrinsics>& intr);

/// One row of a views manifest:
/// frame_id,image,cx_m,cy_m,cz_m,r00..r22,height_m,intrinsics_id
/// r is the camera-to-world rotation, row-major.
struct ViewRecord {
  std::string frame_id;
  fs::path image;
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  double height = 0.0;
  std::string intrinsics_id;
  std::size_t line = 0;
};

/// Image paths are resolved relative to the manifest's directory.
std::vector<ViewRecord> read_views_csv(const fs::path& path);
void write_views_csv(const fs::path& path, const std::vector<ViewRecord>& views);

/// Full pose of a view record for label fusion.
RigidPose view_world_to_camera(const ViewRecord& v);
/// Localization geometry: attitude = rotation, prior = center.xy, height.
ViewGeometry view_geometry(const ViewRecord& v, const CameraIntrinsics& intr);

/// frame_id,x_m,y_m[,dataset]
struct TruthRecord {
  Vec2 position = Vec2::Zero();
  std::string dataset;
};
std::map<std::string, TruthRecord> read_truth_csv(const fs::path& path);
void write_truth_csv(const fs::path& path, const std::vector<std::pair<std::string, TruthRecord>>& rows);

// ---- configs ----------------------------------------------------------------

/// Ordered key=value pairs; '#' starts a comment.
struct KeyValues {
  std::string source;
  std::map<std::string, std::string> values;
  std::map<std::string, std::size_t> lines;

  bool has(const std::string& key) const { return values.count(key) != 0; }
};

KeyValues read_key_values(const fs::path& path);
KeyValues parse_key_values(const std::string& text, const std::string& source);
/// Applies "key=value" overrides on top of `kv`.
void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides);

/// Unknown keys are rejected. `base_dir` resolves a confusion matrix path.
LossConfig loss_config_from(const KeyValues& kv, const fs::path& base_dir = {});
SearchConfig search_config_from(const KeyValues& kv);
SceneSpec scene_spec_from(const KeyValues& kv);
CorruptionSpec corruption_spec_from(const KeyValues& kv, const fs::path& base_dir = {});

// ---- cross-modal artifacts -------------------------------------------------

/// Header row of class names, then K rows of K probabilities.
void write_confusion_csv(const fs::path& path, const ConfusionMatrix& c);
ConfusionMatrix read_confusion_csv(const fs::path& path);

/// Three whitespace-separated rows of three numbers.
void write_homography(const fs::path& path, const Homography& h);
Homography read_homography(const fs::path& path);

/// src_x,src_y,dst_x,dst_y
CorrespondenceSet read_correspondences_csv(const fs::path& path);

// ---- results ----------------------------------------------------------------

struct ResultRecord {
  std::string frame_id;
  std::optional<LocalizationResult> result;
  std::string error;
  Vec2 prior = Vec2::Zero();

  Vec2 position() const;
};

/// One JSON object per line.
std::string result_to_json_line(const ResultRecord& r);
ResultRecord result_from_json_line(const std::string& line, const std::string& source, std::size_t line_no);
std::vector<ResultRecord> read_results_jsonl(const fs::path& path);

// ---- tables and plots ------------------------------------------------------

struct SummaryRow {
  std::string label;
  TrajectoryMetrics metrics;
};

/// Accuracy table: dataset,N,RMSE_x,RMSE_y,RMSE_2D,median_2D,P75_2D,pct_lt_2m,pct_gt_5m,bias_x,bias_y
void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows);
/// bin_lo,bin_hi,mean_2d,std_2d_population,N
void write_bins_csv(const fs::path& path, const std::vector<EdgeBin>& bins);
/// threshold,retained_fraction,N,RMSE_2D,median_2D,P75_2D (empty rows keep only the first two columns)
void write_gate_csv(const fs::path& path, const std::vector<GateRow>& rows);

/// Scatter of corrected 2D error against edge count.
void write_error_scatter_svg(const fs::path& path, const std::vector<FrameError>& errors, bool bias_correct);
/// Estimated and true trajectories in plan view.
void write_trajectory_svg(const fs::path& path, const std::vector<FrameError>& errors);

// ---- misc -------------------------------------------------------------------

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace semloc::io
