#include "semloc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <png.h>

#include <json.hpp>

namespace semloc::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty()) return std::nullopt;
  return v;
}

std::optional<long> to_long(const std::string& s) {
  long v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || s.empty()) return std::nullopt;
  return v;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  return out;
}

// ---- PLY plumbing ----

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<PlyType> ply_type(const std::string& name) {
  if (name == "char" || name == "int8") return PlyType::I8;
  if (name == "uchar" || name == "uint8") return PlyType::U8;
  if (name == "short" || name == "int16") return PlyType::I16;
  if (name == "ushort" || name == "uint16") return PlyType::U16;
  if (name == "int" || name == "int32") return PlyType::I32;
  if (name == "uint" || name == "uint32") return PlyType::U32;
  if (name == "float" || name == "float32") return PlyType::F32;
  if (name == "double" || name == "float64") return PlyType::F64;
  return std::nullopt;
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::I8:
    case PlyType::U8: return 1;
    case PlyType::I16:
    case PlyType::U16: return 2;
    case PlyType::I32:
    case PlyType::U32:
    case PlyType::F32: return 4;
    case PlyType::F64: return 8;
  }
  return 0;
}

template <typename T>
T load_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;  // host is little-endian on every supported target
}

double ply_value(PlyType t, const unsigned char* p) {
  switch (t) {
    case PlyType::I8: return load_le<std::int8_t>(p);
    case PlyType::U8: return load_le<std::uint8_t>(p);
    case PlyType::I16: return load_le<std::int16_t>(p);
    case PlyType::U16: return load_le<std::uint16_t>(p);
    case PlyType::I32: return load_le<std::int32_t>(p);
    case PlyType::U32: return load_le<std::uint32_t>(p);
    case PlyType::F32: return load_le<float>(p);
    case PlyType::F64: return load_le<double>(p);
  }
  return 0.0;
}

struct PlyData {
  std::vector<std::string> comments;
  std::vector<std::string> names;
  std::vector<PlyType> types;
  std::size_t count = 0;
  std::vector<double> values;  // count x names.size(), row-major

  std::optional<std::size_t> find(const std::string& n) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == n) return i;
    return std::nullopt;
  }
};

PlyData read_ply(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string src = path.string();
  if (!in) throw InputError("cannot open " + src);
  PlyData d;
  std::string line;
  std::size_t line_no = 0;
  bool binary = false, in_vertex = false, seen_vertex = false, seen_format = false;
  auto next = [&]() {
    if (!std::getline(in, line)) throw InputError(src, line_no, "unexpected end of PLY header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  next();
  if (line != "ply") throw InputError(src, line_no, "missing 'ply' magic");
  while (true) {
    next();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string f;
      ls >> f;
      if (f == "ascii") binary = false;
      else if (f == "binary_little_endian") binary = true;
      else throw InputError(src, line_no, "unsupported PLY format '" + f + "'");
      seen_format = true;
    } else if (kw == "comment" || kw == "obj_info") {
      d.comments.push_back(trim(line.substr(kw.size())));
    } else if (kw == "element") {
      std::string name;
      long n = -1;
      ls >> name >> n;
      if (seen_vertex) throw InputError(src, line_no, "only a single vertex element is supported");
      if (name != "vertex") throw InputError(src, line_no, "expected a vertex element, got '" + name + "'");
      if (n < 0) throw InputError(src, line_no, "bad vertex count");
      d.count = static_cast<std::size_t>(n);
      in_vertex = seen_vertex = true;
    } else if (kw == "property") {
      if (!in_vertex) throw InputError(src, line_no, "property outside an element");
      std::string type, name;
      ls >> type >> name;
      if (type == "list") throw InputError(src, line_no, "list properties are not supported");
      const auto t = ply_type(type);
      if (!t || name.empty()) throw InputError(src, line_no, "bad property declaration");
      d.names.push_back(name);
      d.types.push_back(*t);
    } else if (!kw.empty()) {
      throw InputError(src, line_no, "unknown PLY header keyword '" + kw + "'");
    }
  }
  if (!seen_format) throw InputError(src, line_no, "PLY header has no format line");
  if (!seen_vertex) throw InputError(src, line_no, "PLY header has no vertex element");

  const std::size_t np = d.names.size();
  d.values.resize(d.count * np);
  if (binary) {
    std::size_t stride = 0;
    for (PlyType t : d.types) stride += ply_size(t);
    std::vector<unsigned char> buf(stride * d.count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
      throw InputError(src, line_no, "binary body truncated: expected " + std::to_string(d.count) + " vertices");
    for (std::size_t i = 0; i < d.count; ++i) {
      const unsigned char* p = buf.data() + i * stride;
      for (std::size_t j = 0; j < np; ++j) {
        d.values[i * np + j] = ply_value(d.types[j], p);
        p += ply_size(d.types[j]);
      }
    }
  } else {
    for (std::size_t i = 0; i < d.count; ++i) {
      if (!std::getline(in, line)) throw InputError(src, line_no + 1, "ascii body truncated");
      ++line_no;
      std::istringstream ls(line);
      for (std::size_t j = 0; j < np; ++j) {
        std::string tok;
        if (!(ls >> tok)) throw InputError(src, line_no, "too few values in vertex row");
        const auto v = to_double(tok);
        if (!v) throw InputError(src, line_no, "bad number '" + tok + "'");
        d.values[i * np + j] = *v;
      }
    }
  }
  return d;
}

void write_ply_header(std::ostream& out, bool ascii, std::size_t count, const std::vector<std::string>& comments,
                      const std::vector<std::pair<std::string, std::string>>& props) {
  out << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
  for (const std::string& c : comments) out << "comment " << c << "\n";
  out << "element vertex " << count << "\n";
  for (const auto& [type, name] : props) out << "property " << type << " " << name << "\n";
  out << "end_header\n";
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

std::optional<Vec3> parse_datum(const std::vector<std::string>& comments) {
  for (const std::string& c : comments) {
    std::istringstream ls(c);
    std::string kw;
    double x, y, z;
    if (ls >> kw && kw == "datum" && ls >> x >> y >> z) return Vec3(x, y, z);
  }
  return std::nullopt;
}

std::string datum_comment(const Vec3& d) {
  return "datum " + fmt(d.x()) + " " + fmt(d.y()) + " " + fmt(d.z());
}

}  // namespace

// ---- PLY ----

void write_semantic_ply(const fs::path& path, const SemanticPointCloud& cloud,
                        const std::vector<std::string>& comments) {
  auto out = open_out(path, true);
  std::vector<std::string> all{datum_comment(cloud.datum)};
  all.insert(all.end(), comments.begin(), comments.end());
  write_ply_header(out, false, cloud.size(), all,
                   {{"double", "x"}, {"double", "y"}, {"double", "z"}, {"uchar", "class"}, {"ushort", "support"}});
  for (const LabeledPoint& p : cloud.points) {
    put(out, p.position.x());
    put(out, p.position.y());
    put(out, p.position.z());
    put(out, p.cls);
    put(out, p.support);
  }
  if (!out) throw InputError("failed writing " + path.string());
}

SemanticPointCloud read_semantic_ply(const fs::path& path, std::vector<std::string>* comments) {
  const PlyData d = read_ply(path);
  const auto x = d.find("x"), y = d.find("y"), z = d.find("z"), c = d.find("class"), s = d.find("support");
  if (!x || !y || !z || !c) throw InputError(path.string() + ": labeled PLY needs x, y, z and class properties");
  SemanticPointCloud cloud;
  if (auto datum = parse_datum(d.comments)) cloud.datum = *datum;
  const std::size_t np = d.names.size();
  cloud.points.reserve(d.count);
  for (std::size_t i = 0; i < d.count; ++i) {
    const double* r = d.values.data() + i * np;
    const double cls = r[*c];
    if (cls < 0 || cls > 255 || cls != std::floor(cls))
      throw InputError(path.string() + ": vertex " + std::to_string(i) + " has an invalid class value");
    LabeledPoint p;
    p.position = {r[*x], r[*y], r[*z]};
    if (!p.position.allFinite())
      throw InputError(path.string() + ": vertex " + std::to_string(i) + " has a non-finite coordinate");
    p.cls = static_cast<ClassId>(cls);
    p.support = s ? static_cast<std::uint16_t>(std::clamp(r[*s], 0.0, 65535.0)) : 1;
    cloud.points.push_back(p);
  }
  if (comments) *comments = d.comments;
  return cloud;
}

void write_colored_ply(const fs::path& path, const ColoredPointCloud& cloud, bool ascii) {
  auto out = open_out(path, !ascii);
  write_ply_header(out, ascii, cloud.points.size(), {datum_comment(cloud.datum)},
                   {{"double", "x"}, {"double", "y"}, {"double", "z"}, {"uchar", "red"}, {"uchar", "green"},
                    {"uchar", "blue"}});
  for (const ColoredPoint& p : cloud.points) {
    if (ascii) {
      out << fmt(p.position.x()) << ' ' << fmt(p.position.y()) << ' ' << fmt(p.position.z()) << ' '
          << int(p.color[0]) << ' ' << int(p.color[1]) << ' ' << int(p.color[2]) << '\n';
    } else {
      put(out, p.position.x());
      put(out, p.position.y());
      put(out, p.position.z());
      for (int k = 0; k < 3; ++k) put(out, p.color[k]);
    }
  }
  if (!out) throw InputError("failed writing " + path.string());
}

ColoredPointCloud read_colored_ply(const fs::path& path) {
  const PlyData d = read_ply(path);
  const auto x = d.find("x"), y = d.find("y"), z = d.find("z");
  if (!x || !y || !z) throw InputError(path.string() + ": PLY needs x, y and z properties");
  const std::optional<std::size_t> rgb[3] = {d.find("red"), d.find("green"), d.find("blue")};
  ColoredPointCloud cloud;
  if (auto datum = parse_datum(d.comments)) cloud.datum = *datum;
  const std::size_t np = d.names.size();
  cloud.points.reserve(d.count);
  for (std::size_t i = 0; i < d.count; ++i) {
    const double* r = d.values.data() + i * np;
    ColoredPoint p;
    p.position = {r[*x], r[*y], r[*z]};
    if (!p.position.allFinite())
      throw InputError(path.string() + ": vertex " + std::to_string(i) + " has a non-finite coordinate");
    for (int k = 0; k < 3; ++k)
      p.color[k] = rgb[k] ? static_cast<std::uint8_t>(std::clamp(r[*rgb[k]], 0.0, 255.0)) : 0;
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_edge_map(const fs::path& path, const VoxelEdgeMap& map) {
  write_semantic_ply(path, map.as_cloud(),
                     {"voxel_size " + fmt(map.voxel_size), "input_voxels " + std::to_string(map.input_voxels)});
}

VoxelEdgeMap read_edge_map(const fs::path& path) {
  std::vector<std::string> comments;
  const SemanticPointCloud cloud = read_semantic_ply(path, &comments);
  VoxelEdgeMap map;
  map.datum = cloud.datum;
  bool have_size = false;
  for (const std::string& c : comments) {
    std::istringstream ls(c);
    std::string kw;
    ls >> kw;
    if (kw == "voxel_size") have_size = static_cast<bool>(ls >> map.voxel_size);
    if (kw == "input_voxels") ls >> map.input_voxels;
  }
  if (!have_size || !(map.voxel_size > 0.0))
    throw InputError(path.string() + ": edge map has no valid 'voxel_size' comment");
  map.voxels.reserve(cloud.size());
  for (const LabeledPoint& p : cloud.points) map.voxels.push_back({voxel_of(p.position, map.voxel_size), p.cls, p.support});
  std::sort(map.voxels.begin(), map.voxels.end(),
            [](const EdgeVoxel& a, const EdgeVoxel& b) { return a.key < b.key; });
  return map;
}

// ---- PNG ----

void write_mask_png(const fs::path& path, const SegmentationMask& mask) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(mask.width());
  img.height = static_cast<png_uint_32>(mask.height());
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, mask.data().data(), 0, nullptr))
    throw InputError("cannot write " + path.string() + ": " + img.message);
}

SegmentationMask read_mask_png(const fs::path& path, int num_classes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str()))
    throw InputError("cannot read mask " + path.string() + ": " + img.message);
  if (img.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA | PNG_FORMAT_FLAG_LINEAR)) {
    png_image_free(&img);
    throw InputError(path.string() + ": mask must be an 8-bit single-channel PNG");
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<ClassId> data(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, data.data(), 0, nullptr))
    throw InputError("cannot decode mask " + path.string() + ": " + img.message);
  SegmentationMask mask(static_cast<int>(img.width), static_cast<int>(img.height), std::move(data), num_classes);
  try {
    mask.validate();
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return mask;
}

// ---- CSV ----

std::optional<std::size_t> CsvTable::find_column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t CsvTable::column(const std::string& name) const {
  if (auto c = find_column(name)) return *c;
  throw InputError(source, 1, "missing column '" + name + "'");
}

const std::string& CsvTable::cell(const CsvRow& row, std::size_t col) const {
  if (col >= row.cells.size()) throw InputError(source, row.line, "row has too few columns");
  return row.cells[col];
}

double CsvTable::number(const CsvRow& row, std::size_t col) const {
  const std::string& s = cell(row, col);
  const auto v = to_double(s);
  if (!v || !std::isfinite(*v))
    throw InputError(source, row.line, "column '" + header[col] + "': '" + s + "' is not a finite number");
  return *v;
}

long CsvTable::integer(const CsvRow& row, std::size_t col) const {
  const std::string& s = cell(row, col);
  const auto v = to_long(s);
  if (!v) throw InputError(source, row.line, "column '" + header[col] + "': '" + s + "' is not an integer");
  return *v;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  t.source = source;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (!have_header) {
      t.header = split(s, ',');
      have_header = true;
      continue;
    }
    CsvRow row{line_no, split(s, ',')};
    if (row.cells.size() != t.header.size())
      throw InputError(source, line_no,
                       "expected " + std::to_string(t.header.size()) + " columns, got " +
                           std::to_string(row.cells.size()));
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw InputError(source, line_no, "CSV has no header row");
  return t;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_text(path), path.string()); }

// ---- cameras and views ----

std::map<std::string, CameraIntrinsics> read_intrinsics_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t id = t.column("id"), fx = t.column("fx"), fy = t.column("fy"), cx = t.column("cx"),
                    cy = t.column("cy"), w = t.column("width"), h = t.column("height");
  const char* dist_names[5] = {"k1", "k2", "k3", "p1", "p2"};
  std::map<std::string, CameraIntrinsics> out;
  for (const CsvRow& r : t.rows) {
    CameraIntrinsics c;
    c.fx = t.number(r, fx);
    c.fy = t.number(r, fy);
    c.cx = t.number(r, cx);
    c.cy = t.number(r, cy);
    c.width = static_cast<int>(t.integer(r, w));
    c.height = static_cast<int>(t.integer(r, h));
    for (int k = 0; k < 5; ++k)
      if (auto col = t.find_column(dist_names[k])) c.dist[k] = t.number(r, *col);
    try {
      c.validate();
    } catch (const InputError& e) {
      throw InputError(t.source, r.line, e.what());
    }
    const std::string& key = t.cell(r, id);
    if (!out.emplace(key, c).second) throw InputError(t.source, r.line, "duplicate intrinsics id '" + key + "'");
  }
  return out;
}

void write_intrinsics_csv(const fs::path& path, const std::map<std::string, CameraIntrinsics>& intr) {
  auto out = open_out(path);
  out << "id,fx,fy,cx,cy,width,height,k1,k2,k3,p1,p2\n";
  for (const auto& [id, c] : intr) {
    out << id << ',' << fmt(c.fx) << ',' << fmt(c.fy) << ',' << fmt(c.cx) << ',' << fmt(c.cy) << ',' << c.width
        << ',' << c.height;
    for (double d : c.dist) out << ',' << fmt(d);
    out << '\n';
  }
}

std::vector<ViewRecord> read_views_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t fid = t.column("frame_id"), img = t.column("image"), hcol = t.column("height_m"),
                    icol = t.column("intrinsics_id");
  const std::size_t c[3] = {t.column("cx_m"), t.column("cy_m"), t.column("cz_m")};
  std::size_t rc[9];
  for (int i = 0; i < 9; ++i) rc[i] = t.column("r" + std::to_string(i / 3) + std::to_string(i % 3));
  const fs::path base = path.parent_path();
  std::vector<ViewRecord> out;
  for (const CsvRow& r : t.rows) {
    ViewRecord v;
    v.line = r.line;
    v.frame_id = t.cell(r, fid);
    if (v.frame_id.empty()) throw InputError(t.source, r.line, "empty frame_id");
    auto need = [&](std::size_t col, const char* what) -> const std::string& {
      const std::string& s = t.cell(r, col);
      if (s.empty()) throw InputError(t.source, r.line, "frame '" + v.frame_id + "': missing " + what);
      return s;
    };
    const fs::path image = need(img, "image path");
    v.image = image.is_absolute() ? image : base / image;
    for (int a = 0; a < 3; ++a) {
      need(c[a], "camera center");
      v.center[a] = t.number(r, c[a]);
    }
    for (int i = 0; i < 9; ++i) {
      need(rc[i], "pose rotation");
      v.rotation(i / 3, i % 3) = t.number(r, rc[i]);
    }
    if (!is_rotation(v.rotation, 1e-6))
      throw InputError(t.source, r.line, "frame '" + v.frame_id + "': pose rotation is not orthonormal");
    v.height = t.number(r, hcol);
    v.intrinsics_id = need(icol, "intrinsics id");
    out.push_back(std::move(v));
  }
  return out;
}

void write_views_csv(const fs::path& path, const std::vector<ViewRecord>& views) {
  auto out = open_out(path);
  out << "frame_id,image,cx_m,cy_m,cz_m,r00,r01,r02,r10,r11,r12,r20,r21,r22,height_m,intrinsics_id\n";
  for (const ViewRecord& v : views) {
    out << v.frame_id << ',' << v.image.generic_string();
    for (int a = 0; a < 3; ++a) out << ',' << fmt(v.center[a]);
    for (int i = 0; i < 9; ++i) out << ',' << fmt(v.rotation(i / 3, i % 3));
    out << ',' << fmt(v.height) << ',' << v.intrinsics_id << '\n';
  }
}

namespace {

// Re-orthonormalizes a rotation read at reduced precision.
Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace

RigidPose view_world_to_camera(const ViewRecord& v) {
  return RigidPose(nearest_rotation(v.rotation), v.center).inverse();
}

ViewGeometry view_geometry(const ViewRecord& v, const CameraIntrinsics& intr) {
  ViewGeometry g;
  g.attitude = nearest_rotation(v.rotation);
  g.height = v.height;
  g.intrinsics = intr;
  g.prior = v.center.head<2>();
  return g;
}

std::map<std::string, TruthRecord> read_truth_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t fid = t.column("frame_id"), x = t.column("x_m"), y = t.column("y_m");
  const auto ds = t.find_column("dataset");
  std::map<std::string, TruthRecord> out;
  for (const CsvRow& r : t.rows) {
    TruthRecord rec;
    rec.position = {t.number(r, x), t.number(r, y)};
    if (ds) rec.dataset = t.cell(r, *ds);
    if (!out.emplace(t.cell(r, fid), rec).second)
      throw InputError(t.source, r.line, "duplicate frame_id '" + t.cell(r, fid) + "'");
  }
  return out;
}

void write_truth_csv(const fs::path& path, const std::vector<std::pair<std::string, TruthRecord>>& rows) {
  auto out = open_out(path);
  out << "frame_id,x_m,y_m,dataset\n";
  for (const auto& [id, rec] : rows)
    out << id << ',' << fmt(rec.position.x()) << ',' << fmt(rec.position.y()) << ',' << rec.dataset << '\n';
}

// ---- configs ----

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  kv.source = source;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string s = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InputError(source, line_no, "expected key=value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw InputError(source, line_no, "empty key");
    if (kv.has(key)) throw InputError(source, line_no, "duplicate key '" + key + "'");
    kv.values[key] = trim(s.substr(eq + 1));
    kv.lines[key] = line_no;
  }
  return kv;
}

KeyValues read_key_values(const fs::path& path) { return parse_key_values(read_text(path), path.string()); }

void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || trim(o.substr(0, eq)).empty())
      throw InputError("override '" + o + "' is not key=value");
    const std::string key = trim(o.substr(0, eq));
    kv.values[key] = trim(o.substr(eq + 1));
    kv.lines[key] = 0;
  }
}

namespace {

class KeyReader {
 public:
  explicit KeyReader(const KeyValues& kv) : kv_(kv) {}

  void number(const std::string& key, double& out) {
    if (const std::string* s = take(key)) {
      const auto v = to_double(*s);
      if (!v || !std::isfinite(*v)) fail(key, "'" + *s + "' is not a finite number");
      out = *v;
    }
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const std::string* s = take(key)) {
      const auto v = to_long(*s);
      if (!v) fail(key, "'" + *s + "' is not an integer");
      if (*v < static_cast<long>(std::numeric_limits<Int>::min()) ||
          static_cast<unsigned long>(*v) > static_cast<unsigned long>(std::numeric_limits<Int>::max()))
        fail(key, "value out of range");
      out = static_cast<Int>(*v);
    }
  }
  void list(const std::string& key, std::vector<double>& out) {
    if (const std::string* s = take(key)) {
      out.clear();
      for (const std::string& tok : split(*s, ',')) {
        const auto v = to_double(tok);
        if (!v) fail(key, "'" + tok + "' is not a number");
        out.push_back(*v);
      }
    }
  }
  const std::string* take(const std::string& key) {
    used_.push_back(key);
    auto it = kv_.values.find(key);
    return it == kv_.values.end() ? nullptr : &it->second;
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    auto it = kv_.lines.find(key);
    throw InputError(kv_.source, it == kv_.lines.end() ? 0 : it->second, key + ": " + what);
  }
  void finish() const {
    for (const auto& [key, value] : kv_.values)
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) fail(key, "unknown key");
  }
  /// Validation failures are reported against the config source.
  template <typename F>
  void validate(F&& f) const {
    try {
      f();
    } catch (const InputError& e) {
      throw InputError(kv_.source, 0, e.what());
    }
  }

 private:
  const KeyValues& kv_;
  std::vector<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

LossConfig loss_config_from(const KeyValues& kv, const fs::path& base_dir) {
  LossConfig cfg;
  KeyReader r(kv);
  r.number("delta", cfg.delta);
  r.number("d_max", cfg.d_max);
  r.number("lambda_f", cfg.lambda_f);
  r.number("lambda_r", cfg.lambda_r);
  if (const std::string* s = r.take("confusion"); s && !s->empty() && *s != "none")
    cfg.confusion = read_confusion_csv(resolve(base_dir, *s));
  if (const std::string* s = r.take("reverse_weighting")) {
    if (*s == "posterior") cfg.reverse_weighting = ReverseWeighting::Posterior;
    else if (*s == "row") cfg.reverse_weighting = ReverseWeighting::Row;
    else r.fail("reverse_weighting", "expected 'posterior' or 'row'");
  }
  r.finish();
  r.validate([&] { cfg.validate(); });
  return cfg;
}

SearchConfig search_config_from(const KeyValues& kv) {
  SearchConfig cfg;
  KeyReader r(kv);
  r.number("radius", cfg.radius);
  r.list("spacings", cfg.spacings);
  r.number("refine_halfwidth", cfg.refine_halfwidth);
  r.integer("gate_threshold", cfg.gate_threshold);
  r.integer("threads", cfg.threads);
  r.finish();
  r.validate([&] { cfg.validate(); });
  return cfg;
}

SceneSpec scene_spec_from(const KeyValues& kv) {
  SceneSpec s;
  KeyReader r(kv);
  r.integer("seed", s.seed);
  r.number("extent", s.extent);
  r.number("density", s.density);
  if (const std::string* g = r.take("ground_class")) {
    if (auto c = class_from_name(*g)) s.ground_class = *c;
    else if (auto v = to_long(*g); v && *v >= 0 && *v < kDefaultNumClasses) s.ground_class = static_cast<ClassId>(*v);
    else r.fail("ground_class", "unknown class '" + *g + "'");
  }
  r.integer("buildings", s.buildings);
  r.number("building_size_min", s.building_size_min);
  r.number("building_size_max", s.building_size_max);
  r.number("building_height_min", s.building_height_min);
  r.number("building_height_max", s.building_height_max);
  r.number("building_coverage", s.building_coverage);
  r.integer("strips", s.strips);
  r.number("strip_width_min", s.strip_width_min);
  r.number("strip_width_max", s.strip_width_max);
  r.integer("discs", s.discs);
  r.number("disc_radius_min", s.disc_radius_min);
  r.number("disc_radius_max", s.disc_radius_max);
  r.integer("vehicles", s.vehicles);
  r.number("altitude_min", s.altitude_min);
  r.number("altitude_max", s.altitude_max);
  r.finish();
  r.validate([&] { s.validate(); });
  return s;
}

CorruptionSpec corruption_spec_from(const KeyValues& kv, const fs::path& base_dir) {
  CorruptionSpec c;
  KeyReader r(kv);
  r.number("flip_rate", c.flip_rate);
  if (const std::string* s = r.take("confusion"); s && !s->empty() && *s != "none")
    c.confusion = read_confusion_csv(resolve(base_dir, *s));
  r.integer("flip_scale", c.flip_scale);
  r.number("boundary_jitter", c.boundary_jitter);
  r.number("dropout", c.dropout);
  r.finish();
  r.validate([&] { c.validate(); });
  return c;
}

// ---- cross-modal artifacts ----

void write_confusion_csv(const fs::path& path, const ConfusionMatrix& c) {
  auto out = open_out(path);
  for (int k = 0; k < c.size(); ++k) out << (k ? "," : "") << class_name(static_cast<ClassId>(k));
  out << '\n';
  for (int y = 0; y < c.size(); ++y) {
    for (int k = 0; k < c.size(); ++k) out << (k ? "," : "") << fmt(c(y, k));
    out << '\n';
  }
}

ConfusionMatrix read_confusion_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const auto k = static_cast<Eigen::Index>(t.header.size());
  if (static_cast<Eigen::Index>(t.rows.size()) != k)
    throw InputError(t.source, t.rows.empty() ? 1 : t.rows.back().line,
                     "confusion matrix needs " + std::to_string(k) + " rows, got " + std::to_string(t.rows.size()));
  Eigen::MatrixXd m(k, k);
  for (Eigen::Index y = 0; y < k; ++y)
    for (Eigen::Index j = 0; j < k; ++j)
      m(y, j) = t.number(t.rows[static_cast<std::size_t>(y)], static_cast<std::size_t>(j));
  try {
    return ConfusionMatrix(m);
  } catch (const InputError& e) {
    throw InputError(t.source, t.rows.front().line, e.what());
  }
}

void write_homography(const fs::path& path, const Homography& h) {
  auto out = open_out(path);
  for (int r = 0; r < 3; ++r) out << fmt(h.matrix()(r, 0)) << ' ' << fmt(h.matrix()(r, 1)) << ' ' << fmt(h.matrix()(r, 2)) << '\n';
}

Homography read_homography(const fs::path& path) {
  std::istringstream in(read_text(path));
  Mat3 m;
  std::string tok;
  for (int i = 0; i < 9; ++i) {
    if (!(in >> tok)) throw InputError(path.string() + ": homography needs 9 numbers");
    const auto v = to_double(tok);
    if (!v || !std::isfinite(*v)) throw InputError(path.string() + ": '" + tok + "' is not a finite number");
    m(i / 3, i % 3) = *v;
  }
  if (in >> tok) throw InputError(path.string() + ": trailing data after 9 numbers");
  return Homography(m);
}

CorrespondenceSet read_correspondences_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t sx = t.column("src_x"), sy = t.column("src_y"), dx = t.column("dst_x"), dy = t.column("dst_y");
  CorrespondenceSet out;
  for (const CsvRow& r : t.rows) out.push_back({{t.number(r, sx), t.number(r, sy)}, {t.number(r, dx), t.number(r, dy)}});
  return out;
}

// ---- results ----

Vec2 ResultRecord::position() const {
  return result ? Vec2(prior.x() + result->t_star.tx, prior.y() + result->t_star.ty) : prior;
}

std::string result_to_json_line(const ResultRecord& r) {
  nlohmann::json j;
  j["frame_id"] = r.frame_id;
  j["prior"] = {r.prior.x(), r.prior.y()};
  if (!r.result) {
    j["ok"] = false;
    j["error"] = r.error;
    return j.dump();
  }
  const LocalizationResult& res = *r.result;
  j["ok"] = true;
  j["t_star"] = {res.t_star.tx, res.t_star.ty};
  j["position"] = {r.position().x(), r.position().y()};
  j["loss"] = res.loss;
  j["forward"] = res.forward;
  j["reverse"] = res.reverse;
  j["edge_count"] = res.edge_count;
  j["gated"] = res.gated;
  j["gate_reason"] = res.gate_reason;
  nlohmann::json trace = nlohmann::json::array();
  for (const StageTrace& s : res.trace)
    trace.push_back({{"spacing", s.spacing}, {"best", {s.best.tx, s.best.ty}}, {"loss", s.loss}, {"candidates", s.candidates}});
  j["trace"] = trace;
  j["wall_time_s"] = res.wall_time_s;
  return j.dump();
}

ResultRecord result_from_json_line(const std::string& line, const std::string& source, std::size_t line_no) {
  ResultRecord r;
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    r.frame_id = j.at("frame_id").get<std::string>();
    if (j.contains("prior")) r.prior = {j["prior"].at(0).get<double>(), j["prior"].at(1).get<double>()};
    if (!j.at("ok").get<bool>()) {
      r.error = j.value("error", std::string());
      return r;
    }
    LocalizationResult res;
    res.t_star = {j.at("t_star").at(0).get<double>(), j.at("t_star").at(1).get<double>()};
    res.loss = j.at("loss").get<double>();
    res.forward = j.value("forward", 0.0);
    res.reverse = j.value("reverse", 0.0);
    res.edge_count = j.at("edge_count").get<std::size_t>();
    res.gated = j.at("gated").get<bool>();
    res.gate_reason = j.value("gate_reason", std::string());
    if (j.contains("trace"))
      for (const auto& s : j["trace"])
        res.trace.push_back({s.at("spacing").get<double>(),
                             {s.at("best").at(0).get<double>(), s.at("best").at(1).get<double>()},
                             s.at("loss").get<double>(),
                             s.at("candidates").get<std::size_t>()});
    res.wall_time_s = j.value("wall_time_s", 0.0);
    r.result = res;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(source, line_no, std::string("bad result record: ") + e.what());
  }
  return r;
}

std::vector<ResultRecord> read_results_jsonl(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<ResultRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    out.push_back(result_from_json_line(line, path.string(), line_no));
  }
  return out;
}

// ---- tables and plots ----

void write_summary_csv(const fs::path& path, const std::vector<SummaryRow>& rows) {
  auto out = open_out(path);
  out << "# errors in metres; std uses the population convention; pct columns are fractions\n";
  out << "dataset,N,RMSE_x,RMSE_y,RMSE_2D,median_2D,P75_2D,pct_lt_2m,pct_gt_5m,bias_x,bias_y\n";
  for (const SummaryRow& r : rows) {
    const TrajectoryMetrics& m = r.metrics;
    out << r.label << ',' << m.n << ',' << fmt(m.rmse_x) << ',' << fmt(m.rmse_y) << ',' << fmt(m.rmse_2d) << ','
        << fmt(m.median_2d) << ',' << fmt(m.p75_2d) << ',' << fmt(m.pct_under_2m) << ',' << fmt(m.pct_over_5m)
        << ',' << fmt(m.bias.x()) << ',' << fmt(m.bias.y()) << '\n';
  }
}

void write_bins_csv(const fs::path& path, const std::vector<EdgeBin>& bins) {
  auto out = open_out(path);
  out << "# std uses the population convention\n";
  out << "bin_lo,bin_hi,mean_2d,std_2d,N\n";
  for (const EdgeBin& b : bins)
    out << b.lo << ',' << b.hi << ',' << fmt(b.mean) << ',' << fmt(b.std) << ',' << b.n << '\n';
}

void write_gate_csv(const fs::path& path, const std::vector<GateRow>& rows) {
  auto out = open_out(path);
  out << "threshold,retained_fraction,N,RMSE_2D,median_2D,P75_2D\n";
  for (const GateRow& r : rows) {
    out << r.threshold << ',' << fmt(r.retained_fraction);
    if (r.metrics) out << ',' << r.metrics->n << ',' << fmt(r.metrics->rmse_2d) << ',' << fmt(r.metrics->median_2d) << ',' << fmt(r.metrics->p75_2d);
    else out << ",0,,,";
    out << '\n';
  }
}

namespace {

struct Axis {
  double lo = 0.0, hi = 1.0;
  void fit(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

constexpr double kW = 640, kH = 480, kPad = 50;

std::string svg_open(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n"
     << "<text x=\"15\" y=\"" << kH / 2 << "\" font-size=\"12\" transform=\"rotate(-90 15 " << kH / 2 << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n"
     << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad << "\" height=\"" << kH - 2 * kPad
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  return os.str();
}

std::string axis_ticks(const Axis& x, const Axis& y) {
  std::ostringstream os;
  os << std::setprecision(4);
  os << "<text x=\"" << kPad << "\" y=\"" << kH - kPad + 15 << "\" font-size=\"10\">" << x.lo << "</text>\n";
  os << "<text x=\"" << kW - kPad << "\" y=\"" << kH - kPad + 15 << "\" font-size=\"10\" text-anchor=\"end\">" << x.hi << "</text>\n";
  os << "<text x=\"" << kPad - 4 << "\" y=\"" << kH - kPad << "\" font-size=\"10\" text-anchor=\"end\">" << y.lo << "</text>\n";
  os << "<text x=\"" << kPad - 4 << "\" y=\"" << kPad + 10 << "\" font-size=\"10\" text-anchor=\"end\">" << y.hi << "</text>\n";
  return os.str();
}

}  // namespace

void write_error_scatter_svg(const fs::path& path, const std::vector<FrameError>& errors, bool bias_correct) {
  const std::vector<double> norms = corrected_norms(errors, bias_correct);
  Axis x{0, 1}, y{0, 1};
  for (std::size_t i = 0; i < errors.size(); ++i) {
    x.fit(static_cast<double>(errors[i].edge_count));
    y.fit(norms[i]);
  }
  auto out = open_out(path);
  out << svg_open("2D error vs edge count", "edge pixels", "error (m)") << axis_ticks(x, y);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double px = kPad + (static_cast<double>(errors[i].edge_count) - x.lo) / (x.hi - x.lo) * (kW - 2 * kPad);
    const double py = kH - kPad - (norms[i] - y.lo) / (y.hi - y.lo) * (kH - 2 * kPad);
    out << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"2.5\" fill=\""
        << (errors[i].gated ? "#d62728" : "#1f77b4") << "\"/>\n";
  }
  out << "</svg>\n";
}

void write_trajectory_svg(const fs::path& path, const std::vector<FrameError>& errors) {
  if (errors.empty()) throw InputError("trajectory plot needs at least one frame");
  Axis x{errors[0].truth.x(), errors[0].truth.x()}, y{errors[0].truth.y(), errors[0].truth.y()};
  for (const FrameError& e : errors) {
    x.fit(e.truth.x()), x.fit(e.estimate.x());
    y.fit(e.truth.y()), y.fit(e.estimate.y());
  }
  // equal aspect so plan-view shapes are not distorted
  const double span = std::max({x.hi - x.lo, y.hi - y.lo, 1.0});
  const double cx = (x.lo + x.hi) / 2, cy = (y.lo + y.hi) / 2;
  x = {cx - span / 2, cx + span / 2};
  y = {cy - span / 2, cy + span / 2};
  auto map = [&](const Vec2& p) {
    return Vec2(kPad + (p.x() - x.lo) / span * (kW - 2 * kPad), kH - kPad - (p.y() - y.lo) / span * (kH - 2 * kPad));
  };
  auto polyline = [&](bool est, const char* colour) {
    std::ostringstream os;
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (const FrameError& e : errors) {
      const Vec2 p = map(est ? e.estimate : e.truth);
      os << p.x() << ',' << p.y() << ' ';
    }
    os << "\"/>\n";
    return os.str();
  };
  auto out = open_out(path);
  out << svg_open("trajectory (black: truth, red: estimate)", "x (m)", "y (m)") << axis_ticks(x, y)
      << polyline(false, "black") << polyline(true, "#d62728") << "</svg>\n";
}

// ---- misc ----

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path, true);
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

}  // namespace semloc::io
