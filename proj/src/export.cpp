#include "voxens/export.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace voxens {

namespace fs = std::filesystem;
using nlohmann::json;

// -- little-endian helpers ----------------------------------------------------

namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) fail(ErrorKind::Format, "truncated file " + path.string());
  return to_little(v);
}

std::ofstream open_out(const fs::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  return in;
}

}  // namespace

// -- PLY ----------------------------------------------------------------------

PlyMode parse_ply_mode(const std::string& name) {
  if (name == "ascii") return PlyMode::Ascii;
  if (name == "binary_le" || name == "binary_little_endian") return PlyMode::BinaryLittleEndian;
  fail(ErrorKind::Config, "unknown PLY mode '" + name + "'");
}

void write_ply(const PointSet& ps, const fs::path& path, PlyMode mode) {
  validate_points(ps);
  const bool colored = !ps.empty() && std::all_of(ps.begin(), ps.end(), [](const GridPoint& p) { return p.color.has_value(); });
  auto out = open_out(path, mode == PlyMode::BinaryLittleEndian);
  out << "ply\n"
      << (mode == PlyMode::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n")
      << "element vertex " << ps.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property float density\nproperty float uncertainty\n";
  if (colored) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";

  const auto to_byte = [](double c) { return static_cast<unsigned char>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); };
  char line[256];
  for (const auto& p : ps) {
    const float v[5] = {static_cast<float>(p.position[0]), static_cast<float>(p.position[1]),
                        static_cast<float>(p.position[2]), static_cast<float>(p.density),
                        static_cast<float>(p.uncertainty)};
    if (mode == PlyMode::Ascii) {
      int n = std::snprintf(line, sizeof line, "%.9g %.9g %.9g %.9g %.9g", v[0], v[1], v[2], v[3], v[4]);
      if (colored)
        n += std::snprintf(line + n, sizeof line - n, " %u %u %u", to_byte((*p.color)[0]), to_byte((*p.color)[1]),
                           to_byte((*p.color)[2]));
      out << line << '\n';
    } else {
      for (float f : v) put(out, f);
      if (colored)
        for (int c = 0; c < 3; ++c) put(out, to_byte((*p.color)[c]));
    }
  }
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
};

std::size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  fail(ErrorKind::Format, "unsupported PLY property type '" + t + "'");
}

double read_binary_value(std::istream& in, const std::string& t, const fs::path& path) {
  if (t == "char" || t == "int8") return get<std::int8_t>(in, path);
  if (t == "uchar" || t == "uint8") return get<std::uint8_t>(in, path);
  if (t == "short" || t == "int16") return get<std::int16_t>(in, path);
  if (t == "ushort" || t == "uint16") return get<std::uint16_t>(in, path);
  if (t == "int" || t == "int32") return get<std::int32_t>(in, path);
  if (t == "uint" || t == "uint32") return get<std::uint32_t>(in, path);
  if (t == "float" || t == "float32") return get<float>(in, path);
  return get<double>(in, path);
}

}  // namespace

PointSet read_ply(const fs::path& path) {
  auto in = open_in(path, true);
  std::string line;
  std::getline(in, line);
  if (line != "ply") fail(ErrorKind::Format, path.string() + " is not a PLY file");
  bool ascii = false;
  std::size_t count = 0;
  bool in_vertex = false;
  std::vector<PlyProperty> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii") ascii = true;
      else if (fmt != "binary_little_endian") fail(ErrorKind::Format, "unsupported PLY format '" + fmt + "'");
    } else if (kw == "element") {
      std::string name;
      ss >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ss >> count;
      else if (props.empty()) fail(ErrorKind::Format, "PLY element '" + name + "' before vertex is unsupported");
    } else if (kw == "property" && in_vertex) {
      PlyProperty p;
      ss >> p.type;
      if (p.type == "list") fail(ErrorKind::Format, "list properties on vertices are unsupported");
      ss >> p.name;
      ply_type_size(p.type);
      props.push_back(p);
    }
  }
  if (!in) fail(ErrorKind::Format, "truncated PLY header in " + path.string());

  PointSet ps;
  ps.reserve(count);
  std::vector<double> vals(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < props.size(); ++k) {
      if (ascii) {
        if (!(in >> vals[k])) fail(ErrorKind::Format, "truncated PLY body in " + path.string());
        // Decimal text of a float property names that float, not the nearby double.
        if (ply_type_size(props[k].type) == 4 && props[k].type.starts_with("float"))
          vals[k] = static_cast<float>(vals[k]);
      } else {
        vals[k] = read_binary_value(in, props[k].type, path);
      }
    }
    GridPoint p;
    Rgb color = Rgb::Zero();
    int color_channels = 0;
    for (std::size_t k = 0; k < props.size(); ++k) {
      const auto& n = props[k].name;
      if (n == "x") p.position[0] = vals[k];
      else if (n == "y") p.position[1] = vals[k];
      else if (n == "z") p.position[2] = vals[k];
      else if (n == "density") p.density = vals[k];
      else if (n == "uncertainty") p.uncertainty = vals[k];
      else if (n == "red") color[0] = vals[k] / 255.0, ++color_channels;
      else if (n == "green") color[1] = vals[k] / 255.0, ++color_channels;
      else if (n == "blue") color[2] = vals[k] / 255.0, ++color_channels;
    }
    if (color_channels == 3) p.color = color;
    ps.push_back(p);
  }
  return ps;
}

// -- snapshots ------------------------------------------------------------------

namespace {

struct SnapshotHeader {
  std::uint32_t res = 0;
  Cube bbox;
  std::uint32_t extra = 0;
};

void write_header(std::ostream& out, const char* magic, int res, const Cube& bbox, std::uint32_t extra) {
  out.write(magic, 4);
  put<std::uint32_t>(out, kSnapshotVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(res));
  for (int a = 0; a < 3; ++a) put<float>(out, static_cast<float>(bbox.min[a]));
  put<float>(out, static_cast<float>(bbox.edge));
  put<std::uint32_t>(out, extra);
}

SnapshotHeader read_header(std::istream& in, const char* magic, const fs::path& path) {
  char m[4];
  if (!in.read(m, 4) || std::memcmp(m, magic, 4) != 0)
    fail(ErrorKind::Format, path.string() + ": bad magic (expected " + std::string(magic, 4) + ")");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kSnapshotVersion)
    fail(ErrorKind::Format, path.string() + ": unsupported snapshot version " + std::to_string(version));
  SnapshotHeader h;
  h.res = get<std::uint32_t>(in, path);
  if (h.res < 2 || h.res > 4096) fail(ErrorKind::Format, path.string() + ": invalid resolution");
  for (int a = 0; a < 3; ++a) h.bbox.min[a] = get<float>(in, path);
  h.bbox.edge = get<float>(in, path);
  h.extra = get<std::uint32_t>(in, path);
  return h;
}

void write_array(std::ostream& out, const std::vector<double>& v) {
  for (double x : v) put<float>(out, static_cast<float>(x));
}

std::vector<double> read_array(std::istream& in, std::size_t n, const fs::path& path) {
  std::vector<double> v(n);
  for (auto& x : v) x = get<float>(in, path);
  return v;
}

std::size_t cube_count(std::uint32_t res) { return static_cast<std::size_t>(res) * res * res; }

}  // namespace

void save_field(const VoxelField& field, const fs::path& path) {
  auto out = open_out(path, true);
  write_header(out, "VXF1", field.res, field.bbox, 0);
  write_array(out, field.density_raw);
  write_array(out, field.color);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

VoxelField load_field(const fs::path& path) {
  auto in = open_in(path, true);
  const auto h = read_header(in, "VXF1", path);
  VoxelField f;
  f.bbox = h.bbox;
  f.res = static_cast<int>(h.res);
  f.density_raw = read_array(in, cube_count(h.res), path);
  f.color = read_array(in, 3 * cube_count(h.res), path);
  return f;
}

void save_grid(const DensityGrid& grid, const fs::path& path) {
  auto out = open_out(path, true);
  write_header(out, "VXG1", grid.res, grid.bbox, 0);
  write_array(out, grid.values);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

DensityGrid load_grid(const fs::path& path) {
  auto in = open_in(path, true);
  const auto h = read_header(in, "VXG1", path);
  DensityGrid g;
  g.bbox = h.bbox;
  g.res = static_cast<int>(h.res);
  g.values = read_array(in, cube_count(h.res), path);
  return g;
}

void save_ensemble(const EnsembleGrid& eg, const fs::path& path) {
  auto out = open_out(path, true);
  write_header(out, "VXE1", eg.res, eg.bbox, static_cast<std::uint32_t>(eg.members));
  write_array(out, eg.mean);
  write_array(out, eg.uncertainty);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

EnsembleGrid load_ensemble(const fs::path& path) {
  auto in = open_in(path, true);
  const auto h = read_header(in, "VXE1", path);
  EnsembleGrid eg;
  eg.bbox = h.bbox;
  eg.res = static_cast<int>(h.res);
  eg.members = static_cast<int>(h.extra);
  eg.mean = read_array(in, cube_count(h.res), path);
  eg.uncertainty = read_array(in, cube_count(h.res), path);
  return eg;
}

// -- report -------------------------------------------------------------------

namespace {

json real_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json optional_json(const std::optional<double>& v) { return v ? real_json(*v) : json("n/a"); }

double real_from(const json& j, const std::string& name) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    fail(ErrorKind::Format, "field '" + name + "' holds an invalid number '" + s + "'");
  }
  if (!j.is_number()) fail(ErrorKind::Format, "field '" + name + "' must be a number");
  return j.get<double>();
}

std::optional<double> optional_from(const json& j, const std::string& name) {
  if (j.is_string() && j.get<std::string>() == "n/a") return std::nullopt;
  return real_from(j, name);
}

const json& field(const json& obj, const std::string& name, const std::string& where = "") {
  const auto it = obj.find(name);
  if (it == obj.end()) fail(ErrorKind::Format, "missing required field '" + where + name + "'");
  return *it;
}

template <typename T>
T typed(const json& obj, const std::string& name, const std::string& where = "") {
  try {
    return field(obj, name, where).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::Format, "field '" + where + name + "' has the wrong type");
  }
}

json artifacts_json(const ArtifactReport& a) {
  return {{"surface_eps", a.surface_eps},
          {"kept_total", a.kept_total},
          {"removed_total", a.removed_total},
          {"kept_artifacts", a.kept_artifacts},
          {"removed_artifacts", a.removed_artifacts},
          {"kept_surface", a.kept_surface},
          {"removed_surface", a.removed_surface},
          {"kept_artifact_fraction", a.kept_artifact_fraction},
          {"removed_artifact_fraction", a.removed_artifact_fraction},
          {"surface_recall", optional_json(a.surface_recall)},
          {"enrichment", optional_json(a.enrichment)}};
}

ArtifactReport artifacts_from(const json& j) {
  const std::string w = "artifacts.";
  ArtifactReport a;
  a.surface_eps = real_from(field(j, "surface_eps", w), "surface_eps");
  a.kept_total = typed<std::size_t>(j, "kept_total", w);
  a.removed_total = typed<std::size_t>(j, "removed_total", w);
  a.kept_artifacts = typed<std::size_t>(j, "kept_artifacts", w);
  a.removed_artifacts = typed<std::size_t>(j, "removed_artifacts", w);
  a.kept_surface = typed<std::size_t>(j, "kept_surface", w);
  a.removed_surface = typed<std::size_t>(j, "removed_surface", w);
  a.kept_artifact_fraction = real_from(field(j, "kept_artifact_fraction", w), "kept_artifact_fraction");
  a.removed_artifact_fraction = real_from(field(j, "removed_artifact_fraction", w), "removed_artifact_fraction");
  a.surface_recall = optional_from(field(j, "surface_recall", w), "surface_recall");
  a.enrichment = optional_from(field(j, "enrichment", w), "enrichment");
  return a;
}

json robustness_json(const RobustnessReport& r) {
  return {{"density_threshold", r.density_threshold},
          {"surface_eps", r.surface_eps},
          {"member_artifacts", r.member_artifacts},
          {"member_points", r.member_points},
          {"ensemble_artifacts", r.ensemble_artifacts},
          {"ensemble_points", r.ensemble_points}};
}

RobustnessReport robustness_from(const json& j) {
  const std::string w = "robustness.";
  RobustnessReport r;
  r.density_threshold = typed<double>(j, "density_threshold", w);
  r.surface_eps = typed<double>(j, "surface_eps", w);
  r.member_artifacts = typed<std::vector<std::size_t>>(j, "member_artifacts", w);
  r.member_points = typed<std::vector<std::size_t>>(j, "member_points", w);
  r.ensemble_artifacts = typed<std::size_t>(j, "ensemble_artifacts", w);
  r.ensemble_points = typed<std::size_t>(j, "ensemble_points", w);
  return r;
}

const std::set<std::string> kReportFields = {
    "schema_version", "baseline", "per_view_psnr", "mean_psnr", "inf_views", "member_mean_psnr",
    "mU_delta", "m_mean_delta", "summary_count", "mU_delta_all", "m_mean_delta_all", "point_counts",
    "uncertainty_threshold", "gimbal_fallbacks", "artifacts", "robustness", "config", "provenance", "outputs"};

}  // namespace

json report_to_json(const MetricsReport& r) {
  json per_view = json::array();
  for (double v : r.per_view_psnr) per_view.push_back(real_json(v));
  json member = json::array();
  for (double v : r.member_mean_psnr) member.push_back(real_json(v));
  return {{"schema_version", r.schema_version},
          {"baseline", r.baseline},
          {"per_view_psnr", per_view},
          {"mean_psnr", real_json(r.mean_psnr)},
          {"inf_views", r.inf_views},
          {"member_mean_psnr", member},
          {"mU_delta", r.mU_delta},
          {"m_mean_delta", r.m_mean_delta},
          {"summary_count", r.summary_count},
          {"mU_delta_all", r.mU_delta_all},
          {"m_mean_delta_all", r.m_mean_delta_all},
          {"point_counts",
           {{"total_grid", r.point_counts.total_grid},
            {"above_threshold", r.point_counts.above_threshold},
            {"kept", r.point_counts.kept},
            {"removed", r.point_counts.removed}}},
          {"uncertainty_threshold", r.uncertainty_threshold},
          {"gimbal_fallbacks", r.gimbal_fallbacks},
          {"artifacts", r.artifacts ? artifacts_json(*r.artifacts) : json(nullptr)},
          {"robustness", r.robustness ? robustness_json(*r.robustness) : json(nullptr)},
          {"config", r.config},
          {"provenance",
           {{"member_seeds", r.provenance.member_seeds},
            {"noise_seed", r.provenance.noise_seed},
            {"members", r.provenance.members},
            {"grid_res", r.provenance.grid_res},
            {"started", r.provenance.started},
            {"finished", r.provenance.finished}}},
          {"outputs", r.outputs}};
}

MetricsReport report_from_json(const json& doc, std::vector<std::string>* warnings) {
  if (!doc.is_object()) fail(ErrorKind::Format, "report must be a single JSON object");
  MetricsReport r;
  r.schema_version = typed<int>(doc, "schema_version");
  if (r.schema_version != kReportSchemaVersion)
    fail(ErrorKind::Format, "unsupported report schema_version " + std::to_string(r.schema_version) + " (expected " +
                                std::to_string(kReportSchemaVersion) + ")");
  for (const auto& [key, _] : doc.items()) {
    if (kReportFields.count(key)) continue;
    const std::string msg = "ignoring unknown report field '" + key + "'";
    if (warnings) warnings->push_back(msg);
    else std::cerr << "warning: " << msg << '\n';
  }
  r.baseline = typed<bool>(doc, "baseline");
  for (const auto& v : field(doc, "per_view_psnr")) r.per_view_psnr.push_back(real_from(v, "per_view_psnr"));
  r.mean_psnr = real_from(field(doc, "mean_psnr"), "mean_psnr");
  r.inf_views = typed<int>(doc, "inf_views");
  for (const auto& v : field(doc, "member_mean_psnr")) r.member_mean_psnr.push_back(real_from(v, "member_mean_psnr"));
  r.mU_delta = real_from(field(doc, "mU_delta"), "mU_delta");
  r.m_mean_delta = real_from(field(doc, "m_mean_delta"), "m_mean_delta");
  r.summary_count = typed<std::size_t>(doc, "summary_count");
  r.mU_delta_all = real_from(field(doc, "mU_delta_all"), "mU_delta_all");
  r.m_mean_delta_all = real_from(field(doc, "m_mean_delta_all"), "m_mean_delta_all");
  const auto& pc = field(doc, "point_counts");
  r.point_counts.total_grid = typed<std::size_t>(pc, "total_grid", "point_counts.");
  r.point_counts.above_threshold = typed<std::size_t>(pc, "above_threshold", "point_counts.");
  r.point_counts.kept = typed<std::size_t>(pc, "kept", "point_counts.");
  r.point_counts.removed = typed<std::size_t>(pc, "removed", "point_counts.");
  r.uncertainty_threshold = real_from(field(doc, "uncertainty_threshold"), "uncertainty_threshold");
  r.gimbal_fallbacks = typed<std::size_t>(doc, "gimbal_fallbacks");
  if (const auto& a = field(doc, "artifacts"); !a.is_null()) r.artifacts = artifacts_from(a);
  if (const auto& b = field(doc, "robustness"); !b.is_null()) r.robustness = robustness_from(b);
  r.config = field(doc, "config");
  const auto& pv = field(doc, "provenance");
  r.provenance.member_seeds = typed<std::vector<std::uint64_t>>(pv, "member_seeds", "provenance.");
  r.provenance.noise_seed = typed<std::uint64_t>(pv, "noise_seed", "provenance.");
  r.provenance.members = typed<int>(pv, "members", "provenance.");
  r.provenance.grid_res = typed<int>(pv, "grid_res", "provenance.");
  r.provenance.started = typed<std::string>(pv, "started", "provenance.");
  r.provenance.finished = typed<std::string>(pv, "finished", "provenance.");
  r.outputs = typed<std::map<std::string, std::string>>(doc, "outputs");
  if (r.point_counts.kept + r.point_counts.removed != r.point_counts.above_threshold)
    fail(ErrorKind::Format, "point_counts are inconsistent: kept + removed != above_threshold");
  return r;
}

void write_report(const MetricsReport& report, const fs::path& path) {
  auto out = open_out(path, false);
  out << report_to_json(report).dump(2) << '\n';
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

MetricsReport read_report(const fs::path& path, std::vector<std::string>* warnings) {
  auto in = open_in(path, false);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "malformed report " + path.string() + ": " + e.what());
  }
  return report_from_json(doc, warnings);
}

}  // namespace voxens
