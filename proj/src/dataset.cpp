#include "voxens/dataset.hpp"

#include "png_io.hpp"
#include "parallel.hpp"
#include "voxens/field.hpp"
#include "voxens/perturb.hpp"

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace voxens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kOrthoExact = 1e-9;
constexpr double kOrthoRepair = 1e-6;

double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

Vec3 vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) fail(ErrorKind::Format, what + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

/// World-from-camera rotation whose -z axis points from `eye` to `target`.
Mat3 look_at_rotation(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 up = Vec3::UnitZ();
  if (forward.cross(up).norm() < 1e-9) up = Vec3::UnitY();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 cam_up = right.cross(forward);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = cam_up;
  r.col(2) = -forward;
  return r;
}

}  // namespace

Ray CameraPose::pixel_ray(double px, double py) const {
  const Vec3 dir_cam((px - 0.5 * width) / focal_px, -(py - 0.5 * height) / focal_px, -1.0);
  Ray ray;
  ray.origin = translation;
  ray.direction = (rotation * dir_cam).normalized();
  ray.t_near = 0.0;
  ray.t_far = kInf;
  return ray;
}

void validate_pose(const CameraPose& pose) {
  require(pose.rotation.allFinite() && pose.translation.allFinite(), "pose contains non-finite values");
  require(orthonormality_error(pose.rotation) <= kOrthoExact, "pose rotation is not orthonormal");
  const double det = pose.rotation.determinant();
  require(std::abs(det - 1.0) <= kOrthoExact, "pose rotation determinant is not +1");
  require(pose.focal_px > 0.0 && std::isfinite(pose.focal_px), "focal_px must be positive");
  require(pose.width >= 1 && pose.height >= 1, "image size must be positive");
}

double focal_from_angle(double camera_angle_x, int width) { return width / (2.0 * std::tan(0.5 * camera_angle_x)); }

double angle_from_focal(double focal_px, int width) { return 2.0 * std::atan(width / (2.0 * focal_px)); }

ImageBuffer::ImageBuffer(int w, int h, const Rgb& fill) : width(w), height(h), pixels(3 * static_cast<std::size_t>(w) * h) {
  for (std::size_t p = 0; p < pixel_count(); ++p)
    for (int c = 0; c < 3; ++c) pixels[3 * p + c] = fill[c];
}

void quantize_8bit(ImageBuffer& image) {
  for (double& v : image.pixels) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

std::vector<CameraPose> Dataset::poses() const {
  std::vector<CameraPose> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.pose);
  return out;
}

std::vector<ImageBuffer> Dataset::images() const {
  std::vector<ImageBuffer> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.image);
  return out;
}

void validate_dataset(const Dataset& dataset) {
  require(!dataset.frames.empty(), "no frames");
  require(dataset.scene_bbox.edge > 0.0, "scene bbox edge must be positive");
  const int w = dataset.frames.front().image.width;
  const int h = dataset.frames.front().image.height;
  for (const auto& f : dataset.frames) {
    validate_pose(f.pose);
    require(f.image.width == w && f.image.height == h, "image dimension mismatch across frames");
    require(f.image.pixels.size() == 3 * f.image.pixel_count(), "image pixel count mismatch");
    require(f.pose.width == w && f.pose.height == h, "pose and image sizes differ");
  }
}

// -- manifest I/O --------------------------------------------------------------

Dataset load_dataset(const fs::path& path) {
  const fs::path manifest = path / "scene.json";
  std::ifstream in(manifest);
  if (!in) fail(ErrorKind::Io, "missing manifest " + manifest.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "malformed manifest: " + std::string(e.what()));
  }

  Dataset ds;
  try {
    if (doc.contains("background")) ds.background = vec_from_json(doc["background"], "background");
    if (doc.contains("bbox")) {
      ds.scene_bbox.min = vec_from_json(doc["bbox"].at("min"), "bbox.min");
      ds.scene_bbox.edge = doc["bbox"].at("edge").get<double>();
    } else {
      // NeRF-synthetic manifests carry no bbox; their objects fit in [-1.5, 1.5]^3.
      ds.scene_bbox = Cube{Vec3::Constant(-1.5), 3.0};
    }
    const double angle = doc.at("camera_angle_x").get<double>();
    const auto& frames = doc.at("frames");
    if (!frames.is_array()) fail(ErrorKind::Format, "frames must be an array");

    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
      const auto& jf = frames[fi];
      const auto& m = jf.at("transform_matrix");
      if (!m.is_array() || m.size() != 4) fail(ErrorKind::Format, "malformed matrix: transform_matrix must be 4x4");
      Eigen::Matrix4d t;
      for (int r = 0; r < 4; ++r) {
        if (!m[r].is_array() || m[r].size() != 4)
          fail(ErrorKind::Format, "malformed matrix: transform_matrix must be 4x4");
        for (int c = 0; c < 4; ++c) t(r, c) = m[r][c].get<double>();
      }
      Mat3 rot = t.topLeftCorner<3, 3>();
      if (rot.determinant() < 0.0) fail(ErrorKind::Format, "improper rotation in frame " + std::to_string(fi));
      const double err = std::max(orthonormality_error(rot), std::abs(rot.determinant() - 1.0));
      if (err > kOrthoRepair) fail(ErrorKind::Format, "non-orthonormal rotation in frame " + std::to_string(fi));
      if (err > kOrthoExact) rot = orthonormalize(rot);

      fs::path file = path / jf.at("file_path").get<std::string>();
      if (!fs::exists(file) && !file.has_extension()) file += ".png";
      Frame frame;
      frame.image = detail::read_png(file, ds.background);
      frame.pose.rotation = rot;
      frame.pose.translation = t.topRightCorner<3, 1>();
      frame.pose.width = frame.image.width;
      frame.pose.height = frame.image.height;
      frame.pose.focal_px = focal_from_angle(angle, frame.image.width);
      if (!ds.frames.empty() && (frame.image.width != ds.frames[0].image.width ||
                                 frame.image.height != ds.frames[0].image.height))
        fail(ErrorKind::Format, "image dimension mismatch in frame " + std::to_string(fi));
      ds.frames.push_back(std::move(frame));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "malformed manifest: " + std::string(e.what()));
  }
  if (ds.frames.empty()) fail(ErrorKind::Format, "manifest lists no frames");
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& path) {
  validate_dataset(dataset);
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + path.string() + ": " + ec.message());

  const auto& first = dataset.frames.front().pose;
  json doc;
  doc["camera_angle_x"] = angle_from_focal(first.focal_px, first.width);
  doc["background"] = vec_json(dataset.background);
  doc["bbox"] = {{"min", vec_json(dataset.scene_bbox.min)}, {"edge", dataset.scene_bbox.edge}};
  json frames = json::array();
  for (std::size_t i = 0; i < dataset.frames.size(); ++i) {
    const auto& f = dataset.frames[i];
    char name[32];
    std::snprintf(name, sizeof name, "r_%03zu.png", i);
    detail::write_png(f.image, path / name);
    json m = json::array();
    for (int r = 0; r < 4; ++r) {
      json row = json::array();
      for (int c = 0; c < 4; ++c) {
        if (r == 3) row.push_back(c == 3 ? 1.0 : 0.0);
        else row.push_back(c < 3 ? f.pose.rotation(r, c) : f.pose.translation[r]);
      }
      m.push_back(row);
    }
    frames.push_back({{"file_path", std::string("./") + name}, {"transform_matrix", m}});
  }
  doc["frames"] = frames;
  std::ofstream out(path / "scene.json");
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorKind::Io, "cannot write manifest in " + path.string());
}

// -- rigs ----------------------------------------------------------------------

RigKind parse_rig_kind(const std::string& name) {
  if (name == "full_sphere") return RigKind::FullSphere;
  if (name == "upper_hemisphere") return RigKind::UpperHemisphere;
  if (name == "one_sided_half_hemisphere") return RigKind::OneSidedHalfHemisphere;
  fail(ErrorKind::Config, "unknown rig kind '" + name + "'");
}

std::string to_string(RigKind kind) {
  switch (kind) {
    case RigKind::FullSphere: return "full_sphere";
    case RigKind::UpperHemisphere: return "upper_hemisphere";
    case RigKind::OneSidedHalfHemisphere: return "one_sided_half_hemisphere";
  }
  return "?";
}

std::vector<CameraPose> camera_rig(RigKind kind, int n, double radius, const Vec3& look_at,
                                   const Intrinsics& intrinsics) {
  require(n >= 1, "camera_rig needs n >= 1");
  require(radius > 0.0, "camera_rig needs radius > 0");
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<CameraPose> rig;
  rig.reserve(n);
  for (int i = 0; i < n; ++i) {
    double z = 0.0;
    double phi = i * golden_angle;
    switch (kind) {
      case RigKind::FullSphere: z = 1.0 - (2.0 * i + 1.0) / n; break;
      case RigKind::UpperHemisphere: z = 1.0 - (i + 0.5) / n; break;
      case RigKind::OneSidedHalfHemisphere:
        z = 1.0 - (i + 0.5) / n;
        phi = std::numbers::pi + std::fmod(phi, std::numbers::pi);
        break;
    }
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vec3 dir(rho * std::cos(phi), rho * std::sin(phi), z);
    if (kind == RigKind::OneSidedHalfHemisphere) dir[1] = -std::abs(dir[1]);
    dir.normalize();

    CameraPose pose;
    pose.translation = look_at + radius * dir;
    pose.rotation = look_at_rotation(pose.translation, look_at);
    pose.width = intrinsics.width;
    pose.height = intrinsics.height;
    pose.focal_px = focal_from_angle(intrinsics.camera_angle_x, intrinsics.width);
    rig.push_back(pose);
  }
  return rig;
}

// -- ground truth -------------------------------------------------------------

double Primitive::signed_distance(const Vec3& x) const {
  const Vec3 d = x - center;
  if (shape == Shape::Sphere) return d.norm() - size[0];
  const Vec3 q = d.cwiseAbs() - size;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

double gt_density_at(const GroundTruthField& gt, const Vec3& x) {
  double sum = 0.0;
  for (const auto& p : gt.primitives)
    if (p.contains(x)) sum += p.density;
  return sum;
}

Rgb gt_albedo_at(const GroundTruthField& gt, const Vec3& x) {
  Rgb weighted = Rgb::Zero();
  double total = 0.0;
  double best = kInf;
  Rgb nearest = Rgb::Zero();
  for (const auto& p : gt.primitives) {
    const double sd = p.signed_distance(x);
    if (sd <= 0.0) {
      weighted += p.density * p.albedo;
      total += p.density;
    }
    if (sd < best) {
      best = sd;
      nearest = p.albedo;
    }
  }
  return total > 0.0 ? Rgb(weighted / total) : nearest;
}

double gt_signed_distance(const GroundTruthField& gt, const Vec3& x) {
  double best = kInf;
  for (const auto& p : gt.primitives) best = std::min(best, p.signed_distance(x));
  return best;
}

Cube enclosing_cube(const GroundTruthField& gt, double margin) {
  if (gt.primitives.empty()) return Cube{};
  Vec3 lo = gt.primitives.front().aabb_min();
  Vec3 hi = gt.primitives.front().aabb_max();
  for (const auto& p : gt.primitives) {
    lo = lo.cwiseMin(p.aabb_min());
    hi = hi.cwiseMax(p.aabb_max());
  }
  const double extent = (hi - lo).maxCoeff();
  const double edge = extent * (1.0 + 2.0 * margin);
  return Cube{0.5 * (lo + hi) - Vec3::Constant(0.5 * edge), edge};
}

void save_ground_truth(const GroundTruthField& gt, const fs::path& file) {
  json prims = json::array();
  for (const auto& p : gt.primitives) {
    prims.push_back({{"shape", p.shape == Shape::Sphere ? "sphere" : "box"},
                     {"center", vec_json(p.center)},
                     {"size", vec_json(p.size)},
                     {"density", p.density},
                     {"albedo", vec_json(p.albedo)}});
  }
  std::ofstream out(file);
  out << json{{"primitives", prims}}.dump(2) << '\n';
  if (!out) fail(ErrorKind::Io, "cannot write " + file.string());
}

GroundTruthField load_ground_truth(const fs::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::Io, "cannot read " + file.string());
  GroundTruthField gt;
  try {
    json doc;
    in >> doc;
    for (const auto& jp : doc.at("primitives")) {
      Primitive p;
      const auto shape = jp.at("shape").get<std::string>();
      if (shape == "sphere") p.shape = Shape::Sphere;
      else if (shape == "box") p.shape = Shape::Box;
      else fail(ErrorKind::Format, "unknown primitive shape '" + shape + "'");
      p.center = vec_from_json(jp.at("center"), "center");
      p.size = vec_from_json(jp.at("size"), "size");
      p.density = jp.at("density").get<double>();
      p.albedo = vec_from_json(jp.at("albedo"), "albedo");
      gt.primitives.push_back(p);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, "malformed ground truth " + file.string() + ": " + e.what());
  }
  return gt;
}

GroundTruthField scene_preset(const std::string& name) {
  GroundTruthField gt;
  Primitive sphere;
  sphere.shape = Shape::Sphere;
  sphere.center = Vec3::Zero();
  sphere.size = Vec3::Constant(0.25);
  sphere.density = 60.0;
  sphere.albedo = Rgb(0.85, 0.35, 0.25);
  if (name == "empty") return gt;
  if (name == "sphere") {
    gt.primitives.push_back(sphere);
    return gt;
  }
  if (name == "sphere-occluder") {
    gt.primitives.push_back(sphere);
    Primitive box;
    box.shape = Shape::Box;
    box.center = Vec3(0.15, -0.4, 0.0);
    box.size = Vec3(0.125, 0.05, 0.15);
    box.density = 60.0;
    box.albedo = Rgb(0.2, 0.45, 0.85);
    gt.primitives.push_back(box);
    return gt;
  }
  fail(ErrorKind::Config, "unknown scene preset '" + name + "'");
}

Dataset generate_synthetic_scene(const GroundTruthField& gt, const std::vector<CameraPose>& rig,
                                 const RenderConfig& cfg) {
  require(!rig.empty(), "rig must contain at least one pose");
  require(cfg.gt_res >= 2, "gt_res must be >= 2");
  require(cfg.margin >= 0.1, "bbox margin must be at least 10%");
  for (const auto& p : gt.primitives) require(std::isfinite(p.density) && p.density >= 0.0, "invalid primitive density");

  Dataset ds;
  ds.background = cfg.background;
  ds.scene_bbox = enclosing_cube(gt, cfg.margin);

  VoxelField fine(ds.scene_bbox, cfg.gt_res, 0.0, Rgb::Zero());
  for (int k = 0; k < fine.res; ++k)
    for (int j = 0; j < fine.res; ++j)
      for (int i = 0; i < fine.res; ++i) {
        const Vec3 x = fine.node_position(i, j, k);
        const std::size_t idx = fine.index(i, j, k);
        fine.density_raw[idx] = gt_density_at(gt, x);
        const Rgb c = gt_albedo_at(gt, x);
        for (int ch = 0; ch < 3; ++ch) fine.color[3 * idx + ch] = c[ch];
      }
  const double step = cfg.step > 0.0 ? cfg.step : ds.scene_bbox.edge / (2.0 * cfg.gt_res);

  ds.frames.resize(rig.size());
  detail::parallel_for(rig.size(), cfg.threads, [&](std::size_t i) {
    validate_pose(rig[i]);
    ds.frames[i].pose = rig[i];
    ds.frames[i].image = render_image(fine, rig[i], step, cfg.background);
    quantize_8bit(ds.frames[i].image);
  });
  return ds;
}

ImageBuffer load_image(const fs::path& path, const Rgb& background) { return detail::read_png(path, background); }

void save_image(const ImageBuffer& image, const fs::path& path) { detail::write_png(image, path); }

}  // namespace voxens
