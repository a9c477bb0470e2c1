#pragma once

#include "voxens/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace voxens {

/// World-from-camera rigid transform plus pinhole intrinsics.
/// OpenGL convention: the camera looks down its local -z axis, +y is up.
struct CameraPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double focal_px = 1.0;
  int width = 1;
  int height = 1;

  const Vec3& center() const { return translation; }

  /// Ray through pixel (px, py) measured in pixel units from the top-left
  /// image corner; pixel centers sit at half-integers.
  Ray pixel_ray(double px, double py) const;
};

/// Throws Error(Invalid) unless `pose` satisfies the CameraPose invariants.
void validate_pose(const CameraPose& pose);

double focal_from_angle(double camera_angle_x, int width);
double angle_from_focal(double focal_px, int width);

/// Row-major RGB in [0, 1].
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, const Rgb& fill = Rgb::Zero());

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  Rgb at(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  void set(int x, int y, const Rgb& c) {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    pixels[i] = c[0];
    pixels[i + 1] = c[1];
    pixels[i + 2] = c[2];
  }
  bool operator==(const ImageBuffer& o) const = default;
};

/// Rounds every channel to the nearest 8-bit level, as a PNG would store it.
void quantize_8bit(ImageBuffer& image);

/// PNG input; alpha is composited over `background`.
ImageBuffer load_image(const std::filesystem::path& path, const Rgb& background = Rgb::Ones());
void save_image(const ImageBuffer& image, const std::filesystem::path& path);

struct Frame {
  CameraPose pose;
  ImageBuffer image;
};

struct Dataset {
  std::vector<Frame> frames;
  Cube scene_bbox;
  Rgb background = Rgb::Ones();

  std::vector<CameraPose> poses() const;
  std::vector<ImageBuffer> images() const;
};

void validate_dataset(const Dataset& dataset);

/// Reads `scene.json` plus the referenced PNGs from directory `path`.
Dataset load_dataset(const std::filesystem::path& path);

/// Writes `scene.json` and one 8-bit PNG per frame (`r_000.png`, ...) into `path`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

enum class RigKind { FullSphere, UpperHemisphere, OneSidedHalfHemisphere };

RigKind parse_rig_kind(const std::string& name);
std::string to_string(RigKind kind);

struct Intrinsics {
  int width = 64;
  int height = 64;
  double camera_angle_x = 0.6911112070083618;
};

/// `n` cameras on a Fibonacci spiral over the requested part of the sphere of
/// `radius` around `look_at`, each looking at `look_at`.
std::vector<CameraPose> camera_rig(RigKind kind, int n, double radius, const Vec3& look_at,
                                   const Intrinsics& intrinsics = {});

// -- analytic ground truth ---------------------------------------------------

enum class Shape { Sphere, Box };

struct Primitive {
  Shape shape = Shape::Sphere;
  Vec3 center = Vec3::Zero();
  /// Sphere: radius in every component. Box: half extents.
  Vec3 size = Vec3::Constant(0.5);
  double density = 30.0;
  Rgb albedo = Rgb::Constant(0.5);

  double signed_distance(const Vec3& x) const;
  bool contains(const Vec3& x) const { return signed_distance(x) <= 0.0; }
  Vec3 aabb_min() const { return center - size; }
  Vec3 aabb_max() const { return center + size; }
};

struct GroundTruthField {
  std::vector<Primitive> primitives;
};

double gt_density_at(const GroundTruthField& gt, const Vec3& x);

/// Density-weighted albedo inside primitives; albedo of the closest primitive outside.
Rgb gt_albedo_at(const GroundTruthField& gt, const Vec3& x);

/// Signed distance to the union of all primitives (+inf for an empty field).
double gt_signed_distance(const GroundTruthField& gt, const Vec3& x);

/// Cube centered on the primitives' bounding box with `margin` of the largest
/// extent added on every side. Falls back to [-1, 1]^3 without primitives.
Cube enclosing_cube(const GroundTruthField& gt, double margin);

void save_ground_truth(const GroundTruthField& gt, const std::filesystem::path& file);
GroundTruthField load_ground_truth(const std::filesystem::path& file);

GroundTruthField scene_preset(const std::string& name);

struct RenderConfig {
  /// Resolution of the lattice the analytic field is sampled on.
  int gt_res = 128;
  /// Fraction of the largest primitive extent added on each bbox side (>= 0.1).
  double margin = 0.2;
  Rgb background = Rgb::Ones();
  /// Marching step; <= 0 selects edge / (2 gt_res).
  double step = 0.0;
  int threads = 1;
};

/// Renders one image per rig pose from the ground truth sampled onto a fine
/// voxel lattice; images are quantized to 8 bits.
Dataset generate_synthetic_scene(const GroundTruthField& gt, const std::vector<CameraPose>& rig,
                                 const RenderConfig& cfg = {});

}  // namespace voxens
