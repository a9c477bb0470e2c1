#pragma once

#include "voxens/common.hpp"
#include "voxens/dataset.hpp"

#include <cstddef>
#include <vector>

namespace voxens {

/// Dense lattice of raw (pre-activation) density and RGB color.
/// Node (i, j, k) sits at bbox.min + (i, j, k) / (res - 1) * edge and is stored
/// at index i + res * (j + res * k).
struct VoxelField {
  Cube bbox;
  int res = 2;
  std::vector<double> density_raw;
  /// Three interleaved channels per node, kept in [0, 1].
  std::vector<double> color;

  VoxelField() = default;
  VoxelField(const Cube& box, int resolution, double density = 0.0, const Rgb& rgb = Rgb::Constant(0.5));

  std::size_t node_count() const { return density_raw.size(); }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(res) * (j + static_cast<std::size_t>(res) * k);
  }
  Vec3 node_position(int i, int j, int k) const;
  double cell_width() const { return bbox.edge / (res - 1); }

  bool operator==(const VoxelField& o) const = default;
};

void validate_field(const VoxelField& field);

/// Default marching step: edge / (2 res).
double default_step(const VoxelField& field);

/// Trilinear interpolation of density_raw; 0 outside the bbox.
double sample_raw(const VoxelField& field, const Vec3& x);

/// Trilinear interpolation of the node colors; 0 outside the bbox.
Rgb sample_color(const VoxelField& field, const Vec3& x);

inline double activate_density(double raw) { return raw > 0.0 ? raw : 0.0; }

struct RenderResult {
  Rgb color = Rgb::Zero();
  double transmittance = 1.0;
};

/// Caller-owned gradient buffers with the same layout as a VoxelField.
struct FieldGradient {
  std::vector<double> density;
  std::vector<double> color;

  explicit FieldGradient(const VoxelField& field)
      : density(field.density_raw.size(), 0.0), color(field.color.size(), 0.0) {}
  void clear();
};

/// Forward tape of one marched ray; reusable across rays to avoid allocation.
class RayMarch {
 public:
  /// Midpoint quadrature at t_near + (k + 1/2) step for every sample with
  /// t_near + k step < t_far.
  RenderResult forward(const VoxelField& field, const Ray& ray, double step, const Rgb& background);

  /// Accumulates dLoss/dparams into `grad` for the most recent forward() call.
  void backward(const VoxelField& field, const Rgb& d_color, FieldGradient& grad) const;

  std::size_t sample_count() const { return samples_.size(); }

 private:
  struct Sample {
    std::size_t base;  // index of the lower lattice corner
    double fx, fy, fz;
    double raw;
    double alpha;
    double transmittance;
    Rgb color;
  };
  std::vector<Sample> samples_;
  double step_ = 0.0;
  Rgb background_ = Rgb::Zero();
  double final_transmittance_ = 1.0;
};

RenderResult render_ray(const VoxelField& field, const Ray& ray, double step, const Rgb& background);

/// Exact reverse-mode gradient of render_ray, accumulated into `grad`.
/// Returns the forward result.
RenderResult render_ray_backward(const VoxelField& field, const Ray& ray, double step, const Rgb& background,
                                 const Rgb& d_color, FieldGradient& grad);

/// Camera ray through the center of pixel (x, y), clipped to the field bbox.
Ray camera_ray(const CameraPose& pose, int x, int y, const Cube& bbox);

ImageBuffer render_image(const VoxelField& field, const CameraPose& pose, double step, const Rgb& background);

}  // namespace voxens
