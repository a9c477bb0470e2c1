#include "voxens/field.hpp"

#include <algorithm>
#include <cmath>

namespace voxens {

namespace {

struct Cell {
  std::size_t base;
  double fx, fy, fz;
};

/// Lower lattice corner and fractional offsets of `x`; false outside the bbox.
inline bool locate(const VoxelField& f, const Vec3& x, Cell& cell) {
  const double scale = (f.res - 1) / f.bbox.edge;
  const double ux = (x[0] - f.bbox.min[0]) * scale;
  const double uy = (x[1] - f.bbox.min[1]) * scale;
  const double uz = (x[2] - f.bbox.min[2]) * scale;
  const double hi = f.res - 1;
  if (!(ux >= 0.0 && uy >= 0.0 && uz >= 0.0 && ux <= hi && uy <= hi && uz <= hi)) return false;
  const int ix = std::min(static_cast<int>(ux), f.res - 2);
  const int iy = std::min(static_cast<int>(uy), f.res - 2);
  const int iz = std::min(static_cast<int>(uz), f.res - 2);
  cell.base = f.index(ix, iy, iz);
  cell.fx = ux - ix;
  cell.fy = uy - iy;
  cell.fz = uz - iz;
  return true;
}

/// Calls fn(node_index, weight) for the 8 corners of `cell`.
template <typename Fn>
inline void for_corners(const VoxelField& f, const Cell& c, Fn&& fn) {
  const std::size_t dy = static_cast<std::size_t>(f.res);
  const std::size_t dz = dy * dy;
  const double gx = 1.0 - c.fx, gy = 1.0 - c.fy, gz = 1.0 - c.fz;
  fn(c.base, gx * gy * gz);
  fn(c.base + 1, c.fx * gy * gz);
  fn(c.base + dy, gx * c.fy * gz);
  fn(c.base + dy + 1, c.fx * c.fy * gz);
  fn(c.base + dz, gx * gy * c.fz);
  fn(c.base + dz + 1, c.fx * gy * c.fz);
  fn(c.base + dz + dy, gx * c.fy * c.fz);
  fn(c.base + dz + dy + 1, c.fx * c.fy * c.fz);
}

inline int march_count(const Ray& ray, double step) {
  if (!(ray.t_far > ray.t_near)) return 0;
  return static_cast<int>(std::ceil((ray.t_far - ray.t_near) / step - 1e-9));
}

}  // namespace

VoxelField::VoxelField(const Cube& box, int resolution, double density, const Rgb& rgb)
    : bbox(box), res(resolution) {
  require(resolution >= 2, "field resolution must be >= 2");
  const std::size_t n = static_cast<std::size_t>(res) * res * res;
  density_raw.assign(n, density);
  color.resize(3 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) color[3 * i + c] = rgb[c];
}

Vec3 VoxelField::node_position(int i, int j, int k) const {
  const double s = bbox.edge / (res - 1);
  return bbox.min + Vec3(i * s, j * s, k * s);
}

void validate_field(const VoxelField& field) {
  require(field.res >= 2, "field resolution must be >= 2");
  require(field.bbox.edge > 0.0, "field bbox edge must be positive");
  const std::size_t n = static_cast<std::size_t>(field.res) * field.res * field.res;
  require(field.density_raw.size() == n && field.color.size() == 3 * n, "field array sizes do not match res");
  for (double v : field.density_raw) require(std::isfinite(v), "field density is not finite");
  for (double v : field.color) require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "field color outside [0, 1]");
}

double default_step(const VoxelField& field) { return field.bbox.edge / (2.0 * field.res); }

double sample_raw(const VoxelField& field, const Vec3& x) {
  Cell c;
  if (!locate(field, x, c)) return 0.0;
  double v = 0.0;
  for_corners(field, c, [&](std::size_t n, double w) { v += w * field.density_raw[n]; });
  return v;
}

Rgb sample_color(const VoxelField& field, const Vec3& x) {
  Cell c;
  if (!locate(field, x, c)) return Rgb::Zero();
  Rgb v = Rgb::Zero();
  for_corners(field, c, [&](std::size_t n, double w) {
    v[0] += w * field.color[3 * n];
    v[1] += w * field.color[3 * n + 1];
    v[2] += w * field.color[3 * n + 2];
  });
  return v;
}

void FieldGradient::clear() {
  std::fill(density.begin(), density.end(), 0.0);
  std::fill(color.begin(), color.end(), 0.0);
}

RenderResult RayMarch::forward(const VoxelField& field, const Ray& ray, double step, const Rgb& background) {
  require(step > 0.0, "render step must be positive");
  samples_.clear();
  step_ = step;
  background_ = background;
  const int count = march_count(ray, step);
  double trans = 1.0;
  Rgb acc = Rgb::Zero();
  for (int k = 0; k < count; ++k) {
    const double t = ray.t_near + (k + 0.5) * step;
    const Vec3 x = ray.origin + t * ray.direction;
    Cell cell;
    if (!locate(field, x, cell)) continue;  // zero density outside the bbox
    Sample s;
    s.base = cell.base;
    s.fx = cell.fx;
    s.fy = cell.fy;
    s.fz = cell.fz;
    double raw = 0.0;
    Rgb col = Rgb::Zero();
    for_corners(field, cell, [&](std::size_t n, double w) {
      raw += w * field.density_raw[n];
      col[0] += w * field.color[3 * n];
      col[1] += w * field.color[3 * n + 1];
      col[2] += w * field.color[3 * n + 2];
    });
    const double sigma = activate_density(raw);
    s.raw = raw;
    s.alpha = -std::expm1(-sigma * step);
    s.transmittance = trans;
    s.color = col;
    acc += (trans * s.alpha) * col;
    trans *= std::exp(-sigma * step);
    samples_.push_back(s);
  }
  final_transmittance_ = trans;
  acc += trans * background;
  return {acc, trans};
}

void RayMarch::backward(const VoxelField& field, const Rgb& d_color, FieldGradient& grad) const {
  // suffix = sum_{j > k} w_j c_j + T_final * background
  Rgb suffix = final_transmittance_ * background_;
  for (auto it = samples_.rbegin(); it != samples_.rend(); ++it) {
    const Sample& s = *it;
    const double w = s.transmittance * s.alpha;
    const double t_next = s.transmittance * (1.0 - s.alpha);
    const Cell cell{s.base, s.fx, s.fy, s.fz};

    const Rgb gc = w * d_color;
    if (gc[0] != 0.0 || gc[1] != 0.0 || gc[2] != 0.0) {
      for_corners(field, cell, [&](std::size_t n, double wt) {
        grad.color[3 * n] += wt * gc[0];
        grad.color[3 * n + 1] += wt * gc[1];
        grad.color[3 * n + 2] += wt * gc[2];
      });
    }
    if (s.raw > 0.0) {
      const double d_sigma = step_ * d_color.dot(t_next * s.color - suffix);
      if (d_sigma != 0.0)
        for_corners(field, cell, [&](std::size_t n, double wt) { grad.density[n] += wt * d_sigma; });
    }
    suffix += w * s.color;
  }
}

RenderResult render_ray(const VoxelField& field, const Ray& ray, double step, const Rgb& background) {
  thread_local RayMarch march;
  return march.forward(field, ray, step, background);
}

RenderResult render_ray_backward(const VoxelField& field, const Ray& ray, double step, const Rgb& background,
                                 const Rgb& d_color, FieldGradient& grad) {
  thread_local RayMarch march;
  const RenderResult r = march.forward(field, ray, step, background);
  march.backward(field, d_color, grad);
  return r;
}

Ray camera_ray(const CameraPose& pose, int x, int y, const Cube& bbox) {
  Ray ray = pose.pixel_ray(x + 0.5, y + 0.5);
  clip_to_box(ray, bbox);
  return ray;
}

ImageBuffer render_image(const VoxelField& field, const CameraPose& pose, double step, const Rgb& background) {
  require(step > 0.0, "render step must be positive");
  ImageBuffer img(pose.width, pose.height);
  RayMarch march;
  for (int y = 0; y < pose.height; ++y)
    for (int x = 0; x < pose.width; ++x)
      img.set(x, y, march.forward(field, camera_ray(pose, x, y, field.bbox), step, background).color);
  return img;
}

}  // namespace voxens
