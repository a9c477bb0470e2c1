#include "voxens/perturb.hpp"

#include "voxens/rng.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace voxens {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kGimbalTol = 1e-6;

void require_sigma(double s, const char* name) {
  require(std::isfinite(s) && s >= 0.0, std::string(name) + " must be finite and >= 0");
}

}  // namespace

void NoiseSpec::validate() const {
  require_sigma(sigma_im, "sigma_im");
  require_sigma(sigma_t, "sigma_t");
  require_sigma(sigma_r_deg, "sigma_r_deg");
}

std::vector<ImageBuffer> perturb_images(std::span<const ImageBuffer> images, double sigma_im, std::uint64_t seed) {
  require_sigma(sigma_im, "sigma_im");
  std::vector<ImageBuffer> out(images.begin(), images.end());
  if (sigma_im == 0.0) return out;
  const double sd = sigma_im / 255.0;
  for (std::size_t f = 0; f < out.size(); ++f) {
    CounterRng rng(derive_seed(seed, f));
    for (double& v : out[f].pixels) v = std::clamp(v + sd * rng.normal(), 0.0, 1.0);
  }
  return out;
}

std::vector<CameraPose> perturb_translation(std::span<const CameraPose> poses, double sigma_t, std::uint64_t seed) {
  require_sigma(sigma_t, "sigma_t");
  std::vector<CameraPose> out(poses.begin(), poses.end());
  if (sigma_t == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    CounterRng rng(derive_seed(seed, i));
    for (int a = 0; a < 3; ++a) out[i].translation[a] += sigma_t * rng.normal();
  }
  return out;
}

std::size_t RotationPerturbation::fallback_count() const {
  return static_cast<std::size_t>(std::count(gimbal_fallback.begin(), gimbal_fallback.end(), true));
}

Vec3 euler_xyz_from_matrix(const Mat3& r) {
  // R = Rx(a) Ry(b) Rz(c): R(0,2) = sin b, R(1,2) = -sin a cos b, R(2,2) = cos a cos b,
  // R(0,1) = -cos b sin c, R(0,0) = cos b cos c.
  const double b = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
  const double a = std::atan2(-r(1, 2), r(2, 2));
  const double c = std::atan2(-r(0, 1), r(0, 0));
  return {a, b, c};
}

Mat3 matrix_from_euler_xyz(const Vec3& angles) {
  return (Eigen::AngleAxisd(angles[0], Vec3::UnitX()) * Eigen::AngleAxisd(angles[1], Vec3::UnitY()) *
          Eigen::AngleAxisd(angles[2], Vec3::UnitZ()))
      .toRotationMatrix();
}

Mat3 orthonormalize(const Mat3& r) {
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

RotationPerturbation perturb_rotation(std::span<const CameraPose> poses, double sigma_r_deg, std::uint64_t seed) {
  require_sigma(sigma_r_deg, "sigma_r_deg");
  RotationPerturbation out;
  out.poses.assign(poses.begin(), poses.end());
  out.gimbal_fallback.assign(poses.size(), false);
  if (sigma_r_deg == 0.0) return out;
  const double sd = sigma_r_deg * kDeg;
  for (std::size_t i = 0; i < out.poses.size(); ++i) {
    CounterRng rng(derive_seed(seed, i));
    const Vec3 noise(sd * rng.normal(), sd * rng.normal(), sd * rng.normal());
    Mat3& r = out.poses[i].rotation;
    const Vec3 euler = euler_xyz_from_matrix(r);
    if (std::abs(std::abs(euler[1]) - 0.5 * std::numbers::pi) <= kGimbalTol) {
      // Euler angles are degenerate here; rotate about a random body axis instead.
      const double angle = noise.norm();
      if (angle > 0.0) r = r * Eigen::AngleAxisd(angle, noise / angle).toRotationMatrix();
      out.gimbal_fallback[i] = true;
    } else {
      r = matrix_from_euler_xyz(euler + noise);
    }
    r = orthonormalize(r);
  }
  return out;
}

double percent_of_circumference(double percent, double rig_radius) {
  require(percent >= 0.0, "percent must be >= 0");
  require(rig_radius > 0.0, "rig radius must be > 0");
  return percent / 100.0 * 2.0 * std::numbers::pi * rig_radius;
}

Dataset apply_noise(const Dataset& dataset, const NoiseSpec& noise, std::size_t* gimbal_fallbacks) {
  noise.validate();
  Dataset out = dataset;
  const auto images = perturb_images(dataset.images(), noise.sigma_im,
                                     derive_seed(noise.seed, static_cast<std::uint64_t>(NoiseStream::Images)));
  auto poses = perturb_translation(dataset.poses(), noise.sigma_t,
                                   derive_seed(noise.seed, static_cast<std::uint64_t>(NoiseStream::Translation)));
  auto rotated =
      perturb_rotation(poses, noise.sigma_r_deg, derive_seed(noise.seed, static_cast<std::uint64_t>(NoiseStream::Rotation)));
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    out.frames[i].image = images[i];
    out.frames[i].pose = rotated.poses[i];
  }
  if (gimbal_fallbacks) *gimbal_fallbacks = rotated.fallback_count();
  return out;
}

}  // namespace voxens
