#pragma once

#include "voxens/dataset.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace voxens {

/// Data-constraint configuration. sigma_im is in 8-bit intensity units,
/// sigma_t in world units, sigma_r_deg in degrees.
struct NoiseSpec {
  double sigma_im = 0.0;
  double sigma_t = 0.0;
  double sigma_r_deg = 0.0;
  std::uint64_t seed = 0;

  bool is_baseline() const { return sigma_im == 0.0 && sigma_t == 0.0 && sigma_r_deg == 0.0; }
  void validate() const;
};

/// Sub-seed streams used by apply_noise.
enum class NoiseStream : std::uint64_t { Images = 0, Translation = 1, Rotation = 2 };

std::vector<ImageBuffer> perturb_images(std::span<const ImageBuffer> images, double sigma_im, std::uint64_t seed);

std::vector<CameraPose> perturb_translation(std::span<const CameraPose> poses, double sigma_t, std::uint64_t seed);

struct RotationPerturbation {
  std::vector<CameraPose> poses;
  /// True where the pose sat at gimbal lock and got an axis-angle perturbation instead.
  std::vector<bool> gimbal_fallback;

  std::size_t fallback_count() const;
};

RotationPerturbation perturb_rotation(std::span<const CameraPose> poses, double sigma_r_deg, std::uint64_t seed);

/// Converts a "% of rig circumference" translation sigma into world units.
double percent_of_circumference(double percent, double rig_radius);

/// Intrinsic X-Y-Z Euler angles (radians): R = Rx(a) * Ry(b) * Rz(c).
Vec3 euler_xyz_from_matrix(const Mat3& r);
Mat3 matrix_from_euler_xyz(const Vec3& angles);

/// Nearest rotation in the Frobenius sense (SVD projection, det forced to +1).
Mat3 orthonormalize(const Mat3& r);

/// Applies image noise, then translation noise, then rotation noise, each from
/// its own derived sub-seed. `gimbal_fallbacks` receives the fallback count.
Dataset apply_noise(const Dataset& dataset, const NoiseSpec& noise, std::size_t* gimbal_fallbacks = nullptr);

}  // namespace voxens
