#pragma once

#include "voxens/dataset.hpp"
#include "voxens/field.hpp"
#include "voxens/rng.hpp"

#include <filesystem>
#include <string>

namespace testing {

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("voxens_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Field with densities uniform in [lo, hi] and colors uniform in [0, 1].
inline voxens::VoxelField random_field(std::uint64_t seed, int res = 6, double lo = -2.0, double hi = 8.0,
                                       voxens::Cube box = {}) {
  voxens::VoxelField f(box, res);
  voxens::CounterRng rng(seed);
  for (double& v : f.density_raw) v = rng.uniform(lo, hi);
  for (double& v : f.color) v = rng.uniform();
  return f;
}

inline voxens::Vec3 random_unit(voxens::CounterRng& rng) {
  voxens::Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

/// Ray that starts outside `box` and points roughly at its center.
inline voxens::Ray random_ray(voxens::CounterRng& rng, const voxens::Cube& box) {
  voxens::Ray ray;
  const voxens::Vec3 target = box.center() + 0.3 * box.edge * voxens::Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                                                           rng.uniform(-1, 1));
  ray.origin = box.center() + 1.5 * box.edge * random_unit(rng);
  ray.direction = (target - ray.origin).normalized();
  ray.t_near = 0.0;
  ray.t_far = 4.0 * box.edge;
  voxens::clip_to_box(ray, box);
  return ray;
}

/// Small synthetic dataset rendered from a preset; cached per process.
inline const voxens::Dataset& small_scene() {
  static const voxens::Dataset ds = [] {
    voxens::Intrinsics in;
    in.width = 16;
    in.height = 16;
    const auto gt = voxens::scene_preset("sphere");
    const auto rig = voxens::camera_rig(voxens::RigKind::FullSphere, 6, 1.5,
                                        voxens::enclosing_cube(gt, 0.2).center(), in);
    voxens::RenderConfig rc;
    rc.gt_res = 32;
    return voxens::generate_synthetic_scene(gt, rig, rc);
  }();
  return ds;
}

}  // namespace testing
