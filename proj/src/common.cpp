#include "voxens/common.hpp"
#include "voxens/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace voxens {

bool clip_to_box(Ray& ray, const Cube& box) {
  double lo = ray.t_near;
  double hi = ray.t_far;
  const Vec3 bmax = box.max();
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    const double o = ray.origin[a];
    if (d == 0.0) {
      if (o < box.min[a] || o > bmax[a]) {
        hi = lo;
        break;
      }
      continue;
    }
    double t0 = (box.min[a] - o) / d;
    double t1 = (bmax[a] - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (!(hi > lo)) {
    ray.t_near = ray.t_far = std::max(lo, ray.t_near);
    return false;
  }
  ray.t_near = lo;
  ray.t_far = hi;
  return true;
}

double CounterRng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace voxens
