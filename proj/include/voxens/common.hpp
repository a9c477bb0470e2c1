#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace voxens {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rgb = Eigen::Vector3d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ErrorKind { Invalid, Config, Io, Format, Divergence };

/// Library-wide exception. The kind selects the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::Invalid, what);
}

/// Axis-aligned cube: min corner plus edge length.
struct Cube {
  Vec3 min = Vec3::Constant(-1.0);
  double edge = 2.0;

  Vec3 max() const { return min + Vec3::Constant(edge); }
  Vec3 center() const { return min + Vec3::Constant(0.5 * edge); }
  bool contains(const Vec3& x) const {
    return (x.array() >= min.array()).all() && (x.array() <= max().array()).all();
  }
  bool operator==(const Cube& o) const { return min == o.min && edge == o.edge; }
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = 1.0;
};

/// Clips [t_near, t_far] of `ray` to the slab intersection with `box`.
/// Returns false (and leaves an empty interval) when the ray misses.
bool clip_to_box(Ray& ray, const Cube& box);

}  // namespace voxens
