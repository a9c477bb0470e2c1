#include "voxens/perturb.hpp"
#include "voxens/rng.hpp"

#include <Eigen/LU>
#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace voxens;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<CameraPose> random_poses(int n, std::uint64_t seed, double max_pitch_deg = 80.0) {
  CounterRng rng(seed);
  std::vector<CameraPose> poses(n);
  for (auto& p : poses) {
    p.rotation = matrix_from_euler_xyz(Vec3(rng.uniform(-3, 3), rng.uniform(-max_pitch_deg, max_pitch_deg) * kDeg,
                                            rng.uniform(-3, 3)));
    p.translation = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    p.width = p.height = 8;
    p.focal_px = 10.0;
  }
  return poses;
}

double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("perturb") {
  TEST_CASE("image noise") {
    ImageBuffer gray(400, 300, Rgb::Constant(0.5));
    const std::vector<ImageBuffer> in{gray};
    SUBCASE("zero sigma is the identity") { CHECK(perturb_images(in, 0.0, 5)[0] == gray); }
    SUBCASE("sample std and determinism") {
      const auto a = perturb_images(in, 20.0, 5);
      const auto b = perturb_images(in, 20.0, 5);
      CHECK(a[0] == b[0]);
      double s = 0, s2 = 0;
      std::size_t n = 0;
      for (double v : a[0].pixels) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        if (v > 0.0 && v < 1.0) {
          const double d = v - 0.5;
          s += d;
          s2 += d * d;
          ++n;
        }
      }
      REQUIRE(n >= 100000);
      const double mean = s / n;
      const double sd = std::sqrt(s2 / n - mean * mean);
      CHECK(std::abs(sd - 20.0 / 255.0) <= 0.03 * 20.0 / 255.0);
      CHECK_FALSE(perturb_images(in, 20.0, 6)[0] == a[0]);
    }
    SUBCASE("clamped to [0, 1]") {
      const std::vector<ImageBuffer> white{ImageBuffer(50, 50, Rgb::Ones())};
      const auto noisy = perturb_images(white, 200.0, 1);
      for (double v : noisy[0].pixels) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }

  TEST_CASE("translation noise") {
    const auto poses = random_poses(10000, 1);
    CHECK(perturb_translation(poses, 0.0, 3)[17].translation == poses[17].translation);
    const auto out = perturb_translation(poses, 0.05, 3);
    const auto again = perturb_translation(poses, 0.05, 3);
    for (int a = 0; a < 3; ++a) {
      double s = 0, s2 = 0;
      for (std::size_t i = 0; i < poses.size(); ++i) {
        const double d = out[i].translation[a] - poses[i].translation[a];
        s += d;
        s2 += d * d;
        CHECK(out[i].rotation == poses[i].rotation);
        CHECK(out[i].translation == again[i].translation);
      }
      const double n = static_cast<double>(poses.size());
      const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
      CHECK(std::abs(sd - 0.05) <= 0.05 * 0.05);
    }
  }

  TEST_CASE("euler round trip") {
    CounterRng rng(2);
    for (int i = 0; i < 1000; ++i) {
      const Vec3 e(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3));
      const Mat3 r = matrix_from_euler_xyz(e);
      CHECK(max_abs(matrix_from_euler_xyz(euler_xyz_from_matrix(r)) - r) <= 1e-9);
    }
    // Intrinsic XYZ: R = Rx(a) Ry(b) Rz(c), checked against hand-built factors.
    const double a = 0.3, b = -0.2, c = 1.1;
    Mat3 rx, ry, rz;
    rx << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
    ry << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
    rz << std::cos(c), -std::sin(c), 0, std::sin(c), std::cos(c), 0, 0, 0, 1;
    CHECK(max_abs(matrix_from_euler_xyz(Vec3(a, b, c)) - rx * ry * rz) <= 1e-12);
  }

  TEST_CASE("rotation noise") {
    const auto poses = random_poses(10000, 4, 60.0);
    SUBCASE("zero sigma") {
      const auto out = perturb_rotation(poses, 0.0, 1);
      for (std::size_t i = 0; i < poses.size(); i += 97) CHECK(max_abs(out.poses[i].rotation - poses[i].rotation) <= 1e-9);
    }
    SUBCASE("orthonormal output and per-angle std") {
      const auto out = perturb_rotation(poses, 0.4, 1);
      CHECK(out.fallback_count() == 0);
      double s2[3] = {0, 0, 0};
      for (std::size_t i = 0; i < poses.size(); ++i) {
        const Mat3& r = out.poses[i].rotation;
        CHECK(max_abs(r.transpose() * r - Mat3::Identity()) <= 1e-9);
        CHECK(std::abs(r.determinant() - 1.0) <= 1e-9);
        CHECK(out.poses[i].translation == poses[i].translation);
        const Vec3 d = euler_xyz_from_matrix(r) - euler_xyz_from_matrix(poses[i].rotation);
        for (int k = 0; k < 3; ++k) {
          const double w = std::remainder(d[k], 2.0 * std::numbers::pi) / kDeg;
          s2[k] += w * w;
        }
      }
      for (double v : s2) CHECK(std::abs(std::sqrt(v / poses.size()) - 0.4) <= 0.05 * 0.4);
    }
    SUBCASE("gimbal lock falls back and is flagged") {
      std::vector<CameraPose> locked(3, poses[0]);
      locked[0].rotation = matrix_from_euler_xyz(Vec3(0.2, std::numbers::pi / 2, 0.1));
      const auto out = perturb_rotation(locked, 1.0, 8);
      CHECK(out.gimbal_fallback[0]);
      CHECK(out.fallback_count() == 1);
      const Mat3& r = out.poses[0].rotation;
      CHECK(max_abs(r.transpose() * r - Mat3::Identity()) <= 1e-9);
      CHECK(max_abs(r - locked[0].rotation) > 0.0);
    }
  }

  TEST_CASE("translation and rotation commute") {
    const auto poses = random_poses(200, 9);
    const auto tr = perturb_rotation(perturb_translation(poses, 0.1, 11), 1.0, 12).poses;
    const auto rt = perturb_translation(perturb_rotation(poses, 1.0, 12).poses, 0.1, 11);
    for (std::size_t i = 0; i < poses.size(); ++i) {
      CHECK(max_abs(tr[i].rotation - rt[i].rotation) <= 1e-9);
      CHECK((tr[i].translation - rt[i].translation).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }

  TEST_CASE("percent of circumference") {
    CHECK(percent_of_circumference(0.0, 2.0) == 0.0);
    CHECK(percent_of_circumference(100.0, 2.0) == doctest::Approx(4.0 * std::numbers::pi));
    const double radius = 25.33 / (2.0 * std::numbers::pi);
    CHECK(percent_of_circumference(0.01, radius) == doctest::Approx(0.002533).epsilon(1e-9));
    CHECK_THROWS_AS(percent_of_circumference(-1.0, 1.0), Error);
  }

  TEST_CASE("noise spec validation") {
    NoiseSpec n;
    CHECK(n.is_baseline());
    n.sigma_t = -1.0;
    CHECK_THROWS_AS(n.validate(), Error);
    n.sigma_t = std::nan("");
    CHECK_THROWS_AS(n.validate(), Error);
  }
}
