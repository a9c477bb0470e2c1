#include "support.hpp"
#include "voxens/ensemble.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace voxens;

namespace {

std::vector<DensityGrid> random_grids(std::uint64_t seed, int members, int res, double scale = 20.0) {
  CounterRng rng(seed);
  std::vector<DensityGrid> grids(members);
  for (auto& g : grids) {
    g.res = res;
    g.values.resize(static_cast<std::size_t>(res) * res * res);
    for (double& v : g.values) v = scale * rng.normal() + rng.uniform(-5, 5);
  }
  return grids;
}

// Variance from pairwise differences: sum_{i<j} (x_i - x_j)^2 / (M (M - 1)).
double pairwise_std(const std::vector<double>& x) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) s += (long double)(x[i] - x[j]) * (x[i] - x[j]);
  return std::sqrt(static_cast<double>(s / (x.size() * (x.size() - 1.0))));
}

std::vector<double> column(const std::vector<DensityGrid>& grids, std::size_t i) {
  std::vector<double> x;
  for (const auto& g : grids) x.push_back(g.values[i]);
  return x;
}

}  // namespace

TEST_SUITE("ensemble") {
  TEST_CASE("stats match the pairwise-difference oracle") {
    for (int members : {2, 3, 5, 10}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto grids = random_grids(seed * 31 + members, members, 5);
        const EnsembleGrid eg = ensemble_stats(grids);
        REQUIRE(eg.members == members);
        for (std::size_t i = 0; i < eg.size(); ++i) {
          const auto x = column(grids, i);
          const double mean = std::accumulate(x.begin(), x.end(), 0.0L) / members;
          CHECK(std::abs(eg.mean[i] - mean) <= 1e-12);
          CHECK(std::abs(eg.uncertainty[i] - pairwise_std(x)) <= 1e-12);
        }
      }
    }
  }

  TEST_CASE("two members: U is |a - b| / sqrt 2") {
    DensityGrid a, b;
    a.res = b.res = 2;
    a.values = {0, 1, 2, 3, 4, 5, 6, 7};
    b.values = {1, 1, 0, 3, -4, 5, 6, 17};
    const std::vector<DensityGrid> g{a, b};
    const EnsembleGrid eg = ensemble_stats(g);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(eg.uncertainty[i] == doctest::Approx(std::abs(a.values[i] - b.values[i]) / std::sqrt(2.0)));
      CHECK(eg.mean[i] == doctest::Approx(0.5 * (a.values[i] + b.values[i])));
    }
  }

  TEST_CASE("identical members have zero uncertainty") {
    auto grids = random_grids(3, 1, 4);
    grids.push_back(grids[0]);
    grids.push_back(grids[0]);
    const EnsembleGrid eg = ensemble_stats(grids);
    for (std::size_t i = 0; i < eg.size(); ++i) {
      CHECK(eg.uncertainty[i] <= 1e-12);
      CHECK(eg.mean[i] == doctest::Approx(grids[0].values[i]).epsilon(1e-14));
    }
  }

  TEST_CASE("property: permutation invariance and shift/scale homogeneity") {
    CounterRng rng(900);
    for (int trial = 0; trial < 40; ++trial) {
      const int members = 2 + static_cast<int>(rng.below(9));
      auto grids = random_grids(1000 + trial, members, 3);
      const EnsembleGrid base = ensemble_stats(grids);

      auto perm = grids;
      for (int i = members - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
      const EnsembleGrid p = ensemble_stats(perm);

      const double a = rng.uniform(-4, 4), c = rng.uniform(-50, 50);
      auto affine = grids;
      for (auto& g : affine)
        for (double& v : g.values) v = a * v + c;
      const EnsembleGrid t = ensemble_stats(affine);

      for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(std::abs(p.mean[i] - base.mean[i]) <= 1e-12);
        CHECK(std::abs(p.uncertainty[i] - base.uncertainty[i]) <= 1e-12);
        CHECK(t.mean[i] == doctest::Approx(a * base.mean[i] + c).epsilon(1e-10));
        CHECK(t.uncertainty[i] == doctest::Approx(std::abs(a) * base.uncertainty[i]).epsilon(1e-10));
        CHECK(base.uncertainty[i] >= 0.0);
      }
    }
  }

  TEST_CASE("invalid inputs") {
    const auto one = random_grids(1, 1, 3);
    CHECK_THROWS_AS(ensemble_stats(one), Error);
    auto mixed = random_grids(1, 2, 3);
    mixed[1] = random_grids(2, 1, 4)[0];
    CHECK_THROWS_AS(ensemble_stats(mixed), Error);
    CHECK_THROWS_AS(extract_grid(VoxelField(Cube{}, 4), Cube{}, 1), Error);
  }

  TEST_CASE("extraction at node positions reproduces the lattice") {
    const VoxelField f = testing::random_field(12, 6);
    const DensityGrid g = extract_grid(f, f.bbox, f.res);
    for (int k = 0; k < 6; ++k)
      for (int j = 0; j < 6; ++j)
        for (int i = 0; i < 6; ++i) {
          const std::size_t idx = f.index(i, j, k);
          CHECK(g.values[idx] == doctest::Approx(f.density_raw[idx]).epsilon(1e-12));
          CHECK((g.position(idx) - f.node_position(i, j, k)).norm() <= 1e-12);
        }
    // Boundary-inclusive: first and last nodes sit on the bbox corners.
    CHECK((g.position(0) - f.bbox.min).norm() == 0.0);
    CHECK((g.position(g.values.size() - 1) - (f.bbox.min + Vec3::Constant(f.bbox.edge))).norm() <= 1e-12);
  }

  TEST_CASE("summaries and masks") {
    EnsembleGrid eg;
    eg.res = 2;
    eg.members = 2;
    eg.mean = {0, 10, 16, 20, 30, -1, 15, 15.0001};
    eg.uncertainty = {1, 2, 3, 4, 5, 6, 7, 8};
    const auto all = grid_summary(eg);
    CHECK(all.count == 8);
    CHECK(all.mean_uncertainty == doctest::Approx(4.5));
    const auto masked = grid_summary(eg, density_above(15.0));
    CHECK(masked.count == 4);
    CHECK(masked.mean_uncertainty == doctest::Approx((3 + 4 + 5 + 8) / 4.0));
    CHECK(masked.mean_density == doctest::Approx((16 + 20 + 30 + 15.0001) / 4.0));
    CHECK_THROWS_AS(grid_summary(eg, density_above(100.0)), Error);
    const auto upper = grid_summary_where(eg, [](const Vec3& x, double, double) { return x.z() > 0.0; });
    CHECK(upper.count == 4);
    CHECK(upper.mean_uncertainty == doctest::Approx(6.5));

    const PointSet pts = grid_to_points(eg, 15.0);
    CHECK(pts.size() == 4);
    for (const auto& p : pts) CHECK(p.density > 15.0);
    CHECK_NOTHROW(validate_points(pts));
    PointSet bad = pts;
    bad[0].uncertainty = -1.0;
    CHECK_THROWS_AS(validate_points(bad), Error);
  }

  TEST_CASE("ensemble training") {
    const auto& ds = testing::small_scene();
    TrainConfig cfg;
    cfg.steps = 20;
    cfg.rays_per_step = 64;
    cfg.field_res = 6;
    CHECK_THROWS_AS(train_ensemble(ds, cfg, 1), Error);

    std::vector<std::vector<TrainLogEntry>> logs;
    const auto seq = train_ensemble(ds, cfg, 3, {}, &logs);
    REQUIRE(seq.size() == 3);
    CHECK(logs.size() == 3);
    CHECK_FALSE(seq[0] == seq[1]);
    TrainConfig second = cfg;
    second.seed = cfg.seed + 2;
    CHECK(train_member(ds, second) == seq[2]);

    EnsembleOptions par;
    par.threads = 3;
    CHECK(train_ensemble(ds, cfg, 3, par) == seq);

    EnsembleOptions same;
    same.seed_stride = 0;
    const auto twins = train_ensemble(ds, cfg, 2, same);
    CHECK(twins[0] == twins[1]);
  }

  TEST_CASE("member failures name the member") {
    Dataset ds = testing::small_scene();
    for (auto& fr : ds.frames) std::fill(fr.image.pixels.begin(), fr.image.pixels.end(), std::nan(""));
    TrainConfig cfg;
    cfg.steps = 2;
    cfg.rays_per_step = 8;
    cfg.field_res = 4;
    try {
      train_ensemble(ds, cfg, 2);
      FAIL("expected divergence");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Divergence);
      CHECK(std::string(e.what()).rfind("member 0", 0) == 0);
    }
  }
}
