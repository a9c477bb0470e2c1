#include "support.hpp"
#include "voxens/postprocess.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

using namespace voxens;

namespace {

PointSet random_points(std::uint64_t seed, std::size_t n, bool with_ties = false) {
  CounterRng rng(seed);
  PointSet ps(n);
  for (auto& p : ps) {
    p.position = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    p.density = rng.uniform(15, 60);
    p.uncertainty = with_ties ? static_cast<double>(rng.below(7)) : std::abs(rng.normal()) * 3.0;
  }
  return ps;
}

// Closest-rank interpolation written from the definition: the p-th percentile
// sits at fractional rank (n - 1) p / 100 between order statistics.
double reference_percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double r = (v.size() - 1) * p / 100.0;
  const double f = r - std::floor(r);
  const std::size_t i = static_cast<std::size_t>(r);
  if (f == 0.0) return v[i];
  return (1 - f) * v[i] + f * v[i + 1];
}

GroundTruthField unit_sphere() {
  GroundTruthField gt;
  Primitive s;
  s.center = Vec3::Zero();
  s.size = Vec3::Constant(0.5);
  gt.primitives.push_back(s);
  return gt;
}

DensityGrid sphere_grid(int res, const Cube& box) {
  DensityGrid g;
  g.bbox = box;
  g.res = res;
  g.values.assign(static_cast<std::size_t>(res) * res * res, 0.0);
  for (std::size_t i = 0; i < g.values.size(); ++i)
    if (std::abs(g.position(i).norm() - 0.5) < 0.05) g.values[i] = 40.0;
  return g;
}

}  // namespace

TEST_SUITE("postprocess") {
  TEST_CASE("percentile by hand") {
    const std::vector<double> v{5, 1, 4, 2, 3};
    CHECK(percentile(v, 0) == 1.0);
    CHECK(percentile(v, 100) == 5.0);
    CHECK(percentile(v, 50) == 3.0);
    CHECK(percentile(v, 90) == doctest::Approx(4.6));
    CHECK(percentile(v, 25) == 2.0);
    const std::vector<double> one{7.5};
    CHECK(percentile(one, 37) == 7.5);
    CHECK_THROWS_AS(percentile(std::vector<double>{}, 50), Error);
    CHECK_THROWS_AS(percentile(v, 101), Error);
  }

  TEST_CASE("percentile matches the reference on random data") {
    CounterRng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> v(1 + rng.below(300));
      for (double& x : v) x = rng.normal();
      const double p = rng.uniform(0, 100);
      CHECK(percentile(v, p) == doctest::Approx(reference_percentile(v, p)).epsilon(1e-12));
    }
  }

  TEST_CASE("property: percentile filter keeps exactly the at-or-below set") {
    CounterRng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 1 + rng.below(2000);
      const PointSet ps = random_points(500 + trial, n, trial % 3 == 0);
      const double p = trial == 0 ? 100.0 : rng.uniform(0.5, 100);
      const FilterResult r = percentile_filter(ps, p);
      std::size_t expect = 0;
      for (const auto& pt : ps) expect += pt.uncertainty <= r.threshold;
      CHECK(r.kept.size() == expect);
      CHECK(r.kept.size() + r.removed.size() == n);
      for (const auto& pt : r.kept) CHECK(pt.uncertainty <= r.threshold);
      for (const auto& pt : r.removed) CHECK(pt.uncertainty > r.threshold);
      const double frac = static_cast<double>(r.kept.size()) / n;
      CHECK(frac >= p / 100.0 - 1.0 / n);
      CHECK(frac <= 1.0);
      if (p == 100.0) CHECK(r.removed.empty());
    }
  }

  TEST_CASE("property: kept set grows with p") {
    const PointSet ps = random_points(9, 3000, true);
    std::size_t prev = 0;
    for (double p = 1; p <= 100; p += 3) {
      const auto r = percentile_filter(ps, p);
      CHECK(r.kept.size() >= prev);
      prev = r.kept.size();
    }
    CHECK_THROWS_AS(percentile_filter(ps, 0.0), Error);
    CHECK_THROWS_AS(percentile_filter({}, 50.0), Error);
  }

  TEST_CASE("filter preserves point order") {
    const PointSet ps = random_points(10, 200);
    const auto r = percentile_filter(ps, 60);
    std::size_t k = 0, m = 0;
    for (const auto& pt : ps) {
      if (k < r.kept.size() && r.kept[k] == pt) ++k;
      else if (m < r.removed.size() && r.removed[m] == pt) ++m;
    }
    CHECK(k == r.kept.size());
    CHECK(m == r.removed.size());
  }

  TEST_CASE("histogram") {
    const std::vector<double> v{0.0, 0.5, 1.0, 1.5, 2.0, 2.0};
    const Histogram h = uncertainty_histogram(v, 4);
    REQUIRE(h.bin_edges.size() == 5);
    CHECK(h.bin_edges.front() == 0.0);
    CHECK(h.bin_edges.back() == 2.0);
    CHECK(h.counts == std::vector<long long>{1, 1, 1, 3});
    CHECK(h.total() == 6);

    const Histogram clipped = uncertainty_histogram(v, 2, std::make_pair(0.25, 1.25));
    CHECK(clipped.counts == std::vector<long long>{1, 1});
    const Histogram flat = uncertainty_histogram(std::vector<double>{3, 3, 3}, 5);
    CHECK(flat.total() == 3);
    CHECK_THROWS_AS(uncertainty_histogram(v, 0), Error);

    CounterRng rng(5);
    std::vector<double> big(5000);
    for (double& x : big) x = rng.uniform(0, 7);
    CHECK(uncertainty_histogram(big, 37).total() == 5000);

    const auto dir = testing::scratch_dir("hist");
    write_histogram_csv(h, dir / "h.csv");
    std::ifstream in(dir / "h.csv");
    std::string line;
    int rows = 0;
    std::getline(in, line);
    CHECK(line == "bin_lo,bin_hi,count");
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 4);
  }

  TEST_CASE("point classes") {
    const auto gt = unit_sphere();
    CHECK(classify_point(gt, Vec3(0.5, 0, 0), 0.05) == PointClass::Surface);
    CHECK(classify_point(gt, Vec3(0, 0.54, 0), 0.05) == PointClass::Surface);
    CHECK(classify_point(gt, Vec3(0, 0, 0.46), 0.05) == PointClass::Surface);
    CHECK(classify_point(gt, Vec3(0, 0, 0), 0.05) == PointClass::Interior);
    CHECK(classify_point(gt, Vec3(0, 0.6, 0), 0.05) == PointClass::Artifact);
    CHECK(classify_point(GroundTruthField{}, Vec3(0, 0, 0), 0.05) == PointClass::Artifact);
  }

  TEST_CASE("artifact metrics") {
    const auto gt = unit_sphere();
    auto pt = [](double x) { return GridPoint{Vec3(x, 0, 0), 20.0, 0.0, std::nullopt}; };
    const PointSet kept{pt(0.5), pt(0.49), pt(0.0), pt(0.9)};
    const PointSet removed{pt(0.8), pt(0.7), pt(0.5)};
    const auto r = artifact_metrics(kept, removed, gt, 0.05);
    CHECK(r.kept_artifacts == 1);
    CHECK(r.removed_artifacts == 2);
    CHECK(r.kept_surface == 2);
    CHECK(r.removed_surface == 1);
    CHECK(r.kept_artifact_fraction == doctest::Approx(0.25));
    CHECK(r.removed_artifact_fraction == doctest::Approx(2.0 / 3.0));
    REQUIRE(r.enrichment);
    CHECK(*r.enrichment == doctest::Approx((2.0 / 3.0) / 0.25));
    REQUIRE(r.surface_recall);
    CHECK(*r.surface_recall == doctest::Approx(2.0 / 3.0));

    const auto none_removed = artifact_metrics(kept, {}, gt, 0.05);
    CHECK_FALSE(none_removed.enrichment);
    const auto clean_kept = artifact_metrics({pt(0.5)}, removed, gt, 0.05);
    REQUIRE(clean_kept.enrichment);
    CHECK(std::isinf(*clean_kept.enrichment));
    CHECK_FALSE(artifact_metrics({pt(0.9)}, {}, gt, 0.05).surface_recall);
    CHECK_THROWS_AS(artifact_metrics(kept, removed, gt, 0.0), Error);
  }

  TEST_CASE("averaging suppresses member-specific floaters") {
    // Every member carries the shared surface plus its own floater; the mean
    // keeps the surface and dilutes each floater below the threshold.
    Cube box;
    box.min = Vec3::Constant(-1);
    box.edge = 2.0;
    const auto gt = unit_sphere();
    const int res = 21;
    std::vector<DensityGrid> members;
    for (int m = 0; m < 5; ++m) {
      DensityGrid g = sphere_grid(res, box);
      const std::size_t corner = static_cast<std::size_t>(m + 1) + res * (1 + static_cast<std::size_t>(res) * 1);
      g.values[corner] = 50.0;
      members.push_back(g);
    }
    const EnsembleGrid eg = ensemble_stats(members);
    const auto r = robustness_compare(members, eg, 15.0, gt, 0.15);
    CHECK(r.member_artifacts == std::vector<std::size_t>(5, 1));
    CHECK(r.ensemble_artifacts == 0);
    CHECK(r.ensemble_points == r.member_points[0] - 1);
    CHECK(r.median_member_artifacts() == 1.0);

    RobustnessReport even;
    even.member_artifacts = {4, 1, 3, 10};
    CHECK(even.median_member_artifacts() == 3.5);
    CHECK_THROWS_AS(RobustnessReport{}.median_member_artifacts(), Error);
  }
}
