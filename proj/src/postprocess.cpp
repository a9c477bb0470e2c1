#include "voxens/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

namespace voxens {

double percentile(std::span<const double> values, double p) {
  require(!values.empty(), "percentile of an empty set");
  require(p >= 0.0 && p <= 100.0, "percentile p must be in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = static_cast<double>(sorted.size() - 1) * p / 100.0;
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

FilterResult split_by_uncertainty(const PointSet& ps, double threshold) {
  FilterResult r;
  r.threshold = threshold;
  for (const auto& pt : ps) (pt.uncertainty <= threshold ? r.kept : r.removed).push_back(pt);
  return r;
}

FilterResult percentile_filter(const PointSet& ps, double p) {
  require(!ps.empty(), "percentile_filter on an empty point set");
  require(p > 0.0 && p <= 100.0, "percentile p must be in (0, 100]");
  std::vector<double> u;
  u.reserve(ps.size());
  for (const auto& pt : ps) u.push_back(pt.uncertainty);
  return split_by_uncertainty(ps, percentile(u, p));
}

long long Histogram::total() const {
  long long t = 0;
  for (long long c : counts) t += c;
  return t;
}

Histogram uncertainty_histogram(std::span<const double> values, int bins,
                                std::optional<std::pair<double, double>> range) {
  require(bins >= 1, "histogram needs at least one bin");
  require(!values.empty(), "histogram of an empty set");
  double lo, hi;
  if (range) {
    std::tie(lo, hi) = *range;
    require(hi > lo, "histogram range must have hi > lo");
  } else {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx > *mn ? *mx : *mn + 1.0;
  }
  Histogram h;
  h.bin_edges.resize(bins + 1);
  const double width = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) h.bin_edges[b] = lo + b * width;
  h.bin_edges[bins] = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (!(v >= lo && v <= hi)) continue;
    int b = std::clamp(static_cast<int>((v - lo) / width), 0, bins - 1);
    // The edges are the contract; fix up formula rounding against them.
    while (b > 0 && v < h.bin_edges[b]) --b;
    while (b < bins - 1 && v >= h.bin_edges[b + 1]) ++b;
    ++h.counts[b];
  }
  return h;
}

void write_histogram_csv(const Histogram& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "bin_lo,bin_hi,count\n";
  char line[128];
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%lld\n", h.bin_edges[b], h.bin_edges[b + 1], h.counts[b]);
    out << line;
  }
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

PointClass classify_point(const GroundTruthField& gt, const Vec3& x, double surface_eps) {
  double nearest_boundary = kInf;
  double min_sd = kInf;
  for (const auto& p : gt.primitives) {
    const double sd = p.signed_distance(x);
    nearest_boundary = std::min(nearest_boundary, std::abs(sd));
    min_sd = std::min(min_sd, sd);
  }
  if (nearest_boundary <= surface_eps) return PointClass::Surface;
  if (min_sd > surface_eps) return PointClass::Artifact;
  return PointClass::Interior;
}

ArtifactReport artifact_metrics(const PointSet& kept, const PointSet& removed, const GroundTruthField& gt,
                                double surface_eps) {
  require(surface_eps > 0.0, "surface_eps must be > 0");
  ArtifactReport r;
  r.surface_eps = surface_eps;
  r.kept_total = kept.size();
  r.removed_total = removed.size();
  for (const auto& p : kept) {
    const auto c = classify_point(gt, p.position, surface_eps);
    r.kept_artifacts += c == PointClass::Artifact;
    r.kept_surface += c == PointClass::Surface;
  }
  for (const auto& p : removed) {
    const auto c = classify_point(gt, p.position, surface_eps);
    r.removed_artifacts += c == PointClass::Artifact;
    r.removed_surface += c == PointClass::Surface;
  }
  r.kept_artifact_fraction = kept.empty() ? 0.0 : static_cast<double>(r.kept_artifacts) / kept.size();
  r.removed_artifact_fraction = removed.empty() ? 0.0 : static_cast<double>(r.removed_artifacts) / removed.size();
  if (r.kept_surface + r.removed_surface > 0)
    r.surface_recall = static_cast<double>(r.kept_surface) / static_cast<double>(r.kept_surface + r.removed_surface);
  if (!removed.empty())
    r.enrichment = r.kept_artifact_fraction > 0.0 ? r.removed_artifact_fraction / r.kept_artifact_fraction : kInf;
  return r;
}

double RobustnessReport::median_member_artifacts() const {
  require(!member_artifacts.empty(), "no member rows");
  std::vector<std::size_t> v = member_artifacts;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? static_cast<double>(v[n / 2]) : 0.5 * static_cast<double>(v[n / 2 - 1] + v[n / 2]);
}

RobustnessReport robustness_compare(std::span<const DensityGrid> member_grids, const EnsembleGrid& ensemble,
                                    double density_threshold, const GroundTruthField& gt, double surface_eps) {
  require(member_grids.size() >= 2, "robustness_compare needs at least 2 member grids");
  require(surface_eps > 0.0, "surface_eps must be > 0");
  const auto count_artifacts = [&](const PointSet& ps) {
    std::size_t n = 0;
    for (const auto& p : ps) n += classify_point(gt, p.position, surface_eps) == PointClass::Artifact;
    return n;
  };
  RobustnessReport r;
  r.density_threshold = density_threshold;
  r.surface_eps = surface_eps;
  for (const auto& g : member_grids) {
    const PointSet ps = grid_to_points(g, density_threshold);
    r.member_points.push_back(ps.size());
    r.member_artifacts.push_back(count_artifacts(ps));
  }
  const PointSet ens = grid_to_points(ensemble, density_threshold);
  r.ensemble_points = ens.size();
  r.ensemble_artifacts = count_artifacts(ens);
  return r;
}

}  // namespace voxens
