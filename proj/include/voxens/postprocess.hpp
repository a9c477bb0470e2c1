#pragma once

#include "voxens/dataset.hpp"
#include "voxens/ensemble.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace voxens {

/// p-th percentile with linear interpolation between closest ranks at rank
/// position (n - 1) p / 100 of the sorted values.
double percentile(std::span<const double> values, double p);

struct FilterResult {
  PointSet kept;
  PointSet removed;
  double threshold = 0.0;
};

/// Keeps the points whose uncertainty is <= the p-th percentile of all point
/// uncertainties; p in (0, 100].
FilterResult percentile_filter(const PointSet& ps, double p);

/// Partition at an explicit uncertainty threshold (kept: uncertainty <= threshold).
FilterResult split_by_uncertainty(const PointSet& ps, double threshold);

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<long long> counts;

  long long total() const;
};

/// Equal-width bins over `range` (default min..max of values); the last bin
/// includes its upper edge and values outside the range are dropped.
Histogram uncertainty_histogram(std::span<const double> values, int bins,
                                std::optional<std::pair<double, double>> range = std::nullopt);

/// CSV with header `bin_lo,bin_hi,count`.
void write_histogram_csv(const Histogram& h, const std::filesystem::path& path);

enum class PointClass { Surface, Artifact, Interior };

/// Surface: within surface_eps of a primitive boundary. Artifact: outside every
/// primitive by more than surface_eps. Interior: everything else.
PointClass classify_point(const GroundTruthField& gt, const Vec3& x, double surface_eps);

struct ArtifactReport {
  double surface_eps = 0.0;
  std::size_t kept_total = 0;
  std::size_t removed_total = 0;
  std::size_t kept_artifacts = 0;
  std::size_t removed_artifacts = 0;
  std::size_t kept_surface = 0;
  std::size_t removed_surface = 0;
  double kept_artifact_fraction = 0.0;
  double removed_artifact_fraction = 0.0;
  /// kept_surface / (kept_surface + removed_surface); nullopt without surface points.
  std::optional<double> surface_recall;
  /// removed / kept artifact fraction; nullopt ("n/a") when removed is empty,
  /// +inf when kept holds no artifacts.
  std::optional<double> enrichment;

  bool operator==(const ArtifactReport& o) const = default;
};

ArtifactReport artifact_metrics(const PointSet& kept, const PointSet& removed, const GroundTruthField& gt,
                                double surface_eps);

struct RobustnessReport {
  double density_threshold = 0.0;
  double surface_eps = 0.0;
  std::vector<std::size_t> member_artifacts;
  std::vector<std::size_t> member_points;
  std::size_t ensemble_artifacts = 0;
  std::size_t ensemble_points = 0;

  double median_member_artifacts() const;
  bool operator==(const RobustnessReport& o) const = default;
};

/// Artifact counts of each thresholded member grid and of the thresholded ensemble mean.
RobustnessReport robustness_compare(std::span<const DensityGrid> member_grids, const EnsembleGrid& ensemble,
                                    double density_threshold, const GroundTruthField& gt, double surface_eps);

}  // namespace voxens
