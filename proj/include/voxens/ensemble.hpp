#pragma once

#include "voxens/field.hpp"
#include "voxens/trainer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace voxens {

/// Node-aligned, boundary-inclusive sampling of one member's raw density.
/// values are stored x-fastest: i + res * (j + res * k).
struct DensityGrid {
  Cube bbox;
  int res = 2;
  std::vector<double> values;

  Vec3 position(std::size_t idx) const;
  bool operator==(const DensityGrid& o) const = default;
};

/// Per-position ensemble mean and Bessel-corrected standard deviation.
struct EnsembleGrid {
  Cube bbox;
  int res = 2;
  std::vector<double> mean;
  std::vector<double> uncertainty;
  int members = 0;

  Vec3 position(std::size_t idx) const;
  std::size_t size() const { return mean.size(); }
  bool operator==(const EnsembleGrid& o) const = default;
};

struct EnsembleOptions {
  int threads = 1;
  /// Member m trains with seed cfg.seed + m * seed_stride; 0 forces identical members.
  std::uint64_t seed_stride = 1;
};

/// Trains `members` fields in member order. Training failures are rethrown
/// with the member index prepended.
std::vector<VoxelField> train_ensemble(const Dataset& dataset, const TrainConfig& cfg, int members,
                                       const EnsembleOptions& options = {},
                                       std::vector<std::vector<TrainLogEntry>>* logs = nullptr);

DensityGrid extract_grid(const VoxelField& field, const Cube& bbox, int res);

EnsembleGrid ensemble_stats(std::span<const DensityGrid> grids);

struct GridSummary {
  double mean_uncertainty = 0.0;  // mU_delta
  double mean_density = 0.0;      // mean of the per-position mean density
  std::size_t count = 0;
};

using ValueMask = std::function<bool(double mean, double uncertainty)>;
using PositionMask = std::function<bool(const Vec3& x, double mean, double uncertainty)>;

/// Averages over positions passing `mask` (all positions when empty).
/// Throws Error(Invalid) "no positions selected" when nothing passes.
GridSummary grid_summary(const EnsembleGrid& eg, const ValueMask& mask = {});
GridSummary grid_summary_where(const EnsembleGrid& eg, const PositionMask& mask);

/// Mask selecting positions whose ensemble mean exceeds `threshold`.
ValueMask density_above(double threshold);

struct GridPoint {
  Vec3 position = Vec3::Zero();
  double density = 0.0;
  double uncertainty = 0.0;
  std::optional<Rgb> color;

  bool operator==(const GridPoint& o) const = default;
};

using PointSet = std::vector<GridPoint>;

void validate_points(const PointSet& ps);

/// Every position with mean > density_threshold, in world coordinates.
PointSet grid_to_points(const EnsembleGrid& eg, double density_threshold);

/// Same extraction for a single member grid (uncertainty 0).
PointSet grid_to_points(const DensityGrid& grid, double density_threshold);

}  // namespace voxens
