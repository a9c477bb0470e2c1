#include "voxens/ensemble.hpp"

#include "parallel.hpp"

#include <cmath>

namespace voxens {

namespace {

Vec3 lattice_position(const Cube& bbox, int res, std::size_t idx) {
  const std::size_t n = static_cast<std::size_t>(res);
  const std::size_t i = idx % n;
  const std::size_t j = (idx / n) % n;
  const std::size_t k = idx / (n * n);
  const double s = bbox.edge / (res - 1);
  return bbox.min + Vec3(static_cast<double>(i) * s, static_cast<double>(j) * s, static_cast<double>(k) * s);
}

}  // namespace

Vec3 DensityGrid::position(std::size_t idx) const { return lattice_position(bbox, res, idx); }
Vec3 EnsembleGrid::position(std::size_t idx) const { return lattice_position(bbox, res, idx); }

std::vector<VoxelField> train_ensemble(const Dataset& dataset, const TrainConfig& cfg, int members,
                                       const EnsembleOptions& options,
                                       std::vector<std::vector<TrainLogEntry>>* logs) {
  require(members >= 2, "ensemble requires M >= 2");
  cfg.validate();
  std::vector<VoxelField> fields(members);
  std::vector<std::vector<TrainLogEntry>> member_logs(members);
  detail::parallel_for(static_cast<std::size_t>(members), options.threads, [&](std::size_t m) {
    TrainConfig member_cfg = cfg;
    member_cfg.seed = cfg.seed + m * options.seed_stride;
    try {
      fields[m] = train_member(dataset, member_cfg, &member_logs[m]);
    } catch (const Error& e) {
      throw Error(e.kind(), "member " + std::to_string(m) + ": " + e.what());
    }
  });
  if (logs) *logs = std::move(member_logs);
  return fields;
}

DensityGrid extract_grid(const VoxelField& field, const Cube& bbox, int res) {
  require(res >= 2, "grid resolution must be >= 2");
  DensityGrid g;
  g.bbox = bbox;
  g.res = res;
  const std::size_t n = static_cast<std::size_t>(res) * res * res;
  g.values.resize(n);
  for (std::size_t idx = 0; idx < n; ++idx) g.values[idx] = sample_raw(field, g.position(idx));
  return g;
}

EnsembleGrid ensemble_stats(std::span<const DensityGrid> grids) {
  require(grids.size() >= 2, "ensemble_stats needs at least 2 grids");
  const DensityGrid& first = grids.front();
  for (const auto& g : grids) {
    require(g.res == first.res && g.bbox == first.bbox && g.values.size() == first.values.size(),
            "member grids have mismatched shapes");
  }
  EnsembleGrid eg;
  eg.bbox = first.bbox;
  eg.res = first.res;
  eg.members = static_cast<int>(grids.size());
  const std::size_t n = first.values.size();
  const double inv_m = 1.0 / static_cast<double>(grids.size());
  const double inv_m1 = 1.0 / static_cast<double>(grids.size() - 1);
  eg.mean.resize(n);
  eg.uncertainty.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& g : grids) sum += g.values[i];
    const double mean = sum * inv_m;
    double sq = 0.0;
    for (const auto& g : grids) {
      const double d = g.values[i] - mean;
      sq += d * d;
    }
    eg.mean[i] = mean;
    eg.uncertainty[i] = std::sqrt(sq * inv_m1);
  }
  return eg;
}

GridSummary grid_summary(const EnsembleGrid& eg, const ValueMask& mask) {
  if (!mask) return grid_summary_where(eg, {});
  return grid_summary_where(eg, [&](const Vec3&, double m, double u) { return mask(m, u); });
}

GridSummary grid_summary_where(const EnsembleGrid& eg, const PositionMask& mask) {
  GridSummary s;
  double sum_u = 0.0;
  double sum_m = 0.0;
  for (std::size_t i = 0; i < eg.size(); ++i) {
    if (mask && !mask(eg.position(i), eg.mean[i], eg.uncertainty[i])) continue;
    sum_u += eg.uncertainty[i];
    sum_m += eg.mean[i];
    ++s.count;
  }
  if (s.count == 0) fail(ErrorKind::Invalid, "no positions selected");
  s.mean_uncertainty = sum_u / static_cast<double>(s.count);
  s.mean_density = sum_m / static_cast<double>(s.count);
  return s;
}

ValueMask density_above(double threshold) {
  return [threshold](double mean, double) { return mean > threshold; };
}

void validate_points(const PointSet& ps) {
  for (const auto& p : ps) {
    require(p.position.allFinite() && std::isfinite(p.density), "point values must be finite");
    require(std::isfinite(p.uncertainty) && p.uncertainty >= 0.0, "point uncertainty must be finite and >= 0");
  }
}

PointSet grid_to_points(const EnsembleGrid& eg, double density_threshold) {
  PointSet ps;
  for (std::size_t i = 0; i < eg.size(); ++i)
    if (eg.mean[i] > density_threshold) ps.push_back({eg.position(i), eg.mean[i], eg.uncertainty[i], std::nullopt});
  return ps;
}

PointSet grid_to_points(const DensityGrid& grid, double density_threshold) {
  PointSet ps;
  for (std::size_t i = 0; i < grid.values.size(); ++i)
    if (grid.values[i] > density_threshold) ps.push_back({grid.position(i), grid.values[i], 0.0, std::nullopt});
  return ps;
}

}  // namespace voxens
