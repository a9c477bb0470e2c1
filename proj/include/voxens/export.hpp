#pragma once

#include "voxens/ensemble.hpp"
#include "voxens/postprocess.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace voxens {

// -- PLY ----------------------------------------------------------------------

enum class PlyMode { Ascii, BinaryLittleEndian };

PlyMode parse_ply_mode(const std::string& name);

/// Vertex properties x, y, z, density, uncertainty (float) and, when every
/// point carries a color, red, green, blue (uchar).
void write_ply(const PointSet& ps, const std::filesystem::path& path, PlyMode mode);

/// Reader for the files write_ply produces (and compatible vertex-only PLYs).
PointSet read_ply(const std::filesystem::path& path);

// -- binary snapshots ---------------------------------------------------------
//
// Little-endian container: magic[4], u32 version, u32 res, f32 bbox_min[3],
// f32 edge, u32 extra, followed by f32 payload arrays.
//   VXF1 field:    extra = 0, density[res^3], color[3 res^3] (interleaved)
//   VXG1 grid:     extra = 0, values[res^3]
//   VXE1 ensemble: extra = members, mean[res^3], uncertainty[res^3]

inline constexpr std::uint32_t kSnapshotVersion = 1;

void save_field(const VoxelField& field, const std::filesystem::path& path);
VoxelField load_field(const std::filesystem::path& path);
void save_grid(const DensityGrid& grid, const std::filesystem::path& path);
DensityGrid load_grid(const std::filesystem::path& path);
void save_ensemble(const EnsembleGrid& eg, const std::filesystem::path& path);
EnsembleGrid load_ensemble(const std::filesystem::path& path);

// -- run report ---------------------------------------------------------------

inline constexpr int kReportSchemaVersion = 1;

struct PointCounts {
  std::size_t total_grid = 0;
  std::size_t above_threshold = 0;
  std::size_t kept = 0;
  std::size_t removed = 0;

  bool operator==(const PointCounts& o) const = default;
};

struct Provenance {
  std::vector<std::uint64_t> member_seeds;
  std::uint64_t noise_seed = 0;
  int members = 0;
  int grid_res = 0;
  std::string started;
  std::string finished;

  bool operator==(const Provenance& o) const = default;
};

struct MetricsReport {
  int schema_version = kReportSchemaVersion;
  bool baseline = false;
  /// Per-view PSNR averaged over members; +inf entries are serialized as "inf".
  std::vector<double> per_view_psnr;
  double mean_psnr = kInf;
  int inf_views = 0;
  std::vector<double> member_mean_psnr;
  /// Summaries over positions with mean density > density_threshold.
  double mU_delta = 0.0;
  double m_mean_delta = 0.0;
  std::size_t summary_count = 0;
  /// Summaries over every grid position.
  double mU_delta_all = 0.0;
  double m_mean_delta_all = 0.0;
  PointCounts point_counts;
  double uncertainty_threshold = 0.0;
  std::size_t gimbal_fallbacks = 0;
  std::optional<ArtifactReport> artifacts;
  std::optional<RobustnessReport> robustness;
  nlohmann::json config = nlohmann::json::object();
  Provenance provenance;
  /// Output name -> path relative to the run directory.
  std::map<std::string, std::string> outputs;

  bool operator==(const MetricsReport& o) const = default;
};

nlohmann::json report_to_json(const MetricsReport& report);

/// Throws Error(Format) naming a missing field or on a schema version mismatch.
/// Unknown fields are ignored; their names are appended to `warnings`.
MetricsReport report_from_json(const nlohmann::json& doc, std::vector<std::string>* warnings = nullptr);

void write_report(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport read_report(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

}  // namespace voxens
