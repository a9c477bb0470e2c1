#pragma once

#include "voxens/dataset.hpp"
#include "voxens/export.hpp"
#include "voxens/perturb.hpp"
#include "voxens/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace voxens {

/// Everything one experiment needs. Serializes to a flat JSON object whose
/// keys match the long CLI flags with '-' replaced by '_'.
struct RunConfig {
  std::string dataset;
  std::string out_dir = "run";
  TrainConfig train;
  NoiseSpec noise;
  /// Translation sigma in % of the rig circumference; overrides noise.sigma_t when set.
  std::optional<double> sigma_t_percent;
  /// Rig radius for the percent conversion; defaults to the mean camera distance
  /// from the scene bbox center.
  std::optional<double> rig_radius;
  int members = 10;
  int grid_res = 64;
  double density_threshold = 15.0;
  double percentile = 90.0;
  /// "points": percentile over above-threshold points; "grid": over every grid position.
  std::string percentile_scope = "points";
  /// Artifact distance scale; defaults to 2 grid cell widths.
  std::optional<double> surface_eps;
  int histogram_bins = 50;
  std::string ply_mode = "binary_le";
  int threads = 1;
  bool save_fields = true;

  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);

/// Overlays the keys of `doc` onto `base`; unknown keys throw Error(Config).
RunConfig config_from_json(const nlohmann::json& doc, RunConfig base = {});

RunConfig load_config(const std::filesystem::path& path);

struct SynthOptions {
  std::string preset = "sphere";
  RigKind rig = RigKind::FullSphere;
  int views = 20;
  double radius = 1.5;
  Intrinsics intrinsics;
  RenderConfig render;
};

/// Generates a preset scene and writes the dataset plus `gt.json`.
Dataset cmd_synth(const SynthOptions& options, const std::filesystem::path& out);

/// Fixed clock for reproducible reports; empty uses the wall clock.
struct RunHooks {
  std::optional<std::string> timestamp;
  bool quiet = false;
};

/// Full pipeline: noise, ensemble training, grid statistics, filtering, exports.
MetricsReport cmd_run(const RunConfig& cfg, const RunHooks& hooks = {});

enum class SweepAxis { SigmaIm, SigmaT, SigmaR, SigmaTR };

SweepAxis parse_sweep_axis(const std::string& name);

/// One sweep value. Translation components accept a '%' suffix meaning percent
/// of the rig circumference; sigma_tr values are written "T:R" (e.g. "0.01%:0.1").
RunConfig apply_sweep_value(const RunConfig& base, SweepAxis axis, const std::string& value);

struct SweepRow {
  std::string value;
  std::string run_dir;
  std::optional<MetricsReport> report;
  std::string error;
};

/// Runs cmd_run for every value under `<out_dir>/<axis>_<i>` and writes
/// `<out_dir>/sweep.csv`.
std::vector<SweepRow> cmd_sweep(const RunConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                                const RunHooks& hooks = {});

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

/// Mean distance of camera centers from the scene bbox center.
double mean_rig_radius(const Dataset& dataset);

}  // namespace voxens
