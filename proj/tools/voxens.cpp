// voxens command line: synth, run, sweep, psnr, filter, export-ply.

#include "voxens/export.hpp"
#include "voxens/pipeline.hpp"
#include "voxens/postprocess.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

using namespace voxens;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Invalid:
    case ErrorKind::Config: return 2;
    case ErrorKind::Divergence: return 3;
    case ErrorKind::Io:
    case ErrorKind::Format: return 4;
  }
  return 1;
}

/// Run-config flags; only the ones given on the command line override the config file.
struct RunFlags {
  std::string config;
  json set = json::object();

  template <typename T>
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<T>(flag, [this, key](const T& v) { set[key] = v; }, help);
  }

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON run config; flags override its keys");
    add<std::string>(app, "-d,--dataset", "dataset", "dataset directory (scene.json + images)");
    add<std::string>(app, "-o,--out", "out_dir", "output directory");
    add<int>(app, "--steps", "steps", "training steps per member");
    add<int>(app, "--rays-per-step", "rays_per_step", "rays per Adam step");
    add<double>(app, "--lr", "lr", "Adam learning rate");
    add<double>(app, "--init-lo", "init_lo", "lower bound of the uniform density init");
    add<double>(app, "--init-hi", "init_hi", "upper bound of the uniform density init");
    add<std::uint64_t>(app, "--seed", "seed", "base member seed (member m uses seed + m)");
    add<int>(app, "--field-res", "field_res", "voxel field lattice size");
    add<double>(app, "--step", "step", "ray marching step (0 = edge / (2 res))");
    add<int>(app, "--log-every", "log_every", "training log interval");
    add<double>(app, "--sigma-im", "sigma_im", "image noise std in 8-bit levels");
    add<double>(app, "--sigma-t", "sigma_t", "translation noise std in scene units");
    add<double>(app, "--sigma-t-percent", "sigma_t_percent", "translation noise std in % of rig circumference");
    add<double>(app, "--sigma-r", "sigma_r", "rotation noise std in degrees per Euler angle");
    add<std::uint64_t>(app, "--noise-seed", "noise_seed", "noise seed");
    add<double>(app, "--rig-radius", "rig_radius", "rig radius for --sigma-t-percent");
    add<int>(app, "--members", "members", "ensemble size M (default 10)");
    add<int>(app, "--grid-res", "grid_res", "extraction grid resolution (default 64)");
    add<double>(app, "--density-threshold", "density_threshold", "point extraction threshold (default 15)");
    add<double>(app, "--percentile", "percentile", "uncertainty percentile kept (default 90)");
    add<std::string>(app, "--percentile-scope", "percentile_scope", "points | grid");
    add<double>(app, "--surface-eps", "surface_eps", "artifact distance (default 2 grid cells)");
    add<int>(app, "--histogram-bins", "histogram_bins", "uncertainty histogram bins");
    add<std::string>(app, "--ply-mode", "ply_mode", "ascii | binary_le");
    add<int>(app, "--parallel-members", "parallel_members", "threads for concurrent member training");
    add<bool>(app, "--save-fields", "save_fields", "write member field snapshots");
  }

  RunConfig resolve() const {
    RunConfig base = config.empty() ? RunConfig{} : load_config(config);
    return config_from_json(set, base);
  }
};

PointSet load_points_source(const fs::path& in, double threshold) {
  const auto ext = in.extension().string();
  if (ext == ".vxe") return grid_to_points(load_ensemble(in), threshold);
  if (ext == ".vxg") return grid_to_points(load_grid(in), threshold);
  if (ext == ".vxf") {
    const VoxelField f = load_field(in);
    DensityGrid g;
    g.bbox = f.bbox;
    g.res = f.res;
    g.values = f.density_raw;
    PointSet ps = grid_to_points(g, threshold);
    for (auto& p : ps) p.color = sample_color(f, p.position);
    return ps;
  }
  if (ext == ".ply") return read_ply(in);
  fail(ErrorKind::Config, "unsupported input " + in.string() + " (expected .vxe, .vxg, .vxf or .ply)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Voxel radiance field ensembles with density uncertainty"};
  app.require_subcommand(1);

  // synth
  SynthOptions synth;
  std::string synth_out, rig_name = "full_sphere";
  auto* s = app.add_subcommand("synth", "render a synthetic dataset with ground truth");
  s->add_option("-o,--out", synth_out, "output directory")->required();
  s->add_option("--preset", synth.preset, "empty | sphere | sphere-occluder")->capture_default_str();
  s->add_option("--rig", rig_name, "full_sphere | upper_hemisphere | one_sided_half_hemisphere")->capture_default_str();
  s->add_option("-n,--views", synth.views, "number of cameras")->capture_default_str();
  s->add_option("--radius", synth.radius, "rig radius")->capture_default_str();
  s->add_option("--width", synth.intrinsics.width, "image width")->capture_default_str();
  s->add_option("--height", synth.intrinsics.height, "image height")->capture_default_str();
  s->add_option("--camera-angle-x", synth.intrinsics.camera_angle_x, "horizontal field of view (rad)");
  s->add_option("--gt-res", synth.render.gt_res, "ground-truth lattice resolution")->capture_default_str();
  s->add_option("--margin", synth.render.margin, "bbox margin fraction")->capture_default_str();

  // run
  RunFlags run_flags;
  auto* r = app.add_subcommand("run", "perturb, train an ensemble, extract, filter and export");
  run_flags.attach(r);

  // sweep
  RunFlags sweep_flags;
  std::string axis;
  std::vector<std::string> values;
  auto* w = app.add_subcommand("sweep", "run once per noise value and write sweep.csv");
  sweep_flags.attach(w);
  w->add_option("--axis", axis, "sigma_im | sigma_t | sigma_r | sigma_tr")->required();
  w->add_option("--values", values, "values; '%' suffix on translation = percent of circumference, sigma_tr as T:R")
      ->required()
      ->delimiter(',');

  // psnr
  std::string img_a, img_b;
  auto* p = app.add_subcommand("psnr", "PSNR between two images (8-bit domain)");
  p->add_option("a", img_a, "first image")->required();
  p->add_option("b", img_b, "second image")->required();

  // filter
  std::string filter_in, filter_out;
  double filter_thr = 15.0, filter_p = 90.0;
  std::string filter_scope = "points", filter_mode = "binary_le";
  int filter_bins = 50;
  auto* f = app.add_subcommand("filter", "percentile filter on a saved ensemble grid");
  f->add_option("input", filter_in, "ensemble grid (.vxe)")->required();
  f->add_option("-o,--out", filter_out, "output directory")->required();
  f->add_option("--density-threshold", filter_thr, "point extraction threshold")->capture_default_str();
  f->add_option("--percentile", filter_p, "uncertainty percentile kept")->capture_default_str();
  f->add_option("--percentile-scope", filter_scope, "points | grid")->capture_default_str();
  f->add_option("--histogram-bins", filter_bins, "histogram bins")->capture_default_str();
  f->add_option("--ply-mode", filter_mode, "ascii | binary_le")->capture_default_str();

  // export-ply
  std::string export_in, export_out, export_mode = "binary_le";
  double export_thr = 15.0;
  auto* e = app.add_subcommand("export-ply", "point cloud from a snapshot (.vxe, .vxg, .vxf) or PLY");
  e->add_option("input", export_in, "snapshot or PLY")->required();
  e->add_option("output", export_out, "output PLY")->required();
  e->add_option("--density-threshold", export_thr, "point extraction threshold")->capture_default_str();
  e->add_option("--ply-mode", export_mode, "ascii | binary_le")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s) {
      synth.rig = parse_rig_kind(rig_name);
      const Dataset ds = cmd_synth(synth, synth_out);
      std::printf("wrote %zu views to %s\n", ds.frames.size(), synth_out.c_str());
    } else if (*r) {
      const MetricsReport rep = cmd_run(run_flags.resolve());
      std::printf("mean_psnr %.4f  mU_delta %.6g  m_mean_delta %.6g  kept %zu  removed %zu\n", rep.mean_psnr,
                  rep.mU_delta, rep.m_mean_delta, rep.point_counts.kept, rep.point_counts.removed);
    } else if (*w) {
      const RunConfig base = sweep_flags.resolve();
      const auto rows = cmd_sweep(base, parse_sweep_axis(axis), values);
      int failed = 0;
      for (const auto& row : rows) {
        if (row.report)
          std::printf("%-12s psnr %.4f  mU %.6g  m %.6g\n", row.value.c_str(), row.report->mean_psnr,
                      row.report->mU_delta, row.report->m_mean_delta);
        else
          std::printf("%-12s FAILED: %s\n", row.value.c_str(), row.error.c_str()), ++failed;
      }
      std::printf("wrote %s\n", (fs::path(base.out_dir) / "sweep.csv").c_str());
      if (failed) return 1;
    } else if (*p) {
      const double v = psnr(load_image(img_a), load_image(img_b));
      if (std::isinf(v)) std::printf("inf\n");
      else std::printf("%.6f\n", v);
    } else if (*f) {
      const EnsembleGrid eg = load_ensemble(filter_in);
      const PlyMode mode = parse_ply_mode(filter_mode);
      const PointSet points = grid_to_points(eg, filter_thr);
      FilterResult res;
      if (filter_scope == "grid") res = split_by_uncertainty(points, percentile(eg.uncertainty, filter_p));
      else if (filter_scope == "points") res = points.empty() ? FilterResult{} : percentile_filter(points, filter_p);
      else fail(ErrorKind::Config, "percentile scope must be 'points' or 'grid'");
      fs::create_directories(filter_out);
      write_ply(res.kept, fs::path(filter_out) / "points_kept.ply", mode);
      write_ply(res.removed, fs::path(filter_out) / "points_removed.ply", mode);
      std::vector<double> u;
      for (const auto& pt : points) u.push_back(pt.uncertainty);
      if (u.empty()) u = eg.uncertainty;
      write_histogram_csv(uncertainty_histogram(u, filter_bins), fs::path(filter_out) / "uncertainty_hist.csv");
      std::printf("threshold %.9g  kept %zu  removed %zu\n", res.threshold, res.kept.size(), res.removed.size());
    } else if (*e) {
      const PointSet ps = load_points_source(export_in, export_thr);
      write_ply(ps, export_out, parse_ply_mode(export_mode));
      std::printf("wrote %zu points to %s\n", ps.size(), export_out.c_str());
    }
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 4;
  }
  return 0;
}
