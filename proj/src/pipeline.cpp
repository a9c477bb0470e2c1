#include "voxens/pipeline.hpp"

#include "voxens/ensemble.hpp"
#include "voxens/postprocess.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>

namespace voxens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void config_require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::Config, what);
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json optional_real(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void RunConfig::validate() const {
  config_require(!dataset.empty(), "dataset path is required");
  config_require(!out_dir.empty(), "out_dir must not be empty");
  config_require(members >= 2, "ensemble requires M ≥ 2");
  config_require(grid_res >= 2, "grid_res must be >= 2");
  config_require(percentile > 0.0 && percentile <= 100.0, "percentile must be in (0, 100]");
  config_require(percentile_scope == "points" || percentile_scope == "grid",
                 "percentile_scope must be 'points' or 'grid'");
  config_require(!sigma_t_percent || (std::isfinite(*sigma_t_percent) && *sigma_t_percent >= 0.0),
                 "sigma_t_percent must be >= 0");
  config_require(!rig_radius || *rig_radius > 0.0, "rig_radius must be > 0");
  config_require(!surface_eps || *surface_eps > 0.0, "surface_eps must be > 0");
  config_require(histogram_bins >= 1, "histogram_bins must be >= 1");
  config_require(threads >= 1, "parallel_members must be >= 1");
  config_require(std::isfinite(density_threshold), "density_threshold must be finite");
  try {
    parse_ply_mode(ply_mode);
    train.validate();
    noise.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
}

json config_to_json(const RunConfig& c) {
  return {{"dataset", c.dataset},
          {"out_dir", c.out_dir},
          {"steps", c.train.steps},
          {"rays_per_step", c.train.rays_per_step},
          {"lr", c.train.lr},
          {"adam_beta1", c.train.adam_beta1},
          {"adam_beta2", c.train.adam_beta2},
          {"adam_eps", c.train.adam_eps},
          {"init_lo", c.train.init_lo},
          {"init_hi", c.train.init_hi},
          {"seed", c.train.seed},
          {"field_res", c.train.field_res},
          {"step", c.train.step},
          {"log_every", c.train.log_every},
          {"sigma_im", c.noise.sigma_im},
          {"sigma_t", c.noise.sigma_t},
          {"sigma_r", c.noise.sigma_r_deg},
          {"noise_seed", c.noise.seed},
          {"sigma_t_percent", optional_real(c.sigma_t_percent)},
          {"rig_radius", optional_real(c.rig_radius)},
          {"members", c.members},
          {"grid_res", c.grid_res},
          {"density_threshold", c.density_threshold},
          {"percentile", c.percentile},
          {"percentile_scope", c.percentile_scope},
          {"surface_eps", optional_real(c.surface_eps)},
          {"histogram_bins", c.histogram_bins},
          {"ply_mode", c.ply_mode},
          {"parallel_members", c.threads},
          {"save_fields", c.save_fields}};
}

RunConfig config_from_json(const json& doc, RunConfig c) {
  config_require(doc.is_object(), "config must be a JSON object");
  for (const auto& [key, v] : doc.items()) {
    try {
      const auto opt = [&](std::optional<double>& dst) {
        if (v.is_null()) dst.reset();
        else dst = v.get<double>();
      };
      if (key == "dataset") c.dataset = v.get<std::string>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else if (key == "steps") c.train.steps = v.get<int>();
      else if (key == "rays_per_step") c.train.rays_per_step = v.get<int>();
      else if (key == "lr") c.train.lr = v.get<double>();
      else if (key == "adam_beta1") c.train.adam_beta1 = v.get<double>();
      else if (key == "adam_beta2") c.train.adam_beta2 = v.get<double>();
      else if (key == "adam_eps") c.train.adam_eps = v.get<double>();
      else if (key == "init_lo") c.train.init_lo = v.get<double>();
      else if (key == "init_hi") c.train.init_hi = v.get<double>();
      else if (key == "seed") c.train.seed = v.get<std::uint64_t>();
      else if (key == "field_res") c.train.field_res = v.get<int>();
      else if (key == "step") c.train.step = v.get<double>();
      else if (key == "log_every") c.train.log_every = v.get<int>();
      else if (key == "sigma_im") c.noise.sigma_im = v.get<double>();
      else if (key == "sigma_t") c.noise.sigma_t = v.get<double>();
      else if (key == "sigma_r") c.noise.sigma_r_deg = v.get<double>();
      else if (key == "noise_seed") c.noise.seed = v.get<std::uint64_t>();
      else if (key == "sigma_t_percent") opt(c.sigma_t_percent);
      else if (key == "rig_radius") opt(c.rig_radius);
      else if (key == "members") c.members = v.get<int>();
      else if (key == "grid_res") c.grid_res = v.get<int>();
      else if (key == "density_threshold") c.density_threshold = v.get<double>();
      else if (key == "percentile") c.percentile = v.get<double>();
      else if (key == "percentile_scope") c.percentile_scope = v.get<std::string>();
      else if (key == "surface_eps") opt(c.surface_eps);
      else if (key == "histogram_bins") c.histogram_bins = v.get<int>();
      else if (key == "ply_mode") c.ply_mode = v.get<std::string>();
      else if (key == "parallel_members") c.threads = v.get<int>();
      else if (key == "save_fields") c.save_fields = v.get<bool>();
      else fail(ErrorKind::Config, "unknown config key '" + key + "'");
    } catch (const json::exception&) {
      fail(ErrorKind::Config, "config key '" + key + "' has the wrong type");
    }
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, "malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

double mean_rig_radius(const Dataset& dataset) {
  require(!dataset.frames.empty(), "no frames");
  double sum = 0.0;
  for (const auto& f : dataset.frames) sum += (f.pose.center() - dataset.scene_bbox.center()).norm();
  return sum / static_cast<double>(dataset.frames.size());
}

Dataset cmd_synth(const SynthOptions& o, const fs::path& out) {
  config_require(o.views >= 1, "views must be >= 1");
  config_require(o.radius > 0.0, "radius must be > 0");
  const GroundTruthField gt = scene_preset(o.preset);
  const Vec3 look_at = enclosing_cube(gt, o.render.margin).center();
  const auto rig = camera_rig(o.rig, o.views, o.radius, look_at, o.intrinsics);
  Dataset ds = generate_synthetic_scene(gt, rig, o.render);
  save_dataset(ds, out);
  save_ground_truth(gt, out / "gt.json");
  return ds;
}

namespace {

/// Writes `<out_dir>/error.json`; never throws.
void write_error_record(const fs::path& dir, const std::string& stage, const Error& e) {
  static const char* kinds[] = {"invalid", "config", "io", "format", "divergence"};
  try {
    fs::create_directories(dir);
    std::ofstream out(dir / "error.json");
    out << json{{"stage", stage}, {"kind", kinds[static_cast<int>(e.kind())]}, {"message", e.what()}}.dump(2)
        << '\n';
  } catch (...) {
  }
}

PointSet colorize(PointSet ps, const std::vector<VoxelField>& fields) {
  for (auto& p : ps) {
    Rgb c = Rgb::Zero();
    for (const auto& f : fields) c += sample_color(f, p.position);
    p.color = (c / static_cast<double>(fields.size())).cwiseMax(0.0).cwiseMin(1.0);
  }
  return ps;
}

}  // namespace

MetricsReport cmd_run(const RunConfig& cfg_in, const RunHooks& hooks) {
  const fs::path dir = cfg_in.out_dir;
  std::string stage = "config";
  const auto say = [&](const std::string& msg) {
    if (!hooks.quiet) std::cerr << "[" << dir.string() << "] " << msg << '\n';
  };
  try {
    cfg_in.validate();
    RunConfig cfg = cfg_in;
    MetricsReport report;
    report.provenance.started = hooks.timestamp.value_or(utc_now());

    stage = "load";
    const Dataset clean = load_dataset(cfg.dataset);
    std::optional<GroundTruthField> gt;
    if (fs::exists(fs::path(cfg.dataset) / "gt.json")) gt = load_ground_truth(fs::path(cfg.dataset) / "gt.json");
    fs::create_directories(dir);

    stage = "perturb";
    if (cfg.sigma_t_percent) {
      if (!cfg.rig_radius) cfg.rig_radius = mean_rig_radius(clean);
      cfg.noise.sigma_t = percent_of_circumference(*cfg.sigma_t_percent, *cfg.rig_radius);
    }
    std::size_t fallbacks = 0;
    const Dataset data = apply_noise(clean, cfg.noise, &fallbacks);
    report.baseline = cfg.noise.is_baseline();
    report.gimbal_fallbacks = fallbacks;

    stage = "train";
    say("training " + std::to_string(cfg.members) + " members");
    std::vector<std::vector<TrainLogEntry>> logs;
    const auto fields = train_ensemble(data, cfg.train, cfg.members, {cfg.threads, 1}, &logs);
    for (int m = 0; m < cfg.members; ++m) report.provenance.member_seeds.push_back(cfg.train.seed + m);

    stage = "psnr";
    std::vector<double> view_sum(data.frames.size(), 0.0);
    std::vector<int> view_finite(data.frames.size(), 0);
    for (const auto& f : fields) {
      const auto s = mean_psnr(f, data, cfg.train.step);
      report.member_mean_psnr.push_back(s.mean);
      for (std::size_t v = 0; v < s.per_view.size(); ++v)
        if (std::isfinite(s.per_view[v])) view_sum[v] += s.per_view[v], ++view_finite[v];
    }
    std::vector<double> per_view;
    for (std::size_t v = 0; v < view_sum.size(); ++v)
      per_view.push_back(view_finite[v] ? view_sum[v] / view_finite[v] : kInf);
    const auto summary = summarize_psnr(per_view);
    report.per_view_psnr = summary.per_view;
    report.mean_psnr = summary.mean;
    report.inf_views = summary.inf_views;

    stage = "grid";
    say("extracting " + std::to_string(cfg.grid_res) + "^3 grids");
    std::vector<DensityGrid> grids;
    for (const auto& f : fields) grids.push_back(extract_grid(f, clean.scene_bbox, cfg.grid_res));
    const EnsembleGrid eg = ensemble_stats(grids);

    const auto all = grid_summary(eg);
    report.mU_delta_all = all.mean_uncertainty;
    report.m_mean_delta_all = all.mean_density;
    try {
      const auto masked = grid_summary(eg, density_above(cfg.density_threshold));
      report.mU_delta = masked.mean_uncertainty;
      report.m_mean_delta = masked.mean_density;
      report.summary_count = masked.count;
    } catch (const Error&) {
      // Nothing above the threshold: the masked summaries stay 0 with count 0.
    }

    stage = "filter";
    const PointSet points = colorize(grid_to_points(eg, cfg.density_threshold), fields);
    FilterResult filtered;
    if (cfg.percentile_scope == "grid") {
      filtered = split_by_uncertainty(points, percentile(eg.uncertainty, cfg.percentile));
    } else if (!points.empty()) {
      filtered = percentile_filter(points, cfg.percentile);
    }
    report.uncertainty_threshold = filtered.threshold;
    report.point_counts = {eg.size(), points.size(), filtered.kept.size(), filtered.removed.size()};

    const double eps = cfg.surface_eps.value_or(2.0 * eg.bbox.edge / (eg.res - 1));
    if (gt) {
      report.artifacts = artifact_metrics(filtered.kept, filtered.removed, *gt, eps);
      report.robustness = robustness_compare(grids, eg, cfg.density_threshold, *gt, eps);
    }

    stage = "export";
    say("writing outputs");
    const PlyMode mode = parse_ply_mode(cfg.ply_mode);
    const auto emit = [&](const std::string& name, const std::string& file) { report.outputs[name] = file; };
    write_ply(points, dir / "points_all.ply", mode);
    emit("points_all", "points_all.ply");
    write_ply(filtered.kept, dir / "points_kept.ply", mode);
    emit("points_kept", "points_kept.ply");
    write_ply(filtered.removed, dir / "points_removed.ply", mode);
    emit("points_removed", "points_removed.ply");
    save_ensemble(eg, dir / "ensemble.vxe");
    emit("ensemble", "ensemble.vxe");
    std::vector<double> u;
    if (cfg.percentile_scope == "grid" || points.empty()) {
      u = eg.uncertainty;
    } else {
      for (const auto& p : points) u.push_back(p.uncertainty);
    }
    write_histogram_csv(uncertainty_histogram(u, cfg.histogram_bins), dir / "uncertainty_hist.csv");
    emit("histogram", "uncertainty_hist.csv");
    for (int m = 0; m < cfg.members; ++m) {
      char name[32];
      std::snprintf(name, sizeof name, "member_%02d", m);
      save_grid(grids[m], dir / (std::string(name) + ".vxg"));
      emit(std::string(name) + "_grid", std::string(name) + ".vxg");
      write_train_log(logs[m], dir / (std::string(name) + "_log.csv"));
      emit(std::string(name) + "_log", std::string(name) + "_log.csv");
      if (cfg.save_fields) {
        save_field(fields[m], dir / (std::string(name) + ".vxf"));
        emit(std::string(name) + "_field", std::string(name) + ".vxf");
      }
    }
    {
      std::ofstream out(dir / "config.json");
      out << config_to_json(cfg).dump(2) << '\n';
      if (!out) fail(ErrorKind::Io, "cannot write " + (dir / "config.json").string());
    }
    emit("config", "config.json");
    emit("report", "report.json");

    report.config = config_to_json(cfg);
    report.provenance.noise_seed = cfg.noise.seed;
    report.provenance.members = cfg.members;
    report.provenance.grid_res = cfg.grid_res;
    report.provenance.finished = hooks.timestamp.value_or(utc_now());
    write_report(report, dir / "report.json");
    if (fs::exists(dir / "error.json")) fs::remove(dir / "error.json");
    say("done: mean PSNR " + std::to_string(report.mean_psnr) + " dB, mU " + std::to_string(report.mU_delta));
    return report;
  } catch (const Error& e) {
    write_error_record(dir, stage, e);
    throw;
  } catch (const fs::filesystem_error& e) {
    const Error io(ErrorKind::Io, e.what());
    write_error_record(dir, stage, io);
    throw io;
  }
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "sigma_im") return SweepAxis::SigmaIm;
  if (name == "sigma_t") return SweepAxis::SigmaT;
  if (name == "sigma_r") return SweepAxis::SigmaR;
  if (name == "sigma_tr") return SweepAxis::SigmaTR;
  fail(ErrorKind::Config, "unknown sweep axis '" + name + "' (expected sigma_im, sigma_t, sigma_r, sigma_tr)");
}

namespace {

const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::SigmaIm: return "sigma_im";
    case SweepAxis::SigmaT: return "sigma_t";
    case SweepAxis::SigmaR: return "sigma_r";
    case SweepAxis::SigmaTR: return "sigma_tr";
  }
  return "?";
}

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) fail(ErrorKind::Config, "invalid sweep value '" + s + "'");
  return v;
}

void set_translation(RunConfig& c, std::string s) {
  if (!s.empty() && s.back() == '%') {
    s.pop_back();
    c.sigma_t_percent = parse_number(s);
  } else {
    c.sigma_t_percent.reset();
    c.noise.sigma_t = parse_number(s);
  }
}

}  // namespace

RunConfig apply_sweep_value(const RunConfig& base, SweepAxis axis, const std::string& value) {
  RunConfig c = base;
  switch (axis) {
    case SweepAxis::SigmaIm: c.noise.sigma_im = parse_number(value); break;
    case SweepAxis::SigmaT: set_translation(c, value); break;
    case SweepAxis::SigmaR: c.noise.sigma_r_deg = parse_number(value); break;
    case SweepAxis::SigmaTR: {
      const auto colon = value.find(':');
      if (colon == std::string::npos) fail(ErrorKind::Config, "sigma_tr values are written T:R, got '" + value + "'");
      set_translation(c, value.substr(0, colon));
      c.noise.sigma_r_deg = parse_number(value.substr(colon + 1));
      break;
    }
  }
  return c;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                                const RunHooks& hooks) {
  config_require(!values.empty(), "sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepRow row;
    row.value = values[i];
    row.run_dir = std::string(axis_name(axis)) + "_" + std::to_string(i);
    try {
      RunConfig c = apply_sweep_value(base, axis, values[i]);
      c.out_dir = (fs::path(base.out_dir) / row.run_dir).string();
      row.report = cmd_run(c, hooks);
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  fs::create_directories(base.out_dir);
  write_sweep_csv(rows, fs::path(base.out_dir) / "sweep.csv");
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "value,run_dir,mean_psnr,mU_delta,m_mean_delta,summary_count,above_threshold,kept,removed,error\n";
  const auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  for (const auto& r : rows) {
    out << quote(r.value) << ',' << quote(r.run_dir) << ',';
    if (r.report) {
      char line[256];
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%zu,%zu,%zu,%zu,", r.report->mean_psnr, r.report->mU_delta,
                    r.report->m_mean_delta, r.report->summary_count, r.report->point_counts.above_threshold,
                    r.report->point_counts.kept, r.report->point_counts.removed);
      out << line << '\n';
    } else {
      out << ",,,,,,," << quote(r.error) << '\n';
    }
  }
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

}  // namespace voxens
