#include "voxens/trainer.hpp"

#include "voxens/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace voxens {

namespace {

enum : std::uint64_t { kInitStream = 0, kBatchStream = 1 };

}  // namespace

void TrainConfig::validate() const {
  require(steps >= 1, "steps must be >= 1");
  require(rays_per_step >= 1, "rays_per_step must be >= 1");
  require(lr > 0.0, "lr must be > 0");
  require(init_lo <= init_hi, "init_lo must be <= init_hi");
  require(field_res >= 2, "field_res must be >= 2");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam betas must be in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be > 0");
  require(log_every >= 1, "log_every must be >= 1");
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step_size = lr_ / bc1;
  const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    params[i] -= step_size * m_[i] / (std::sqrt(v_[i]) * inv_sqrt_bc2 + eps_);
  }
}

VoxelField train_member(const Dataset& dataset, const TrainConfig& cfg, std::vector<TrainLogEntry>* log) {
  cfg.validate();
  validate_dataset(dataset);
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();

  VoxelField field(dataset.scene_bbox, cfg.field_res, 0.0, Rgb::Constant(0.5));
  CounterRng init(derive_seed(cfg.seed, kInitStream));
  for (double& v : field.density_raw) v = init.uniform(cfg.init_lo, cfg.init_hi);

  const double step = cfg.step > 0.0 ? cfg.step : default_step(field);
  const int width = dataset.frames.front().image.width;
  const int height = dataset.frames.front().image.height;
  const std::uint64_t per_frame = static_cast<std::uint64_t>(width) * height;
  const std::uint64_t total_pixels = per_frame * dataset.frames.size();
  const std::uint64_t batch_key = derive_seed(cfg.seed, kBatchStream);
  const double norm = 1.0 / (3.0 * cfg.rays_per_step);

  Adam density_opt(field.density_raw.size(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  Adam color_opt(field.color.size(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  FieldGradient grad(field);
  RayMarch march;

  for (int it = 0; it < cfg.steps; ++it) {
    grad.clear();
    CounterRng batch(derive_seed(batch_key, static_cast<std::uint64_t>(it)));
    double loss = 0.0;
    for (int r = 0; r < cfg.rays_per_step; ++r) {
      const std::uint64_t pick = batch.below(total_pixels);
      const Frame& frame = dataset.frames[pick / per_frame];
      const std::uint64_t pix = pick % per_frame;
      const int x = static_cast<int>(pix % width);
      const int y = static_cast<int>(pix / width);
      const Ray ray = camera_ray(frame.pose, x, y, field.bbox);
      const RenderResult out = march.forward(field, ray, step, dataset.background);
      const Rgb diff = out.color - frame.image.at(x, y);
      loss += diff.squaredNorm();
      march.backward(field, (2.0 * norm) * diff, grad);
    }
    loss *= norm;
    if (!std::isfinite(loss)) {
      fail(ErrorKind::Divergence, "training diverged at step " + std::to_string(it) + " (non-finite loss)");
    }
    density_opt.step(field.density_raw, grad.density);
    color_opt.step(field.color, grad.color);
    for (double& c : field.color) c = std::clamp(c, 0.0, 1.0);

    if (log && (it == 0 || it == cfg.steps - 1 || (it + 1) % cfg.log_every == 0)) {
      const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      log->push_back({it, loss, ms});
    }
  }
  return field;
}

void write_train_log(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << "step,loss,wall_ms\n";
  char line[128];
  for (const auto& e : log) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.3f\n", e.step, e.loss, e.wall_ms);
    out << line;
  }
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

double mse(const ImageBuffer& a, const ImageBuffer& b) {
  require(a.width == b.width && a.height == b.height && a.pixels.size() == b.pixels.size(),
          "image dimension mismatch");
  require(!a.pixels.empty(), "empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = 255.0 * (a.pixels[i] - b.pixels[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.pixels.size());
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  const double e = mse(a, b);
  if (e == 0.0) return kInf;
  return 10.0 * std::log10(255.0 * 255.0 / e);
}

PsnrSummary summarize_psnr(std::vector<double> per_view) {
  PsnrSummary s;
  s.per_view = std::move(per_view);
  double sum = 0.0;
  int finite = 0;
  for (double v : s.per_view) {
    if (std::isinf(v)) {
      ++s.inf_views;
    } else {
      sum += v;
      ++finite;
    }
  }
  s.mean = finite > 0 ? sum / finite : kInf;
  return s;
}

PsnrSummary mean_psnr(const VoxelField& field, const Dataset& dataset, double step) {
  validate_dataset(dataset);
  const double h = step > 0.0 ? step : default_step(field);
  std::vector<double> per_view;
  per_view.reserve(dataset.frames.size());
  for (const auto& f : dataset.frames)
    per_view.push_back(psnr(render_image(field, f.pose, h, dataset.background), f.image));
  return summarize_psnr(std::move(per_view));
}

}  // namespace voxens
