#pragma once

#include "voxens/dataset.hpp"
#include "voxens/field.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace voxens {

struct TrainConfig {
  int steps = 2000;
  int rays_per_step = 1024;
  double lr = 0.05;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double init_lo = -1.0;
  double init_hi = 1.0;
  std::uint64_t seed = 0;
  /// Lattice size of each trained field.
  int field_res = 32;
  /// Marching step; <= 0 selects the field default edge / (2 res).
  double step = 0.0;
  /// Loss is recorded every `log_every` steps (and on the first and last step).
  int log_every = 100;

  void validate() const;
};

struct TrainLogEntry {
  int step = 0;
  double loss = 0.0;
  double wall_ms = 0.0;
};

/// Adam over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, double lr, double beta1, double beta2, double eps);
  void step(std::span<double> params, std::span<const double> grads);
  long long iterations() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<double> m_, v_;
};

/// Fits one randomly initialized field to `dataset` by Adam on the mean squared
/// photometric error over random pixel batches. Deterministic for a fixed seed.
/// Throws Error(Divergence) naming the step when the loss turns non-finite.
VoxelField train_member(const Dataset& dataset, const TrainConfig& cfg, std::vector<TrainLogEntry>* log = nullptr);

void write_train_log(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path);

/// Mean squared error in the 8-bit domain (channel values scaled by 255).
double mse(const ImageBuffer& a, const ImageBuffer& b);

/// 10 log10(255^2 / MSE); +inf for identical images.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

struct PsnrSummary {
  std::vector<double> per_view;
  /// Mean over finite views; +inf when every view is perfect.
  double mean = kInf;
  int inf_views = 0;
};

PsnrSummary summarize_psnr(std::vector<double> per_view);

/// PSNR of every frame rendered from `field` against the training image.
PsnrSummary mean_psnr(const VoxelField& field, const Dataset& dataset, double step = 0.0);

}  // namespace voxens
