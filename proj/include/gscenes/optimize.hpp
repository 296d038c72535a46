#pragma once

#include "gscenes/camera_geom.hpp"
#include "gscenes/core.hpp"
#include "gscenes/grad.hpp"
#include "gscenes/io.hpp"
#include "gscenes/losses.hpp"
#include "gscenes/refiner.hpp"
#include "gscenes/render.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gscenes {

struct OptimizerConfig {
  int init_iters = 1000;
  int main_iters = 10000;
  int densify_interval = 100; // k: a novel view is synthesized every k-th main iteration

  // Adam, per parameter group. Position rates are multiplied by the scene extent
  // and decay log-linearly from init to final over each phase.
  double lr_position_init = 1.6e-4;
  double lr_position_final = 1.6e-6;
  double lr_sh_dc = 2.5e-3;
  double lr_sh_rest = 2.5e-3 / 20.0;
  double lr_opacity = 0.05;
  double lr_scale = 0.005;
  double lr_rotation = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-15;

  // adaptive density control
  double densify_grad_threshold = 2e-4; // averaged NDC-scaled |dL/d mean2d|
  double densify_scale_threshold = 0.01; // fraction of the scene extent separating clone from split
  int densify_from = 500;
  int densify_until = 15000;
  int densify_every = 100;
  int opacity_reset_interval = 3000;
  double prune_opacity = 0.005;
  std::size_t max_splats = 200000;

  // camera poses
  bool optimize_poses = true; // during fit_scene only
  double pose_lr = 1e-4;
  int pose_align_iters = 500;
  double pose_align_lr = 2e-3;
  double pose_align_lr_final = 2e-5;

  int sh_degree = 0;
  int novel_angle_count = 60;
  int novel_angle_stride = 37;
  double scene_extent = 0; // 0: derived from the cameras
  std::uint64_t seed = 0;
  LossWeights weights;
  RasterConfig raster;

  void validate() const;
};

// ---------------------------------------------------------------------------

// Flat per-splat parameter vector: position(3) log_scale(3) rotation(4) logit_opacity(1) sh(3 * B, column-major).
int splat_param_count(int sh_degree);

class Adam {
public:
  Adam() = default;
  Adam(const OptimizerConfig &cfg, std::size_t splats, int sh_degree);

  // Applies one step; position lr for this step passed in.
  void step(GaussianCloud &cloud, const CloudGradients &grads, double lr_position);
  // Keeps the moments of surviving splats; origin[i] is the source index of new splat i.
  void remap(const std::vector<std::size_t> &origin, const std::vector<char> &fresh);
  void reset_opacity_state();
  std::size_t size() const { return m_.size(); }
  long steps() const { return t_; }

private:
  std::vector<double> lr_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-15;
  long t_ = 0;
};

// Adam over a 6-DoF left-perturbation of one camera.
class PoseAdam {
public:
  PoseAdam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-15) : b1_(beta1), b2_(beta2), eps_(eps) {}
  CameraView step(const CameraView &cam, const PoseGradient &grad, double lr);

private:
  Vec6 m_ = Vec6::Zero(), v_ = Vec6::Zero();
  double b1_, b2_, eps_;
  long t_ = 0;
};

// Log-linear interpolation from init to final as iter goes 0 -> total.
double exponential_lr(double init, double final, int iter, int total);

// ---------------------------------------------------------------------------

struct FitResult {
  GaussianCloud cloud;
  std::vector<CameraView> cameras; // refined when cfg.optimize_poses
  std::vector<double> losses;      // gaussian_loss per iteration
};

// Per-point mean distance to the 3 nearest neighbours (the point itself excluded).
std::vector<double> mean_neighbor_distance(const std::vector<Vec3> &points, int k = 3);

GaussianCloud init_cloud_from_points(const ColoredPoints &points, int sh_degree);

FitResult fit_scene(const ColoredPoints &points, const std::vector<CameraView> &cams,
                    const std::vector<RgbdImage> &images, const OptimizerConfig &cfg);

// Gradient statistics accumulated between densification steps.
struct DensityStats {
  std::vector<double> grad_accum;
  std::vector<int> denom;

  void reset(std::size_t n);
  void add(const CloudGradients &g, int width, int height);
};

struct AdcResult {
  std::size_t cloned = 0, split = 0, pruned = 0;
  std::vector<std::size_t> origin; // source index per output splat
  std::vector<char> fresh;         // created in this step
};

AdcResult adaptive_density_control(GaussianCloud &cloud, const DensityStats &stats, const OptimizerConfig &cfg,
                                   double extent, std::uint64_t seed);

// Caps every activated opacity at 0.01.
void reset_opacity(GaussianCloud &cloud);

// ---------------------------------------------------------------------------

struct StackEntry {
  CameraView camera;
  RgbdImage image;
  bool is_novel = false;
};

class TrainingStack {
public:
  TrainingStack() = default;
  TrainingStack(const std::vector<CameraView> &cams, const std::vector<RgbdImage> &images);

  void append_novel(const CameraView &cam, RgbdImage image);
  const std::vector<StackEntry> &entries() const { return entries_; }
  std::size_t input_count() const { return inputs_; }
  std::size_t size() const { return entries_.size(); }
  std::vector<CameraView> input_cameras() const;

private:
  std::vector<StackEntry> entries_;
  std::size_t inputs_ = 0;
};

struct ReconstructLog {
  int novel_views_added = 0;
  int refiner_failures = 0;
  std::vector<std::string> warnings;
  std::vector<double> losses;
  std::size_t final_splats = 0;
};

struct ReconstructResult {
  GaussianCloud cloud;
  TrainingStack stack;
  ReconstructLog log;
};

// Optional progress hook, called after every main iteration.
using IterationHook = std::function<void(int iter, const GaussianCloud &)>;

// Fixed angle set consumed round-robin: angle j = 2 pi ((j * stride) mod count) / count.
std::vector<double> novel_angles(int count, int stride);

// Refiner request for a novel camera: confidence, latent, zero context and geo embeddings.
RefinerRequest build_request(const RenderOutput &render, const CameraView &target,
                             const std::vector<CameraView> &inputs, std::uint64_t seed,
                             const std::vector<float> &context = {});

ReconstructResult reconstruct(GaussianCloud cloud, TrainingStack stack, const EllipseTrajectory &traj,
                              Refiner &refiner, const OptimizerConfig &cfg, const IterationHook &hook = {});

struct AlignResult {
  CameraView camera;
  double loss = 0;
  double initial_loss = 0;
};

AlignResult align_test_pose(const GaussianCloud &cloud, const RgbdImage &image, const CameraView &init,
                            const OptimizerConfig &cfg);

} // namespace gscenes
