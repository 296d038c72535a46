#pragma once

#include "gscenes/core.hpp"

#include <optional>

namespace gscenes {

enum class RasterMode {
  kTiled, // 16x16 tiles with per-tile depth-sorted lists, parallel over tiles
  kNaive, // every pixel walks every projected Gaussian; reference path for tests
};

struct RasterConfig {
  double epsilon = 1e-6;         // confidence log offset
  double alpha_min = 1.0 / 255.0; // contributor threshold
  double alpha_max = 0.99;
  double t_terminate = 1e-4;     // 0 disables early termination
  Vec3 background = Vec3::Zero();
  double near_plane = 0.01;
  double lowpass = 0.3;          // px^2 added to the 2D covariance diagonal
  RasterMode mode = RasterMode::kTiled;
  int tile_size = 16;

  void validate() const;
};

struct ProjectedGaussian {
  std::size_t index = 0; // source splat
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
  Mat2 conic = Mat2::Identity(); // cov2d^-1
  double depth = 0;
  Vec3 color = Vec3::Zero();
  double alpha_peak = 0;
  // inclusive pixel bounds of the alpha >= alpha_min footprint, clipped to the image
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

// EWA projection. Returns nullopt when the splat is culled: behind the near
// plane, degenerate covariance, or a footprint that misses the image.
std::optional<ProjectedGaussian> project_gaussian(const GaussianSplat &splat, const CameraView &cam,
                                                  const RasterConfig &cfg = {});

RenderOutput rasterize(const GaussianCloud &cloud, const CameraView &cam,
                       const RasterConfig &cfg = {});

// C = -log(T + eps) * n_contrib, written into render.confidence and returned.
Image confidence_map(RenderOutput &render, const RasterConfig &cfg = {});
Image confidence_map(const Image &transmittance, const CountMap &n_contrib, double epsilon);

// Small-footprint heuristic: sum_i(alpha_i T_i / area_i) / accum_alpha with
// area_i = pi * sqrt(det cov2d_i). Used only as an ablation baseline.
Image enhancer_confidence(const RenderOutput &render, const GaussianCloud &cloud,
                          const CameraView &cam, const RasterConfig &cfg = {});

// Divides by the 99th percentile (linear interpolation between ranks) and clamps to [0,1].
Image normalize_confidence_for_display(const Image &conf);

} // namespace gscenes
