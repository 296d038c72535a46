#pragma once

// Shared machinery between the forward rasterizer, the backward passes and
// the enhancer heuristic. Not installed.

#include "gscenes/parallel.hpp"
#include "gscenes/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace gscenes::detail {

struct PreparedScene {
  std::vector<ProjectedGaussian> projected; // sorted front to back (depth, then index)
  int tiles_x = 0, tiles_y = 0, tile_size = 16;
  // tiled: one list per tile; naive: a single list of every projected Gaussian
  std::vector<std::vector<std::uint32_t>> lists;
  bool naive = false;

  const std::vector<std::uint32_t> &list_for_pixel(int x, int y) const {
    if (naive)
      return lists.front();
    return lists[static_cast<std::size_t>(y / tile_size) * tiles_x + x / tile_size];
  }
};

PreparedScene prepare(const GaussianCloud &cloud, const CameraView &cam, const RasterConfig &cfg);

struct Contribution {
  std::uint32_t pg;  // index into PreparedScene::projected
  double alpha;      // after clamping
  double gauss;      // exp(-q/2)
  double t_before;   // transmittance in front of this Gaussian
  bool clamped;
  Vec2 offset;       // pixel - mean2d
};

struct PixelResult {
  Vec3 color_sum = Vec3::Zero(); // sum c_i w_i, background not included
  double depth_sum = 0;
  double transmittance = 1;
  int n_contrib = 0;
};

// Front-to-back compositing of one pixel; on_contrib sees every Gaussian that
// passes the alpha threshold and is composited.
template <typename F>
PixelResult composite_pixel(const PreparedScene &scene, int x, int y, const RasterConfig &cfg,
                            F &&on_contrib) {
  PixelResult r;
  const Vec2 pix(x, y);
  double t = 1.0;
  for (std::uint32_t id : scene.list_for_pixel(x, y)) {
    const ProjectedGaussian &g = scene.projected[id];
    const Vec2 d = pix - g.mean2d;
    const double q = d.dot(g.conic * d);
    const double gauss = std::exp(-0.5 * q);
    double alpha = g.alpha_peak * gauss;
    const bool clamped = alpha > cfg.alpha_max;
    if (clamped)
      alpha = cfg.alpha_max;
    if (alpha < cfg.alpha_min)
      continue;
    const double next_t = t * (1.0 - alpha);
    if (next_t < cfg.t_terminate)
      break;
    on_contrib(Contribution{id, alpha, gauss, t, clamped, d});
    const double w = alpha * t;
    r.color_sum += g.color * w;
    r.depth_sum += g.depth * w;
    ++r.n_contrib;
    t = next_t;
  }
  r.transmittance = t;
  return r;
}

// Calls fn(x, y, worker) for every pixel, parallel over tiles (rows in naive mode).
template <typename F> void for_each_pixel(const PreparedScene &scene, int w, int h, F &&fn) {
  if (scene.naive) {
    parallel_for(static_cast<std::size_t>(h), [&](std::size_t b, std::size_t e, int worker) {
      for (std::size_t y = b; y < e; ++y)
        for (int x = 0; x < w; ++x)
          fn(x, static_cast<int>(y), worker);
    });
    return;
  }
  const int ts = scene.tile_size;
  parallel_for(scene.lists.size(), [&](std::size_t b, std::size_t e, int worker) {
    for (std::size_t tile = b; tile < e; ++tile) {
      const int tx = static_cast<int>(tile % scene.tiles_x);
      const int ty = static_cast<int>(tile / scene.tiles_x);
      for (int y = ty * ts; y < std::min(h, (ty + 1) * ts); ++y)
        for (int x = tx * ts; x < std::min(w, (tx + 1) * ts); ++x)
          fn(x, y, worker);
    }
  });
}

inline double expected_depth(double depth_sum, double accum_alpha) {
  return accum_alpha > 1e-6 ? depth_sum / accum_alpha : 0.0;
}

} // namespace gscenes::detail
