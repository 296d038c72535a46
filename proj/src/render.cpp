#include "gscenes/render.hpp"

#include "gscenes/parallel.hpp"
#include "raster_internal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gscenes {

void RasterConfig::validate() const {
  if (!(epsilon > 0))
    throw InvalidArgument("RasterConfig: epsilon must be > 0");
  if (!(alpha_min > 0 && alpha_min < 1))
    throw InvalidArgument("RasterConfig: alpha_min must be in (0,1)");
  if (!(alpha_max > alpha_min && alpha_max < 1))
    throw InvalidArgument("RasterConfig: alpha_max must be in (alpha_min,1)");
  if (!(t_terminate >= 0 && t_terminate < 1))
    throw InvalidArgument("RasterConfig: t_terminate must be in [0,1)");
  if (!(near_plane > 0))
    throw InvalidArgument("RasterConfig: near_plane must be > 0");
  if (!(lowpass >= 0))
    throw InvalidArgument("RasterConfig: lowpass must be >= 0");
  if (tile_size <= 0)
    throw InvalidArgument("RasterConfig: tile_size must be > 0");
}

std::optional<ProjectedGaussian> project_gaussian(const GaussianSplat &splat, const CameraView &cam,
                                                  const RasterConfig &cfg) {
  const Vec3 pc = cam.to_camera(splat.position);
  if (!(pc.z() > cfg.near_plane))
    return std::nullopt;

  const double z = pc.z(), inv_z = 1.0 / z;
  Eigen::Matrix<double, 2, 3> jac;
  jac << cam.fx * inv_z, 0, -cam.fx * pc.x() * inv_z * inv_z,
         0, cam.fy * inv_z, -cam.fy * pc.y() * inv_z * inv_z;

  const Mat3 rs = splat.rotation_matrix() * splat.scale().asDiagonal();
  const Mat3 cov3d = rs * rs.transpose();
  const Eigen::Matrix<double, 2, 3> t = jac * cam.rotation;
  Mat2 cov = t * cov3d * t.transpose();
  cov(0, 0) += cfg.lowpass;
  cov(1, 1) += cfg.lowpass;
  const double det = cov.determinant();
  if (!(det > 1e-12))
    return std::nullopt;

  ProjectedGaussian pg;
  pg.alpha_peak = std::min(splat.opacity(), cfg.alpha_max);
  if (pg.alpha_peak < cfg.alpha_min)
    return std::nullopt;

  pg.mean2d = Vec2(cam.fx * pc.x() * inv_z + cam.cx, cam.fy * pc.y() * inv_z + cam.cy);
  pg.cov2d = cov;
  pg.conic << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;
  pg.depth = z;

  // alpha >= alpha_min  <=>  q <= 2 ln(peak / alpha_min); bound that ellipse
  const double q_max = 2.0 * std::log(pg.alpha_peak / cfg.alpha_min);
  const double ex = std::sqrt(q_max * cov(0, 0)), ey = std::sqrt(q_max * cov(1, 1));
  pg.x0 = std::max(0, static_cast<int>(std::floor(pg.mean2d.x() - ex)));
  pg.x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(pg.mean2d.x() + ex)));
  pg.y0 = std::max(0, static_cast<int>(std::floor(pg.mean2d.y() - ey)));
  pg.y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(pg.mean2d.y() + ey)));
  if (pg.x0 > pg.x1 || pg.y0 > pg.y1)
    return std::nullopt;

  const Vec3 dir = (splat.position - cam.center()).normalized();
  pg.color = sh_to_rgb(splat.sh, dir);
  return pg;
}

namespace detail {

PreparedScene prepare(const GaussianCloud &cloud, const CameraView &cam, const RasterConfig &cfg) {
  cfg.validate();
  cam.validate();
  cloud.validate();

  PreparedScene scene;
  scene.tile_size = cfg.tile_size;
  scene.naive = cfg.mode == RasterMode::kNaive;
  scene.projected.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (auto pg = project_gaussian(cloud.splats[i], cam, cfg)) {
      pg->index = i;
      scene.projected.push_back(*pg);
    }
  }
  std::stable_sort(scene.projected.begin(), scene.projected.end(),
                   [](const ProjectedGaussian &a, const ProjectedGaussian &b) {
                     return a.depth < b.depth;
                   });

  if (scene.naive) {
    scene.lists.resize(1);
    scene.lists[0].resize(scene.projected.size());
    std::iota(scene.lists[0].begin(), scene.lists[0].end(), 0u);
    return scene;
  }

  const int ts = cfg.tile_size;
  scene.tiles_x = (cam.width + ts - 1) / ts;
  scene.tiles_y = (cam.height + ts - 1) / ts;
  scene.lists.resize(static_cast<std::size_t>(scene.tiles_x) * scene.tiles_y);
  // projected is depth-sorted, so appending in order keeps each tile list sorted
  for (std::uint32_t id = 0; id < scene.projected.size(); ++id) {
    const auto &pg = scene.projected[id];
    for (int ty = pg.y0 / ts; ty <= pg.y1 / ts; ++ty)
      for (int tx = pg.x0 / ts; tx <= pg.x1 / ts; ++tx)
        scene.lists[static_cast<std::size_t>(ty) * scene.tiles_x + tx].push_back(id);
  }
  return scene;
}

} // namespace detail

RenderOutput rasterize(const GaussianCloud &cloud, const CameraView &cam, const RasterConfig &cfg) {
  const detail::PreparedScene scene = detail::prepare(cloud, cam, cfg);
  RenderOutput out(cam.width, cam.height);
  for_each_pixel(scene, cam.width, cam.height, [&](int x, int y, int) {
    const auto r = detail::composite_pixel(scene, x, y, cfg, [](const detail::Contribution &) {});
    const Vec3 c = r.color_sum + r.transmittance * cfg.background;
    for (int ch = 0; ch < 3; ++ch)
      out.rgb.at(x, y, ch) = c(ch);
    const double accum = 1.0 - r.transmittance;
    out.accum_alpha.at(x, y) = accum;
    out.transmittance.at(x, y) = r.transmittance;
    out.depth.at(x, y) = detail::expected_depth(r.depth_sum, accum);
    out.n_contrib.at(x, y) = r.n_contrib;
  });
  confidence_map(out, cfg);
  return out;
}

Image confidence_map(const Image &transmittance, const CountMap &n_contrib, double epsilon) {
  if (transmittance.width != n_contrib.width || transmittance.height != n_contrib.height)
    throw InvalidArgument("confidence_map: shape mismatch");
  Image conf(transmittance.width, transmittance.height);
  for (std::size_t i = 0; i < conf.data.size(); ++i) {
    const int n = n_contrib.data[i];
    conf.data[i] = n == 0 ? 0.0 : -std::log(transmittance.data[i] + epsilon) * n;
  }
  return conf;
}

Image confidence_map(RenderOutput &render, const RasterConfig &cfg) {
  render.confidence = confidence_map(render.transmittance, render.n_contrib, cfg.epsilon);
  return render.confidence;
}

Image enhancer_confidence(const RenderOutput &render, const GaussianCloud &cloud,
                          const CameraView &cam, const RasterConfig &cfg) {
  if (render.width() != cam.width || render.height() != cam.height)
    throw InvalidArgument("enhancer_confidence: render and camera sizes differ");
  const detail::PreparedScene scene = detail::prepare(cloud, cam, cfg);
  std::vector<double> inv_area(scene.projected.size());
  for (std::size_t i = 0; i < inv_area.size(); ++i)
    inv_area[i] = 1.0 / (M_PI * std::sqrt(scene.projected[i].cov2d.determinant()));

  Image score(cam.width, cam.height);
  for_each_pixel(scene, cam.width, cam.height, [&](int x, int y, int) {
    double acc = 0;
    const auto r = detail::composite_pixel(scene, x, y, cfg, [&](const detail::Contribution &c) {
      acc += c.alpha * c.t_before * inv_area[c.pg];
    });
    const double accum = 1.0 - r.transmittance;
    score.at(x, y) = (r.n_contrib == 0 || accum <= 0) ? 0.0 : acc / accum;
  });
  return score;
}

Image normalize_confidence_for_display(const Image &conf) {
  Image out(conf.width, conf.height);
  if (conf.data.empty())
    return out;
  std::vector<double> sorted = conf.data;
  std::sort(sorted.begin(), sorted.end());
  const double rank = 0.99 * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double p99 = sorted[lo] + (rank - lo) * (sorted[hi] - sorted[lo]);
  const double denom = p99 > 0 ? p99 : 1.0;
  for (std::size_t i = 0; i < conf.data.size(); ++i)
    out.data[i] = std::clamp(conf.data[i] / denom, 0.0, 1.0);
  return out;
}

} // namespace gscenes
