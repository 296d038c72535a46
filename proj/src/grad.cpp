#include "gscenes/grad.hpp"

#include "gscenes/parallel.hpp"
#include "raster_internal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace gscenes {

CloudGradients CloudGradients::zeros_like(const GaussianCloud &cloud) {
  const std::size_t n = cloud.size();
  CloudGradients g;
  g.position.assign(n, Vec3::Zero());
  g.log_scale.assign(n, Vec3::Zero());
  g.rotation.assign(n, Vec4::Zero());
  g.logit_opacity.assign(n, 0.0);
  g.sh.assign(n, ShCoeffs::Zero(3, cloud.coeff_count()));
  g.mean2d_norm.assign(n, 0.0);
  g.visible.assign(n, 0);
  return g;
}

bool CloudGradients::all_finite() const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (!position[i].allFinite() || !log_scale[i].allFinite() || !rotation[i].allFinite() ||
        !std::isfinite(logit_opacity[i]) || !sh[i].allFinite())
      return false;
  }
  return true;
}

CameraView apply_pose_delta(const CameraView &cam, const Vec3 &rotation, const Vec3 &translation) {
  const Mat3 dr = so3_exp(rotation);
  CameraView out = cam;
  out.rotation = dr * cam.rotation;
  out.translation = dr * cam.translation + translation;
  return out;
}

namespace {

// Gradient of the loss w.r.t. the screen-space quantities of one projected Gaussian.
struct ScreenGrad {
  Vec2 mean = Vec2::Zero();
  Mat2 conic = Mat2::Zero();
  Vec3 color = Vec3::Zero();
  double depth = 0;
  double alpha_peak = 0;

  ScreenGrad &operator+=(const ScreenGrad &o) {
    mean += o.mean;
    conic += o.conic;
    color += o.color;
    depth += o.depth;
    alpha_peak += o.alpha_peak;
    return *this;
  }
};

void check_upstream(const Image &g, const CameraView &cam) {
  if (g.width != cam.width || g.height != cam.height || g.channels != 4)
    throw InvalidArgument("backward: pixel gradients must be H x W x 4");
  for (double v : g.data)
    if (!std::isfinite(v))
      throw InvalidArgument("backward: non-finite upstream gradient");
}

} // namespace

BackwardResult backward(const GaussianCloud &cloud, const CameraView &cam, const RasterConfig &cfg,
                        const Image &pixel_loss_grads) {
  check_upstream(pixel_loss_grads, cam);
  const detail::PreparedScene scene = detail::prepare(cloud, cam, cfg);
  const std::size_t n_proj = scene.projected.size();

  const int workers = num_threads();
  std::vector<std::vector<ScreenGrad>> partial(workers, std::vector<ScreenGrad>(n_proj));
  std::vector<std::vector<detail::Contribution>> scratch(workers);

  detail::for_each_pixel(scene, cam.width, cam.height, [&](int x, int y, int worker) {
    const Vec3 g_rgb(pixel_loss_grads.at(x, y, 0), pixel_loss_grads.at(x, y, 1),
                     pixel_loss_grads.at(x, y, 2));
    const double g_depth_out = pixel_loss_grads.at(x, y, 3);
    if (g_rgb.isZero(0) && g_depth_out == 0.0)
      return;

    auto &list = scratch[worker];
    list.clear();
    const auto r = detail::composite_pixel(scene, x, y, cfg,
                                           [&](const detail::Contribution &c) { list.push_back(c); });
    if (list.empty())
      return;

    const double t_final = r.transmittance;
    const double accum = 1.0 - t_final;
    double g_sum = 0, g_accum = 0; // through depth = depth_sum / accum
    if (accum > 1e-6) {
      g_sum = g_depth_out / accum;
      g_accum = -g_depth_out * r.depth_sum / (accum * accum);
    }

    auto &out = partial[worker];
    Vec3 after_color = t_final * cfg.background;
    double after_depth = 0;
    for (auto it = list.rbegin(); it != list.rend(); ++it) {
      const auto &c = *it;
      const auto &pg = scene.projected[c.pg];
      const double w = c.alpha * c.t_before;
      ScreenGrad &sg = out[c.pg];
      sg.color += w * g_rgb;
      sg.depth += w * g_sum;

      const double inv_one_minus = 1.0 / (1.0 - c.alpha);
      const Vec3 d_color = pg.color * c.t_before - after_color * inv_one_minus;
      const double d_sum = pg.depth * c.t_before - after_depth * inv_one_minus;
      const double d_accum = t_final * inv_one_minus; // accum = 1 - T_final
      const double g_alpha = g_rgb.dot(d_color) + g_sum * d_sum + g_accum * d_accum;

      after_color += pg.color * w;
      after_depth += pg.depth * w;

      if (c.clamped)
        continue;
      sg.alpha_peak += g_alpha * c.gauss;
      const double g_q = -0.5 * c.gauss * pg.alpha_peak * g_alpha;
      sg.conic += g_q * c.offset * c.offset.transpose();
      sg.mean += -2.0 * g_q * (pg.conic * c.offset);
    }
  });

  std::vector<ScreenGrad> screen(n_proj);
  for (const auto &p : partial)
    for (std::size_t i = 0; i < n_proj; ++i)
      screen[i] += p[i];

  BackwardResult res;
  res.cloud = CloudGradients::zeros_like(cloud);
  const Mat3 &w_rot = cam.rotation;
  const Vec3 cam_center = cam.center();
  Vec3 g_omega = Vec3::Zero(), g_trans = Vec3::Zero();

  for (std::size_t k = 0; k < n_proj; ++k) {
    const ProjectedGaussian &pg = scene.projected[k];
    const ScreenGrad &sg = screen[k];
    const std::size_t i = pg.index;
    const GaussianSplat &s = cloud.splats[i];
    res.cloud.visible[i] = 1;
    res.cloud.mean2d_norm[i] = sg.mean.norm();

    // opacity
    const double opacity = s.opacity();
    if (opacity < cfg.alpha_max)
      res.cloud.logit_opacity[i] = sg.alpha_peak * opacity * (1.0 - opacity);

    // color (view-dependent for degree 3)
    const Vec3 view = s.position - cam_center;
    const double view_len = view.norm();
    const Vec3 dir = view / view_len;
    Vec3 raw;
    Eigen::Matrix<double, 16, 1> basis;
    if (s.sh.cols() == 1) {
      raw = s.sh.col(0) * kShC0;
    } else {
      basis = sh_basis(dir);
      raw = s.sh * basis;
    }
    Vec3 g_color = sg.color;
    for (int c = 0; c < 3; ++c)
      if (raw(c) + 0.5 < 0.0 || raw(c) + 0.5 > 1.0)
        g_color(c) = 0.0;
    Vec3 g_view = Vec3::Zero();
    if (s.sh.cols() == 1) {
      res.cloud.sh[i].col(0) = g_color * kShC0;
    } else {
      res.cloud.sh[i] = g_color * basis.transpose();
      const Eigen::Matrix<double, 16, 1> g_basis = s.sh.transpose() * g_color;
      const Vec3 g_dir = sh_basis_jacobian(dir).transpose() * g_basis;
      g_view = (g_dir - dir * dir.dot(g_dir)) / view_len;
    }

    // projection
    const Vec3 pc = cam.to_camera(s.position);
    const double z = pc.z(), iz = 1.0 / z, iz2 = iz * iz, iz3 = iz2 * iz;
    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx * iz, 0, -cam.fx * pc.x() * iz2, 0, cam.fy * iz, -cam.fy * pc.y() * iz2;
    const Mat3 rot = s.rotation_matrix();
    const Vec3 scale = s.scale();
    const Mat3 m = rot * scale.asDiagonal();
    const Mat3 cov3d = m * m.transpose();
    const Eigen::Matrix<double, 2, 3> t = jac * w_rot;

    const Mat2 g_cov = -pg.conic * sg.conic * pg.conic;
    const Eigen::Matrix<double, 2, 3> g_t = g_cov * t * cov3d.transpose() + g_cov.transpose() * t * cov3d;
    const Mat3 g_cov3d = t.transpose() * g_cov * t;
    const Eigen::Matrix<double, 2, 3> g_jac = g_t * w_rot.transpose();
    const Mat3 g_w = jac.transpose() * g_t;

    Vec3 g_pc = Vec3::Zero();
    g_pc.x() += sg.mean.x() * cam.fx * iz;
    g_pc.y() += sg.mean.y() * cam.fy * iz;
    g_pc.z() += -sg.mean.x() * cam.fx * pc.x() * iz2 - sg.mean.y() * cam.fy * pc.y() * iz2;
    g_pc.z() += sg.depth;
    g_pc.x() += g_jac(0, 2) * (-cam.fx * iz2);
    g_pc.y() += g_jac(1, 2) * (-cam.fy * iz2);
    g_pc.z() += g_jac(0, 0) * (-cam.fx * iz2) + g_jac(0, 2) * (2 * cam.fx * pc.x() * iz3) +
                g_jac(1, 1) * (-cam.fy * iz2) + g_jac(1, 2) * (2 * cam.fy * pc.y() * iz3);

    const Mat3 g_m = (g_cov3d + g_cov3d.transpose()) * m;
    const Mat3 g_rot = g_m * scale.asDiagonal();
    const Mat3 rt_gm = rot.transpose() * g_m;
    for (int a = 0; a < 3; ++a)
      res.cloud.log_scale[i](a) = rt_gm(a, a) * scale(a);
    res.cloud.rotation[i] = quat_rotmat_vjp(s.rotation, g_rot);
    res.cloud.position[i] = w_rot.transpose() * g_pc + g_view;

    // pose: p_cam' = p_cam + omega x p_cam + v; W' = W + [omega]x W; center' = center - W^T v
    g_trans += g_pc + w_rot * g_view;
    g_omega += pc.cross(g_pc);
    const Mat3 a = g_w * w_rot.transpose();
    g_omega += Vec3(a(2, 1) - a(1, 2), a(0, 2) - a(2, 0), a(1, 0) - a(0, 1));
  }
  res.pose.rotation = g_omega;
  res.pose.translation = g_trans;
  return res;
}

CloudGradients backward_cloud(const GaussianCloud &cloud, const CameraView &cam,
                              const RasterConfig &cfg, const Image &pixel_loss_grads) {
  return backward(cloud, cam, cfg, pixel_loss_grads).cloud;
}

PoseGradient backward_pose(const GaussianCloud &cloud, const CameraView &cam,
                           const RasterConfig &cfg, const Image &pixel_loss_grads) {
  return backward(cloud, cam, cfg, pixel_loss_grads).pose;
}

// ---------------------------------------------------------------------------
// Finite-difference check.

const GradcheckGroup *GradcheckReport::find(const std::string &name) const {
  for (const auto &g : groups)
    if (g.name == name)
      return &g;
  return nullptr;
}

double GradcheckReport::worst() const {
  double w = 0;
  for (const auto &g : groups)
    w = std::max(w, g.max_rel_error);
  return w;
}

namespace {

// Discrete state of a render: per splat which color channels sit on a clamp
// bound, and per pixel the ordered contributors with their alpha-clamp flags. Equal signatures on both sides of a step mean no kink was crossed.
struct Probe {
  double loss = 0;
  std::vector<std::uint64_t> signature;
};

Probe evaluate(const GaussianCloud &cloud, const CameraView &cam, const RasterConfig &cfg,
               const Image &g) {
  const RenderOutput r = rasterize(cloud, cam, cfg);
  Probe probe;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      for (int c = 0; c < 3; ++c)
        probe.loss += g.at(x, y, c) * r.rgb.at(x, y, c);
      probe.loss += g.at(x, y, 3) * r.depth.at(x, y);
    }

  const detail::PreparedScene scene = detail::prepare(cloud, cam, cfg);
  std::vector<std::uint64_t> bounds(cloud.size(), 0);
  for (const ProjectedGaussian &pg : scene.projected)
    for (int c = 0; c < 3; ++c)
      if (pg.color(c) <= 0.0 || pg.color(c) >= 1.0)
        bounds[pg.index] |= 1u << c;
  probe.signature = bounds;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      detail::composite_pixel(scene, x, y, cfg, [&](const detail::Contribution &k) {
        probe.signature.push_back(scene.projected[k.pg].index << 1 | (k.clamped ? 1u : 0u));
      });
      probe.signature.push_back(~std::uint64_t{0});
    }
  return probe;
}

void record(GradcheckGroup &group, double analytic, double numeric, double floor) {
  ++group.checked;
  const double diff = std::abs(analytic - numeric);
  if (diff <= floor)
    return;
  group.max_rel_error = std::max(group.max_rel_error, diff / std::max(std::abs(analytic), std::abs(numeric)));
}

} // namespace

GradcheckReport gradcheck(const GaussianCloud &cloud, const CameraView &cam, const RasterConfig &cfg,
                          std::uint64_t seed, const GradcheckOptions &opts) {
  Rng rng = make_rng(seed, "gradcheck/upstream");
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Image g(cam.width, cam.height, 4);
  for (auto &v : g.data)
    v = uni(rng);

  const BackwardResult analytic = backward(cloud, cam, cfg, g);
  GradcheckReport report;
  report.pose = analytic.pose;
  if (cloud.empty())
    return report;

  GaussianCloud work = cloud;
  auto central = [&](GradcheckGroup &group, double &param, double a) {
    const double saved = param;
    param = saved + opts.h_cloud;
    const Probe plus = evaluate(work, cam, cfg, g);
    param = saved - opts.h_cloud;
    const Probe minus = evaluate(work, cam, cfg, g);
    param = saved;
    if (plus.signature != minus.signature) {
      ++group.skipped;
      return;
    }
    record(group, a, (plus.loss - minus.loss) / (2 * opts.h_cloud), opts.abs_floor);
  };

  GradcheckGroup pos{"position"}, scl{"log_scale"}, rot{"rotation"}, opa{"opacity"}, sh{"sh"};
  for (std::size_t i = 0; i < work.size(); ++i) {
    auto &s = work.splats[i];
    for (int a = 0; a < 3; ++a)
      central(pos, s.position(a), analytic.cloud.position[i](a));
    for (int a = 0; a < 3; ++a)
      central(scl, s.log_scale(a), analytic.cloud.log_scale[i](a));
    for (int a = 0; a < 4; ++a)
      central(rot, s.rotation(a), analytic.cloud.rotation[i](a));
    central(opa, s.logit_opacity, analytic.cloud.logit_opacity[i]);
    for (int c = 0; c < 3; ++c)
      for (int b = 0; b < s.sh.cols(); ++b)
        central(sh, s.sh(c, b), analytic.cloud.sh[i](c, b));
  }

  GradcheckGroup pose_r{"pose_rotation"}, pose_t{"pose_translation"};
  const Vec6 a_pose = analytic.pose.as_vector();
  for (int k = 0; k < 6; ++k) {
    Vec6 delta = Vec6::Zero();
    delta(k) = opts.h_pose;
    const Probe plus = evaluate(cloud, apply_pose_delta(cam, delta), cfg, g);
    const Probe minus = evaluate(cloud, apply_pose_delta(cam, -delta), cfg, g);
    GradcheckGroup &group = k < 3 ? pose_r : pose_t;
    if (plus.signature != minus.signature) {
      ++group.skipped;
      continue;
    }
    record(group, a_pose(k), (plus.loss - minus.loss) / (2 * opts.h_pose), opts.abs_floor);
  }

  report.groups = {pos, scl, rot, opa, sh, pose_r, pose_t};
  return report;
}

} // namespace gscenes
