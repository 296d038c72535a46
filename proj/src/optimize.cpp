#include "gscenes/optimize.hpp"

#include "gscenes/dataset.hpp"
#include "gscenes/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gscenes {

void OptimizerConfig::validate() const {
  if (init_iters < 0 || main_iters < 0)
    throw InvalidArgument("OptimizerConfig: iteration counts must be >= 0");
  if (densify_interval <= 0 || densify_every <= 0 || opacity_reset_interval <= 0)
    throw InvalidArgument("OptimizerConfig: intervals must be > 0");
  if (pose_align_iters < 0)
    throw InvalidArgument("OptimizerConfig: pose_align_iters must be >= 0");
  if (sh_degree != 0 && sh_degree != 3)
    throw InvalidArgument("OptimizerConfig: sh_degree must be 0 or 3");
  if (novel_angle_count <= 0 || novel_angle_stride <= 0)
    throw InvalidArgument("OptimizerConfig: novel angle set must be non-empty");
  for (double lr : {lr_position_init, lr_position_final, lr_sh_dc, lr_sh_rest, lr_opacity, lr_scale, lr_rotation,
                    pose_lr, pose_align_lr, pose_align_lr_final})
    if (!(lr >= 0) || !std::isfinite(lr))
      throw InvalidArgument("OptimizerConfig: learning rates must be finite and >= 0");
  if (lr_position_final <= 0 || lr_position_init <= 0 || pose_align_lr <= 0 || pose_align_lr_final <= 0)
    throw InvalidArgument("OptimizerConfig: decaying learning rates must be > 0");
  weights.validate();
  raster.validate();
}

int splat_param_count(int sh_degree) { return 11 + 3 * coeff_count_for_degree(sh_degree); }

double exponential_lr(double init, double final, int iter, int total) {
  if (total <= 0 || iter >= total)
    return final;
  if (iter <= 0)
    return init;
  const double t = static_cast<double>(iter) / total;
  return std::exp((1 - t) * std::log(init) + t * std::log(final));
}

// ---------------------------------------------------------------------------
// Adam

namespace {

void pack_grad(const CloudGradients &g, std::size_t i, int coeffs, double *out) {
  for (int k = 0; k < 3; ++k)
    out[k] = g.position[i](k);
  for (int k = 0; k < 3; ++k)
    out[3 + k] = g.log_scale[i](k);
  for (int k = 0; k < 4; ++k)
    out[6 + k] = g.rotation[i](k);
  out[10] = g.logit_opacity[i];
  for (int j = 0; j < coeffs; ++j)
    for (int c = 0; c < 3; ++c)
      out[11 + 3 * j + c] = g.sh[i](c, j);
}

void apply_update(GaussianSplat &s, const double *d, int coeffs) {
  for (int k = 0; k < 3; ++k)
    s.position(k) += d[k];
  for (int k = 0; k < 3; ++k)
    s.log_scale(k) += d[3 + k];
  for (int k = 0; k < 4; ++k)
    s.rotation(k) += d[6 + k];
  s.logit_opacity += d[10];
  for (int j = 0; j < coeffs; ++j)
    for (int c = 0; c < 3; ++c)
      s.sh(c, j) += d[11 + 3 * j + c];
  const double n = s.rotation.norm();
  s.rotation = n > 1e-12 ? Vec4(s.rotation / n) : Vec4(1, 0, 0, 0);
}

} // namespace

Adam::Adam(const OptimizerConfig &cfg, std::size_t splats, int sh_degree)
    : beta1_(cfg.adam_beta1), beta2_(cfg.adam_beta2), eps_(cfg.adam_eps) {
  const int p = splat_param_count(sh_degree);
  lr_.assign(p, 0.0);
  for (int k = 0; k < 3; ++k)
    lr_[3 + k] = cfg.lr_scale;
  for (int k = 0; k < 4; ++k)
    lr_[6 + k] = cfg.lr_rotation;
  lr_[10] = cfg.lr_opacity;
  for (int j = 0; j < coeff_count_for_degree(sh_degree); ++j)
    for (int c = 0; c < 3; ++c)
      lr_[11 + 3 * j + c] = j == 0 ? cfg.lr_sh_dc : cfg.lr_sh_rest;
  m_.assign(splats, std::vector<double>(p, 0.0));
  v_.assign(splats, std::vector<double>(p, 0.0));
}

void Adam::step(GaussianCloud &cloud, const CloudGradients &grads, double lr_position) {
  if (cloud.size() != m_.size() || grads.size() != m_.size())
    throw InvalidArgument("Adam::step: state, cloud and gradients differ in size");
  ++t_;
  const double bc1 = 1 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1 - std::pow(beta2_, static_cast<double>(t_));
  const int coeffs = cloud.coeff_count();
  const std::size_t p = lr_.size();
  std::vector<double> g(p), d(p);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    pack_grad(grads, i, coeffs, g.data());
    auto &m = m_[i];
    auto &v = v_[i];
    for (std::size_t k = 0; k < p; ++k) {
      m[k] = beta1_ * m[k] + (1 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1 - beta2_) * g[k] * g[k];
      const double lr = k < 3 ? lr_position : lr_[k];
      d[k] = -lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps_);
    }
    apply_update(cloud.splats[i], d.data(), coeffs);
  }
}

void Adam::remap(const std::vector<std::size_t> &origin, const std::vector<char> &fresh) {
  const std::size_t p = lr_.size();
  std::vector<std::vector<double>> m(origin.size()), v(origin.size());
  for (std::size_t i = 0; i < origin.size(); ++i) {
    if (fresh[i]) {
      m[i].assign(p, 0.0);
      v[i].assign(p, 0.0);
    } else {
      m[i] = m_.at(origin[i]);
      v[i] = v_.at(origin[i]);
    }
  }
  m_ = std::move(m);
  v_ = std::move(v);
}

void Adam::reset_opacity_state() {
  for (std::size_t i = 0; i < m_.size(); ++i)
    m_[i][10] = v_[i][10] = 0.0;
}

CameraView PoseAdam::step(const CameraView &cam, const PoseGradient &grad, double lr) {
  ++t_;
  const Vec6 g = grad.as_vector();
  m_ = b1_ * m_ + (1 - b1_) * g;
  v_ = b2_ * v_ + (1 - b2_) * g.cwiseProduct(g);
  const double bc1 = 1 - std::pow(b1_, static_cast<double>(t_));
  const double bc2 = 1 - std::pow(b2_, static_cast<double>(t_));
  const Vec6 delta = -lr * ((m_ / bc1).array() / ((v_ / bc2).array().sqrt() + eps_)).matrix();
  return apply_pose_delta(cam, delta);
}

// ---------------------------------------------------------------------------
// fit_scene

std::vector<double> mean_neighbor_distance(const std::vector<Vec3> &pts, int k) {
  const std::size_t n = pts.size();
  std::vector<double> out(n, 0.0);
  if (n < 2)
    return out;
  const std::size_t kk = std::min<std::size_t>(k, n - 1);
  parallel_for(n, [&](std::size_t begin, std::size_t end, int) {
    std::vector<double> best;
    for (std::size_t i = begin; i < end; ++i) {
      best.assign(kk, std::numeric_limits<double>::infinity());
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i)
          continue;
        const double d = (pts[i] - pts[j]).squaredNorm();
        if (d < best.back()) {
          best.back() = d;
          std::sort(best.begin(), best.end());
        }
      }
      double s = 0;
      for (double d : best)
        s += std::sqrt(d);
      out[i] = s / kk;
    }
  });
  return out;
}

GaussianCloud init_cloud_from_points(const ColoredPoints &points, int sh_degree) {
  if (points.positions.empty())
    throw InvalidArgument("fit_scene: empty point cloud");
  if (points.colors.size() != points.positions.size())
    throw InvalidArgument("fit_scene: colors and positions differ in length");
  const auto dist = mean_neighbor_distance(points.positions);
  GaussianCloud cloud;
  cloud.sh_degree = sh_degree;
  const int coeffs = coeff_count_for_degree(sh_degree);
  for (std::size_t i = 0; i < points.positions.size(); ++i) {
    GaussianSplat s;
    s.position = points.positions[i];
    s.rotation = Vec4(1, 0, 0, 0);
    const double d = dist[i] > 0 ? dist[i] : 0.01;
    s.log_scale = Vec3::Constant(std::log(std::max(d, 1e-7)));
    s.logit_opacity = inverse_sigmoid(0.1);
    s.sh = ShCoeffs::Zero(3, coeffs);
    s.sh.col(0) = (points.colors[i].array() - 0.5).matrix() / kShC0;
    cloud.splats.push_back(s);
  }
  return cloud;
}

namespace {

double extent_for(const OptimizerConfig &cfg, const std::vector<CameraView> &cams) {
  return cfg.scene_extent > 0 ? cfg.scene_extent : scene_extent(cams);
}

void require_views(const std::vector<CameraView> &cams, const std::vector<RgbdImage> &images) {
  if (cams.empty())
    throw InvalidArgument("at least one view is required");
  if (cams.size() != images.size())
    throw InvalidArgument("camera and image counts differ");
  for (std::size_t i = 0; i < cams.size(); ++i) {
    cams[i].validate();
    if (images[i].width() != cams[i].width || images[i].height() != cams[i].height ||
        images[i].depth.width != cams[i].width || images[i].depth.height != cams[i].height)
      throw InvalidArgument("image " + std::to_string(i) + " does not match its camera dimensions");
  }
}

} // namespace

FitResult fit_scene(const ColoredPoints &points, const std::vector<CameraView> &cams,
                    const std::vector<RgbdImage> &images, const OptimizerConfig &cfg) {
  cfg.validate();
  require_views(cams, images);
  FitResult res;
  res.cloud = init_cloud_from_points(points, cfg.sh_degree);
  res.cameras = cams;
  const double extent = extent_for(cfg, cams);
  Adam adam(cfg, res.cloud.size(), cfg.sh_degree);
  std::vector<PoseAdam> pose_adam(cams.size());
  Rng rng = make_rng(cfg.seed, "fit_scene/views");
  std::uniform_int_distribution<std::size_t> pick(0, cams.size() - 1);
  for (int it = 0; it < cfg.init_iters; ++it) {
    const std::size_t v = pick(rng);
    CameraView &cam = res.cameras[v];
    const RenderOutput r = rasterize(res.cloud, cam, cfg.raster);
    const LossResult loss = gaussian_loss(r, images[v]);
    if (!std::isfinite(loss.value))
      throw NumericalError("fit_scene: non-finite loss at iteration " + std::to_string(it));
    res.losses.push_back(loss.value);
    const BackwardResult g = backward(res.cloud, cam, cfg.raster, loss.grads);
    adam.step(res.cloud, g.cloud,
              extent * exponential_lr(cfg.lr_position_init, cfg.lr_position_final, it, cfg.init_iters));
    if (cfg.optimize_poses)
      cam = pose_adam[v].step(cam, g.pose, cfg.pose_lr);
  }
  return res;
}

// ---------------------------------------------------------------------------
// ADC

void DensityStats::reset(std::size_t n) {
  grad_accum.assign(n, 0.0);
  denom.assign(n, 0);
}

void DensityStats::add(const CloudGradients &g, int width, int height) {
  if (g.size() != grad_accum.size())
    throw InvalidArgument("DensityStats: size mismatch");
  const double ndc = 0.5 * std::max(width, height);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.visible[i]) {
      grad_accum[i] += g.mean2d_norm[i] * ndc;
      ++denom[i];
    }
}

AdcResult adaptive_density_control(GaussianCloud &cloud, const DensityStats &stats, const OptimizerConfig &cfg,
                                   double extent, std::uint64_t seed) {
  const std::size_t n = cloud.size();
  if (stats.grad_accum.size() != n || stats.denom.size() != n)
    throw InvalidArgument("adaptive_density_control: statistics do not match the cloud");
  Rng rng = make_rng(seed, "adc/split");
  std::normal_distribution<double> n01;
  const double scale_limit = cfg.densify_scale_threshold * extent;
  const bool may_grow = n < cfg.max_splats;

  AdcResult res;
  std::vector<GaussianSplat> out;
  out.reserve(n + n / 4);
  std::vector<GaussianSplat> born;
  std::vector<std::size_t> born_origin;
  for (std::size_t i = 0; i < n; ++i) {
    const GaussianSplat &s = cloud.splats[i];
    const double avg = stats.denom[i] > 0 ? stats.grad_accum[i] / stats.denom[i] : 0.0;
    const bool hot = may_grow && avg > cfg.densify_grad_threshold;
    if (hot && s.scale().maxCoeff() > scale_limit) {
      // split: two samples from the splat's own density, shrunk by 1.6; original dropped
      const Mat3 r = s.rotation_matrix();
      for (int c = 0; c < 2; ++c) {
        GaussianSplat child = s;
        const Vec3 off(n01(rng), n01(rng), n01(rng));
        child.position = s.position + r * s.scale().cwiseProduct(off);
        child.log_scale = s.log_scale.array() - std::log(1.6);
        born.push_back(child);
        born_origin.push_back(i);
      }
      ++res.split;
      continue;
    }
    if (hot) {
      born.push_back(s);
      born_origin.push_back(i);
      ++res.cloned;
    }
    if (s.opacity() < cfg.prune_opacity) {
      ++res.pruned;
      continue;
    }
    out.push_back(s);
    res.origin.push_back(i);
    res.fresh.push_back(0);
  }
  // splats created in this step are exempt from pruning
  for (std::size_t b = 0; b < born.size(); ++b) {
    out.push_back(born[b]);
    res.origin.push_back(born_origin[b]);
    res.fresh.push_back(1);
  }
  cloud.splats = std::move(out);
  return res;
}

void reset_opacity(GaussianCloud &cloud) {
  const double cap = inverse_sigmoid(0.01);
  for (auto &s : cloud.splats)
    s.logit_opacity = std::min(s.logit_opacity, cap);
}

// ---------------------------------------------------------------------------
// TrainingStack

TrainingStack::TrainingStack(const std::vector<CameraView> &cams, const std::vector<RgbdImage> &images) {
  require_views(cams, images);
  for (std::size_t i = 0; i < cams.size(); ++i)
    entries_.push_back({cams[i], images[i], false});
  inputs_ = cams.size();
}

void TrainingStack::append_novel(const CameraView &cam, RgbdImage image) {
  if (image.width() != cam.width || image.height() != cam.height)
    throw InvalidArgument("TrainingStack: novel image does not match its camera");
  entries_.push_back({cam, std::move(image), true});
}

std::vector<CameraView> TrainingStack::input_cameras() const {
  std::vector<CameraView> out;
  for (std::size_t i = 0; i < inputs_; ++i)
    out.push_back(entries_[i].camera);
  return out;
}

// ---------------------------------------------------------------------------
// reconstruct

std::vector<double> novel_angles(int count, int stride) {
  if (count <= 0)
    throw InvalidArgument("novel_angles: count must be > 0");
  std::vector<double> out;
  for (int j = 0; j < count; ++j)
    out.push_back(2 * M_PI * static_cast<double>((static_cast<long>(j) * stride) % count) / count);
  return out;
}

RefinerRequest build_request(const RenderOutput &render, const CameraView &target,
                             const std::vector<CameraView> &inputs, std::uint64_t seed,
                             const std::vector<float> &context) {
  RefinerRequest req;
  req.render = render.to_rgbd();
  req.confidence = render.confidence;
  req.confidence_latent = downsample_confidence(render.confidence);
  req.m = static_cast<int>(inputs.size());
  req.context = context.empty() ? std::vector<float>(inputs.size() * kContextDim, 0.0f) : context;
  req.geo = embed_cameras(inputs);
  const auto t = embed_camera(target);
  req.geo.insert(req.geo.end(), t.values.begin(), t.values.end());
  req.seed = seed;
  req.target = target;
  return req;
}

ReconstructResult reconstruct(GaussianCloud cloud, TrainingStack stack, const EllipseTrajectory &traj,
                              Refiner &refiner, const OptimizerConfig &cfg, const IterationHook &hook) {
  cfg.validate();
  cloud.validate();
  if (stack.input_count() == 0)
    throw InvalidArgument("reconstruct: training stack has no input views");
  if (cloud.sh_degree != cfg.sh_degree)
    throw InvalidArgument("reconstruct: cloud SH degree differs from the configuration");
  const std::vector<CameraView> inputs = stack.input_cameras();
  const double extent = extent_for(cfg, inputs);
  const LossWeights weights = cfg.weights;
  const auto angles = novel_angles(cfg.novel_angle_count, cfg.novel_angle_stride);

  ReconstructResult res;
  Adam adam(cfg, cloud.size(), cfg.sh_degree);
  DensityStats stats;
  stats.reset(cloud.size());
  Rng pick_rng = make_rng(cfg.seed, "reconstruct/stack");
  int novel_attempts = 0;

  for (int t = 1; t <= cfg.main_iters; ++t) {
    if (t % cfg.densify_interval == 0) {
      const double theta = angles[novel_attempts % angles.size()];
      const std::uint64_t req_seed = split_seed(cfg.seed, "reconstruct/novel/" + std::to_string(novel_attempts));
      ++novel_attempts;
      try {
        const CameraView cam = sample_pose(traj, theta, inputs.front());
        const RenderOutput r = rasterize(cloud, cam, cfg.raster);
        RefinerResponse resp = refiner.refine(build_request(r, cam, inputs, req_seed));
        if (resp.refined.width() != cam.width || resp.refined.height() != cam.height)
          throw RefinerError("refined image dimensions differ from the request");
        resp.refined.clamp();
        stack.append_novel(cam, std::move(resp.refined));
        ++res.log.novel_views_added;
      } catch (const Error &e) {
        ++res.log.refiner_failures;
        res.log.warnings.push_back("iteration " + std::to_string(t) + ": novel view skipped: " + e.what());
      }
    }

    std::uniform_int_distribution<std::size_t> pick(0, stack.size() - 1);
    const StackEntry &entry = stack.entries()[pick(pick_rng)];
    const RenderOutput r = rasterize(cloud, entry.camera, cfg.raster);
    const LossResult loss =
        entry.is_novel ? sample_loss(r, entry.image, weights, t) : gaussian_loss(r, entry.image);
    if (!std::isfinite(loss.value))
      throw NumericalError("reconstruct: non-finite loss at iteration " + std::to_string(t));
    res.log.losses.push_back(loss.value);
    const CloudGradients g = backward_cloud(cloud, entry.camera, cfg.raster, loss.grads);
    adam.step(cloud, g, extent * exponential_lr(cfg.lr_position_init, cfg.lr_position_final, t, cfg.main_iters));
    stats.add(g, entry.camera.width, entry.camera.height);

    if (t < cfg.densify_until) {
      if (t > cfg.densify_from && t % cfg.densify_every == 0) {
        const AdcResult adc =
            adaptive_density_control(cloud, stats, cfg, extent, split_seed(cfg.seed, "adc/" + std::to_string(t)));
        adam.remap(adc.origin, adc.fresh);
        stats.reset(cloud.size());
      }
      if (t % cfg.opacity_reset_interval == 0) {
        reset_opacity(cloud);
        adam.reset_opacity_state();
      }
    }
    if (hook)
      hook(t, cloud);
  }
  res.log.final_splats = cloud.size();
  res.cloud = std::move(cloud);
  res.stack = std::move(stack);
  return res;
}

// ---------------------------------------------------------------------------
// align_test_pose

AlignResult align_test_pose(const GaussianCloud &cloud, const RgbdImage &image, const CameraView &init,
                            const OptimizerConfig &cfg) {
  cfg.validate();
  init.validate();
  if (image.width() != init.width || image.height() != init.height)
    throw InvalidArgument("align_test_pose: image does not match the camera dimensions");
  AlignResult res;
  res.camera = init;
  auto evaluate = [&](const CameraView &cam) {
    const RenderOutput r = rasterize(cloud, cam, cfg.raster);
    LossResult l = photometric_l1(r, image);
    if (!std::isfinite(l.value))
      throw NumericalError("align_test_pose: non-finite loss");
    return l;
  };
  PoseAdam opt(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  for (int it = 0; it < cfg.pose_align_iters; ++it) {
    const LossResult l = evaluate(res.camera);
    if (it == 0)
      res.initial_loss = l.value;
    const PoseGradient g = backward_pose(cloud, res.camera, cfg.raster, l.grads);
    res.camera = opt.step(res.camera, g,
                          exponential_lr(cfg.pose_align_lr, cfg.pose_align_lr_final, it, cfg.pose_align_iters));
  }
  res.loss = evaluate(res.camera).value;
  if (cfg.pose_align_iters == 0)
    res.initial_loss = res.loss;
  return res;
}

} // namespace gscenes
