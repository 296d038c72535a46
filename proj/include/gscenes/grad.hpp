#pragma once

#include "gscenes/core.hpp"
#include "gscenes/render.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gscenes {

// Gradients mirror the cloud layout splat by splat.
struct CloudGradients {
  std::vector<Vec3> position;
  std::vector<Vec3> log_scale;
  std::vector<Vec4> rotation; // w.r.t. the raw (stored) quaternion
  std::vector<double> logit_opacity;
  std::vector<ShCoeffs> sh;
  // |dL/d mean2d| of this backward pass, the densification signal
  std::vector<double> mean2d_norm;
  // splat survived projection (not culled) in this pass
  std::vector<char> visible;

  static CloudGradients zeros_like(const GaussianCloud &cloud);
  std::size_t size() const { return position.size(); }
  bool all_finite() const;
};

// Left perturbation of the world-to-camera transform:
// R' = Exp(rotation) R,  t' = Exp(rotation) t + translation.
struct PoseGradient {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  Vec6 as_vector() const {
    Vec6 v;
    v << rotation, translation;
    return v;
  }
};

CameraView apply_pose_delta(const CameraView &cam, const Vec3 &rotation, const Vec3 &translation);
inline CameraView apply_pose_delta(const CameraView &cam, const Vec6 &delta) {
  return apply_pose_delta(cam, delta.head<3>(), delta.tail<3>());
}

// pixel_loss_grads is H x W x 4: dL/d rgb in channels 0..2, dL/d depth in channel 3.
CloudGradients backward_cloud(const GaussianCloud &cloud, const CameraView &cam,
                              const RasterConfig &cfg, const Image &pixel_loss_grads);

PoseGradient backward_pose(const GaussianCloud &cloud, const CameraView &cam,
                           const RasterConfig &cfg, const Image &pixel_loss_grads);

struct BackwardResult {
  CloudGradients cloud;
  PoseGradient pose;
};

// One pass producing both gradient sets; the two public entry points forward here.
BackwardResult backward(const GaussianCloud &cloud, const CameraView &cam, const RasterConfig &cfg,
                        const Image &pixel_loss_grads);

struct GradcheckGroup {
  std::string name;
  double max_rel_error = 0;
  std::size_t checked = 0;
  // parameters whose +h/-h renders differ in contributor order, clamping or color saturation
  std::size_t skipped = 0;
};

struct GradcheckOptions {
  double h_cloud = 1e-6;
  double h_pose = 1e-7;
  double abs_floor = 1e-6;
};

struct GradcheckReport {
  std::vector<GradcheckGroup> groups;
  PoseGradient pose;

  const GradcheckGroup *find(const std::string &name) const;
  double worst() const;
};

// Central finite differences of L = <g, render> against both backward passes,
// with g drawn uniformly in [-1,1] from the seed.
GradcheckReport gradcheck(const GaussianCloud &cloud, const CameraView &cam, const RasterConfig &cfg,
                          std::uint64_t seed, const GradcheckOptions &opts = {});

} // namespace gscenes
