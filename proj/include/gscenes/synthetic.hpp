#pragma once

#include "gscenes/core.hpp"
#include "gscenes/io.hpp"
#include "gscenes/render.hpp"

#include <cstdint>
#include <vector>

namespace gscenes {

struct RandomCloudOptions {
  int sh_degree = 0;
  Vec3 center = Vec3::Zero();
  double half_extent = 1.0;
  double min_scale = 0.05;
  double max_scale = 0.3;
  double min_opacity = 0.1;
  double max_opacity = 0.9;
  double sh_rest_sigma = 0.05; // stddev of the higher-band coefficients
};

GaussianCloud random_cloud(int n, std::uint64_t seed, const RandomCloudOptions &opts = {});

// Pinhole camera with principal point at the image center.
CameraView make_intrinsics(int width, int height, double fov_x_deg);

// n cameras on a horizontal circle (world up +z) at angles phase + 2 pi i / n,
// all looking at target.
std::vector<CameraView> ring_cameras(int n, double radius, double height, const Vec3 &target, int width,
                                     int px_height, double fov_x_deg = 60.0, double phase = 0.0);

// Camera on the same kind of circle at an explicit angle.
CameraView ring_camera(double angle, double radius, double height, const Vec3 &target, const CameraView &intrinsics);

// Textured tabletop: a ground disc plus a few colored blobs, roughly n splats in
// total, around the origin with world up +z.
GaussianCloud textured_scene(int n, std::uint64_t seed);

// Splat centers of `dense` that are visible (unoccluded) in at least one camera,
// colored from the rendered pixel, subsampled to at most max_points.
ColoredPoints visible_points(const GaussianCloud &dense, const std::vector<CameraView> &cams, int max_points,
                             std::uint64_t seed, const RasterConfig &cfg = {});

} // namespace gscenes
