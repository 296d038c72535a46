#pragma once

#include "gscenes/core.hpp"

#include <optional>
#include <span>
#include <vector>

namespace gscenes {

struct PluckerRay {
  Vec3 direction = Vec3::UnitZ(); // unit
  Vec3 moment = Vec3::Zero();     // origin x direction

  Vec6 as_vector() const {
    Vec6 v;
    v << direction, moment;
    return v;
  }
};

// One ray per camera: origin at the camera center, direction along the
// forward (+z) axis of the world-to-camera rotation.
PluckerRay plucker_from_camera(const CameraView &cam);

constexpr int kFourierBands = 6;
constexpr int kEmbeddingDim = 6 * (1 + 2 * kFourierBands); // 78

inline constexpr int fourier_length(int bands) { return 6 * (1 + 2 * bands); }

// [r, sin(f_1 pi r), cos(f_1 pi r), ..., sin(f_K pi r), cos(f_K pi r)] with f_k = k.
std::vector<double> fourier_encode(const Vec6 &r, int bands = kFourierBands);

struct CameraEmbedding {
  std::vector<float> values; // kEmbeddingDim entries
};

CameraEmbedding embed_camera(const CameraView &cam);
// Row-major (cams.size()) x 78 float32 matrix.
std::vector<float> embed_cameras(std::span<const CameraView> cams);

struct EllipseTrajectory {
  Vec3 center = Vec3::Zero();
  Vec3 basis_u = Vec3::UnitX(); // major axis
  Vec3 basis_v = Vec3::UnitY(); // minor axis
  double semi_a = 1;
  double semi_b = 1;
  Vec3 plane_normal = Vec3::UnitZ();
  Vec3 look_target = Vec3::Zero();
  bool circle_fallback = false;

  Vec3 point_at(double theta) const;
  // in-plane parametric angle of the projection of p
  double angle_of(const Vec3 &p) const;
};

// Least-squares plane through the camera centers, direct conic fit with an
// ellipse constraint in that plane, best-fit circle when the conic is degenerate.
// Without an explicit target the look target is the camera-center centroid
// pushed along the mean view direction to the point closest to all optical axes.
EllipseTrajectory fit_trajectory(std::span<const CameraView> cams,
                                 std::optional<Vec3> target = std::nullopt);

Vec3 centroid(std::span<const Vec3> points);

// Largest distance from a camera center to the centers' centroid; 1 when all coincide.
double scene_extent(std::span<const CameraView> cams);

// Same pose, intrinsics scaled so the longer image side equals `long_side`.
CameraView rescale_camera(const CameraView &cam, int long_side);

// Camera at `eye` looking at `target`; image y points away from `up`.
CameraView look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, const CameraView &intrinsics);

CameraView sample_pose(const EllipseTrajectory &traj, double theta, const CameraView &reference);

// Spherical-linear interpolation of rotation and linear interpolation of center.
CameraView interpolate_cameras(const CameraView &a, const CameraView &b, double t);

} // namespace gscenes
