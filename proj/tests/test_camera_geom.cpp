#include "gscenes/camera_geom.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace gscenes;
using namespace testing_util;

namespace {

// Cameras on an ellipse with semi-axes (a, b) along (u, v) around `center`, all looking at `center`.
std::vector<CameraView> elliptical_rig(int n, double a, double b, const Mat3 &frame, const Vec3 &center,
                                       double phase = 0.3) {
  const Vec3 u = frame.col(0), v = frame.col(1), normal = frame.col(2);
  std::vector<CameraView> cams;
  for (int i = 0; i < n; ++i) {
    const double th = phase + 2 * std::numbers::pi * i / n;
    const Vec3 eye = center + a * std::cos(th) * u + b * std::sin(th) * v;
    cams.push_back(look_at(eye, center, normal, make_intrinsics(64, 48, 60)));
  }
  return cams;
}

double closest_center_distance(const EllipseTrajectory &traj, const CameraView &ref, const Vec3 &target) {
  double best = 1e9;
  const int steps = 20000;
  for (int i = 0; i < steps; ++i) {
    const double th = 2 * std::numbers::pi * i / steps;
    best = std::min(best, (traj.point_at(th) - target).norm());
  }
  // refine around the analytic in-plane angle as well
  best = std::min(best, (sample_pose(traj, traj.angle_of(target), ref).center() - target).norm());
  return best;
}

} // namespace

TEST(Plucker, OriginCamera) {
  const CameraView cam = origin_camera(8, 8, 10);
  Vec6 expect;
  expect << 0, 0, 1, 0, 0, 0;
  EXPECT_LT((plucker_from_camera(cam).as_vector() - expect).norm(), 1e-15);
}

TEST(Plucker, HandCrossProduct) {
  CameraView cam = origin_camera(8, 8, 10);
  cam.translation = -cam.rotation * Vec3(1, 0, 0); // center o = (1, 0, 0)
  Vec6 expect;
  expect << 0, 0, 1, 0, -1, 0;
  EXPECT_LT((plucker_from_camera(cam).as_vector() - expect).norm(), 1e-15);
}

TEST(Plucker, InvariantUnderSlidingAlongRay) {
  Rng rng(21);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 100; ++t) {
    const Vec3 eye(u(rng), u(rng), u(rng) + 8.0);
    const CameraView cam = look_at(eye, Vec3(u(rng), u(rng), 0), Vec3::UnitZ(), make_intrinsics(16, 16, 50));
    const PluckerRay r = plucker_from_camera(cam);
    EXPECT_NEAR(r.direction.norm(), 1.0, 1e-12);
    EXPECT_NEAR(r.direction.dot(r.moment), 0.0, 1e-12);
    const double s = u(rng);
    CameraView slid = cam;
    slid.translation = -cam.rotation * (cam.center() + s * r.direction);
    EXPECT_LT((plucker_from_camera(slid).as_vector() - r.as_vector()).norm(), 1e-9);
  }
}

TEST(Fourier, LengthForAllBandCounts) {
  Vec6 r;
  r << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6;
  for (int k = 1; k <= 8; ++k)
    EXPECT_EQ(fourier_encode(r, k).size(), static_cast<std::size_t>(6 * (1 + 2 * k)));
  EXPECT_EQ(fourier_encode(r).size(), 78u);
  EXPECT_EQ(kEmbeddingDim, 78);
  EXPECT_THROW(fourier_encode(r, 0), InvalidArgument);
}

TEST(Fourier, ZeroVectorLayout) {
  const std::vector<double> e = fourier_encode(Vec6::Zero(), 6);
  for (int i = 0; i < 6; ++i)
    EXPECT_EQ(e[i], 0.0);
  for (int k = 0; k < 6; ++k)
    for (int i = 0; i < 6; ++i) {
      EXPECT_EQ(e[6 + 12 * k + i], 0.0);
      EXPECT_EQ(e[6 + 12 * k + 6 + i], 1.0);
    }
}

TEST(Fourier, UnitComponentFirstBand) {
  Vec6 r = Vec6::Zero();
  r(2) = 1.0;
  const std::vector<double> e = fourier_encode(r, 6);
  EXPECT_NEAR(e[6 + 2], std::sin(std::numbers::pi), 1e-15);
  EXPECT_NEAR(e[6 + 6 + 2], -1.0, 1e-15);
  // band k uses frequency k
  for (int k = 1; k <= 6; ++k)
    EXPECT_NEAR(e[6 + 12 * (k - 1) + 6 + 2], std::cos(k * std::numbers::pi), 1e-12);
}

TEST(Embedding, MatchesEncodedPlucker) {
  const CameraView cam = front_camera(16, 16);
  const CameraEmbedding e = embed_camera(cam);
  ASSERT_EQ(e.values.size(), 78u);
  const std::vector<double> ref = fourier_encode(plucker_from_camera(cam).as_vector());
  for (int i = 0; i < 78; ++i)
    EXPECT_EQ(e.values[i], static_cast<float>(ref[i]));
  const std::vector<CameraView> cams{cam, origin_camera(8, 8, 5)};
  const std::vector<float> rows = embed_cameras(cams);
  ASSERT_EQ(rows.size(), 2u * 78u);
  EXPECT_TRUE(std::equal(e.values.begin(), e.values.end(), rows.begin()));
}

TEST(Trajectory, CircleRadiusTwo) {
  const auto cams = elliptical_rig(8, 2, 2, Mat3::Identity(), Vec3::Zero());
  const EllipseTrajectory t = fit_trajectory(cams);
  EXPECT_NEAR(t.semi_a, 2.0, 1e-6);
  EXPECT_NEAR(t.semi_b, 2.0, 1e-6);
  EXPECT_NEAR(std::abs(t.plane_normal.z()), 1.0, 1e-9);
  EXPECT_LT(t.center.norm(), 1e-9);
}

TEST(Trajectory, AxisAlignedEllipse) {
  const auto cams = elliptical_rig(10, 3, 1, Mat3::Identity(), Vec3::Zero());
  const EllipseTrajectory t = fit_trajectory(cams);
  EXPECT_NEAR(t.semi_a, 3.0, 1e-4);
  EXPECT_NEAR(t.semi_b, 1.0, 1e-4);
  EXPECT_NEAR(std::abs(t.basis_u.x()), 1.0, 1e-6);
  EXPECT_FALSE(t.circle_fallback);
}

TEST(Trajectory, BasisIsOrthonormalAndOrdered) {
  const Mat3 frame = so3_exp(Vec3(0.4, -0.3, 0.9));
  const auto cams = elliptical_rig(7, 2.5, 1.5, frame, Vec3(1, -2, 0.5));
  const EllipseTrajectory t = fit_trajectory(cams);
  EXPECT_NEAR(t.basis_u.norm(), 1.0, 1e-9);
  EXPECT_NEAR(t.basis_v.norm(), 1.0, 1e-9);
  EXPECT_NEAR(t.plane_normal.norm(), 1.0, 1e-9);
  EXPECT_NEAR(t.basis_u.dot(t.basis_v), 0.0, 1e-6);
  EXPECT_NEAR(t.basis_u.dot(t.plane_normal), 0.0, 1e-6);
  EXPECT_NEAR(t.basis_v.dot(t.plane_normal), 0.0, 1e-6);
  EXPECT_GE(t.semi_a, t.semi_b);
  EXPECT_GT(t.semi_b, 0.0);
}

TEST(Trajectory, DenseSamplingReproducesRigCenters) {
  const Mat3 frame = so3_exp(Vec3(-0.2, 0.5, 0.1));
  const auto cams = elliptical_rig(9, 2.2, 1.3, frame, Vec3(0.5, 0.5, -1), 0.1);
  const EllipseTrajectory t = fit_trajectory(cams);
  for (const auto &c : cams)
    EXPECT_LT(closest_center_distance(t, cams[0], c.center()), 1e-4);
}

TEST(Trajectory, CircularRigAngleRecoversCamera) {
  const auto cams = elliptical_rig(8, 2, 2, Mat3::Identity(), Vec3::Zero());
  const EllipseTrajectory t = fit_trajectory(cams, Vec3::Zero());
  for (const auto &c : cams) {
    const CameraView s = sample_pose(t, t.angle_of(c.center()), c);
    EXPECT_LT((s.center() - c.center()).norm(), 1e-6);
  }
}

TEST(Trajectory, RejectsTooFewOrCollinearCameras) {
  const auto cams = elliptical_rig(8, 2, 2, Mat3::Identity(), Vec3::Zero());
  EXPECT_THROW(fit_trajectory(std::span(cams.data(), 2)), InvalidArgument);
  std::vector<CameraView> line;
  for (int i = 0; i < 4; ++i)
    line.push_back(look_at(Vec3(i, 0, 3), Vec3(i, 0.5, 0), Vec3::UnitZ(), make_intrinsics(8, 8, 50)));
  EXPECT_THROW(fit_trajectory(line), InvalidArgument);
}

TEST(SamplePose, PeriodicAndLooksAtTarget) {
  const auto cams = elliptical_rig(6, 3, 2, so3_exp(Vec3(0.2, 0.1, 0)), Vec3(0, 0, 1));
  const EllipseTrajectory t = fit_trajectory(cams, Vec3(0.2, -0.1, 0.5));
  for (double th : {0.0, 0.7, 2.5, -1.2}) {
    const CameraView a = sample_pose(t, th, cams[0]);
    const CameraView b = sample_pose(t, th + 2 * std::numbers::pi, cams[0]);
    EXPECT_LT((a.rotation - b.rotation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((a.translation - b.translation).norm(), 1e-9);
    const Vec3 to_target = (t.look_target - a.center()).normalized();
    EXPECT_NEAR(a.forward().dot(to_target), 1.0, 1e-6);
    EXPECT_EQ(a.width, cams[0].width);
    EXPECT_EQ(a.fx, cams[0].fx);
    // up hemisphere follows the reference camera
    const Vec3 ref_up = -cams[0].rotation.row(1).transpose();
    EXPECT_GT((-a.rotation.row(1).transpose()).dot(ref_up), 0.0);
  }
}

TEST(LookAt, AxesConvention) {
  const CameraView c = look_at(Vec3(0, -5, 0), Vec3::Zero(), Vec3::UnitZ(), make_intrinsics(8, 8, 60));
  EXPECT_LT((c.forward() - Vec3::UnitY()).norm(), 1e-12);
  // image y (second row) points down, away from up
  EXPECT_LT((c.rotation.row(1).transpose() + Vec3::UnitZ()).norm(), 1e-12);
  EXPECT_NEAR(c.rotation.determinant(), 1.0, 1e-12);
  EXPECT_THROW(look_at(Vec3(0, 0, 5), Vec3::Zero(), Vec3::UnitZ(), make_intrinsics(8, 8, 60)), InvalidArgument);
  EXPECT_THROW(look_at(Vec3::Zero(), Vec3::Zero(), Vec3::UnitZ(), make_intrinsics(8, 8, 60)), InvalidArgument);
}

TEST(Interpolate, EndpointsAndMidpoint) {
  const CameraView a = front_camera(16, 16);
  const CameraView b = look_at(Vec3(0, 4, 1), Vec3::Zero(), Vec3::UnitZ(), make_intrinsics(16, 16, 60));
  EXPECT_LT((interpolate_cameras(a, b, 0).rotation - a.rotation).norm(), 1e-12);
  EXPECT_LT((interpolate_cameras(a, b, 1).center() - b.center()).norm(), 1e-12);
  const CameraView m = interpolate_cameras(a, b, 0.5);
  EXPECT_NEAR(rotation_angle_between(m.rotation, a.rotation), rotation_angle_between(m.rotation, b.rotation), 1e-9);
  EXPECT_LT((m.center() - 0.5 * (a.center() + b.center())).norm(), 1e-12);
}

TEST(Extent, RescaleAndExtent) {
  const auto cams = elliptical_rig(4, 2, 2, Mat3::Identity(), Vec3(1, 1, 1));
  EXPECT_NEAR(scene_extent(cams), 2.0, 1e-12);
  const CameraView c = rescale_camera(make_intrinsics(640, 480, 60), 320);
  EXPECT_EQ(c.width, 320);
  EXPECT_EQ(c.height, 240);
  EXPECT_NEAR(c.fx, make_intrinsics(640, 480, 60).fx * 0.5, 1e-12);
}
