#include "gscenes/camera_geom.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace gscenes {

PluckerRay plucker_from_camera(const CameraView &cam) {
  const Vec3 f = cam.rotation.row(2).transpose();
  const double n = f.norm();
  if (!(n > 1e-9) || std::abs(cam.rotation.determinant() - 1.0) > 1e-6)
    throw InvalidArgument("plucker_from_camera: degenerate rotation");
  PluckerRay r;
  r.direction = f / n;
  r.moment = cam.center().cross(r.direction);
  return r;
}

std::vector<double> fourier_encode(const Vec6 &r, int bands) {
  if (bands < 1)
    throw InvalidArgument("fourier_encode: bands must be >= 1");
  std::vector<double> out;
  out.reserve(fourier_length(bands));
  for (int i = 0; i < 6; ++i)
    out.push_back(r(i));
  for (int k = 1; k <= bands; ++k) {
    for (int i = 0; i < 6; ++i)
      out.push_back(std::sin(k * M_PI * r(i)));
    for (int i = 0; i < 6; ++i)
      out.push_back(std::cos(k * M_PI * r(i)));
  }
  return out;
}

CameraEmbedding embed_camera(const CameraView &cam) {
  const auto enc = fourier_encode(plucker_from_camera(cam).as_vector(), kFourierBands);
  CameraEmbedding e;
  e.values.assign(enc.begin(), enc.end());
  return e;
}

std::vector<float> embed_cameras(std::span<const CameraView> cams) {
  std::vector<float> out;
  out.reserve(cams.size() * kEmbeddingDim);
  for (const auto &c : cams) {
    const auto e = embed_camera(c);
    out.insert(out.end(), e.values.begin(), e.values.end());
  }
  return out;
}

Vec3 EllipseTrajectory::point_at(double theta) const {
  return center + semi_a * std::cos(theta) * basis_u + semi_b * std::sin(theta) * basis_v;
}

double EllipseTrajectory::angle_of(const Vec3 &p) const {
  const Vec3 d = p - center;
  return std::atan2(d.dot(basis_v) / semi_b, d.dot(basis_u) / semi_a);
}

Vec3 centroid(std::span<const Vec3> points) {
  if (points.empty())
    throw InvalidArgument("centroid of an empty set");
  Vec3 c = Vec3::Zero();
  for (const auto &p : points)
    c += p;
  return c / static_cast<double>(points.size());
}

double scene_extent(std::span<const CameraView> cams) {
  if (cams.empty())
    throw InvalidArgument("scene_extent of an empty rig");
  std::vector<Vec3> centers;
  for (const auto &c : cams)
    centers.push_back(c.center());
  const Vec3 mid = centroid(centers);
  double r = 0;
  for (const auto &p : centers)
    r = std::max(r, (p - mid).norm());
  return r > 1e-12 ? r : 1.0;
}

CameraView rescale_camera(const CameraView &cam, int long_side) {
  if (long_side <= 0)
    throw InvalidArgument("rescale_camera: long side must be > 0");
  const double s = static_cast<double>(long_side) / std::max(cam.width, cam.height);
  CameraView out = cam;
  out.width = std::max(1, static_cast<int>(std::lround(cam.width * s)));
  out.height = std::max(1, static_cast<int>(std::lround(cam.height * s)));
  const double sx = static_cast<double>(out.width) / cam.width, sy = static_cast<double>(out.height) / cam.height;
  out.fx = cam.fx * sx;
  out.fy = cam.fy * sy;
  out.cx = (cam.cx + 0.5) * sx - 0.5;
  out.cy = (cam.cy + 0.5) * sy - 0.5;
  return out;
}

namespace {

struct Ellipse2 {
  Vec2 center;
  Vec2 major_dir;
  double a, b;
};

// Halir-Flusser numerically stable variant of the direct ellipse-specific fit.
std::optional<Ellipse2> fit_conic_ellipse(const std::vector<Vec2> &pts) {
  const std::size_t n = pts.size();
  if (n < 5)
    return std::nullopt;
  // normalize for conditioning
  Vec2 mean = Vec2::Zero();
  for (const auto &p : pts)
    mean += p;
  mean /= static_cast<double>(n);
  double spread = 0;
  for (const auto &p : pts)
    spread += (p - mean).norm();
  spread /= static_cast<double>(n);
  if (!(spread > 0))
    return std::nullopt;

  Eigen::MatrixXd d1(n, 3), d2(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 q = (pts[i] - mean) / spread;
    d1.row(i) << q.x() * q.x(), q.x() * q.y(), q.y() * q.y();
    d2.row(i) << q.x(), q.y(), 1.0;
  }
  const Mat3 s1 = d1.transpose() * d1, s2 = d1.transpose() * d2, s3 = d2.transpose() * d2;
  Eigen::FullPivLU<Mat3> s3_lu(s3);
  if (!s3_lu.isInvertible())
    return std::nullopt;
  const Mat3 t = -s3_lu.solve(s2.transpose());
  const Mat3 m = s1 + s2 * t;
  Mat3 c1_inv_m;
  c1_inv_m.row(0) = m.row(2) / 2.0;
  c1_inv_m.row(1) = -m.row(1);
  c1_inv_m.row(2) = m.row(0) / 2.0;

  Eigen::EigenSolver<Mat3> es(c1_inv_m);
  if (es.info() != Eigen::Success)
    return std::nullopt;
  int best = -1;
  double best_cond = 0;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(es.eigenvalues()(k).imag()) > 1e-9)
      continue;
    const Vec3 v = es.eigenvectors().col(k).real();
    const double cond = 4 * v(0) * v(2) - v(1) * v(1);
    if (cond > best_cond) {
      best_cond = cond;
      best = k;
    }
  }
  if (best < 0)
    return std::nullopt;
  const Vec3 a1 = es.eigenvectors().col(best).real();
  const Vec3 a2 = t * a1;
  const double A = a1(0), B = a1(1), C = a1(2), D = a2(0), E = a2(1), F = a2(2);

  Mat2 h;
  h << 2 * A, B, B, 2 * C;
  const Vec2 c0 = h.fullPivLu().solve(Vec2(-D, -E));
  const double f0 = F + 0.5 * (D * c0.x() + E * c0.y());
  Mat2 q;
  q << A, B / 2, B / 2, C;
  Eigen::SelfAdjointEigenSolver<Mat2> qs(q);
  const Vec2 lam = qs.eigenvalues();
  if (!(lam(0) * lam(1) > 0) || !(-f0 / lam(0) > 0) || !(-f0 / lam(1) > 0))
    return std::nullopt;
  // eigenvalues ascending: smaller eigenvalue <=> longer semi-axis
  const double ax0 = std::sqrt(-f0 / lam(0)), ax1 = std::sqrt(-f0 / lam(1));
  Ellipse2 e;
  e.center = mean + spread * c0;
  if (ax0 >= ax1) {
    e.a = ax0 * spread;
    e.b = ax1 * spread;
    e.major_dir = qs.eigenvectors().col(0);
  } else {
    e.a = ax1 * spread;
    e.b = ax0 * spread;
    e.major_dir = qs.eigenvectors().col(1);
  }
  if (!std::isfinite(e.a) || !std::isfinite(e.b))
    return std::nullopt;
  return e;
}

// Algebraic circle fit: x^2 + y^2 + D x + E y + F = 0.
std::optional<Ellipse2> fit_circle(const std::vector<Vec2> &pts) {
  const std::size_t n = pts.size();
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.row(i) << pts[i].x(), pts[i].y(), 1.0;
    b(i) = -(pts[i].squaredNorm());
  }
  const Vec3 sol = a.colPivHouseholderQr().solve(b);
  const Vec2 c(-sol(0) / 2, -sol(1) / 2);
  const double r2 = c.squaredNorm() - sol(2);
  if (!(r2 > 0) || !std::isfinite(r2))
    return std::nullopt;
  return Ellipse2{c, Vec2::UnitX(), std::sqrt(r2), std::sqrt(r2)};
}

} // namespace

EllipseTrajectory fit_trajectory(std::span<const CameraView> cams, std::optional<Vec3> target) {
  if (cams.size() < 3)
    throw InvalidArgument("fit_trajectory: need at least 3 cameras");
  std::vector<Vec3> centers;
  for (const auto &c : cams)
    centers.push_back(c.center());
  const Vec3 mid = centroid(centers);

  Mat3 cov = Mat3::Zero();
  for (const auto &p : centers)
    cov += (p - mid) * (p - mid).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues(); // ascending
  if (!(ev(2) > 0) || ev(1) <= 1e-12 * ev(2))
    throw InvalidArgument("fit_trajectory: camera centers are collinear");
  Vec3 normal = es.eigenvectors().col(0);
  Vec3 up_mean = Vec3::Zero();
  for (const auto &c : cams)
    up_mean -= c.rotation.row(1).transpose();
  if (normal.dot(up_mean) < 0)
    normal = -normal;
  const Vec3 e1 = es.eigenvectors().col(2);
  const Vec3 e2 = normal.cross(e1);

  std::vector<Vec2> planar;
  for (const auto &p : centers)
    planar.emplace_back((p - mid).dot(e1), (p - mid).dot(e2));

  EllipseTrajectory traj;
  auto fit = fit_conic_ellipse(planar);
  if (!fit) {
    fit = fit_circle(planar);
    traj.circle_fallback = true;
  }
  if (!fit)
    throw NumericalError("fit_trajectory: neither ellipse nor circle fit converged");

  traj.center = mid + fit->center.x() * e1 + fit->center.y() * e2;
  traj.semi_a = fit->a;
  traj.semi_b = fit->b;
  traj.plane_normal = normal;
  traj.basis_u = (fit->major_dir.x() * e1 + fit->major_dir.y() * e2).normalized();
  traj.basis_v = normal.cross(traj.basis_u);

  if (target) {
    traj.look_target = *target;
  } else {
    Vec3 mean_fwd = Vec3::Zero();
    for (const auto &c : cams)
      mean_fwd += c.forward();
    mean_fwd /= static_cast<double>(cams.size());
    traj.look_target = mid;
    if (mean_fwd.norm() > 1e-6) {
      // push distance: closest approach of the line mid + s * dir to every optical axis
      const Vec3 dir = mean_fwd.normalized();
      double num = 0, den = 0;
      for (const auto &c : cams) {
        const Vec3 f = c.forward();
        const Mat3 p = Mat3::Identity() - f * f.transpose();
        const Vec3 pd = p * dir;
        num += pd.dot(p * (mid - c.center()));
        den += pd.squaredNorm();
      }
      if (den > 1e-12)
        traj.look_target = mid + std::max(0.0, -num / den) * dir;
    }
  }
  return traj;
}

CameraView look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, const CameraView &intrinsics) {
  const Vec3 fwd = target - eye;
  if (!(fwd.norm() > 1e-12))
    throw InvalidArgument("look_at: eye coincides with target");
  const Vec3 z = fwd.normalized();
  const Vec3 up_perp = up - up.dot(z) * z;
  if (!(up_perp.norm() > 1e-9))
    throw InvalidArgument("look_at: view direction parallel to up vector");
  const Vec3 y = -up_perp.normalized();
  const Vec3 x = y.cross(z);
  CameraView cam = intrinsics;
  cam.rotation.row(0) = x.transpose();
  cam.rotation.row(1) = y.transpose();
  cam.rotation.row(2) = z.transpose();
  cam.translation = -cam.rotation * eye;
  return cam;
}

CameraView sample_pose(const EllipseTrajectory &traj, double theta, const CameraView &reference) {
  const Vec3 eye = traj.point_at(theta);
  const Vec3 ref_up = -reference.rotation.row(1).transpose();
  const Vec3 up = traj.plane_normal.dot(ref_up) >= 0 ? traj.plane_normal : Vec3(-traj.plane_normal);
  return look_at(eye, traj.look_target, up, reference);
}

CameraView interpolate_cameras(const CameraView &a, const CameraView &b, double t) {
  const Eigen::Quaterniond qa(a.rotation), qb(b.rotation);
  const Mat3 r = qa.slerp(t, qb).normalized().toRotationMatrix();
  const Vec3 center = (1 - t) * a.center() + t * b.center();
  CameraView out = a;
  out.rotation = r;
  out.translation = -r * center;
  return out;
}

} // namespace gscenes
