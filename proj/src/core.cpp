#include "gscenes/core.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace gscenes {

namespace {
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                           0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};
} // namespace

double activate_opacity(double logit) {
  if (!std::isfinite(logit))
    throw InvalidArgument("activate_opacity: non-finite logit");
  if (logit >= 0)
    return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

double inverse_sigmoid(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidArgument("inverse_sigmoid: argument outside (0,1)");
  return std::log(p / (1.0 - p));
}

double GaussianSplat::opacity() const { return activate_opacity(logit_opacity); }

Mat3 GaussianSplat::rotation_matrix() const { return quat_to_rotmat(rotation); }

Vec4 normalize_quat(const Vec4 &q) {
  const double n = q.norm();
  if (!(n > 0) || !std::isfinite(n))
    throw InvalidArgument("quaternion has zero or non-finite norm");
  if (std::abs(n - 1.0) <= kQuatTolerance)
    return q;
  return q / n;
}

GaussianSplat make_splat(const Vec3 &position, const Vec4 &rotation, const Vec3 &log_scale,
                         double logit_opacity, const ShCoeffs &sh) {
  if (sh.cols() != 1 && sh.cols() != 16)
    throw InvalidArgument("make_splat: SH coefficient count must be 1 or 16");
  GaussianSplat s;
  s.position = position;
  s.rotation = normalize_quat(rotation);
  s.log_scale = log_scale;
  s.logit_opacity = logit_opacity;
  s.sh = sh;
  return s;
}

int coeff_count_for_degree(int sh_degree) {
  if (sh_degree == 0)
    return 1;
  if (sh_degree == 3)
    return 16;
  throw InvalidArgument("sh_degree must be 0 or 3");
}

void GaussianCloud::validate() const {
  const int b = coeff_count_for_degree(sh_degree);
  for (std::size_t i = 0; i < splats.size(); ++i) {
    if (splats[i].sh.cols() != b)
      throw InvalidArgument("splat " + std::to_string(i) + " has " +
                            std::to_string(splats[i].sh.cols()) + " SH coefficients, expected " +
                            std::to_string(b));
  }
}

void CameraView::validate() const {
  if (width <= 0 || height <= 0)
    throw InvalidArgument("camera: non-positive image size");
  if (!(fx > 0) || !(fy > 0))
    throw InvalidArgument("camera: focal lengths must be positive");
  if (!(cx > 0 && cx < width && cy > 0 && cy < height))
    throw InvalidArgument("camera: principal point outside image");
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho < 1e-6) || std::abs(rotation.determinant() - 1.0) > 1e-6)
    throw InvalidArgument("camera: rotation is not a proper rotation");
  if (!translation.allFinite())
    throw InvalidArgument("camera: non-finite translation");
}

void RgbdImage::clamp() {
  for (auto &v : rgb.data)
    v = std::clamp(v, 0.0, 1.0);
  for (auto &v : depth.data)
    v = std::max(v, 0.0);
}

RgbdImage RenderOutput::to_rgbd() const {
  RgbdImage out;
  out.rgb = rgb;
  out.depth = depth;
  out.clamp();
  return out;
}

Eigen::Matrix<double, 16, 1> sh_basis(const Vec3 &d) {
  const double x = d.x(), y = d.y(), z = d.z();
  const double xx = x * x, yy = y * y, zz = z * z;
  Eigen::Matrix<double, 16, 1> b;
  b(0) = kShC0;
  b(1) = -kC1 * y;
  b(2) = kC1 * z;
  b(3) = -kC1 * x;
  b(4) = kC2[0] * x * y;
  b(5) = kC2[1] * y * z;
  b(6) = kC2[2] * (2 * zz - xx - yy);
  b(7) = kC2[3] * x * z;
  b(8) = kC2[4] * (xx - yy);
  b(9) = kC3[0] * y * (3 * xx - yy);
  b(10) = kC3[1] * x * y * z;
  b(11) = kC3[2] * y * (4 * zz - xx - yy);
  b(12) = kC3[3] * z * (2 * zz - 3 * xx - 3 * yy);
  b(13) = kC3[4] * x * (4 * zz - xx - yy);
  b(14) = kC3[5] * z * (xx - yy);
  b(15) = kC3[6] * x * (xx - 3 * yy);
  return b;
}

Eigen::Matrix<double, 16, 3> sh_basis_jacobian(const Vec3 &d) {
  const double x = d.x(), y = d.y(), z = d.z();
  const double xx = x * x, yy = y * y, zz = z * z;
  Eigen::Matrix<double, 16, 3> j = Eigen::Matrix<double, 16, 3>::Zero();
  j(1, 1) = -kC1;
  j(2, 2) = kC1;
  j(3, 0) = -kC1;
  j.row(4) << kC2[0] * y, kC2[0] * x, 0;
  j.row(5) << 0, kC2[1] * z, kC2[1] * y;
  j.row(6) << -2 * kC2[2] * x, -2 * kC2[2] * y, 4 * kC2[2] * z;
  j.row(7) << kC2[3] * z, 0, kC2[3] * x;
  j.row(8) << 2 * kC2[4] * x, -2 * kC2[4] * y, 0;
  j.row(9) << kC3[0] * 6 * x * y, kC3[0] * (3 * xx - 3 * yy), 0;
  j.row(10) << kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y;
  j.row(11) << kC3[2] * (-2 * x * y), kC3[2] * (4 * zz - xx - 3 * yy), kC3[2] * 8 * y * z;
  j.row(12) << kC3[3] * (-6 * x * z), kC3[3] * (-6 * y * z), kC3[3] * (6 * zz - 3 * xx - 3 * yy);
  j.row(13) << kC3[4] * (4 * zz - 3 * xx - yy), kC3[4] * (-2 * x * y), kC3[4] * 8 * x * z;
  j.row(14) << kC3[5] * 2 * x * z, -kC3[5] * 2 * y * z, kC3[5] * (xx - yy);
  j.row(15) << kC3[6] * (3 * xx - 3 * yy), kC3[6] * (-6 * x * y), 0;
  return j;
}

Vec3 sh_to_rgb(const ShCoeffs &sh, const Vec3 &view_dir) {
  Vec3 c;
  if (sh.cols() == 1) {
    c = sh.col(0) * kShC0;
  } else if (sh.cols() == 16) {
    c = sh * sh_basis(view_dir);
  } else {
    throw InvalidArgument("sh_to_rgb: coefficient count must be 1 or 16");
  }
  return (c.array() + 0.5).cwiseMax(0.0).cwiseMin(1.0);
}

Mat3 quat_to_rotmat(const Vec4 &q_raw) {
  const Vec4 q = q_raw / q_raw.norm();
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Vec4 rotmat_to_quat(const Mat3 &r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  Vec4 out(q.w(), q.x(), q.y(), q.z());
  if (out(0) < 0)
    out = -out;
  return out;
}

Vec4 quat_rotmat_vjp(const Vec4 &q_raw, const Mat3 &g) {
  const double n = q_raw.norm();
  const Vec4 q = q_raw / n;
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Vec4 gq;
  gq(0) = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  gq(1) = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) +
               z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
  gq(2) = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
               w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
  gq(3) = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
               y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  // project through q / |q|
  return (gq - q * q.dot(gq)) / n;
}

Mat3 skew(const Vec3 &v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 so3_exp(const Vec3 &omega) {
  const double theta = omega.norm();
  if (theta < 1e-12)
    return Mat3::Identity() + skew(omega);
  return Eigen::AngleAxisd(theta, omega / theta).toRotationMatrix();
}

Vec3 so3_log(const Mat3 &r) {
  Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

double rotation_angle_between(const Mat3 &a, const Mat3 &b) {
  const Mat3 rel = a * b.transpose();
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  // acos loses precision near 0; use atan2 of the skew part instead
  const Vec3 s(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * s.norm(), c);
}

} // namespace gscenes
