#include "gscenes/synthetic.hpp"

#include "gscenes/camera_geom.hpp"
#include "gscenes/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gscenes {

namespace {

Vec4 random_quat(Rng &rng) {
  std::normal_distribution<double> n01;
  Vec4 q;
  do
    q = Vec4(n01(rng), n01(rng), n01(rng), n01(rng));
  while (q.norm() < 1e-6);
  return q.normalized();
}

ShCoeffs color_to_sh(const Vec3 &rgb, int coeffs) {
  ShCoeffs sh = ShCoeffs::Zero(3, coeffs);
  sh.col(0) = (rgb.array() - 0.5).matrix() / kShC0;
  return sh;
}

} // namespace

GaussianCloud random_cloud(int n, std::uint64_t seed, const RandomCloudOptions &o) {
  if (n < 0)
    throw InvalidArgument("random_cloud: n must be >= 0");
  GaussianCloud cloud;
  cloud.sh_degree = o.sh_degree;
  const int coeffs = coeff_count_for_degree(o.sh_degree);
  Rng rng = make_rng(seed, "random_cloud");
  std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
  std::normal_distribution<double> n01;
  for (int i = 0; i < n; ++i) {
    GaussianSplat s;
    s.position = o.center + o.half_extent * Vec3(u(rng), u(rng), u(rng));
    s.rotation = random_quat(rng);
    for (int k = 0; k < 3; ++k)
      s.log_scale(k) = std::log(o.min_scale + (o.max_scale - o.min_scale) * u01(rng));
    s.logit_opacity = inverse_sigmoid(o.min_opacity + (o.max_opacity - o.min_opacity) * u01(rng));
    s.sh = color_to_sh(Vec3(0.2 + 0.6 * u01(rng), 0.2 + 0.6 * u01(rng), 0.2 + 0.6 * u01(rng)), coeffs);
    for (int c = 0; c < 3; ++c)
      for (int j = 1; j < coeffs; ++j)
        s.sh(c, j) = o.sh_rest_sigma * n01(rng);
    cloud.splats.push_back(s);
  }
  return cloud;
}

CameraView make_intrinsics(int width, int height, double fov_x_deg) {
  if (width <= 0 || height <= 0 || !(fov_x_deg > 0 && fov_x_deg < 180))
    throw InvalidArgument("make_intrinsics: invalid size or field of view");
  CameraView c;
  c.width = width;
  c.height = height;
  c.fx = c.fy = 0.5 * width / std::tan(0.5 * fov_x_deg * M_PI / 180.0);
  c.cx = 0.5 * width - 0.5;
  c.cy = 0.5 * height - 0.5;
  return c;
}

CameraView ring_camera(double angle, double radius, double height, const Vec3 &target, const CameraView &intr) {
  const Vec3 eye(radius * std::cos(angle), radius * std::sin(angle), height);
  return look_at(eye + Vec3(target.x(), target.y(), 0), target, Vec3::UnitZ(), intr);
}

std::vector<CameraView> ring_cameras(int n, double radius, double height, const Vec3 &target, int width,
                                     int px_height, double fov_x_deg, double phase) {
  const CameraView intr = make_intrinsics(width, px_height, fov_x_deg);
  std::vector<CameraView> cams;
  for (int i = 0; i < n; ++i)
    cams.push_back(ring_camera(phase + 2 * M_PI * i / n, radius, height, target, intr));
  return cams;
}

GaussianCloud textured_scene(int n, std::uint64_t seed) {
  if (n < 10)
    throw InvalidArgument("textured_scene: need at least 10 splats");
  GaussianCloud cloud;
  Rng rng = make_rng(seed, "textured_scene");
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> n01;

  const int n_ground = n / 2;
  const int n_blobs = 5;
  const int per_blob = (n - n_ground) / n_blobs;

  // ground disc of radius 1.6 with a two-color checker
  for (int i = 0; i < n_ground; ++i) {
    const double r = 1.6 * std::sqrt(u01(rng)), a = 2 * M_PI * u01(rng);
    const Vec3 p(r * std::cos(a), r * std::sin(a), -0.5);
    const bool checker = (static_cast<int>(std::floor(p.x() / 0.4)) + static_cast<int>(std::floor(p.y() / 0.4))) & 1;
    const Vec3 rgb = checker ? Vec3(0.85, 0.8, 0.65) : Vec3(0.25, 0.35, 0.3);
    GaussianSplat s;
    s.position = p;
    s.rotation = Vec4(1, 0, 0, 0);
    s.log_scale = Vec3(std::log(0.07), std::log(0.07), std::log(0.01));
    s.logit_opacity = inverse_sigmoid(0.9);
    s.sh = color_to_sh(rgb, 1);
    cloud.splats.push_back(s);
  }

  // blobs: anisotropic clusters with a vertical color gradient
  for (int b = 0; b < n_blobs; ++b) {
    const double a = 2 * M_PI * (b + 0.3 * u01(rng)) / n_blobs;
    const double r = 0.4 + 0.6 * u01(rng);
    const Vec3 c(r * std::cos(a), r * std::sin(a), -0.5 + 0.25 + 0.3 * u01(rng));
    const Vec3 radii(0.15 + 0.15 * u01(rng), 0.15 + 0.15 * u01(rng), 0.2 + 0.3 * u01(rng));
    const Vec3 base(0.2 + 0.7 * u01(rng), 0.2 + 0.7 * u01(rng), 0.2 + 0.7 * u01(rng));
    for (int i = 0; i < per_blob; ++i) {
      Vec3 d(n01(rng), n01(rng), n01(rng));
      d = d.normalized() * std::cbrt(u01(rng));
      const Vec3 p = c + d.cwiseProduct(radii);
      const double t = std::clamp(0.5 + d.z(), 0.0, 1.0);
      const Vec3 rgb = (base * (0.6 + 0.4 * t) + Vec3(0.1, 0.1, 0.1) * std::sin(12 * d.x())).cwiseMax(0.05).cwiseMin(0.95);
      GaussianSplat s;
      s.position = p;
      s.rotation = random_quat(rng);
      s.log_scale = Vec3::Constant(std::log(0.045));
      s.logit_opacity = inverse_sigmoid(0.8);
      s.sh = color_to_sh(rgb, 1);
      cloud.splats.push_back(s);
    }
  }
  return cloud;
}

ColoredPoints visible_points(const GaussianCloud &dense, const std::vector<CameraView> &cams, int max_points,
                             std::uint64_t seed, const RasterConfig &cfg) {
  std::vector<char> seen(dense.size(), 0);
  std::vector<Vec3> color(dense.size(), Vec3::Zero());
  for (const auto &cam : cams) {
    const RenderOutput r = rasterize(dense, cam, cfg);
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (seen[i])
        continue;
      const Vec3 pc = cam.to_camera(dense.splats[i].position);
      if (pc.z() <= cfg.near_plane)
        continue;
      const int x = static_cast<int>(std::lround(cam.fx * pc.x() / pc.z() + cam.cx));
      const int y = static_cast<int>(std::lround(cam.fy * pc.y() / pc.z() + cam.cy));
      if (x < 0 || y < 0 || x >= cam.width || y >= cam.height)
        continue;
      if (r.accum_alpha.at(x, y) < 0.5)
        continue;
      // unoccluded: the splat sits at (or in front of) the composited surface
      if (pc.z() > r.depth.at(x, y) + 0.05 + 0.02 * pc.z())
        continue;
      seen[i] = 1;
      color[i] = Vec3(r.rgb.at(x, y, 0), r.rgb.at(x, y, 1), r.rgb.at(x, y, 2));
    }
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < dense.size(); ++i)
    if (seen[i])
      idx.push_back(i);
  Rng rng = make_rng(seed, "visible_points");
  std::shuffle(idx.begin(), idx.end(), rng);
  if (max_points >= 0 && idx.size() > static_cast<std::size_t>(max_points))
    idx.resize(max_points);
  std::sort(idx.begin(), idx.end());
  ColoredPoints pts;
  for (const auto i : idx) {
    pts.positions.push_back(dense.splats[i].position);
    pts.colors.push_back(color[i]);
  }
  return pts;
}

} // namespace gscenes
