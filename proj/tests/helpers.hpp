#pragma once

#include "gscenes/camera_geom.hpp"
#include "gscenes/core.hpp"
#include "gscenes/parallel.hpp"
#include "gscenes/render.hpp"
#include "gscenes/synthetic.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing_util {

using namespace gscenes;

// Camera 4 units out on +x looking at the origin.
inline CameraView front_camera(int w, int h, double fov = 60.0) {
  return look_at(Vec3(4, 0.3, 0.5), Vec3::Zero(), Vec3::UnitZ(), make_intrinsics(w, h, fov));
}

// Splat at camera-frame (0, 0, z) of `cam` with isotropic std `sigma`.
inline GaussianSplat on_axis_splat(const CameraView &cam, double z, double sigma, double opacity, const Vec3 &rgb) {
  GaussianSplat s;
  s.position = cam.rotation.transpose() * (Vec3(0, 0, z) - cam.translation);
  s.log_scale = Vec3::Constant(std::log(sigma));
  s.logit_opacity = inverse_sigmoid(opacity);
  s.sh = ShCoeffs::Zero(3, 1);
  s.sh.col(0) = (rgb.array() - 0.5).matrix() / kShC0;
  return s;
}

// Axis-aligned camera at the origin looking down +z.
inline CameraView origin_camera(int w, int h, double f) {
  CameraView c;
  c.width = w;
  c.height = h;
  c.fx = c.fy = f;
  c.cx = 0.5 * w - 0.5;
  c.cy = 0.5 * h - 0.5;
  return c;
}

class TempDir {
public:
  explicit TempDir(const std::string &tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("gscenes_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

} // namespace testing_util
