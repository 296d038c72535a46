#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gscenes {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// 3 x B spherical-harmonic coefficients, B in {1, 16}. Fixed max size keeps splats heap-free.
using ShCoeffs = Eigen::Matrix<double, 3, Eigen::Dynamic, 0, 3, 16>;

// ---------------------------------------------------------------------------
// Errors. Every failure surfaced by the library derives from Error so callers
// can map categories to exit codes.

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

class NumericalError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  IoError(const std::string &file, std::size_t offset, const std::string &what)
      : Error(file + " @" + std::to_string(offset) + ": " + what), file_(file), offset_(offset) {}

  const std::string &file() const { return file_; }
  std::size_t offset() const { return offset_; }

private:
  std::string file_;
  std::size_t offset_;
};

// ---------------------------------------------------------------------------
// Dense row-major image planes.

template <typename T> struct Grid {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, int c = 1, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T &at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T &at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  bool same_shape(const Grid &o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

using Image = Grid<double>;
using CountMap = Grid<int>;

// ---------------------------------------------------------------------------
// Scene primitives.

struct GaussianSplat {
  Vec3 position = Vec3::Zero();
  Vec4 rotation = Vec4(1, 0, 0, 0); // (w, x, y, z)
  Vec3 log_scale = Vec3::Zero();
  double logit_opacity = 0.0;
  ShCoeffs sh = ShCoeffs::Zero(3, 1);

  double opacity() const;
  Vec3 scale() const { return log_scale.array().exp(); }
  Mat3 rotation_matrix() const;
};

constexpr double kQuatTolerance = 1e-6;

// Returns q unchanged when already unit within kQuatTolerance, so float32
// payloads survive a read/write cycle bit-exactly.
Vec4 normalize_quat(const Vec4 &q);

GaussianSplat make_splat(const Vec3 &position, const Vec4 &rotation, const Vec3 &log_scale,
                         double logit_opacity, const ShCoeffs &sh);

struct GaussianCloud {
  std::vector<GaussianSplat> splats;
  int sh_degree = 0;

  std::size_t size() const { return splats.size(); }
  bool empty() const { return splats.empty(); }
  int coeff_count() const { return sh_degree == 0 ? 1 : 16; }
  void validate() const;
};

int coeff_count_for_degree(int sh_degree);

struct CameraView {
  int width = 0;
  int height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Mat3 rotation = Mat3::Identity(); // world-to-camera
  Vec3 translation = Vec3::Zero();  // camera frame

  Vec3 center() const { return -rotation.transpose() * translation; }
  Vec3 forward() const { return rotation.row(2).transpose(); }
  Vec3 to_camera(const Vec3 &world) const { return rotation * world + translation; }
  void validate() const;
};

struct RgbdImage {
  Image rgb;   // H x W x 3, [0,1]
  Image depth; // H x W, >= 0, 0 = undefined

  RgbdImage() = default;
  RgbdImage(int w, int h) : rgb(w, h, 3), depth(w, h, 1) {}
  int width() const { return rgb.width; }
  int height() const { return rgb.height; }
  void clamp();
};

struct RenderOutput {
  Image rgb;
  Image depth;
  Image transmittance;
  CountMap n_contrib;
  Image confidence;
  Image accum_alpha;

  RenderOutput() = default;
  RenderOutput(int w, int h)
      : rgb(w, h, 3), depth(w, h), transmittance(w, h, 1, 1.0), n_contrib(w, h), confidence(w, h),
        accum_alpha(w, h) {}
  int width() const { return rgb.width; }
  int height() const { return rgb.height; }
  RgbdImage to_rgbd() const;
};

// ---------------------------------------------------------------------------
// Activations and color.

double activate_opacity(double logit);
double inverse_sigmoid(double p);

constexpr double kShC0 = 0.28209479177387814;

// Real SH basis values up to l = 3 for a unit direction (16 entries).
Eigen::Matrix<double, 16, 1> sh_basis(const Vec3 &dir);
// Jacobian of sh_basis w.r.t. an unnormalized direction treated componentwise.
Eigen::Matrix<double, 16, 3> sh_basis_jacobian(const Vec3 &dir);

Vec3 sh_to_rgb(const ShCoeffs &sh, const Vec3 &view_dir);

Mat3 quat_to_rotmat(const Vec4 &q);
Vec4 rotmat_to_quat(const Mat3 &r);
// d(R(q / |q|)) pulled back to the raw quaternion.
Vec4 quat_rotmat_vjp(const Vec4 &q, const Mat3 &grad_r);

Mat3 skew(const Vec3 &v);
Mat3 so3_exp(const Vec3 &omega);
Vec3 so3_log(const Mat3 &r);
double rotation_angle_between(const Mat3 &a, const Mat3 &b);

} // namespace gscenes
