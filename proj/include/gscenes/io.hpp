#pragma once

#include "gscenes/core.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gscenes {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// PLY (binary_little_endian only)

// Vertex properties in file order, widened to double. Float32 values survive
// the widening and a later narrowing bit-exactly.
struct PlyVertices {
  std::size_t count = 0;
  std::vector<std::string> names;
  std::map<std::string, std::vector<double>> columns;

  bool has(const std::string &name) const { return columns.count(name) != 0; }
  // Throws IoError naming the property when absent.
  const std::vector<double> &column(const std::string &name) const;
  std::string path;
};

PlyVertices read_ply_vertices(const fs::path &path);

// Splat layout: x y z nx ny nz f_dc_0..2 [f_rest_0..44] opacity scale_0..2 rot_0..3.
// f_rest_{c*15+j} holds channel c of coefficient j+1. Opacity is the logit,
// scales are logs, rot is (w, x, y, z) as stored.
GaussianCloud read_ply(const fs::path &path);
void write_ply(const fs::path &path, const GaussianCloud &cloud);

struct ColoredPoints {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors; // [0,1]
};

// x y z plus red/green/blue (uchar 0..255 or float 0..1). Missing colors read as 0.5 gray.
ColoredPoints read_points(const fs::path &path);
void write_points(const fs::path &path, const ColoredPoints &points);

// ---------------------------------------------------------------------------
// PFM (grayscale "Pf", little-endian scale -1.0, rows stored bottom-up)

Image read_pfm(const fs::path &path);
void write_pfm(const fs::path &path, const Image &map);
std::string pfm_header(int width, int height);

// ---------------------------------------------------------------------------
// Raw little-endian float32 tensors, no header.

std::vector<float> read_f32(const fs::path &path);
void write_f32(const fs::path &path, const std::vector<float> &values);

// ---------------------------------------------------------------------------
// 8-bit PNG

// Gray, gray+alpha, RGB and RGBA inputs at 8 or 16 bits are all reduced to 3 channels in [0,1].
Image read_png(const fs::path &path);
// Quantizes round(255 * clamp(v, 0, 1)); accepts 1 or 3 channel images.
void write_png(const fs::path &path, const Image &img);

// ---------------------------------------------------------------------------
// Cameras

inline constexpr const char *kConventionForwardPlusZ = "forward_+z";
inline constexpr const char *kConventionForwardMinusZ = "forward_-z";

struct CameraRecord {
  CameraView view;
  std::string image; // optional image file name, relative to the images directory
};

// {"cameras": [{"width", "height", "fx", "fy", "cx", "cy", "rotation": [9, row-major
// world-to-camera], "translation": [3], "convention": "forward_+z", "image"?}]}
std::vector<CameraRecord> read_camera_records(const fs::path &path);
std::vector<CameraView> read_cameras(const fs::path &path);
void write_cameras(const fs::path &path, const std::vector<CameraView> &cams);
void write_camera_records(const fs::path &path, const std::vector<CameraRecord> &cams);

// Orthonormality error above which a rotation is rejected instead of repaired.
constexpr double kRotationRejectTolerance = 1e-3;
// Below this error a rotation is kept verbatim.
constexpr double kRotationExactTolerance = 1e-9;

// Validates and (if needed) re-orthonormalizes; throws InvalidArgument on rejection.
Mat3 sanitize_rotation(const Mat3 &r);

// ---------------------------------------------------------------------------
// RGBD pairs: <stem>.png + <stem>_depth.pfm (depth optional on read: zeros).

RgbdImage read_rgbd(const fs::path &png, const fs::path &depth_pfm);
void write_rgbd(const fs::path &png, const fs::path &depth_pfm, const RgbdImage &img);

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> read_bytes(const fs::path &path);
void write_bytes(const fs::path &path, const void *data, std::size_t size);
void write_text(const fs::path &path, const std::string &text);
std::string read_text(const fs::path &path);

// 64-bit FNV-1a of a file's bytes, hex encoded.
std::string hash_file(const fs::path &path);

} // namespace gscenes
