#pragma once

#include "gscenes/core.hpp"
#include "gscenes/io.hpp"
#include "gscenes/render.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gscenes {

constexpr int kLatentFactor = 8;

// 8x8 average pooling to ceil(H/8) x ceil(W/8); partial blocks are padded by
// replicating the last row/column.
Image downsample_confidence(const Image &conf, int factor = kLatentFactor);

// Rotation about a uniformly random axis by exactly rot_deg, applied about the
// camera center, then a center shift of trans_frac * extent in a uniformly
// random direction.
CameraView perturb_camera(const CameraView &cam, double rot_deg, double trans_frac, double extent,
                          std::uint64_t seed);

enum class TargetKind { kHeldOut, kInterpolated, kPerturbed };
std::string to_string(TargetKind kind);

struct DatasetSample {
  RgbdImage clean;
  RgbdImage artifact;
  Image confidence;
  Image confidence_latent;
  std::vector<float> context; // m x 768
  std::vector<float> geo;     // (m + 1) x 78
  std::string scene_id;
  int m = 0;
  CameraView target;
  TargetKind kind = TargetKind::kHeldOut;
};

struct DatasetOptions {
  std::string scene_id = "scene";
  double perturb_rot_deg = 5.0;
  double perturb_trans_frac = 0.05;
  // when non-empty, m x 768 features copied into every sample; zeros otherwise
  std::vector<float> context;
  RasterConfig raster;
};

// The first m cameras are the sparse model's source views; the rest are held out.
// Targets cycle over held-out views, interpolations between consecutive sources
// and perturbations of held-out (or source) views.
std::vector<DatasetSample> make_samples(const GaussianCloud &dense, const GaussianCloud &sparse,
                                        const std::vector<CameraView> &all_cams, int m, int per_scene,
                                        std::uint64_t seed, const DatasetOptions &opts = {});

// Writes the refiner-request file set plus clean.png / clean_depth.pfm.
void write_sample(const fs::path &dir, const DatasetSample &sample, std::uint64_t seed);

// One directory per sample under `root`, plus root/manifest.json.
void write_dataset(const fs::path &root, const std::vector<DatasetSample> &samples, std::uint64_t seed);

} // namespace gscenes
