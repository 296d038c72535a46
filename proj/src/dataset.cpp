#include "gscenes/dataset.hpp"

#include "gscenes/camera_geom.hpp"
#include "gscenes/parallel.hpp"
#include "gscenes/refiner.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace gscenes {

Image downsample_confidence(const Image &conf, int factor) {
  if (factor < 1)
    throw InvalidArgument("downsample_confidence: factor must be >= 1");
  if (conf.channels != 1)
    throw InvalidArgument("downsample_confidence: single-channel map required");
  if (conf.width < factor || conf.height < factor)
    throw InvalidArgument("downsample_confidence: map smaller than one " + std::to_string(factor) + "x" +
                          std::to_string(factor) + " block");
  const int ow = (conf.width + factor - 1) / factor, oh = (conf.height + factor - 1) / factor;
  Image out(ow, oh);
  for (int by = 0; by < oh; ++by)
    for (int bx = 0; bx < ow; ++bx) {
      double s = 0;
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) {
          const int x = std::min(bx * factor + dx, conf.width - 1);
          const int y = std::min(by * factor + dy, conf.height - 1);
          s += conf.at(x, y);
        }
      out.at(bx, by) = s / (factor * factor);
    }
  return out;
}

CameraView perturb_camera(const CameraView &cam, double rot_deg, double trans_frac, double extent,
                          std::uint64_t seed) {
  if (rot_deg < 0 || trans_frac < 0 || extent < 0)
    throw InvalidArgument("perturb_camera: magnitudes must be >= 0");
  if (rot_deg == 0 && trans_frac * extent == 0)
    return cam;
  Rng rng = make_rng(seed, "perturb_camera");
  std::normal_distribution<double> n01;
  auto unit = [&] {
    Vec3 v;
    do
      v = Vec3(n01(rng), n01(rng), n01(rng));
    while (v.norm() < 1e-9);
    return Vec3(v.normalized());
  };
  const Vec3 axis = unit();
  const Vec3 dir = unit();
  const Vec3 center = cam.center() + trans_frac * extent * dir;
  CameraView out = cam;
  out.rotation = so3_exp(axis * (rot_deg * M_PI / 180.0)) * cam.rotation;
  out.translation = -out.rotation * center;
  return out;
}

std::string to_string(TargetKind kind) {
  switch (kind) {
  case TargetKind::kHeldOut:
    return "held_out";
  case TargetKind::kInterpolated:
    return "interpolated";
  case TargetKind::kPerturbed:
    return "perturbed";
  }
  return "unknown";
}

std::vector<DatasetSample> make_samples(const GaussianCloud &dense, const GaussianCloud &sparse,
                                        const std::vector<CameraView> &all_cams, int m, int per_scene,
                                        std::uint64_t seed, const DatasetOptions &opts) {
  if (m < 1)
    throw InvalidArgument("make_samples: M must be >= 1");
  if (per_scene < 0)
    throw InvalidArgument("make_samples: per_scene must be >= 0");
  if (static_cast<int>(all_cams.size()) < m)
    throw InvalidArgument("make_samples: insufficient cameras (" + std::to_string(all_cams.size()) + ") for M = " +
                          std::to_string(m));
  if (dense.empty())
    throw InvalidArgument("make_samples: dense cloud is empty");
  if (m != 3 && m != 6 && m != 9 && m != 18)
    std::cerr << "warning: M = " << m << " is outside the usual {3, 6, 9, 18}\n";
  if (!opts.context.empty() && opts.context.size() != static_cast<std::size_t>(m) * kContextDim)
    throw InvalidArgument("make_samples: context must be M x 768");

  const std::vector<CameraView> sources(all_cams.begin(), all_cams.begin() + m);
  const std::vector<CameraView> held(all_cams.begin() + m, all_cams.end());
  const double extent = scene_extent(all_cams);
  const auto source_geo = embed_cameras(sources);

  // plan targets serially so the draw order is independent of the thread count
  Rng rng = make_rng(seed, "make_samples/targets");
  std::uniform_real_distribution<double> u01;
  std::vector<std::pair<CameraView, TargetKind>> targets;
  for (int i = 0; i < per_scene; ++i) {
    TargetKind kind = static_cast<TargetKind>(i % 3);
    if (kind == TargetKind::kHeldOut && held.empty())
      kind = TargetKind::kInterpolated;
    if (kind == TargetKind::kInterpolated && m < 2)
      kind = TargetKind::kPerturbed;
    CameraView cam;
    switch (kind) {
    case TargetKind::kHeldOut:
      cam = held[(i / 3) % held.size()];
      break;
    case TargetKind::kInterpolated: {
      const std::size_t a = static_cast<std::size_t>(u01(rng) * (m - 1)) % (m - 1);
      cam = interpolate_cameras(sources[a], sources[a + 1], 0.25 + 0.5 * u01(rng));
      break;
    }
    case TargetKind::kPerturbed: {
      const auto &pool = held.empty() ? sources : held;
      const CameraView &base = pool[static_cast<std::size_t>(u01(rng) * pool.size()) % pool.size()];
      cam = perturb_camera(base, opts.perturb_rot_deg, opts.perturb_trans_frac, extent,
                           split_seed(seed, "perturb/" + std::to_string(i)));
      break;
    }
    }
    targets.emplace_back(cam, kind);
  }

  std::vector<DatasetSample> out(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto &[cam, kind] = targets[i];
    DatasetSample &s = out[i];
    s.scene_id = opts.scene_id;
    s.m = m;
    s.target = cam;
    s.kind = kind;
    s.clean = rasterize(dense, cam, opts.raster).to_rgbd();
    RenderOutput art = rasterize(sparse, cam, opts.raster);
    s.artifact = art.to_rgbd();
    s.confidence = art.confidence;
    s.confidence_latent = downsample_confidence(s.confidence);
    s.context = opts.context.empty() ? std::vector<float>(static_cast<std::size_t>(m) * kContextDim, 0.0f)
                                     : opts.context;
    s.geo = source_geo;
    const auto tgt = embed_camera(cam);
    s.geo.insert(s.geo.end(), tgt.values.begin(), tgt.values.end());
  }
  return out;
}

void write_sample(const fs::path &dir, const DatasetSample &s, std::uint64_t seed) {
  RefinerRequest req;
  req.render = s.artifact;
  req.confidence = s.confidence;
  req.confidence_latent = s.confidence_latent;
  req.context = s.context;
  req.geo = s.geo;
  req.m = s.m;
  req.seed = seed;
  req.target = s.target;
  write_request(dir, req);
  write_png(dir / "clean.png", s.clean.rgb);
  write_pfm(dir / "clean_depth.pfm", s.clean.depth);
  write_cameras(dir / "target_camera.json", {s.target});
}

void write_dataset(const fs::path &root, const std::vector<DatasetSample> &samples, std::uint64_t seed) {
  fs::create_directories(root);
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::ostringstream name;
    name << "sample_" << std::setw(5) << std::setfill('0') << i;
    write_sample(root / name.str(), samples[i], split_seed(seed, name.str()));
    list.push_back({{"dir", name.str()},
                    {"scene_id", samples[i].scene_id},
                    {"M", samples[i].m},
                    {"kind", to_string(samples[i].kind)}});
  }
  nlohmann::json doc;
  doc["samples"] = list;
  doc["seed"] = seed;
  write_text(root / "manifest.json", doc.dump(2) + "\n");
}

} // namespace gscenes
