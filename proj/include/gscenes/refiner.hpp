#pragma once

#include "gscenes/core.hpp"
#include "gscenes/io.hpp"
#include "gscenes/render.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace gscenes {

constexpr int kContextDim = 768;

struct RefinerRequest {
  RgbdImage render;            // artifact render at the target camera
  Image confidence;            // full resolution
  Image confidence_latent;     // ceil(H/8) x ceil(W/8)
  std::vector<float> context;  // m x kContextDim, row-major, opaque
  std::vector<float> geo;      // (m + 1) x 78, sources then target
  int m = 0;
  std::uint64_t seed = 0;
  CameraView target;

  void validate() const;
};

struct RefinerResponse {
  RgbdImage refined;
};

class RefinerError : public Error {
public:
  using Error::Error;
};

class RefinerTimeout : public RefinerError {
public:
  using RefinerError::RefinerError;
};

class Refiner {
public:
  virtual ~Refiner() = default;
  virtual RefinerResponse refine(const RefinerRequest &request) = 0;
  virtual std::string name() const = 0;
};

// Returns the artifact render unchanged.
class IdentityRefiner final : public Refiner {
public:
  RefinerResponse refine(const RefinerRequest &request) override;
  std::string name() const override { return "identity"; }
};

// Renders a hidden reference cloud at the request's target camera.
class OracleRefiner final : public Refiner {
public:
  OracleRefiner(GaussianCloud reference, RasterConfig cfg = {});
  RefinerResponse refine(const RefinerRequest &request) override;
  std::string name() const override { return "oracle"; }

private:
  GaussianCloud reference_;
  RasterConfig cfg_;
};

// Files written into each request directory and read back from it.
namespace protocol {
inline constexpr const char *kRender = "render.png";
inline constexpr const char *kDepth = "depth.pfm";
inline constexpr const char *kConfidence = "conf.pfm";
inline constexpr const char *kConfidenceLatent = "conf_latent.pfm";
inline constexpr const char *kContext = "context.f32";
inline constexpr const char *kGeo = "geo.f32";
inline constexpr const char *kMeta = "meta.json";
inline constexpr const char *kRefined = "refined.png";
inline constexpr const char *kRefinedDepth = "refined_depth.pfm";
} // namespace protocol

void write_request(const fs::path &dir, const RefinerRequest &request);
// Throws RefinerError on missing files or dimensions that differ from (width, height).
RefinerResponse read_response(const fs::path &dir, int width, int height);

// Runs `/bin/sh -c '<command> "$1"' sh <request dir>` per request. The request
// directory is left in place after every call, successful or not.
class SubprocessRefiner final : public Refiner {
public:
  SubprocessRefiner(std::string command, fs::path endpoint,
                    std::chrono::milliseconds timeout = std::chrono::seconds(300));
  RefinerResponse refine(const RefinerRequest &request) override;
  std::string name() const override { return "exec"; }
  const fs::path &last_request_dir() const { return last_dir_; }

private:
  fs::path next_request_dir();

  std::string command_;
  fs::path endpoint_;
  std::chrono::milliseconds timeout_;
  fs::path last_dir_;
  std::uint64_t counter_ = 0;
};

// "identity", "oracle:<reference.ply>", or "exec:<command>".
std::unique_ptr<Refiner> make_refiner(const std::string &spec, const fs::path &endpoint,
                                      const RasterConfig &cfg = {},
                                      std::chrono::milliseconds timeout = std::chrono::seconds(300));

} // namespace gscenes
