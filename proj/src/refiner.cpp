#include "gscenes/refiner.hpp"

#include <json.hpp>

#include <csignal>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

namespace gscenes {

void RefinerRequest::validate() const {
  const int w = render.width(), h = render.height();
  if (w <= 0 || h <= 0 || !render.depth.same_shape(Image(w, h)))
    throw InvalidArgument("RefinerRequest: render dimensions invalid");
  if (confidence.width != w || confidence.height != h)
    throw InvalidArgument("RefinerRequest: confidence dimensions differ from the render");
  if (m < 0 || context.size() != static_cast<std::size_t>(m) * kContextDim)
    throw InvalidArgument("RefinerRequest: context must be m x 768");
  if (geo.size() != static_cast<std::size_t>(m + 1) * 78)
    throw InvalidArgument("RefinerRequest: geo must be (m + 1) x 78");
}

RefinerResponse IdentityRefiner::refine(const RefinerRequest &request) { return {request.render}; }

OracleRefiner::OracleRefiner(GaussianCloud reference, RasterConfig cfg)
    : reference_(std::move(reference)), cfg_(cfg) {
  reference_.validate();
  cfg_.validate();
}

RefinerResponse OracleRefiner::refine(const RefinerRequest &request) {
  CameraView cam = request.target;
  cam.width = request.render.width();
  cam.height = request.render.height();
  return {rasterize(reference_, cam, cfg_).to_rgbd()};
}

void write_request(const fs::path &dir, const RefinerRequest &req) {
  req.validate();
  fs::create_directories(dir);
  write_png(dir / protocol::kRender, req.render.rgb);
  write_pfm(dir / protocol::kDepth, req.render.depth);
  write_pfm(dir / protocol::kConfidence, req.confidence);
  write_pfm(dir / protocol::kConfidenceLatent, req.confidence_latent);
  write_f32(dir / protocol::kContext, req.context);
  write_f32(dir / protocol::kGeo, req.geo);
  nlohmann::json meta;
  meta["width"] = req.render.width();
  meta["height"] = req.render.height();
  meta["latent_width"] = req.confidence_latent.width;
  meta["latent_height"] = req.confidence_latent.height;
  meta["M"] = req.m;
  meta["context_dim"] = kContextDim;
  meta["geo_dim"] = 78;
  meta["seed"] = req.seed;
  write_text(dir / protocol::kMeta, meta.dump(2) + "\n");
}

RefinerResponse read_response(const fs::path &dir, int width, int height) {
  const fs::path png = dir / protocol::kRefined, pfm = dir / protocol::kRefinedDepth;
  if (!fs::exists(png))
    throw RefinerError("refiner response missing " + png.string());
  if (!fs::exists(pfm))
    throw RefinerError("refiner response missing " + pfm.string());
  RefinerResponse r;
  r.refined.rgb = read_png(png);
  r.refined.depth = read_pfm(pfm);
  if (r.refined.rgb.width != width || r.refined.rgb.height != height || r.refined.depth.width != width ||
      r.refined.depth.height != height)
    throw RefinerError("refiner response in " + dir.string() + " has dimensions " +
                       std::to_string(r.refined.rgb.width) + "x" + std::to_string(r.refined.rgb.height) +
                       ", expected " + std::to_string(width) + "x" + std::to_string(height));
  return r;
}

SubprocessRefiner::SubprocessRefiner(std::string command, fs::path endpoint, std::chrono::milliseconds timeout)
    : command_(std::move(command)), endpoint_(std::move(endpoint)), timeout_(timeout) {
  if (command_.empty())
    throw InvalidArgument("SubprocessRefiner: empty command");
  if (timeout_.count() <= 0)
    throw InvalidArgument("SubprocessRefiner: timeout must be > 0");
}

fs::path SubprocessRefiner::next_request_dir() {
  fs::create_directories(endpoint_);
  for (;;) {
    const fs::path dir = endpoint_ / ("request_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    if (fs::create_directory(dir))
      return dir;
  }
}

RefinerResponse SubprocessRefiner::refine(const RefinerRequest &request) {
  last_dir_ = next_request_dir();
  write_request(last_dir_, request);

  const std::string script = command_ + " \"$1\"";
  const std::string dir = last_dir_.string();
  const pid_t pid = ::fork();
  if (pid < 0)
    throw RefinerError("fork failed for request " + dir);
  if (pid == 0) {
    ::setpgid(0, 0);
    ::execl("/bin/sh", "sh", "-c", script.c_str(), "sh", dir.c_str(), static_cast<char *>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  int status = 0;
  for (;;) {
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid)
      break;
    if (done < 0)
      throw RefinerError("waitpid failed for request " + dir);
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw RefinerTimeout("refiner timed out after " + std::to_string(timeout_.count()) +
                           " ms; request preserved at " + dir);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (WIFSIGNALED(status))
    throw RefinerError("refiner killed by signal " + std::to_string(WTERMSIG(status)) + "; request preserved at " +
                       dir);
  if (WEXITSTATUS(status) != 0)
    throw RefinerError("refiner exited with status " + std::to_string(WEXITSTATUS(status)) +
                       (WEXITSTATUS(status) == 127 ? " (command not found)" : "") + "; request preserved at " + dir);
  return read_response(last_dir_, request.render.width(), request.render.height());
}

std::unique_ptr<Refiner> make_refiner(const std::string &spec, const fs::path &endpoint, const RasterConfig &cfg,
                                      std::chrono::milliseconds timeout) {
  if (spec == "identity")
    return std::make_unique<IdentityRefiner>();
  if (spec.rfind("oracle:", 0) == 0)
    return std::make_unique<OracleRefiner>(read_ply(spec.substr(7)), cfg);
  if (spec.rfind("exec:", 0) == 0)
    return std::make_unique<SubprocessRefiner>(spec.substr(5), endpoint, timeout);
  throw InvalidArgument("unknown refiner '" + spec + "' (expected identity, oracle:REF.ply or exec:CMD)");
}

} // namespace gscenes
