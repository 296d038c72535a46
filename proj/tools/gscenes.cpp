#include "gscenes/camera_geom.hpp"
#include "gscenes/dataset.hpp"
#include "gscenes/grad.hpp"
#include "gscenes/io.hpp"
#include "gscenes/losses.hpp"
#include "gscenes/optimize.hpp"
#include "gscenes/parallel.hpp"
#include "gscenes/refiner.hpp"
#include "gscenes/render.hpp"
#include "gscenes/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace gscenes;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

// One JSONL record per invocation, appended when the process finishes.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  json config = json::object();
  json inputs = json::object();
  json timings = json::object();
  json metrics = json::object();

  void input(const fs::path &p) { inputs[p.string()] = hash_file(p); }
  void write(const fs::path &path, int exit_code, const std::string &error) const {
    json rec;
    rec["command"] = command;
    rec["argv"] = argv;
    rec["seed"] = seed;
    rec["config"] = config;
    rec["inputs"] = inputs;
    rec["timings_s"] = timings;
    rec["metrics"] = metrics;
    rec["exit_code"] = exit_code;
    if (!error.empty())
      rec["error"] = error;
    rec["unix_time"] = static_cast<long long>(std::time(nullptr));
    std::FILE *f = std::fopen(path.string().c_str(), "a");
    if (!f) {
      std::cerr << "warning: cannot append run manifest to " << path << "\n";
      return;
    }
    const std::string line = rec.dump() + "\n";
    std::fwrite(line.data(), 1, line.size(), f);
    std::fclose(f);
  }
};

class Phase {
public:
  Phase(RunManifest &m, std::string name) : m_(m), name_(std::move(name)), t0_(std::chrono::steady_clock::now()) {}
  ~Phase() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    m_.timings[name_] = m_.timings.value(name_, 0.0) + s;
  }

private:
  RunManifest &m_;
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
};

struct Common {
  int threads = 0;
  std::uint64_t seed = 0;
  bool naive = false;
  std::vector<double> background{0.0, 0.0, 0.0};
  std::string manifest;

  RasterConfig raster() const {
    RasterConfig cfg;
    cfg.mode = naive ? RasterMode::kNaive : RasterMode::kTiled;
    cfg.background = Vec3(background[0], background[1], background[2]);
    return cfg;
  }
};

void add_common(CLI::App *sub, Common &c, bool with_raster) {
  sub->add_option("--threads", c.threads, "Worker threads (default: GSCENES_THREADS, else all cores)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", c.seed, "Root seed for every random stream");
  sub->add_option("--manifest", c.manifest,
                  "Append the run record to this JSONL file (default: GSCENES_MANIFEST, else gscenes_runs.jsonl)");
  if (with_raster) {
    sub->add_flag("--naive", c.naive, "Use the per-pixel reference rasterizer (bit-deterministic)");
    sub->add_option("--background", c.background, "Background color r g b in [0,1]")->expected(3);
  }
}

std::string view_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03zu", i);
  return buf;
}

fs::path depth_path_for(const fs::path &png) {
  return png.parent_path() / (png.stem().string() + "_depth.pfm");
}

struct Views {
  std::vector<CameraView> cams;
  std::vector<RgbdImage> images;
  std::vector<std::string> names;
};

// Images named by each record's "image" field, else view_NNN.png; depth from <stem>_depth.pfm when present.
Views load_views(const fs::path &cameras, const fs::path &dir, RunManifest &m) {
  m.input(cameras);
  Views v;
  const auto records = read_camera_records(cameras);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string name = records[i].image.empty() ? view_name(i) + ".png" : records[i].image;
    const fs::path png = dir / name;
    m.input(png);
    RgbdImage img = read_rgbd(png, depth_path_for(png));
    const CameraView &cam = records[i].view;
    if (img.width() != cam.width || img.height() != cam.height)
      throw InvalidArgument(png.string() + " is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                            " but camera " + std::to_string(i) + " is " + std::to_string(cam.width) + "x" +
                            std::to_string(cam.height));
    v.cams.push_back(cam);
    v.images.push_back(std::move(img));
    v.names.push_back(fs::path(name).stem().string());
  }
  if (v.cams.empty())
    throw InvalidArgument(cameras.string() + " lists no cameras");
  return v;
}

GaussianCloud load_cloud(const fs::path &p, RunManifest &m) {
  m.input(p);
  return read_ply(p);
}

std::vector<CameraView> load_cameras(const fs::path &p, RunManifest &m) {
  m.input(p);
  return read_cameras(p);
}

double mean_of(const Image &img) {
  double s = 0;
  for (double v : img.data)
    s += v;
  return img.data.empty() ? 0.0 : s / img.data.size();
}

// Logs every call so runs show exactly when the loop consulted the refiner.
class LoggingRefiner final : public Refiner {
public:
  explicit LoggingRefiner(Refiner &inner) : inner_(inner) {}
  RefinerResponse refine(const RefinerRequest &req) override {
    ++calls;
    std::cerr << "refiner call " << calls << " (" << inner_.name() << ")\n";
    return inner_.refine(req);
  }
  std::string name() const override { return inner_.name(); }
  int calls = 0;

private:
  Refiner &inner_;
};

// ---------------------------------------------------------------------------
// subcommands

struct RenderArgs {
  std::string ply, cameras, out;
  bool confidence = false, depth = false, enhancer = false;
};

void run_render(const RenderArgs &a, const Common &c, RunManifest &m) {
  const GaussianCloud cloud = load_cloud(a.ply, m);
  const auto cams = load_cameras(a.cameras, m);
  const RasterConfig cfg = c.raster();
  fs::create_directories(a.out);
  std::vector<CameraRecord> records;
  double conf_mean = 0;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    RenderOutput r;
    {
      Phase p(m, "render");
      r = rasterize(cloud, cams[i], cfg);
    }
    const std::string stem = view_name(i);
    write_png(fs::path(a.out) / (stem + ".png"), r.rgb);
    if (a.depth)
      write_pfm(fs::path(a.out) / (stem + "_depth.pfm"), r.depth);
    if (a.confidence) {
      write_pfm(fs::path(a.out) / (stem + "_conf.pfm"), r.confidence);
      write_png(fs::path(a.out) / (stem + "_conf.png"), normalize_confidence_for_display(r.confidence));
    }
    if (a.enhancer)
      write_pfm(fs::path(a.out) / (stem + "_enhancer.pfm"), enhancer_confidence(r, cloud, cams[i], cfg));
    conf_mean += mean_of(r.confidence) / cams.size();
    records.push_back({cams[i], stem + ".png"});
  }
  write_camera_records(fs::path(a.out) / "cameras.json", records);
  m.metrics["views"] = cams.size();
  m.metrics["confidence_mean"] = conf_mean;
  std::cout << "rendered " << cams.size() << " view(s) of " << cloud.size() << " splats to " << a.out << "\n";
}

struct FitArgs {
  std::string points, cameras, images, out, cameras_out;
  int iters = 1000;
  int sh_degree = 0;
  bool fixed_poses = false;
};

void run_fit(const FitArgs &a, const Common &c, RunManifest &m) {
  m.input(a.points);
  const ColoredPoints pts = read_points(a.points);
  const Views views = load_views(a.cameras, a.images, m);
  OptimizerConfig cfg;
  cfg.init_iters = a.iters;
  cfg.sh_degree = a.sh_degree;
  cfg.optimize_poses = !a.fixed_poses;
  cfg.seed = c.seed;
  cfg.raster = c.raster();
  cfg.validate();
  FitResult fit;
  {
    Phase p(m, "fit");
    fit = fit_scene(pts, views.cams, views.images, cfg);
  }
  write_ply(a.out, fit.cloud);
  if (!a.cameras_out.empty())
    write_cameras(a.cameras_out, fit.cameras);
  double psnr_sum = 0;
  for (std::size_t i = 0; i < views.cams.size(); ++i)
    psnr_sum += psnr(rasterize(fit.cloud, fit.cameras[i], cfg.raster).rgb, views.images[i].rgb);
  m.metrics["splats"] = fit.cloud.size();
  m.metrics["final_loss"] = fit.losses.empty() ? 0.0 : fit.losses.back();
  m.metrics["train_psnr"] = psnr_sum / views.cams.size();
  std::cout << "fit " << fit.cloud.size() << " splats over " << a.iters << " iterations; training PSNR "
            << std::fixed << std::setprecision(2) << psnr_sum / views.cams.size() << " dB -> " << a.out << "\n";
}

struct TrajectoryArgs {
  std::string cameras, out, points;
  int n = 60;
  std::vector<double> target;
};

void run_trajectory(const TrajectoryArgs &a, const Common &, RunManifest &m) {
  const auto cams = load_cameras(a.cameras, m);
  std::optional<Vec3> target;
  if (!a.target.empty()) {
    target = Vec3(a.target[0], a.target[1], a.target[2]);
  } else if (!a.points.empty()) {
    m.input(a.points);
    target = centroid(read_points(a.points).positions);
  }
  const EllipseTrajectory traj = fit_trajectory(cams, target);
  std::vector<CameraView> out;
  for (int i = 0; i < a.n; ++i)
    out.push_back(sample_pose(traj, 2 * M_PI * i / a.n, cams.front()));
  write_cameras(a.out, out);
  json doc = json::parse(read_text(a.out));
  auto vec = [](const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); };
  doc["trajectory"] = {{"center", vec(traj.center)},     {"basis_u", vec(traj.basis_u)},
                       {"basis_v", vec(traj.basis_v)},   {"semi_a", traj.semi_a},
                       {"semi_b", traj.semi_b},          {"plane_normal", vec(traj.plane_normal)},
                       {"look_target", vec(traj.look_target)}, {"circle_fallback", traj.circle_fallback}};
  write_text(a.out, doc.dump(2) + "\n");
  m.metrics["semi_a"] = traj.semi_a;
  m.metrics["semi_b"] = traj.semi_b;
  std::cout << "ellipse a=" << traj.semi_a << " b=" << traj.semi_b << "; wrote " << a.n << " poses to " << a.out
            << "\n";
}

struct EmbedArgs {
  std::string cameras, out;
};

void run_embed(const EmbedArgs &a, const Common &, RunManifest &m) {
  const auto cams = load_cameras(a.cameras, m);
  write_f32(a.out, embed_cameras(cams));
  std::cout << "wrote " << cams.size() << " x " << kEmbeddingDim << " float32 to " << a.out << "\n";
}

struct AlignArgs {
  std::string ply, image, init_pose, out;
  int iters = 500;
  int index = 0;
};

void run_align(const AlignArgs &a, const Common &c, RunManifest &m) {
  const GaussianCloud cloud = load_cloud(a.ply, m);
  const auto cams = load_cameras(a.init_pose, m);
  if (a.index < 0 || a.index >= static_cast<int>(cams.size()))
    throw InvalidArgument("--index " + std::to_string(a.index) + " is outside the " + std::to_string(cams.size()) +
                          " camera(s) in " + a.init_pose);
  m.input(a.image);
  const RgbdImage img = read_rgbd(a.image, depth_path_for(a.image));
  const CameraView &init = cams[a.index];
  if (img.width() != init.width || img.height() != init.height)
    throw InvalidArgument(a.image + " does not match the initial camera's dimensions");
  OptimizerConfig cfg;
  cfg.pose_align_iters = a.iters;
  cfg.raster = c.raster();
  AlignResult r;
  {
    Phase p(m, "align");
    r = align_test_pose(cloud, img, init, cfg);
  }
  const double rot_deg = rotation_angle_between(r.camera.rotation, init.rotation) * 180.0 / M_PI;
  const double moved = (r.camera.center() - init.center()).norm();
  m.metrics["initial_loss"] = r.initial_loss;
  m.metrics["final_loss"] = r.loss;
  m.metrics["rotation_change_deg"] = rot_deg;
  m.metrics["center_change"] = moved;
  if (!a.out.empty())
    write_cameras(a.out, {r.camera});
  std::cout << "L1 " << r.initial_loss << " -> " << r.loss << "; pose moved " << rot_deg << " deg, " << moved
            << " units\n";
}

struct OptimizeArgs {
  std::string ply, cameras, images, refiner = "identity", out, endpoint;
  std::string holdout_cameras, holdout_images;
  int iters = 10000;
  int k = 100;
  double timeout_s = 300;
};

void run_optimize(const OptimizeArgs &a, const Common &c, RunManifest &m) {
  GaussianCloud cloud = load_cloud(a.ply, m);
  const Views views = load_views(a.cameras, a.images, m);
  Views holdout;
  if (!a.holdout_cameras.empty())
    holdout = load_views(a.holdout_cameras, a.holdout_images.empty() ? a.images : a.holdout_images, m);
  OptimizerConfig cfg;
  cfg.main_iters = a.iters;
  cfg.densify_interval = a.k;
  cfg.sh_degree = cloud.sh_degree;
  cfg.seed = c.seed;
  cfg.raster = c.raster();
  cfg.weights = cfg.weights.with_horizon(std::max(1, a.iters));
  cfg.validate();
  const fs::path endpoint =
      a.endpoint.empty() ? fs::absolute(a.out).parent_path() / "refiner_requests" : fs::path(a.endpoint);
  if (a.refiner.rfind("oracle:", 0) == 0)
    m.input(a.refiner.substr(7));
  const auto inner = make_refiner(a.refiner, endpoint, cfg.raster,
                                  std::chrono::milliseconds(static_cast<long long>(a.timeout_s * 1000)));
  LoggingRefiner refiner(*inner);
  const EllipseTrajectory traj = fit_trajectory(views.cams);

  auto holdout_stats = [&](const GaussianCloud &g) {
    double p = 0, conf = 0;
    for (std::size_t i = 0; i < holdout.cams.size(); ++i) {
      const RenderOutput r = rasterize(g, holdout.cams[i], cfg.raster);
      p += psnr(r.rgb, holdout.images[i].rgb) / holdout.cams.size();
      conf += mean_of(r.confidence) / holdout.cams.size();
    }
    return std::pair{p, conf};
  };
  if (!holdout.cams.empty()) {
    const auto [p, conf] = holdout_stats(cloud);
    m.metrics["holdout_psnr_start"] = p;
    m.metrics["holdout_confidence_start"] = conf;
  }
  ReconstructResult res;
  {
    Phase p(m, "reconstruct");
    res = reconstruct(std::move(cloud), TrainingStack(views.cams, views.images), traj, refiner, cfg);
  }
  for (const auto &w : res.log.warnings)
    std::cerr << "warning: " << w << "\n";
  write_ply(a.out, res.cloud);
  m.metrics["refiner_calls"] = refiner.calls;
  m.metrics["novel_views_added"] = res.log.novel_views_added;
  m.metrics["refiner_failures"] = res.log.refiner_failures;
  m.metrics["final_splats"] = res.log.final_splats;
  std::cout << "optimized " << a.iters << " iterations: " << res.log.novel_views_added << " novel view(s), "
            << res.log.refiner_failures << " refiner failure(s), " << res.log.final_splats << " splats -> " << a.out
            << "\n";
  if (!holdout.cams.empty()) {
    const auto [p, conf] = holdout_stats(res.cloud);
    m.metrics["holdout_psnr_end"] = p;
    m.metrics["holdout_confidence_end"] = conf;
    std::cout << "held-out PSNR " << std::fixed << std::setprecision(3) << m.metrics["holdout_psnr_start"].get<double>()
              << " -> " << p << " dB\n";
  }
}

struct DatasetArgs {
  std::string dense, sparse, cameras, out, scene_id = "scene", context;
  int m = 3;
  int per_scene = 12;
  int long_side = 0;
  double rot_deg = 5.0, trans_frac = 0.05;
};

void run_dataset(const DatasetArgs &a, const Common &c, RunManifest &m) {
  const GaussianCloud dense = load_cloud(a.dense, m);
  const GaussianCloud sparse = load_cloud(a.sparse, m);
  auto cams = load_cameras(a.cameras, m);
  if (a.long_side > 0)
    for (auto &cam : cams)
      cam = rescale_camera(cam, a.long_side);
  DatasetOptions opts;
  opts.scene_id = a.scene_id;
  opts.perturb_rot_deg = a.rot_deg;
  opts.perturb_trans_frac = a.trans_frac;
  opts.raster = c.raster();
  if (!a.context.empty()) {
    m.input(a.context);
    opts.context = read_f32(a.context);
  }
  std::vector<DatasetSample> samples;
  {
    Phase p(m, "render");
    samples = make_samples(dense, sparse, cams, a.m, a.per_scene, c.seed, opts);
  }
  {
    Phase p(m, "write");
    write_dataset(a.out, samples, c.seed);
  }
  m.metrics["samples"] = samples.size();
  std::cout << "wrote " << samples.size() << " sample(s) to " << a.out << "\n";
}

struct MetricsArgs {
  std::string pred, gt;
};

bool is_view_png(const fs::path &p) {
  if (p.extension() != ".png")
    return false;
  const std::string stem = p.stem().string();
  return !(stem.size() > 5 && stem.compare(stem.size() - 5, 5, "_conf") == 0);
}

void run_metrics(const MetricsArgs &a, const Common &, RunManifest &m) {
  if (!fs::is_directory(a.gt))
    throw IoError(a.gt, 0, "not a directory");
  if (!fs::is_directory(a.pred))
    throw IoError(a.pred, 0, "not a directory");
  std::vector<fs::path> names;
  for (const auto &e : fs::directory_iterator(a.gt))
    if (e.is_regular_file() && is_view_png(e.path()))
      names.push_back(e.path().filename());
  std::sort(names.begin(), names.end());
  if (names.empty())
    throw IoError(a.gt, 0, "no PNG images to compare");
  std::printf("%-24s %9s %8s %8s\n", "image", "PSNR", "SSIM", "PCC");
  double sp = 0, ss = 0, sc = 0;
  int pcc_rows = 0;
  json rows = json::array();
  for (const auto &n : names) {
    const fs::path g = fs::path(a.gt) / n, p = fs::path(a.pred) / n;
    m.input(g);
    m.input(p);
    const Image gi = read_png(g), pi = read_png(p);
    if (!gi.same_shape(pi))
      throw InvalidArgument(n.string() + ": prediction and ground truth differ in size");
    const double ps = psnr(pi, gi), si = ssim(pi, gi);
    std::string pcc_cell = "-";
    json row{{"image", n.string()}, {"psnr", ps}, {"ssim", si}};
    const fs::path gd = depth_path_for(g), pd = depth_path_for(p);
    if (fs::exists(gd) && fs::exists(pd)) {
      const Image a_d = read_pfm(pd), b_d = read_pfm(gd);
      if (!a_d.same_shape(b_d))
        throw InvalidArgument(n.string() + ": depth maps differ in size");
      std::vector<char> mask(a_d.data.size());
      for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = a_d.data[i] > 0 && b_d.data[i] > 0;
      try {
        const double v = pcc_loss(a_d, b_d, mask);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        pcc_cell = buf;
        row["pcc"] = v;
        sc += v;
        ++pcc_rows;
      } catch (const NumericalError &) {
        pcc_cell = "undef";
      }
    }
    std::printf("%-24s %9.2f %8.4f %8s\n", n.string().c_str(), ps, si, pcc_cell.c_str());
    sp += ps;
    ss += si;
    rows.push_back(row);
  }
  const double k = static_cast<double>(names.size());
  if (pcc_rows > 0)
    std::printf("%-24s %9.2f %8.4f %8.4f\n", "mean", sp / k, ss / k, sc / pcc_rows);
  else
    std::printf("%-24s %9.2f %8.4f %8s\n", "mean", sp / k, ss / k, "-");
  m.metrics["rows"] = rows;
  m.metrics["psnr_mean"] = sp / k;
  m.metrics["ssim_mean"] = ss / k;
}

struct GradcheckArgs {
  int splats = 12;
  int sh_degree = 0;
  int size = 32;
};

void run_gradcheck(const GradcheckArgs &a, const Common &c, RunManifest &m) {
  RandomCloudOptions opts;
  opts.sh_degree = a.sh_degree;
  opts.half_extent = 0.8;
  opts.min_scale = 0.15;
  opts.max_scale = 0.45;
  const GaussianCloud cloud = random_cloud(a.splats, split_seed(c.seed, "gradcheck/cloud"), opts);
  Rng rng = make_rng(c.seed, "gradcheck/camera");
  std::uniform_real_distribution<double> u(-1, 1);
  const Vec3 eye = Vec3(3.5, 0, 0.8) + 0.5 * Vec3(u(rng), u(rng), u(rng));
  const CameraView cam = look_at(eye, Vec3(0.1 * u(rng), 0.1 * u(rng), 0), Vec3::UnitZ(),
                                 make_intrinsics(a.size, a.size, 55));
  GradcheckReport rep;
  {
    Phase p(m, "gradcheck");
    rep = gradcheck(cloud, cam, c.raster(), c.seed);
  }
  std::printf("%-18s %8s %8s %12s\n", "group", "checked", "skipped", "max_rel_err");
  for (const auto &g : rep.groups) {
    std::printf("%-18s %8zu %8zu %12.3e\n", g.name.c_str(), g.checked, g.skipped, g.max_rel_error);
    m.metrics[g.name] = g.max_rel_error;
  }
  const bool ok = rep.worst() < 1e-3;
  std::printf("%s (worst %.3e, tolerance 1e-3)\n", ok ? "PASS" : "FAIL", rep.worst());
  if (!ok)
    throw NumericalError("gradient check exceeded tolerance");
}

json snapshot(const CLI::App *sub) {
  json cfg = json::object();
  for (const CLI::Option *o : sub->get_options()) {
    if (o->get_name() == "--help" || o->get_name() == "-h")
      continue;
    const auto &res = o->results();
    if (res.empty())
      continue;
    cfg[o->get_name()] = res.size() == 1 ? json(res[0]) : json(res);
  }
  return cfg;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Sparse-view Gaussian splatting toolkit: rendering, fitting, refinement loop and data generation"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 2 usage error, 3 I/O error, 4 numerical failure.\n"
             "GSCENES_THREADS sets the default worker count; GSCENES_MANIFEST the default run-manifest path.");
  Common common;

  RenderArgs render;
  auto *render_cmd = app.add_subcommand("render", "Render a splat PLY from every camera in a camera file");
  render_cmd->add_option("--ply", render.ply, "Splat cloud (binary PLY)")->required();
  render_cmd->add_option("--cameras", render.cameras, "Camera JSON")->required();
  render_cmd->add_option("--out", render.out, "Output directory (view_NNN.png plus cameras.json)")->required();
  render_cmd->add_flag("--confidence", render.confidence, "Also write view_NNN_conf.pfm and a display PNG");
  render_cmd->add_flag("--depth", render.depth, "Also write view_NNN_depth.pfm");
  render_cmd->add_flag("--enhancer-conf", render.enhancer, "Also write the small-footprint heuristic map");
  add_common(render_cmd, common, true);

  FitArgs fit;
  auto *fit_cmd = app.add_subcommand("fit", "Fit splats to posed images starting from a colored point cloud");
  fit_cmd->add_option("--points", fit.points, "Colored point cloud PLY (x y z red green blue)")->required();
  fit_cmd->add_option("--cameras", fit.cameras, "Camera JSON")->required();
  fit_cmd->add_option("--images", fit.images, "Directory holding the training images")->required();
  fit_cmd->add_option("--iters", fit.iters, "Optimization iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--out", fit.out, "Output splat PLY")->required();
  fit_cmd->add_option("--sh-degree", fit.sh_degree, "Spherical-harmonics degree (0 or 3)")
      ->capture_default_str()
      ->check(CLI::IsMember({0, 3}));
  fit_cmd->add_flag("--fixed-poses", fit.fixed_poses, "Do not optimize camera poses jointly");
  fit_cmd->add_option("--cameras-out", fit.cameras_out, "Write the refined cameras to this JSON");
  add_common(fit_cmd, common, true);

  TrajectoryArgs traj;
  auto *traj_cmd = app.add_subcommand("trajectory", "Fit an elliptical trajectory and sample poses along it");
  traj_cmd->add_option("--cameras", traj.cameras, "Camera JSON with at least 3 cameras")->required();
  traj_cmd->add_option("--n", traj.n, "Number of poses")->capture_default_str()->check(CLI::PositiveNumber);
  traj_cmd->add_option("--out", traj.out, "Output camera JSON (with a trajectory record)")->required();
  traj_cmd->add_option("--target", traj.target, "Look target x y z")->expected(3);
  traj_cmd->add_option("--points", traj.points, "Point cloud whose centroid is the look target");
  add_common(traj_cmd, common, false);

  EmbedArgs embed;
  auto *embed_cmd = app.add_subcommand("embed", "Write the 78-dimensional camera embeddings as raw float32");
  embed_cmd->add_option("--cameras", embed.cameras, "Camera JSON")->required();
  embed_cmd->add_option("--out", embed.out, "Output .f32 file (N x 78, row-major)")->required();
  add_common(embed_cmd, common, false);

  AlignArgs align;
  auto *align_cmd = app.add_subcommand("align", "Optimize one camera pose against a frozen cloud");
  align_cmd->add_option("--ply", align.ply, "Frozen splat cloud")->required();
  align_cmd->add_option("--image", align.image, "Target PNG")->required();
  align_cmd->add_option("--init-pose", align.init_pose, "Camera JSON holding the initial pose")->required();
  align_cmd->add_option("--index", align.index, "Camera index within --init-pose")->capture_default_str();
  align_cmd->add_option("--iters", align.iters, "Adam iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
  align_cmd->add_option("--out", align.out, "Write the aligned camera to this JSON");
  add_common(align_cmd, common, true);

  OptimizeArgs opt;
  auto *opt_cmd = app.add_subcommand("optimize", "Refiner-in-the-loop reconstruction from sparse views");
  opt_cmd->add_option("--ply", opt.ply, "Initial splat cloud (e.g. from fit)")->required();
  opt_cmd->add_option("--cameras", opt.cameras, "Training camera JSON")->required();
  opt_cmd->add_option("--images", opt.images, "Directory holding the training images")->required();
  opt_cmd->add_option("--refiner", opt.refiner, "identity | oracle:REF.ply | exec:CMD")->capture_default_str();
  opt_cmd->add_option("--iters", opt.iters, "Main-loop iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
  opt_cmd->add_option("--densify-interval", opt.k, "Synthesize a novel view every k iterations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  opt_cmd->add_option("--out", opt.out, "Output splat PLY")->required();
  opt_cmd->add_option("--endpoint", opt.endpoint, "Directory for exec refiner requests (default: next to --out)");
  opt_cmd->add_option("--timeout", opt.timeout_s, "Seconds before an exec refiner is killed")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  opt_cmd->add_option("--holdout-cameras", opt.holdout_cameras, "Camera JSON of held-out views to report PSNR on");
  opt_cmd->add_option("--holdout-images", opt.holdout_images, "Directory of held-out images (default: --images)");
  add_common(opt_cmd, common, true);

  DatasetArgs ds;
  auto *ds_cmd = app.add_subcommand("dataset", "Generate clean/artifact training pairs from a dense and a sparse model");
  ds_cmd->add_option("--dense", ds.dense, "High-quality splat PLY")->required();
  ds_cmd->add_option("--sparse", ds.sparse, "Sparse-view splat PLY")->required();
  ds_cmd->add_option("--cameras", ds.cameras, "Camera JSON; the first M are the sparse model's sources")->required();
  ds_cmd->add_option("-M", ds.m, "Number of source views")->capture_default_str()->check(CLI::PositiveNumber);
  ds_cmd->add_option("--out", ds.out, "Output directory")->required();
  ds_cmd->add_option("--per-scene", ds.per_scene, "Samples to generate")->capture_default_str()->check(CLI::NonNegativeNumber);
  ds_cmd->add_option("--scene-id", ds.scene_id, "Scene identifier recorded in the manifest")->capture_default_str();
  ds_cmd->add_option("--context", ds.context, "M x 768 float32 context features (default: zeros)");
  ds_cmd->add_option("--long-side", ds.long_side, "Rescale cameras so the longer side has this many pixels");
  ds_cmd->add_option("--perturb-deg", ds.rot_deg, "Rotation of perturbed targets in degrees")->capture_default_str();
  ds_cmd->add_option("--perturb-frac", ds.trans_frac, "Translation of perturbed targets as a fraction of the extent")
      ->capture_default_str();
  add_common(ds_cmd, common, true);

  MetricsArgs met;
  auto *met_cmd = app.add_subcommand("metrics", "PSNR / SSIM / depth PCC between two image directories");
  met_cmd->add_option("--pred", met.pred, "Directory of predictions")->required();
  met_cmd->add_option("--gt", met.gt, "Directory of ground truth (every PNG here is compared)")->required();
  add_common(met_cmd, common, false);

  GradcheckArgs gc;
  auto *gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass on a random scene");
  gc_cmd->add_option("--splats", gc.splats, "Number of splats")->capture_default_str()->check(CLI::PositiveNumber);
  gc_cmd->add_option("--sh-degree", gc.sh_degree, "Spherical-harmonics degree (0 or 3)")
      ->capture_default_str()
      ->check(CLI::IsMember({0, 3}));
  gc_cmd->add_option("--size", gc.size, "Image side in pixels")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(gc_cmd, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  CLI::App *sub = app.get_subcommands().front();
  RunManifest manifest;
  manifest.command = sub->get_name();
  manifest.argv.assign(argv, argv + argc);
  manifest.seed = common.seed;
  manifest.config = snapshot(sub);
  fs::path manifest_path = common.manifest;
  if (manifest_path.empty()) {
    const char *env = std::getenv("GSCENES_MANIFEST");
    manifest_path = env && *env ? env : "gscenes_runs.jsonl";
  }

  int rc = kExitOk;
  std::string error;
  try {
    for (double b : common.background)
      if (!(b >= 0.0 && b <= 1.0))
        throw InvalidArgument("--background components must lie in [0,1]");
    if (common.threads > 0)
      set_num_threads(common.threads);
    manifest.config["threads"] = num_threads();
    Phase total(manifest, "total");
    const std::string &name = manifest.command;
    if (name == "render")
      run_render(render, common, manifest);
    else if (name == "fit")
      run_fit(fit, common, manifest);
    else if (name == "trajectory")
      run_trajectory(traj, common, manifest);
    else if (name == "embed")
      run_embed(embed, common, manifest);
    else if (name == "align")
      run_align(align, common, manifest);
    else if (name == "optimize")
      run_optimize(opt, common, manifest);
    else if (name == "dataset")
      run_dataset(ds, common, manifest);
    else if (name == "metrics")
      run_metrics(met, common, manifest);
    else if (name == "gradcheck")
      run_gradcheck(gc, common, manifest);
  } catch (const InvalidArgument &e) {
    rc = kExitUsage;
    error = e.what();
  } catch (const IoError &e) {
    rc = kExitIo;
    error = e.what();
  } catch (const RefinerError &e) {
    rc = kExitIo;
    error = e.what();
  } catch (const NumericalError &e) {
    rc = kExitNumerical;
    error = e.what();
  } catch (const fs::filesystem_error &e) {
    rc = kExitIo;
    error = e.what();
  } catch (const std::exception &e) {
    rc = 1;
    error = e.what();
  }
  if (!error.empty())
    std::cerr << "gscenes " << manifest.command << ": " << error << "\n";
  manifest.write(manifest_path, rc, error);
  return rc;
}
