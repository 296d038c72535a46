// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Exit status is 0 only when every selected criterion passes.

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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace gscenes;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char *name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double max_abs_diff(const Image &a, const Image &b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

double mean_of(const Image &img) {
  double s = 0;
  for (double v : img.data)
    s += v;
  return s / img.data.size();
}

double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// Random camera looking roughly at the origin from 3-5 units away.
CameraView random_camera(Rng &rng, int w, int h) {
  std::uniform_real_distribution<double> u(-1, 1), r(3.0, 5.0), fov(40, 70);
  Vec3 dir(u(rng), u(rng), 0.5 * u(rng));
  if (dir.norm() < 1e-3)
    dir = Vec3::UnitX();
  const Vec3 eye = dir.normalized() * r(rng);
  return look_at(eye, 0.2 * Vec3(u(rng), u(rng), u(rng)), Vec3::UnitZ(), make_intrinsics(w, h, fov(rng)));
}

RandomCloudOptions compact_cloud() {
  RandomCloudOptions o;
  o.half_extent = 1.0;
  o.min_scale = 0.03;
  o.max_scale = 0.35;
  o.min_opacity = 0.05;
  o.max_opacity = 0.99;
  return o;
}

// --------------------------------------------------------------------------

Outcome compositing_invariant() {
  double worst = 0;
  std::size_t conf_violations = 0, pixels = 0;
  for (int s = 0; s < 100; ++s) {
    Rng rng = make_rng(1000 + s, "acceptance/compositing");
    const int n = std::uniform_int_distribution<int>(0, 200)(rng);
    const GaussianCloud cloud = random_cloud(n, 1000 + s, compact_cloud());
    const RenderOutput r = rasterize(cloud, random_camera(rng, 64, 64));
    for (std::size_t i = 0; i < r.transmittance.data.size(); ++i) {
      worst = std::max(worst, std::abs(r.accum_alpha.data[i] + r.transmittance.data[i] - 1.0));
      if ((r.confidence.data[i] == 0.0) != (r.n_contrib.data[i] == 0))
        ++conf_violations;
      ++pixels;
    }
  }
  return {worst <= 1e-6 && conf_violations == 0,
          fmt("max |A+T-1| = %.2e over %zu px; confidence/n_contrib zero-set mismatches: %zu", worst, pixels,
              conf_violations)};
}

Outcome oracle_equivalence() {
  RasterConfig tiled, naive;
  tiled.t_terminate = naive.t_terminate = 0.0;
  naive.mode = RasterMode::kNaive;
  double rgb = 0, depth = 0, trans = 0;
  int count = 0;
  for (int s = 0; s < 20; ++s) {
    Rng rng = make_rng(2000 + s, "acceptance/oracle");
    const int n = std::uniform_int_distribution<int>(1, 50)(rng);
    const GaussianCloud cloud = random_cloud(n, 2000 + s, compact_cloud());
    const CameraView cam = random_camera(rng, 64 + 7 * (s % 3), 48 + 5 * (s % 4));
    const RenderOutput a = rasterize(cloud, cam, tiled), b = rasterize(cloud, cam, naive);
    rgb = std::max(rgb, max_abs_diff(a.rgb, b.rgb));
    depth = std::max(depth, max_abs_diff(a.depth, b.depth));
    trans = std::max(trans, max_abs_diff(a.transmittance, b.transmittance));
    for (std::size_t i = 0; i < a.n_contrib.data.size(); ++i)
      count = std::max(count, std::abs(a.n_contrib.data[i] - b.n_contrib.data[i]));
  }
  const double worst = std::max({rgb, depth, trans});
  return {worst <= 1e-5 && count == 0,
          fmt("max diff rgb %.1e depth %.1e T %.1e; n_contrib max diff %d", rgb, depth, trans, count)};
}

Outcome confidence_spot_values() {
  Image t(2, 1);
  t.data = {0.5, 0.25};
  CountMap n(2, 1);
  n.data = {1, 2};
  const Image c = confidence_map(t, n, 1e-6);
  // independent arithmetic: -log(T + eps) * n
  const double e1 = -std::log(0.5 + 1e-6) * 1, e2 = -std::log(0.25 + 1e-6) * 2;
  const bool ok = std::abs(c.data[0] - 0.693145) <= 1e-5 && std::abs(c.data[1] - 2.772581) <= 1e-5 &&
                  std::abs(c.data[0] - e1) <= 1e-12 && std::abs(c.data[1] - e2) <= 1e-12;
  return {ok, fmt("C(0.5,1) = %.6f, C(0.25,2) = %.6f", c.data[0], c.data[1])};
}

Outcome gradient_checks() {
  double worst = 0;
  std::size_t checked = 0, skipped = 0;
  std::set<std::string> groups;
  for (int s = 0; s < 6; ++s) {
    RandomCloudOptions o;
    o.sh_degree = s % 2 ? 3 : 0;
    o.half_extent = 0.8;
    o.min_scale = 0.15;
    o.max_scale = 0.45;
    const GaussianCloud cloud = random_cloud(10 + 2 * s, 3000 + s, o);
    Rng rng = make_rng(3000 + s, "acceptance/gradcheck");
    const CameraView cam = random_camera(rng, 32, 32);
    const GradcheckReport rep = gradcheck(cloud, cam, {}, 3000 + s);
    worst = std::max(worst, rep.worst());
    for (const auto &g : rep.groups) {
      checked += g.checked;
      skipped += g.skipped;
      groups.insert(g.name);
    }
  }
  const bool all_groups = groups.count("position") && groups.count("pose_rotation") && groups.count("pose_translation");
  return {worst < 1e-3 && all_groups && skipped * 10 <= checked,
          fmt("6 seeds, %zu groups, %zu parameters checked, %zu skipped at kinks; worst relative error %.2e",
              groups.size(), checked, skipped, worst)};
}

Outcome embedding_contract() {
  Rng rng = make_rng(4000, "acceptance/embedding");
  std::uniform_real_distribution<double> u(-3, 3);
  double slide = 0, orth = 0;
  bool len_ok = kEmbeddingDim == 78;
  for (int i = 0; i < 200; ++i) {
    const CameraView cam = random_camera(rng, 40 + i % 17, 30 + i % 11);
    const PluckerRay r = plucker_from_camera(cam);
    len_ok = len_ok && fourier_encode(r.as_vector()).size() == 78 && embed_camera(cam).values.size() == 78;
    orth = std::max(orth, std::abs(r.direction.dot(r.moment)));
    // slide the center along the ray: the moment must not change
    const Vec3 c2 = cam.center() + u(rng) * r.direction;
    CameraView moved = cam;
    moved.translation = -cam.rotation * c2;
    const PluckerRay r2 = plucker_from_camera(moved);
    slide = std::max(slide, (r2.as_vector() - r.as_vector()).cwiseAbs().maxCoeff());
  }
  return {len_ok && slide <= 1e-9 && orth <= 1e-9,
          fmt("length 78: %s; max slide change %.1e; max |d.m| %.1e", len_ok ? "yes" : "no", slide, orth)};
}

Outcome trajectory_recovery() {
  const CameraView intr = make_intrinsics(32, 24, 60);
  const Vec3 target(0.3, -0.2, 0.1);
  std::vector<CameraView> circle, ellipse;
  for (int i = 0; i < 8; ++i) {
    const double a = 2 * std::numbers::pi * i / 8 + 0.1;
    circle.push_back(look_at(target + Vec3(2 * std::cos(a), 2 * std::sin(a), 0.7), target, Vec3::UnitZ(), intr));
    ellipse.push_back(look_at(target + Vec3(3 * std::cos(a), std::sin(a), 0.7), target, Vec3::UnitZ(), intr));
  }
  const EllipseTrajectory tc = fit_trajectory(circle, target), te = fit_trajectory(ellipse, target);
  const double ec = std::max(std::abs(tc.semi_a - 2), std::abs(tc.semi_b - 2));
  const double ee = std::max(std::abs(te.semi_a - 3), std::abs(te.semi_b - 1));
  double look = 0;
  for (int i = 0; i < 36; ++i) {
    const CameraView c = sample_pose(te, 2 * std::numbers::pi * i / 36, ellipse[0]);
    const Vec3 fwd = c.rotation.row(2).transpose();
    const Vec3 to_target = (te.look_target - c.center()).normalized();
    look = std::max(look, (fwd - to_target).norm());
  }
  return {ec <= 1e-6 && ee <= 1e-4 && look <= 1e-6,
          fmt("circle axis error %.1e; ellipse axis error %.1e; look-at error %.1e", ec, ee, look)};
}

Outcome pose_alignment() {
  const GaussianCloud scene = textured_scene(600, 5000);
  const auto rig = ring_cameras(10, 3.2, 1.4, Vec3::Zero(), 80, 60, 60.0, 0.3);
  const double extent = scene_extent(rig);
  OptimizerConfig cfg; // 500 iterations by default
  int ok = 0;
  double worst_rot = 0, worst_trans = 0;
  for (int s = 0; s < 10; ++s) {
    const CameraView truth = rig[s];
    const RgbdImage target = rasterize(scene, truth, cfg.raster).to_rgbd();
    const CameraView init = perturb_camera(truth, 1.0, 0.01, extent, 5000 + s);
    const AlignResult r = align_test_pose(scene, target, init, cfg);
    const double rot = rad2deg(rotation_angle_between(r.camera.rotation, truth.rotation));
    const double trans = (r.camera.center() - truth.center()).norm() / extent;
    worst_rot = std::max(worst_rot, rot);
    worst_trans = std::max(worst_trans, trans);
    if (rot <= 0.1 && trans <= 0.001)
      ++ok;
  }
  return {ok >= 8, fmt("%d/10 seeds within 0.1 deg and 0.1%% extent (worst %.3f deg, %.3f%%)", ok, worst_rot,
                       100 * worst_trans)};
}

// Sparse-view scene: dense reference, three training views, held-out views between them.
struct EndToEnd {
  double psnr_oracle = 0, psnr_identity = 0, conf_start = 0, conf_end = 0;
  double contrib_start = 0, contrib_end = 0; // mean n_contrib over held-out pixels
};

EndToEnd end_to_end(std::uint64_t seed) {
  const GaussianCloud dense = textured_scene(2000, seed);
  const int w = 64, h = 48;
  const auto train = ring_cameras(3, 3.2, 1.5, Vec3::Zero(), w, h, 60.0, 0.4 * seed);
  const auto held = ring_cameras(3, 3.2, 1.5, Vec3::Zero(), w, h, 60.0, 0.4 * seed + std::numbers::pi / 3);
  std::vector<RgbdImage> images, held_images;
  for (const auto &c : train)
    images.push_back(rasterize(dense, c).to_rgbd());
  for (const auto &c : held)
    held_images.push_back(rasterize(dense, c).to_rgbd());

  OptimizerConfig cfg;
  cfg.seed = seed;
  cfg.init_iters = 300;
  cfg.optimize_poses = false;
  cfg.main_iters = 1000;
  cfg.densify_interval = 100;
  cfg.weights = cfg.weights.with_horizon(cfg.main_iters);
  const ColoredPoints pts = visible_points(dense, train, 600, seed);
  const GaussianCloud start = fit_scene(pts, train, images, cfg).cloud;
  const EllipseTrajectory traj = fit_trajectory(train);

  auto held_stats = [&](const GaussianCloud &g, double &psnr_mean, double &conf_mean, double &contrib_mean) {
    psnr_mean = conf_mean = contrib_mean = 0;
    for (std::size_t i = 0; i < held.size(); ++i) {
      const RenderOutput r = rasterize(g, held[i], cfg.raster);
      psnr_mean += psnr(r.rgb, held_images[i].rgb) / held.size();
      conf_mean += mean_of(r.confidence) / held.size();
      double n = 0;
      for (int v : r.n_contrib.data)
        n += v;
      contrib_mean += n / r.n_contrib.data.size() / held.size();
    }
  };
  EndToEnd e;
  double unused = 0;
  held_stats(start, unused, e.conf_start, e.contrib_start);
  OracleRefiner oracle(dense, cfg.raster);
  IdentityRefiner identity;
  const auto with_oracle = reconstruct(start, TrainingStack(train, images), traj, oracle, cfg);
  const auto with_identity = reconstruct(start, TrainingStack(train, images), traj, identity, cfg);
  held_stats(with_oracle.cloud, e.psnr_oracle, e.conf_end, e.contrib_end);
  held_stats(with_identity.cloud, e.psnr_identity, unused, unused);
  return e;
}

Outcome directional_end_to_end() {
  int wins = 0, conf_drops = 0;
  std::ostringstream per;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const EndToEnd e = end_to_end(s);
    wins += e.psnr_oracle > e.psnr_identity;
    conf_drops += e.conf_end < e.conf_start;
    per << fmt(" [seed %d: %.2f vs %.2f dB, conf %.1f -> %.1f, n_contrib %.1f -> %.1f]", static_cast<int>(s),
               e.psnr_oracle, e.psnr_identity, e.conf_start, e.conf_end, e.contrib_start, e.contrib_end);
  }
  return {wins >= 4 && conf_drops >= 4,
          fmt("oracle beats identity on %d/5 seeds; held-out confidence mean decreases on %d/5;", wins, conf_drops) +
              per.str()};
}

Outcome schedule_endpoints() {
  const LossWeights w;
  const double d0 = w.depth.at(0), d1 = w.depth.at(10000), s0 = w.sample.at(0), s1 = w.sample.at(10000);
  const double mid = w.depth.at(5000);
  const double mid_expected = 1.0 + (0.01 - 1.0) * 0.5; // linear interpolation
  const bool ok = d0 == 1.0 && std::abs(d1 - 0.01) <= 1e-15 && s0 == 1.0 && std::abs(s1 - 0.1) <= 1e-15 &&
                  std::abs(mid - 0.505) <= 1e-12 && std::abs(mid - mid_expected) <= 1e-12;
  return {ok, fmt("w_d: %.3f -> %.3f (mid %.4f); sample weight: %.2f -> %.2f", d0, d1, mid, s0, s1)};
}

Outcome format_round_trips() {
  const fs::path dir = fs::temp_directory_path() / fmt("gscenes_acceptance_%d", static_cast<int>(::getpid()));
  fs::create_directories(dir);
  Rng rng = make_rng(6000, "acceptance/formats");
  std::uniform_real_distribution<float> uf(-50.0f, 50.0f);
  int failures = 0;
  std::vector<std::string> notes;

  for (int trial = 0; trial < 20; ++trial) {
    // PLY: float32 payload survives exactly
    RandomCloudOptions o;
    o.sh_degree = trial % 2 ? 3 : 0;
    GaussianCloud cloud = random_cloud(1 + trial * 7, 6000 + trial, o);
    for (auto &s : cloud.splats) {
      auto to_f = [](double &v) { v = static_cast<float>(v); };
      for (int k = 0; k < 3; ++k) {
        to_f(s.position[k]);
        to_f(s.log_scale[k]);
      }
      Vec4 q = s.rotation.normalized();
      s.rotation = q;
      for (int k = 0; k < 4; ++k)
        to_f(s.rotation[k]);
      to_f(s.logit_opacity);
      for (Eigen::Index k = 0; k < s.sh.size(); ++k)
        to_f(s.sh.data()[k]);
    }
    write_ply(dir / "a.ply", cloud);
    const GaussianCloud back = read_ply(dir / "a.ply");
    write_ply(dir / "b.ply", back);
    if (read_bytes(dir / "a.ply") != read_bytes(dir / "b.ply") || back.size() != cloud.size() ||
        back.sh_degree != cloud.sh_degree)
      ++failures, notes.push_back("ply");

    // PFM
    Image map(1 + trial % 9, 1 + trial % 5);
    for (auto &v : map.data)
      v = uf(rng);
    write_pfm(dir / "a.pfm", map);
    if (read_pfm(dir / "a.pfm").data != map.data)
      ++failures, notes.push_back("pfm");

    // raw f32
    std::vector<float> raw(trial * 13);
    for (auto &v : raw)
      v = uf(rng);
    write_f32(dir / "a.f32", raw);
    if (read_f32(dir / "a.f32") != raw)
      ++failures, notes.push_back("f32");

    // camera JSON
    std::vector<CameraView> cams;
    for (int i = 0; i < 1 + trial % 4; ++i)
      cams.push_back(random_camera(rng, 20 + i, 10 + trial));
    write_cameras(dir / "a.json", cams);
    const auto cams_back = read_cameras(dir / "a.json");
    bool same = cams_back.size() == cams.size();
    for (std::size_t i = 0; same && i < cams.size(); ++i)
      same = cams_back[i].rotation == cams[i].rotation && cams_back[i].translation == cams[i].translation &&
             cams_back[i].fx == cams[i].fx && cams_back[i].fy == cams[i].fy && cams_back[i].cx == cams[i].cx &&
             cams_back[i].cy == cams[i].cy && cams_back[i].width == cams[i].width &&
             cams_back[i].height == cams[i].height;
    if (!same)
      ++failures, notes.push_back("cameras");
  }

  // subprocess copy script against the in-process identity refiner
  const GaussianCloud scene = random_cloud(60, 6100, compact_cloud());
  const auto rig = ring_cameras(3, 4.0, 1.0, Vec3::Zero(), 40, 30, 60.0);
  const RefinerRequest req = build_request(rasterize(scene, rig[0]), rig[0], rig, 6100);
  SubprocessRefiner copy("cp \"$1/render.png\" \"$1/refined.png\" && cp \"$1/depth.pfm\" \"$1/refined_depth.pfm\" #",
                         dir / "endpoint", std::chrono::seconds(60));
  copy.refine(req);
  const RefinerResponse id = IdentityRefiner().refine(req);
  write_png(dir / "identity.png", id.refined.rgb);
  write_pfm(dir / "identity_depth.pfm", id.refined.depth);
  const bool protocol_ok =
      read_bytes(copy.last_request_dir() / protocol::kRefined) == read_bytes(dir / "identity.png") &&
      read_bytes(copy.last_request_dir() / protocol::kRefinedDepth) == read_bytes(dir / "identity_depth.pfm");
  if (!protocol_ok)
    ++failures, notes.push_back("subprocess");
  std::error_code ec;
  fs::remove_all(dir, ec);

  std::string which;
  for (const auto &n : notes)
    which += " " + n;
  return {failures == 0, failures == 0 ? "20 randomized PLY/PFM/f32/camera payloads bit-exact; copy-script response "
                                         "byte-identical to identity"
                                       : fmt("%d failure(s):", failures) + which};
}

Outcome pcc_properties() {
  Rng rng = make_rng(7000, "acceptance/pcc");
  std::normal_distribution<double> n01;
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    Image a(9 + t % 5, 7 + t % 3), affine = a, neg = a;
    std::vector<char> mask(a.data.size(), 1);
    for (auto &v : a.data)
      v = n01(rng);
    double m = 0;
    for (double v : a.data)
      m += v / a.data.size();
    for (auto &v : a.data)
      v -= m;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      affine.data[i] = 3 * a.data[i] + 7;
      neg.data[i] = -a.data[i];
    }
    worst = std::max({worst, std::abs(pcc_loss(a, a, mask)), std::abs(pcc_loss(a, affine, mask)),
                      std::abs(pcc_loss(a, neg, mask) - 2.0)});
  }
  return {worst <= 1e-9, fmt("50 zero-mean inputs; max deviation %.1e", worst)};
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::vector<int> only;
  int threads = 0;
  app.add_option("--only", only, "Run only these criterion numbers");
  app.add_option("--threads", threads, "Worker threads (default: GSCENES_THREADS, else all cores)");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0)
    set_num_threads(threads);

  const std::vector<Criterion> criteria = {
      {1, "compositing invariant", 30, compositing_invariant},
      {2, "tiled vs naive rasterizer", 60, oracle_equivalence},
      {3, "confidence spot values", 1, confidence_spot_values},
      {4, "gradient checks", 300, gradient_checks},
      {5, "camera embedding contract", 1, embedding_contract},
      {6, "trajectory recovery", 1, trajectory_recovery},
      {7, "test-pose alignment", 120, pose_alignment},
      {8, "refiner-in-the-loop beats identity", 600, directional_end_to_end},
      {9, "loss schedule endpoints", 1, schedule_endpoints},
      {10, "format round-trips", 30, format_round_trips},
      {11, "PCC properties", 1, pcc_properties},
  };
  int failed = 0;
  for (const auto &c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end())
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("[%s] %2d %-36s %7.2fs (budget %.0fs%s) %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs, c.budget_s,
                in_time ? "" : ", exceeded", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
