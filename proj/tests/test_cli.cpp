#include "gscenes/io.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace gscenes;
using namespace testing_util;
using json = nlohmann::json;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

// Runs the CLI with the manifest redirected into `dir`.
CliRun cli(const TempDir &dir, const std::string &args) {
  const std::string out = (dir / "stdout.txt").string(), err = (dir / "stderr.txt").string();
  const std::string cmd = std::string("GSCENES_THREADS=1 '") + GSCENES_CLI_PATH + "' " + args + " --manifest '" +
                          (dir / "runs.jsonl").string() + "' >'" + out + "' 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out);
  r.err = read_text(err);
  return r;
}

// Invocations that never reach subcommand dispatch (help, parse errors).
int cli_bare(const std::string &args) {
  const std::string cmd = std::string("'") + GSCENES_CLI_PATH + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json last_manifest(const TempDir &dir) {
  std::ifstream in(dir / "runs.jsonl");
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty())
      last = line;
  return json::parse(last);
}

std::string q(const fs::path &p) { return "'" + p.string() + "'"; }

// Small scene rendered from a ring, written as a training directory.
struct Fixture {
  TempDir dir{"cli"};
  GaussianCloud cloud = random_cloud(40, 21);
  std::vector<CameraView> cams = ring_cameras(4, 4.0, 1.0, Vec3::Zero(), 24, 20, 55.0);

  Fixture() {
    write_ply(dir / "scene.ply", cloud);
    write_cameras(dir / "cams.json", cams);
    fs::create_directories(dir / "imgs");
    for (std::size_t i = 0; i < cams.size(); ++i) {
      const RenderOutput r = rasterize(cloud, cams[i]);
      char name[32];
      std::snprintf(name, sizeof name, "view_%03zu", i);
      write_png(dir.path() / "imgs" / (std::string(name) + ".png"), r.rgb);
      write_pfm(dir.path() / "imgs" / (std::string(name) + "_depth.pfm"), r.depth);
    }
  }
};

} // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli_bare("--help"), 0);
  for (const char *sub : {"render", "fit", "trajectory", "embed", "align", "optimize", "dataset", "metrics", "gradcheck"})
    EXPECT_EQ(cli_bare(std::string(sub) + " --help"), 0) << sub;
  EXPECT_EQ(cli_bare(""), 2);
  EXPECT_EQ(cli_bare("frobnicate"), 2);
  EXPECT_EQ(cli_bare("render --ply a.ply"), 2);
  EXPECT_EQ(cli_bare("fit --points a --cameras b --images c --out d --sh-degree 2"), 2);
}

TEST(Cli, HelpDocumentsEveryFlag) {
  TempDir dir("clihelp");
  const std::string cmd = std::string("'") + GSCENES_CLI_PATH + "' optimize --help >" + q(dir / "h.txt");
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const std::string help = read_text(dir / "h.txt");
  for (const char *flag : {"--ply", "--cameras", "--images", "--refiner", "--iters", "--densify-interval", "--out",
                           "--seed", "--threads", "--naive", "--manifest", "--endpoint", "--timeout"})
    EXPECT_NE(help.find(flag), std::string::npos) << flag;
}

TEST(Cli, MissingInputIsIoError) {
  TempDir dir("climiss");
  const CliRun r = cli(dir, "render --ply " + q(dir / "absent.ply") + " --cameras " + q(dir / "c.json") + " --out " +
                             q(dir / "o"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("absent.ply"), std::string::npos);
  EXPECT_EQ(r.err.find('\n'), r.err.size() - 1); // one-line diagnostic
  const json m = last_manifest(dir);
  EXPECT_EQ(m["exit_code"], 3);
  EXPECT_EQ(m["command"], "render");
}

TEST(Cli, InvalidArgumentIsUsageError) {
  Fixture f;
  const CliRun r = cli(f.dir, "render --ply " + q(f.dir / "scene.ply") + " --cameras " + q(f.dir / "cams.json") +
                               " --out " + q(f.dir / "o") + " --background 0 0 2");
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, EmptyCloudRendersBackgroundWithZeroConfidence) {
  TempDir dir("cliempty");
  write_ply(dir / "empty.ply", GaussianCloud{});
  write_cameras(dir / "c.json", ring_cameras(2, 3.0, 0.5, Vec3::Zero(), 16, 12, 50.0));
  const CliRun r = cli(dir, "render --ply " + q(dir / "empty.ply") + " --cameras " + q(dir / "c.json") + " --out " +
                             q(dir / "o") + " --confidence --depth --background 0.2 0.4 0.6");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char *v : {"view_000", "view_001"}) {
    const Image rgb = read_png(dir.path() / "o" / (std::string(v) + ".png"));
    ASSERT_EQ(rgb.width, 16);
    for (std::size_t p = 0; p < rgb.pixels(); ++p) {
      EXPECT_EQ(std::lround(rgb.data[p * 3 + 0] * 255), 51);
      EXPECT_EQ(std::lround(rgb.data[p * 3 + 1] * 255), 102);
      EXPECT_EQ(std::lround(rgb.data[p * 3 + 2] * 255), 153);
    }
    for (double c : read_pfm(dir.path() / "o" / (std::string(v) + "_conf.pfm")).data)
      EXPECT_EQ(c, 0.0);
  }
  EXPECT_EQ(read_cameras(dir / "o/cameras.json").size(), 2u);
  const json m = last_manifest(dir);
  EXPECT_EQ(m["exit_code"], 0);
  EXPECT_TRUE(m["inputs"].contains((dir / "empty.ply").string()));
  EXPECT_EQ(m["inputs"][(dir / "empty.ply").string()], hash_file(dir / "empty.ply"));
  EXPECT_TRUE(m["timings_s"].contains("render"));
}

TEST(Cli, RenderMatchesLibraryAndNaiveIsDeterministic) {
  Fixture f;
  for (const char *mode : {"", " --naive"}) {
    const fs::path out = f.dir.path() / (std::string("r") + (*mode ? "n" : "t"));
    const CliRun r = cli(f.dir, "render --ply " + q(f.dir / "scene.ply") + " --cameras " + q(f.dir / "cams.json") +
                                 " --out " + q(out) + " --depth" + mode);
    ASSERT_EQ(r.code, 0) << r.err;
    for (std::size_t i = 0; i < f.cams.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "view_%03zu.png", i);
      EXPECT_EQ(read_bytes(out / name), read_bytes(f.dir.path() / "imgs" / name));
    }
  }
}

TEST(Cli, MetricsOnIdenticalDirectories) {
  Fixture f;
  const CliRun r = cli(f.dir, "metrics --pred " + q(f.dir / "imgs") + " --gt " + q(f.dir / "imgs"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("99.00"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("1.0000"), std::string::npos) << r.out;
  const json m = last_manifest(f.dir);
  EXPECT_DOUBLE_EQ(m["metrics"]["psnr_mean"].get<double>(), 99.0);
  EXPECT_NEAR(m["metrics"]["ssim_mean"].get<double>(), 1.0, 1e-12);
  for (const auto &row : m["metrics"]["rows"])
    EXPECT_NEAR(row["pcc"].get<double>(), 0.0, 1e-9);
  EXPECT_EQ(cli(f.dir, "metrics --pred " + q(f.dir / "nope") + " --gt " + q(f.dir / "imgs")).code, 3);
}

TEST(Cli, OptimizeWithIntervalBeyondItersCallsNoRefiner) {
  Fixture f;
  const CliRun r = cli(f.dir, "optimize --ply " + q(f.dir / "scene.ply") + " --cameras " + q(f.dir / "cams.json") +
                               " --images " + q(f.dir / "imgs") + " --iters 5 --densify-interval 50 --out " +
                               q(f.dir / "out.ply") + " --refiner 'exec:false #'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.err.find("refiner call"), std::string::npos) << r.err;
  const json m = last_manifest(f.dir);
  EXPECT_EQ(m["metrics"]["refiner_calls"], 0);
  EXPECT_EQ(read_ply(f.dir / "out.ply").size(), m["metrics"]["final_splats"].get<std::size_t>());
}

TEST(Cli, OptimizeLogsRefinerCalls) {
  Fixture f;
  const CliRun r = cli(f.dir, "optimize --ply " + q(f.dir / "scene.ply") + " --cameras " + q(f.dir / "cams.json") +
                               " --images " + q(f.dir / "imgs") + " --iters 6 --densify-interval 3 --out " +
                               q(f.dir / "out.ply") + " --refiner " + q("oracle:" + (f.dir / "scene.ply").string()) +
                               " --holdout-cameras " + q(f.dir / "cams.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("refiner call 2"), std::string::npos) << r.err;
  const json m = last_manifest(f.dir);
  EXPECT_EQ(m["metrics"]["refiner_calls"], 2);
  EXPECT_EQ(m["metrics"]["novel_views_added"], 2);
  EXPECT_TRUE(m["metrics"].contains("holdout_psnr_end"));
}

TEST(Cli, FailingExecRefinerIsSkippedNotFatal) {
  Fixture f;
  const CliRun r = cli(f.dir, "optimize --ply " + q(f.dir / "scene.ply") + " --cameras " + q(f.dir / "cams.json") +
                               " --images " + q(f.dir / "imgs") + " --iters 4 --densify-interval 2 --out " +
                               q(f.dir / "out.ply") + " --refiner 'exec:exit 9 #'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(last_manifest(f.dir)["metrics"]["refiner_failures"], 2);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST(Cli, ImageSizeMismatchIsUsageError) {
  Fixture f;
  auto cams = f.cams;
  for (auto &c : cams)
    c.width = 30;
  write_cameras(f.dir / "wide.json", cams);
  const CliRun r = cli(f.dir, "optimize --ply " + q(f.dir / "scene.ply") + " --cameras " + q(f.dir / "wide.json") +
                               " --images " + q(f.dir / "imgs") + " --iters 1 --out " + q(f.dir / "o.ply"));
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, FitTrajectoryEmbedAlign) {
  Fixture f;
  write_points(f.dir / "pts.ply", visible_points(f.cloud, f.cams, 200, 3));
  CliRun r = cli(f.dir, "fit --points " + q(f.dir / "pts.ply") + " --cameras " + q(f.dir / "cams.json") + " --images " +
                         q(f.dir / "imgs") + " --iters 20 --out " + q(f.dir / "fit.ply") + " --cameras-out " +
                         q(f.dir / "refined.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GT(read_ply(f.dir / "fit.ply").size(), 0u);
  EXPECT_EQ(read_cameras(f.dir / "refined.json").size(), f.cams.size());

  r = cli(f.dir, "trajectory --cameras " + q(f.dir / "cams.json") + " --n 7 --out " + q(f.dir / "traj.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_cameras(f.dir / "traj.json").size(), 7u);
  const json t = json::parse(read_text(f.dir / "traj.json"));
  EXPECT_NEAR(t["trajectory"]["semi_a"].get<double>(), 4.0, 1e-6);

  r = cli(f.dir, "embed --cameras " + q(f.dir / "cams.json") + " --out " + q(f.dir / "geo.f32"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto geo = read_f32(f.dir / "geo.f32");
  ASSERT_EQ(geo.size(), f.cams.size() * 78);
  const auto e0 = embed_camera(f.cams[0]);
  for (int k = 0; k < 78; ++k)
    EXPECT_EQ(geo[k], static_cast<float>(e0.values[k]));

  r = cli(f.dir, "align --ply " + q(f.dir / "scene.ply") + " --image " + q(f.dir / "imgs/view_001.png") +
                     " --init-pose " + q(f.dir / "cams.json") + " --index 1 --iters 10 --out " +
                     q(f.dir / "aligned.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_cameras(f.dir / "aligned.json").size(), 1u);
  EXPECT_EQ(cli(f.dir, "align --ply " + q(f.dir / "scene.ply") + " --image " + q(f.dir / "imgs/view_001.png") +
                           " --init-pose " + q(f.dir / "cams.json") + " --index 9")
                .code,
            2);
}

TEST(Cli, DatasetWritesManifest) {
  Fixture f;
  write_ply(f.dir / "sparse.ply", random_cloud(8, 3));
  const CliRun r = cli(f.dir, "dataset --dense " + q(f.dir / "scene.ply") + " --sparse " + q(f.dir / "sparse.ply") +
                               " --cameras " + q(f.dir / "cams.json") + " -M 3 --per-scene 2 --seed 5 --out " +
                               q(f.dir / "ds"));
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(read_text(f.dir / "ds/manifest.json"));
  EXPECT_EQ(m["samples"].size(), 2u);
  EXPECT_EQ(last_manifest(f.dir)["seed"], 5);
}

TEST(Cli, GradcheckPasses) {
  TempDir dir("cligc");
  const CliRun r = cli(dir, "gradcheck --seed 3 --splats 6 --size 20");
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}
