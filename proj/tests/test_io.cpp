#include "gscenes/io.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <fstream>

using namespace gscenes;
using namespace testing_util;

namespace {

float as_float(double v) { return static_cast<float>(v); }

void expect_cloud_float_equal(const GaussianCloud &a, const GaussianCloud &b) {
  ASSERT_EQ(a.size(), b.size());
  ASSERT_EQ(a.sh_degree, b.sh_degree);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &s = a.splats[i], &t = b.splats[i];
    for (int k = 0; k < 3; ++k) {
      EXPECT_EQ(as_float(s.position(k)), as_float(t.position(k)));
      EXPECT_EQ(as_float(s.log_scale(k)), as_float(t.log_scale(k)));
    }
    for (int k = 0; k < 4; ++k)
      EXPECT_EQ(as_float(s.rotation(k)), as_float(t.rotation(k)));
    EXPECT_EQ(as_float(s.logit_opacity), as_float(t.logit_opacity));
    ASSERT_EQ(s.sh.cols(), t.sh.cols());
    for (int c = 0; c < 3; ++c)
      for (int j = 0; j < s.sh.cols(); ++j)
        EXPECT_EQ(as_float(s.sh(c, j)), as_float(t.sh(c, j)));
  }
}

std::string ply_header(const std::vector<std::string> &props, int count, const std::string &format = "binary_little_endian") {
  std::string h = "ply\nformat " + format + " 1.0\nelement vertex " + std::to_string(count) + "\n";
  for (const auto &p : props)
    h += "property float " + p + "\n";
  return h + "end_header\n";
}

void write_raw(const fs::path &p, const std::string &header, const std::vector<float> &payload) {
  std::string bytes = header;
  bytes.append(reinterpret_cast<const char *>(payload.data()), payload.size() * sizeof(float));
  write_bytes(p, bytes.data(), bytes.size());
}

std::vector<CameraView> nine_cameras() {
  std::vector<CameraView> cams;
  Rng rng(17);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 9; ++i) {
    CameraView c = make_intrinsics(64 + i, 48, 50 + i);
    c.rotation = so3_exp(Vec3(u(rng), u(rng), u(rng)));
    c.translation = Vec3(u(rng), u(rng), 3 + u(rng));
    cams.push_back(c);
  }
  return cams;
}

std::string camera_json(const Mat3 &r, const std::string &convention) {
  std::string s = "{\"cameras\":[{\"width\":8,\"height\":6,\"fx\":5,\"fy\":5,\"cx\":3.5,\"cy\":2.5,\"rotation\":[";
  for (int i = 0; i < 9; ++i)
    s += (i ? "," : "") + std::to_string(r(i / 3, i % 3));
  return s + "],\"translation\":[0.1,0.2,3],\"convention\":\"" + convention + "\"}]}";
}

} // namespace

TEST(Ply, RoundTripDegreeZero) {
  TempDir dir("ply0");
  const GaussianCloud cloud = random_cloud(100, 1);
  write_ply(dir / "a.ply", cloud);
  const GaussianCloud back = read_ply(dir / "a.ply");
  EXPECT_EQ(back.sh_degree, 0);
  expect_cloud_float_equal(cloud, back);
  const PlyVertices v = read_ply_vertices(dir / "a.ply");
  EXPECT_EQ(v.names.size(), 17u);
  EXPECT_FALSE(v.has("f_rest_0"));
  for (double n : v.column("nx"))
    EXPECT_EQ(n, 0.0);
  // second cycle is bit-identical on the file level
  write_ply(dir / "b.ply", back);
  EXPECT_EQ(read_bytes(dir / "a.ply"), read_bytes(dir / "b.ply"));
}

TEST(Ply, RoundTripDegreeThree) {
  TempDir dir("ply3");
  RandomCloudOptions opts;
  opts.sh_degree = 3;
  const GaussianCloud cloud = random_cloud(100, 2, opts);
  write_ply(dir / "a.ply", cloud);
  const GaussianCloud back = read_ply(dir / "a.ply");
  EXPECT_EQ(back.sh_degree, 3);
  expect_cloud_float_equal(cloud, back);
  const PlyVertices v = read_ply_vertices(dir / "a.ply");
  ASSERT_EQ(v.names.size(), 62u);
  const std::vector<std::string> order{"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (std::size_t i = 0; i < order.size(); ++i)
    EXPECT_EQ(v.names[i], order[i]);
  EXPECT_EQ(v.names[9], "f_rest_0");
  EXPECT_EQ(v.names[53], "f_rest_44");
  EXPECT_EQ(v.names[54], "opacity");
  EXPECT_EQ(v.names[61], "rot_3");
  // f_rest_{c*15+j} is channel c, coefficient j+1
  EXPECT_EQ(as_float(v.column("f_rest_16")[5]), as_float(cloud.splats[5].sh(1, 2)));
}

TEST(Ply, MissingOpacityIsNamed) {
  TempDir dir("plymiss");
  const std::vector<std::string> props{"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "scale_0", "scale_1", "scale_2",
                                       "rot_0", "rot_1", "rot_2", "rot_3"};
  write_raw(dir / "m.ply", ply_header(props, 1), std::vector<float>(props.size(), 0.5f));
  try {
    read_ply(dir / "m.ply");
    FAIL() << "expected IoError";
  } catch (const IoError &e) {
    EXPECT_NE(std::string(e.what()).find("opacity"), std::string::npos);
    EXPECT_NE(e.file().find("m.ply"), std::string::npos);
  }
}

TEST(Ply, RejectsAsciiAndTruncated) {
  TempDir dir("plybad");
  write_raw(dir / "ascii.ply", ply_header({"x", "y", "z"}, 1, "ascii"), {});
  EXPECT_THROW(read_ply_vertices(dir / "ascii.ply"), IoError);
  write_raw(dir / "big.ply", ply_header({"x", "y", "z"}, 1, "binary_big_endian"), {1, 2, 3});
  EXPECT_THROW(read_ply_vertices(dir / "big.ply"), IoError);
  write_raw(dir / "short.ply", ply_header({"x", "y", "z"}, 4), std::vector<float>(11, 1.0f));
  EXPECT_THROW(read_ply_vertices(dir / "short.ply"), IoError);
  write_raw(dir / "huge.ply", ply_header({"x", "y", "z"}, 2000000000), std::vector<float>(3, 1.0f));
  EXPECT_THROW(read_ply_vertices(dir / "huge.ply"), IoError);
  EXPECT_THROW(read_ply_vertices(dir / "absent.ply"), IoError);
}

TEST(Points, RoundTripColors) {
  TempDir dir("pts");
  ColoredPoints p;
  p.positions = {Vec3(1, 2, 3), Vec3(-1, 0.5, 0.25)};
  p.colors = {Vec3(1, 0, 0), Vec3(0.2, 0.4, 0.6)};
  write_points(dir / "p.ply", p);
  const ColoredPoints back = read_points(dir / "p.ply");
  ASSERT_EQ(back.positions.size(), 2u);
  EXPECT_EQ(back.positions[1], p.positions[1]);
  for (int c = 0; c < 3; ++c)
    EXPECT_NEAR(back.colors[1](c), std::lround(p.colors[1](c) * 255) / 255.0, 1e-12);
}

TEST(Pfm, RoundTripBitExact) {
  TempDir dir("pfm");
  Rng rng(5);
  std::uniform_real_distribution<float> u(-100, 100);
  Image m(7, 5);
  for (auto &v : m.data)
    v = u(rng);
  write_pfm(dir / "m.pfm", m);
  const Image back = read_pfm(dir / "m.pfm");
  ASSERT_TRUE(back.same_shape(m));
  EXPECT_EQ(back.data, m.data);
}

TEST(Pfm, OneByOneLayout) {
  TempDir dir("pfm1");
  write_pfm(dir / "one.pfm", Image(1, 1, 1, 0.25));
  const std::vector<std::uint8_t> bytes = read_bytes(dir / "one.pfm");
  const std::vector<std::uint8_t> expect{'P', 'f', '\n', '1', ' ', '1', '\n', '-', '1', '.', '0', '\n',
                                         0x00, 0x00, 0x80, 0x3e};
  EXPECT_EQ(bytes, expect);
  EXPECT_EQ(pfm_header(1, 1).size(), 12u);
  EXPECT_EQ(read_pfm(dir / "one.pfm").data[0], 0.25);
}

TEST(Pfm, RowsStoredBottomUp) {
  TempDir dir("pfmrows");
  Image m(1, 2);
  m.at(0, 0) = 1.0; // top row
  m.at(0, 1) = 2.0;
  write_pfm(dir / "r.pfm", m);
  const std::vector<std::uint8_t> bytes = read_bytes(dir / "r.pfm");
  float first = 0;
  std::memcpy(&first, bytes.data() + pfm_header(1, 2).size(), 4);
  EXPECT_EQ(first, 2.0f);
}

TEST(Pfm, RejectsColorBadMagicAndNaN) {
  TempDir dir("pfmbad");
  const std::string color = "PF\n1 1\n-1.0\n";
  std::string bytes = color + std::string(12, '\0');
  write_bytes(dir / "c.pfm", bytes.data(), bytes.size());
  EXPECT_THROW(read_pfm(dir / "c.pfm"), IoError);
  write_text(dir / "x.pfm", "P6\n1 1\n255\n...");
  EXPECT_THROW(read_pfm(dir / "x.pfm"), IoError);
  Image nan_map(2, 2);
  nan_map.data[3] = std::nan("");
  EXPECT_THROW(write_pfm(dir / "n.pfm", nan_map), InvalidArgument);
  EXPECT_FALSE(fs::exists(dir / "n.pfm"));
}

TEST(Pfm, BigEndianScaleIsSwapped) {
  TempDir dir("pfmbe");
  std::string bytes = "Pf\n1 1\n1.0\n";
  bytes += std::string("\x3e\x80\x00\x00", 4);
  write_bytes(dir / "be.pfm", bytes.data(), bytes.size());
  EXPECT_EQ(read_pfm(dir / "be.pfm").data[0], 0.25);
}

TEST(F32, RoundTrip) {
  TempDir dir("f32");
  const std::vector<float> v{0.0f, -1.5f, 3.25e-7f, 1e30f};
  write_f32(dir / "v.f32", v);
  EXPECT_EQ(read_f32(dir / "v.f32"), v);
  EXPECT_EQ(fs::file_size(dir / "v.f32"), 16u);
  const char odd[3] = {1, 2, 3};
  write_bytes(dir / "odd.f32", odd, 3);
  EXPECT_THROW(read_f32(dir / "odd.f32"), IoError);
}

TEST(Png, RoundTripQuantized) {
  TempDir dir("png");
  Rng rng(6);
  std::uniform_int_distribution<int> u(0, 255);
  Image img(9, 4, 3);
  for (auto &v : img.data)
    v = u(rng) / 255.0;
  write_png(dir / "i.png", img);
  const Image back = read_png(dir / "i.png");
  ASSERT_TRUE(back.same_shape(img));
  for (std::size_t i = 0; i < img.data.size(); ++i)
    EXPECT_NEAR(back.data[i], img.data[i], 1e-12);
  Image gray(3, 3, 1, 0.5);
  write_png(dir / "g.png", gray);
  const Image g = read_png(dir / "g.png");
  EXPECT_EQ(g.channels, 3);
  EXPECT_NEAR(g.data[4], 128 / 255.0, 1e-12);
  write_text(dir / "bad.png", "not a png");
  EXPECT_THROW(read_png(dir / "bad.png"), IoError);
}

TEST(Cameras, RoundTripNine) {
  TempDir dir("cams");
  const auto cams = nine_cameras();
  write_cameras(dir / "c.json", cams);
  const auto back = read_cameras(dir / "c.json");
  ASSERT_EQ(back.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(back[i].width, cams[i].width);
    EXPECT_NEAR(back[i].fx, cams[i].fx, 1e-9);
    EXPECT_NEAR(back[i].cx, cams[i].cx, 1e-9);
    EXPECT_LT((back[i].rotation - cams[i].rotation).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((back[i].translation - cams[i].translation).norm(), 1e-9);
  }
}

TEST(Cameras, RejectsReflectionAndUnknownConvention) {
  TempDir dir("camsbad");
  write_text(dir / "r.json", camera_json(Vec3(1, 1, -1).asDiagonal(), "forward_+z"));
  EXPECT_THROW(read_cameras(dir / "r.json"), Error);
  write_text(dir / "u.json", camera_json(Mat3::Identity(), "forward_+y"));
  EXPECT_THROW(read_cameras(dir / "u.json"), Error);
  Mat3 skew = Mat3::Identity();
  skew(0, 1) = 0.01;
  write_text(dir / "s.json", camera_json(skew, "forward_+z"));
  EXPECT_THROW(read_cameras(dir / "s.json"), Error);
}

TEST(Cameras, SmallErrorsRepaired) {
  Mat3 r = so3_exp(Vec3(0.3, 0.2, -0.1));
  r(0, 0) += 1e-5;
  const Mat3 s = sanitize_rotation(r);
  EXPECT_LT((s.transpose() * s - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((s - r).cwiseAbs().maxCoeff(), 1e-4);
  const Mat3 exact = so3_exp(Vec3(0.1, 0.1, 0.1));
  EXPECT_EQ(sanitize_rotation(exact), exact);
}

TEST(Cameras, ForwardMinusZFlipsPluckerDirection) {
  TempDir dir("camsconv");
  const Mat3 r = so3_exp(Vec3(0.2, -0.4, 0.3));
  write_text(dir / "p.json", camera_json(r, "forward_+z"));
  write_text(dir / "m.json", camera_json(r, "forward_-z"));
  const CameraView plus = read_cameras(dir / "p.json")[0];
  const CameraView minus = read_cameras(dir / "m.json")[0];
  const PluckerRay a = plucker_from_camera(plus), b = plucker_from_camera(minus);
  EXPECT_LT((a.direction + b.direction).norm(), 1e-9);
  EXPECT_LT((plus.center() - minus.center()).norm(), 1e-9);
  EXPECT_NEAR(minus.rotation.determinant(), 1.0, 1e-9);
}

TEST(Rgbd, RoundTripWithMissingDepth) {
  TempDir dir("rgbd");
  RgbdImage img(4, 3);
  img.rgb = Image(4, 3, 3, 1.0);
  img.depth.at(2, 1) = 1.5;
  write_rgbd(dir / "a.png", dir / "a_depth.pfm", img);
  const RgbdImage back = read_rgbd(dir / "a.png", dir / "a_depth.pfm");
  EXPECT_EQ(back.depth.data, img.depth.data);
  const RgbdImage no_depth = read_rgbd(dir / "a.png", dir / "none.pfm");
  EXPECT_EQ(no_depth.depth.data, Image(4, 3).data);
}

TEST(Hash, StableAndSensitive) {
  TempDir dir("hash");
  write_text(dir / "a", "hello");
  write_text(dir / "b", "hellp");
  EXPECT_EQ(hash_file(dir / "a"), hash_file(dir / "a"));
  EXPECT_NE(hash_file(dir / "a"), hash_file(dir / "b"));
  // FNV-1a 64 of the empty input is the offset basis
  write_text(dir / "e", "");
  EXPECT_EQ(hash_file(dir / "e"), "cbf29ce484222325");
}

// Truncations and byte flips of valid files either parse or raise a typed error naming the file.
TEST(Fuzz, MalformedInputsRaiseTypedErrors) {
  TempDir dir("fuzz");
  RandomCloudOptions opts;
  opts.sh_degree = 3;
  write_ply(dir / "ok.ply", random_cloud(5, 9, opts));
  write_pfm(dir / "ok.pfm", Image(3, 2, 1, 0.5));
  write_cameras(dir / "ok.json", nine_cameras());
  const std::vector<std::pair<std::string, std::function<void(const fs::path &)>>> readers{
      {"ok.ply", [](const fs::path &p) { read_ply(p); }},
      {"ok.pfm", [](const fs::path &p) { read_pfm(p); }},
      {"ok.json", [](const fs::path &p) { read_cameras(p); }},
  };
  Rng rng(99);
  int typed = 0;
  for (const auto &[name, reader] : readers) {
    const std::vector<std::uint8_t> good = read_bytes(dir / name);
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<std::uint8_t> bad = good;
      if (trial % 2 == 0) {
        bad.resize(std::uniform_int_distribution<std::size_t>(0, good.size() - 1)(rng));
      } else {
        const int flips = 1 + trial % 5;
        for (int f = 0; f < flips; ++f)
          bad[std::uniform_int_distribution<std::size_t>(0, bad.size() - 1)(rng)] =
              static_cast<std::uint8_t>(std::uniform_int_distribution<int>(0, 255)(rng));
      }
      const fs::path p = dir / ("mut_" + name);
      write_bytes(p, bad.data(), bad.size());
      try {
        reader(p);
      } catch (const IoError &e) {
        EXPECT_NE(e.file().find("mut_"), std::string::npos) << e.what();
        ++typed;
      } catch (const Error &) {
        ++typed; // validation failure on a parsed value
      } catch (const std::exception &e) {
        ADD_FAILURE() << name << " trial " << trial << ": untyped " << e.what();
      }
    }
  }
  EXPECT_GT(typed, 300);
}
