#include "gscenes/losses.hpp"
#include "gscenes/render.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gscenes;
using namespace testing_util;

namespace {

Image random_image(int w, int h, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image img(w, h, c);
  for (auto &v : img.data)
    v = u(rng);
  return img;
}

std::vector<char> full_mask(const Image &img) { return std::vector<char>(img.data.size(), 1); }

// Direct 11x11 windowed SSIM, no separability, zero padding outside the image.
double ssim_oracle(const Image &a, const Image &b) {
  double k[11], ks = 0;
  for (int i = 0; i < 11; ++i) {
    k[i] = std::exp(-(i - 5) * (i - 5) / (2 * 1.5 * 1.5));
    ks += k[i];
  }
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int j = -5; j <= 5; ++j)
          for (int i = -5; i <= 5; ++i) {
            const int xx = x + i, yy = y + j;
            if (xx < 0 || yy < 0 || xx >= a.width || yy >= a.height)
              continue;
            const double wgt = k[i + 5] * k[j + 5] / (ks * ks);
            const double va = a.at(xx, yy, c), vb = b.at(xx, yy, c);
            mx += wgt * va;
            my += wgt * vb;
            sxx += wgt * va * va;
            syy += wgt * vb * vb;
            sxy += wgt * va * vb;
          }
        const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
        total += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
  return total / (static_cast<double>(a.pixels()) * a.channels);
}

RenderOutput render_like(int w, int h, std::uint64_t seed) {
  RenderOutput r(w, h);
  r.rgb = random_image(w, h, 3, seed);
  r.depth = random_image(w, h, 1, seed + 1, 1.0, 4.0);
  r.accum_alpha = random_image(w, h, 1, seed + 2, 0.2, 1.0);
  return r;
}

// Target whose rgb differs from `r` by at least 0.05 per element, so L1 stays smooth under small steps.
RgbdImage separated_target(const RenderOutput &r, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> mag(0.05, 0.3);
  std::bernoulli_distribution sign(0.5);
  RgbdImage t(r.width(), r.height());
  for (std::size_t i = 0; i < t.rgb.data.size(); ++i)
    t.rgb.data[i] = r.rgb.data[i] + (sign(rng) ? mag(rng) : -mag(rng));
  t.depth = random_image(r.width(), r.height(), 1, seed + 7, 1.0, 4.0);
  return t;
}

// Largest |analytic - numeric| over the largest |numeric| for every rgb and depth entry.
template <typename LossFn> double fd_relative_error(RenderOutput r, const LossFn &loss) {
  const Image analytic = loss(r).grads;
  const double h = 1e-6;
  double worst = 0, scale = 0;
  for (std::size_t p = 0; p < r.rgb.pixels(); ++p)
    for (int c = 0; c < 4; ++c) {
      double &v = c < 3 ? r.rgb.data[p * 3 + c] : r.depth.data[p];
      const double saved = v;
      v = saved + h;
      const double lp = loss(r).value;
      v = saved - h;
      const double lm = loss(r).value;
      v = saved;
      const double numeric = (lp - lm) / (2 * h);
      worst = std::max(worst, std::abs(numeric - analytic.data[p * 4 + c]));
      scale = std::max(scale, std::abs(numeric));
    }
  return worst / scale;
}

} // namespace

TEST(Pcc, Examples) {
  const Image a = random_image(6, 5, 1, 1);
  Image affine = a, neg = a;
  double mean = 0;
  for (double v : a.data)
    mean += v;
  mean /= a.data.size();
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    affine.data[i] = 3 * a.data[i] + 7;
    neg.data[i] = -(a.data[i] - mean);
  }
  Image centered = a;
  for (auto &v : centered.data)
    v -= mean;
  EXPECT_NEAR(pcc_loss(a, a, full_mask(a)), 0.0, 1e-12);
  EXPECT_NEAR(pcc_loss(a, affine, full_mask(a)), 0.0, 1e-12);
  EXPECT_NEAR(pcc_loss(centered, neg, full_mask(a)), 2.0, 1e-12);
}

TEST(Pcc, AffineInvarianceAndSymmetry) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Image a = random_image(7, 7, 1, 100 + s), b = random_image(7, 7, 1, 200 + s);
    const double base = pcc_loss(a, b, full_mask(a));
    EXPECT_GE(base, 0.0);
    EXPECT_LE(base, 2.0);
    EXPECT_NEAR(pcc_loss(b, a, full_mask(a)), base, 1e-12);
    Image ta = a, tb = b;
    for (auto &v : ta.data)
      v = 2.5 * v - 4.0;
    for (auto &v : tb.data)
      v = 0.3 * v + 11.0;
    EXPECT_NEAR(pcc_loss(ta, tb, full_mask(a)), base, 1e-9);
  }
}

TEST(Pcc, MaskSelectsPixels) {
  Image a = random_image(4, 4, 1, 3), b = a;
  std::vector<char> mask(16, 1);
  // corrupt unmasked pixels only
  for (int i = 0; i < 4; ++i) {
    b.data[i] = 100.0 * (i + 1);
    mask[i] = 0;
  }
  EXPECT_NEAR(pcc_loss(a, b, mask), 0.0, 1e-12);
}

TEST(Pcc, DegenerateInputsThrow) {
  const Image a = random_image(4, 4, 1, 4);
  const Image flat(4, 4, 1, 0.5);
  EXPECT_THROW(pcc_loss(a, flat, full_mask(a)), NumericalError);
  std::vector<char> one(16, 0);
  one[3] = 1;
  EXPECT_THROW(pcc_loss(a, a, one), NumericalError);
  EXPECT_THROW(pcc_loss(a, Image(3, 4), full_mask(a)), InvalidArgument);
}

TEST(Pcc, GradientMatchesFiniteDifferences) {
  Image a = random_image(5, 5, 1, 8), b = random_image(5, 5, 1, 9);
  std::vector<char> mask = full_mask(a);
  mask[7] = 0;
  Image g;
  pcc_loss_grad(a, b, mask, g);
  EXPECT_EQ(g.data[7], 0.0);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double saved = a.data[i];
    a.data[i] = saved + 1e-6;
    const double p = pcc_loss(a, b, mask);
    a.data[i] = saved - 1e-6;
    const double m = pcc_loss(a, b, mask);
    a.data[i] = saved;
    EXPECT_NEAR(g.data[i], (p - m) / 2e-6, 1e-7);
  }
}

TEST(Schedule, EndpointsAndMidpoint) {
  const LossWeights w;
  EXPECT_EQ(w.depth.at(0), 1.0);
  EXPECT_EQ(w.depth.at(10000), 0.01);
  EXPECT_EQ(w.depth.at(20000), 0.01);
  EXPECT_NEAR(w.depth.at(5000), 0.505, 1e-15);
  EXPECT_EQ(w.sample.at(0), 1.0);
  EXPECT_EQ(w.sample.at(10000), 0.1);
  EXPECT_NEAR(w.sample.at(5000), 0.55, 1e-15);
  const LossWeights short_run = w.with_horizon(100);
  EXPECT_EQ(short_run.depth.at(100), 0.01);
}

TEST(Schedule, ValidateRejectsBadWeights) {
  LossWeights w;
  w.perceptual = 0.1;
  EXPECT_THROW(w.validate(), InvalidArgument);
  w = LossWeights{};
  w.depth.horizon = 0;
  EXPECT_THROW(w.validate(), InvalidArgument);
  w = LossWeights{};
  w.sample.end = -1;
  EXPECT_THROW(w.validate(), InvalidArgument);
}

TEST(SampleLoss, IdenticalIsZero) {
  const RenderOutput r = render_like(8, 8, 1);
  const LossResult l = sample_loss(r, r.to_rgbd(), LossWeights{}, 0);
  EXPECT_NEAR(l.value, 0.0, 1e-12);
}

TEST(SampleLoss, WeightsFollowSchedule) {
  const RenderOutput r = render_like(8, 8, 2);
  const RgbdImage t = separated_target(r, 3);
  const LossWeights w;
  std::vector<char> mask(64, 1);
  const double l1 = l1_loss(r.rgb, t.rgb), pcc = pcc_loss(r.depth, t.depth, mask);
  EXPECT_NEAR(sample_loss(r, t, w, 0).value, l1 + pcc, 1e-12);
  EXPECT_NEAR(sample_loss(r, t, w, 5000).value, 0.55 * l1 + 0.505 * pcc, 1e-12);
  EXPECT_NEAR(sample_loss(r, t, w, 10000).value, 0.1 * l1 + 0.01 * pcc, 1e-12);
}

TEST(SampleLoss, DepthMaskedByAccumulatedAlpha) {
  RenderOutput r = render_like(8, 8, 4);
  RgbdImage t = separated_target(r, 5);
  r.accum_alpha.data[10] = 0.0;
  std::vector<char> mask(64, 1);
  mask[10] = 0;
  const double expect = l1_loss(r.rgb, t.rgb) + pcc_loss(r.depth, t.depth, mask);
  const LossResult l = sample_loss(r, t, LossWeights{}, 0);
  EXPECT_NEAR(l.value, expect, 1e-12);
  EXPECT_EQ(l.grads.at(10 % 8, 10 / 8, 3), 0.0);
  t.depth.data[10] = 1e6;
  EXPECT_NEAR(sample_loss(r, t, LossWeights{}, 0).value, expect, 1e-12);
}

TEST(SampleLoss, FlatDepthFallsBackToL1) {
  RenderOutput r = render_like(8, 8, 6);
  RgbdImage t = separated_target(r, 7);
  r.depth = Image(8, 8, 1, 2.0);
  double depth_l1 = 0;
  for (double v : t.depth.data)
    depth_l1 += std::abs(2.0 - v);
  depth_l1 /= 64;
  EXPECT_NEAR(sample_loss(r, t, LossWeights{}, 0).value, l1_loss(r.rgb, t.rgb) + depth_l1, 1e-12);
}

TEST(SampleLoss, ShapeMismatchThrows) {
  const RenderOutput r = render_like(8, 8, 8);
  EXPECT_THROW(sample_loss(r, RgbdImage(8, 7), LossWeights{}, 0), InvalidArgument);
  EXPECT_THROW(gaussian_loss(r, RgbdImage(7, 8)), InvalidArgument);
}

TEST(SampleLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const RenderOutput r = render_like(8, 8, 10 + s);
    const RgbdImage t = separated_target(r, 20 + s);
    for (int iter : {0, 2500, 10000}) {
      const double err = fd_relative_error(r, [&](const RenderOutput &x) { return sample_loss(x, t, LossWeights{}, iter); });
      EXPECT_LT(err, 1e-4) << "seed " << s << " iter " << iter;
    }
  }
}

TEST(GaussianLoss, IdenticalIsZero) {
  const RenderOutput r = render_like(8, 8, 30);
  EXPECT_NEAR(gaussian_loss(r, r.to_rgbd()).value, 0.0, 1e-12);
  EXPECT_NEAR(ssim(r.rgb, r.rgb), 1.0, 1e-12);
}

TEST(GaussianLoss, ConstantOffsetL1Term) {
  RenderOutput r(16, 16);
  r.rgb = Image(16, 16, 3, 0.4);
  RgbdImage t(16, 16);
  t.rgb = Image(16, 16, 3, 0.5);
  const double l = gaussian_loss(r, t).value;
  EXPECT_NEAR(l, 0.8 * 0.1 + 0.2 * (1.0 - ssim_oracle(r.rgb, t.rgb)), 1e-12);
  EXPECT_NEAR(0.8 * l1_loss(r.rgb, t.rgb), 0.08, 1e-12);
}

TEST(GaussianLoss, GradientMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const RenderOutput r = render_like(8, 8, 40 + s);
    const RgbdImage t = separated_target(r, 50 + s);
    EXPECT_LT(fd_relative_error(r, [&](const RenderOutput &x) { return gaussian_loss(x, t); }), 1e-4) << s;
  }
}

TEST(Ssim, MatchesDirectWindowOracle) {
  for (std::uint64_t s = 0; s < 4; ++s) {
    const Image a = random_image(13, 9, 3, 60 + s), b = random_image(13, 9, 3, 70 + s);
    EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-12);
  }
}

TEST(Ssim, GradientMatchesFiniteDifferences) {
  Image a = random_image(9, 7, 3, 80);
  const Image b = random_image(9, 7, 3, 81);
  Image g;
  ssim_grad(a, b, g);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double saved = a.data[i];
    a.data[i] = saved + 1e-6;
    const double p = ssim(a, b);
    a.data[i] = saved - 1e-6;
    const double m = ssim(a, b);
    a.data[i] = saved;
    EXPECT_NEAR(g.data[i], (p - m) / 2e-6, 1e-8);
  }
}

TEST(Psnr, Examples) {
  const Image a(4, 4, 3, 0.2);
  Image b = a;
  for (auto &v : b.data)
    v += 0.1; // MSE 0.01
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
  EXPECT_NEAR(psnr(Image(4, 4, 3, 0.0), Image(4, 4, 3, 1.0)), 0.0, 1e-12);
  EXPECT_THROW(psnr(a, Image(4, 4, 1)), InvalidArgument);
}

TEST(TvDepth, Examples) {
  EXPECT_EQ(tv_depth(Image(8, 8, 1, 3.0)), 0.0);
  Image step(8, 8, 1, 0.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x)
      step.at(x, y) = 1.0;
  // oracle: count forward differences directly
  int diffs = 0, terms = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      if (x + 1 < 8) {
        ++terms;
        diffs += step.at(x + 1, y) != step.at(x, y);
      }
      if (y + 1 < 8) {
        ++terms;
        diffs += step.at(x, y + 1) != step.at(x, y);
      }
    }
  ASSERT_EQ(terms, 112);
  EXPECT_DOUBLE_EQ(tv_depth(step), static_cast<double>(diffs) / terms);
  EXPECT_DOUBLE_EQ(tv_depth(step), 8.0 / 112.0);
  EXPECT_THROW(tv_depth(Image(1, 8)), InvalidArgument);
}

TEST(TvDepth, PositiveHomogeneity) {
  const Image d = random_image(9, 6, 1, 90);
  Image scaled = d;
  for (auto &v : scaled.data)
    v *= 3.5;
  EXPECT_NEAR(tv_depth(scaled), 3.5 * tv_depth(d), 1e-12);
}
