#pragma once

#include "gscenes/core.hpp"

#include <vector>

namespace gscenes {

// start at iteration 0, end at `horizon` and beyond, linear in between.
struct LinearSchedule {
  double start = 1.0;
  double end = 1.0;
  int horizon = 10000;

  double at(int iter) const;
};

struct LossWeights {
  LinearSchedule sample{1.0, 0.1, 10000}; // w(t) on the RGB term of the novel-view objective
  LinearSchedule depth{1.0, 0.01, 10000}; // w_d on the depth PCC term
  double perceptual = 0.0;                // weight of the perceptual stub; must stay 0

  void validate() const;
  LossWeights with_horizon(int horizon) const;
};

struct LossResult {
  double value = 0;
  Image grads; // H x W x 4: d/d rgb (3), d/d depth (1)
};

// 1 - Pearson r over masked pixels. Throws NumericalError when either input
// has zero variance on the mask or fewer than 2 pixels are selected.
double pcc_loss(const Image &a, const Image &b, const std::vector<char> &mask);
// Value plus d/d a.
double pcc_loss_grad(const Image &a, const Image &b, const std::vector<char> &mask, Image &grad_a);

double l1_loss(const Image &a, const Image &b);

// Gaussian-window SSIM (11x11, sigma 1.5), zero padded, averaged over pixels and channels.
double ssim(const Image &a, const Image &b);
// Value plus d/d a.
double ssim_grad(const Image &a, const Image &b, Image &grad_a);

double psnr(const Image &a, const Image &b);
constexpr double kPsnrCap = 99.0;

double tv_depth(const Image &depth);

struct RenderOutput;

// Novel-view objective: w(iter) * L1(rgb) + w_d(iter) * PCC(depth) on pixels with
// defined rendered depth. Falls back to masked L1 on depth when PCC is undefined.
LossResult sample_loss(const RenderOutput &render, const RgbdImage &refined, const LossWeights &weights,
                       int iter);

// Reference photometric objective: (1 - lambda) L1 + lambda (1 - SSIM), lambda = 0.2.
constexpr double kSsimLambda = 0.2;
LossResult gaussian_loss(const RenderOutput &render, const RgbdImage &target);

// Plain L1 on rgb (pose alignment objective).
LossResult photometric_l1(const RenderOutput &render, const RgbdImage &target);

} // namespace gscenes
