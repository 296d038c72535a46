#include "gscenes/losses.hpp"
#include "gscenes/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace gscenes {

double LinearSchedule::at(int iter) const {
  if (iter <= 0)
    return start;
  if (iter >= horizon)
    return end;
  const double t = static_cast<double>(iter) / horizon;
  return start + (end - start) * t;
}

void LossWeights::validate() const {
  for (const auto *s : {&sample, &depth}) {
    if (s->start < 0 || s->end < 0)
      throw InvalidArgument("LossWeights: weights must be >= 0");
    if (s->horizon <= 0)
      throw InvalidArgument("LossWeights: horizon must be > 0");
  }
  if (perceptual != 0.0)
    throw InvalidArgument("LossWeights: no perceptual network is available; weight must be 0");
}

LossWeights LossWeights::with_horizon(int horizon) const {
  LossWeights w = *this;
  w.sample.horizon = horizon;
  w.depth.horizon = horizon;
  return w;
}

namespace {

void require_same(const Image &a, const Image &b, const char *what) {
  if (!a.same_shape(b))
    throw InvalidArgument(std::string(what) + ": shape mismatch");
}

struct Moments {
  double mean_a = 0, mean_b = 0, var_a = 0, var_b = 0, cov = 0;
  std::size_t n = 0;
};

Moments masked_moments(const Image &a, const Image &b, const std::vector<char> &mask) {
  Moments m;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (mask[i]) {
      m.mean_a += a.data[i];
      m.mean_b += b.data[i];
      ++m.n;
    }
  if (m.n < 2)
    throw NumericalError("pcc_loss: fewer than 2 masked pixels");
  m.mean_a /= m.n;
  m.mean_b /= m.n;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (mask[i]) {
      const double da = a.data[i] - m.mean_a, db = b.data[i] - m.mean_b;
      m.var_a += da * da;
      m.var_b += db * db;
      m.cov += da * db;
    }
  m.var_a /= m.n;
  m.var_b /= m.n;
  m.cov /= m.n;
  if (!(m.var_a > 0) || !(m.var_b > 0))
    throw NumericalError("pcc_loss: zero variance");
  return m;
}

} // namespace

double pcc_loss(const Image &a, const Image &b, const std::vector<char> &mask) {
  require_same(a, b, "pcc_loss");
  if (mask.size() != a.data.size())
    throw InvalidArgument("pcc_loss: mask size mismatch");
  const Moments m = masked_moments(a, b, mask);
  return 1.0 - m.cov / std::sqrt(m.var_a * m.var_b);
}

double pcc_loss_grad(const Image &a, const Image &b, const std::vector<char> &mask, Image &grad_a) {
  require_same(a, b, "pcc_loss");
  if (mask.size() != a.data.size())
    throw InvalidArgument("pcc_loss: mask size mismatch");
  const Moments m = masked_moments(a, b, mask);
  const double sa = std::sqrt(m.var_a), sb = std::sqrt(m.var_b);
  const double r = m.cov / (sa * sb);
  grad_a = Image(a.width, a.height, a.channels);
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (mask[i]) {
      const double da = a.data[i] - m.mean_a, db = b.data[i] - m.mean_b;
      const double dr = (db / (sa * sb) - r * da / m.var_a) / m.n;
      grad_a.data[i] = -dr;
    }
  return 1.0 - r;
}

double l1_loss(const Image &a, const Image &b) {
  require_same(a, b, "l1_loss");
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    s += std::abs(a.data[i] - b.data[i]);
  return a.data.empty() ? 0.0 : s / a.data.size();
}

// ---------------------------------------------------------------------------
// SSIM

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_kernel() {
  std::array<double, kWindow> k{};
  double s = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double x = i - kWindow / 2;
    k[i] = std::exp(-x * x / (2 * kSigma * kSigma));
    s += k[i];
  }
  for (auto &v : k)
    v /= s;
  return k;
}

// Separable "same" filter on a single-channel plane with zero padding. The
// kernel is symmetric, so this operator is its own adjoint.
std::vector<double> blur(const std::vector<double> &src, int w, int h) {
  static const auto k = gaussian_kernel();
  constexpr int r = kWindow / 2;
  std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w)
          s += k[i + r] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h)
          s += k[i + r] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

std::vector<double> channel(const Image &img, int c) {
  std::vector<double> out(img.pixels());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = img.data[i * img.channels + c];
  return out;
}

double ssim_impl(const Image &a, const Image &b, Image *grad_a) {
  require_same(a, b, "ssim");
  const int w = a.width, h = a.height;
  const std::size_t n = a.pixels();
  if (n == 0)
    return 1.0;
  if (grad_a)
    *grad_a = Image(w, h, a.channels);
  const double norm = 1.0 / (static_cast<double>(n) * a.channels);
  double total = 0;
  for (int c = 0; c < a.channels; ++c) {
    const auto x = channel(a, c), y = channel(b, c);
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = blur(x, w, h), my = blur(y, w, h);
    const auto sxx = blur(xx, w, h), syy = blur(yy, w, h), sxy = blur(xy, w, h);
    std::vector<double> d_mx(n), d_sxx(n), d_sxy(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      const double l_num = 2 * mx[i] * my[i] + kC1, l_den = mx[i] * mx[i] + my[i] * my[i] + kC1;
      const double c_num = 2 * cxy + kC2, c_den = vx + vy + kC2;
      const double s = (l_num * c_num) / (l_den * c_den);
      total += s;
      if (!grad_a)
        continue;
      // partials of s w.r.t. mu_x, var_x, cov_xy
      const double ds_dmx = (2 * my[i] * c_num) / (l_den * c_den) - s * 2 * mx[i] / l_den;
      const double ds_dvx = -s / c_den;
      const double ds_dcxy = 2 * l_num / (l_den * c_den);
      // var_x = E[x^2] - mu_x^2, cov = E[xy] - mu_x mu_y
      d_mx[i] = ds_dmx - 2 * mx[i] * ds_dvx - my[i] * ds_dcxy;
      d_sxx[i] = ds_dvx;
      d_sxy[i] = ds_dcxy;
    }
    if (grad_a) {
      const auto g_mx = blur(d_mx, w, h), g_sxx = blur(d_sxx, w, h), g_sxy = blur(d_sxy, w, h);
      for (std::size_t i = 0; i < n; ++i)
        grad_a->data[i * a.channels + c] = norm * (g_mx[i] + 2 * x[i] * g_sxx[i] + y[i] * g_sxy[i]);
    }
  }
  return total * norm;
}

} // namespace

double ssim(const Image &a, const Image &b) { return ssim_impl(a, b, nullptr); }

double ssim_grad(const Image &a, const Image &b, Image &grad_a) { return ssim_impl(a, b, &grad_a); }

double psnr(const Image &a, const Image &b) {
  require_same(a, b, "psnr");
  double mse = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= std::max<std::size_t>(1, a.data.size());
  if (mse <= 0)
    return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double tv_depth(const Image &d) {
  if (d.width < 2 || d.height < 2)
    throw InvalidArgument("tv_depth: map must be at least 2x2");
  double s = 0;
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x + 1 < d.width; ++x)
      s += std::abs(d.at(x + 1, y) - d.at(x, y));
  for (int y = 0; y + 1 < d.height; ++y)
    for (int x = 0; x < d.width; ++x)
      s += std::abs(d.at(x, y + 1) - d.at(x, y));
  const double terms = static_cast<double>(d.height) * (d.width - 1) + static_cast<double>(d.height - 1) * d.width;
  return s / terms;
}

namespace {

// Adds scale * d L1(a, b)/d a into channels [c0, c0 + a.channels) of grads; returns L1.
double l1_into(const Image &a, const Image &b, double scale, Image &grads, int c0) {
  const double n = static_cast<double>(a.data.size());
  double s = 0;
  for (std::size_t p = 0; p < a.pixels(); ++p)
    for (int c = 0; c < a.channels; ++c) {
      const std::size_t i = p * a.channels + c;
      const double d = a.data[i] - b.data[i];
      s += std::abs(d);
      const double sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
      grads.data[p * grads.channels + c0 + c] += scale * sign / n;
    }
  return s / n;
}

void require_rgbd(const RenderOutput &render, const RgbdImage &target, const char *what) {
  if (!render.rgb.same_shape(target.rgb) || !render.depth.same_shape(target.depth))
    throw InvalidArgument(std::string(what) + ": shape mismatch");
}

} // namespace

LossResult sample_loss(const RenderOutput &render, const RgbdImage &refined, const LossWeights &weights,
                       int iter) {
  require_rgbd(render, refined, "sample_loss");
  weights.validate();
  LossResult out;
  out.grads = Image(render.width(), render.height(), 4);
  const double w = weights.sample.at(iter), wd = weights.depth.at(iter);
  out.value = w * l1_into(render.rgb, refined.rgb, w, out.grads, 0);

  std::vector<char> mask(render.depth.data.size());
  std::size_t masked = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = render.accum_alpha.data[i] > 1e-6;
    masked += mask[i];
  }
  if (masked == 0 || wd == 0)
    return out;
  try {
    Image g;
    const double pcc = pcc_loss_grad(render.depth, refined.depth, mask, g);
    out.value += wd * pcc;
    for (std::size_t i = 0; i < g.data.size(); ++i)
      out.grads.data[i * 4 + 3] += wd * g.data[i];
  } catch (const NumericalError &) {
    double s = 0;
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) {
        const double d = render.depth.data[i] - refined.depth.data[i];
        s += std::abs(d);
        out.grads.data[i * 4 + 3] += wd * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / masked;
      }
    out.value += wd * s / masked;
  }
  return out;
}

LossResult gaussian_loss(const RenderOutput &render, const RgbdImage &target) {
  require_rgbd(render, target, "gaussian_loss");
  LossResult out;
  out.grads = Image(render.width(), render.height(), 4);
  const double l1 = l1_into(render.rgb, target.rgb, 1.0 - kSsimLambda, out.grads, 0);
  Image g;
  const double s = ssim_grad(render.rgb, target.rgb, g);
  for (std::size_t p = 0; p < render.rgb.pixels(); ++p)
    for (int c = 0; c < 3; ++c)
      out.grads.data[p * 4 + c] -= kSsimLambda * g.data[p * 3 + c];
  out.value = (1.0 - kSsimLambda) * l1 + kSsimLambda * (1.0 - s);
  return out;
}

LossResult photometric_l1(const RenderOutput &render, const RgbdImage &target) {
  if (!render.rgb.same_shape(target.rgb))
    throw InvalidArgument("photometric_l1: shape mismatch");
  LossResult out;
  out.grads = Image(render.width(), render.height(), 4);
  out.value = l1_into(render.rgb, target.rgb, 1.0, out.grads, 0);
  return out;
}

} // namespace gscenes
