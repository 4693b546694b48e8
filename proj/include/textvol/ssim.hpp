#pragma once

#include <cmath>
#include <vector>

#include "textvol/image.hpp"

namespace textvol {

// Windowed SSIM between two single-channel images on [0,1], restricted to
// pixels covered in both masks. Gaussian window statistics are normalized
// by the covered mass inside the window, so partial coverage stays valid.
// valid_out marks pixels where the statistics are defined.
inline Image masked_ssim_map(const Image& a, const Image& b, const std::vector<uint8_t>& mask_a,
                             const std::vector<uint8_t>& mask_b, int window,
                             std::vector<uint8_t>* valid_out) {
  if (window < 1 || window % 2 == 0) throw ConfigError("ssim window must be odd and positive");
  const int W = a.width, H = a.height;
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  const double sigma = 1.5 * window / 11.0;
  const int radius = window / 2;

  Image m(W, H, 1), ia(W, H, 1), ib(W, H, 1), iaa(W, H, 1), ibb(W, H, 1), iab(W, H, 1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      size_t i = size_t(y) * W + x;
      bool on = mask_a[i] && mask_b[i];
      m.at(x, y) = on ? 1.f : 0.f;
      float va = on ? a.at(x, y) : 0.f;
      float vb = on ? b.at(x, y) : 0.f;
      ia.at(x, y) = va;
      ib.at(x, y) = vb;
      iaa.at(x, y) = va * va;
      ibb.at(x, y) = vb * vb;
      iab.at(x, y) = va * vb;
    }
  Image gm = gaussian_blur(m, sigma, radius);
  Image ga = gaussian_blur(ia, sigma, radius);
  Image gb = gaussian_blur(ib, sigma, radius);
  Image gaa = gaussian_blur(iaa, sigma, radius);
  Image gbb = gaussian_blur(ibb, sigma, radius);
  Image gab = gaussian_blur(iab, sigma, radius);

  Image ssim(W, H, 1);
  if (valid_out) valid_out->assign(size_t(W) * H, 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      size_t i = size_t(y) * W + x;
      double mass = gm.at(x, y);
      if (!(mask_a[i] && mask_b[i]) || mass < 1e-8) continue;
      double mu_a = ga.at(x, y) / mass;
      double mu_b = gb.at(x, y) / mass;
      double var_a = std::max(0.0, gaa.at(x, y) / mass - mu_a * mu_a);
      double var_b = std::max(0.0, gbb.at(x, y) / mass - mu_b * mu_b);
      double cov = gab.at(x, y) / mass - mu_a * mu_b;
      double v = ((2 * mu_a * mu_b + C1) * (2 * cov + C2)) /
                 ((mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2));
      ssim.at(x, y) = float(v);
      if (valid_out) (*valid_out)[i] = 1;
    }
  return ssim;
}

// Plain global SSIM over the full frame (no window), used by tests.
inline double global_ssim(const Image& a, const Image& b) {
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  double mu_a = 0, mu_b = 0;
  size_t n = a.data.size();
  for (size_t i = 0; i < n; ++i) {
    mu_a += a.data[i];
    mu_b += b.data[i];
  }
  mu_a /= double(n);
  mu_b /= double(n);
  double va = 0, vb = 0, cov = 0;
  for (size_t i = 0; i < n; ++i) {
    va += (a.data[i] - mu_a) * (a.data[i] - mu_a);
    vb += (b.data[i] - mu_b) * (b.data[i] - mu_b);
    cov += (a.data[i] - mu_a) * (b.data[i] - mu_b);
  }
  va /= double(n);
  vb /= double(n);
  cov /= double(n);
  return ((2 * mu_a * mu_b + C1) * (2 * cov + C2)) /
         ((mu_a * mu_a + mu_b * mu_b + C1) * (va + vb + C2));
}

}  // namespace textvol
