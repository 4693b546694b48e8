#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "textvol/image.hpp"

namespace textvol {

constexpr double kPsnrCap = 99.0;  // sentinel for zero-MSE patches

// Translation-tolerant PSNR: the image is split into grid x grid patches,
// each patch of `test` is translated within [-search, search]^2 against
// `reference`, and the PSNR comes from the mean of per-patch minimal MSEs
// over masked pixels. Peak = 1.0.
inline double psnr_patch(const Image8& test, const Image8& reference,
                         const std::vector<uint8_t>& mask, int grid = 16, int search = 4) {
  if (test.width != reference.width || test.height != reference.height)
    throw ContractError("psnr_patch: image sizes differ");
  const int W = test.width, H = test.height;
  bool any = false;
  for (uint8_t m : mask) any = any || m;
  if (!any) throw ContractError("psnr_patch: empty mask");

  double mse_sum = 0;
  long mse_px = 0;
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      int x0 = gx * W / grid, x1 = (gx + 1) * W / grid;
      int y0 = gy * H / grid, y1 = (gy + 1) * H / grid;
      double best = -1;
      long best_n = 0;
      for (int dy = -search; dy <= search; ++dy) {
        for (int dx = -search; dx <= search; ++dx) {
          double acc = 0;
          long n = 0;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
              if (!mask[size_t(y) * W + x]) continue;
              if (x + dx < 0 || y + dy < 0 || x + dx >= W || y + dy >= H) continue;
              for (int c = 0; c < 3; ++c) {
                double d = (test.at(x + dx, y + dy, c) - reference.at(x, y, c)) / 255.0;
                acc += d * d;
              }
              ++n;
            }
          if (n == 0) continue;
          double mse = acc / (3.0 * n);
          if (best < 0 || mse < best) {
            best = mse;
            best_n = n;
          }
        }
      }
      if (best >= 0) {
        mse_sum += best * best_n;
        mse_px += best_n;
      }
    }
  }
  if (mse_px == 0) throw ContractError("psnr_patch: empty mask");
  double mse = mse_sum / double(mse_px);
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

// No-reference perceptual blur estimate: re-blur with a strong low-pass
// and compare neighboring-pixel variation before and after, horizontally
// and vertically. 0 = sharp, 1 = maximally blurred. Ratio-based, so it is
// invariant to global brightness scaling. Constant images define to 1.
inline double blurriness(const Image& gray) {
  const int W = gray.width, H = gray.height;
  Image b_hor = box_blur_1d(gray, 9, true);
  Image b_ver = box_blur_1d(gray, 9, false);
  double s_f_hor = 0, s_v_hor = 0, s_f_ver = 0, s_v_ver = 0;
  for (int y = 1; y < H; ++y)
    for (int x = 1; x < W; ++x) {
      double d_f_hor = std::abs(gray.at(x, y) - gray.at(x - 1, y));
      double d_b_hor = std::abs(b_hor.at(x, y) - b_hor.at(x - 1, y));
      double d_f_ver = std::abs(gray.at(x, y) - gray.at(x, y - 1));
      double d_b_ver = std::abs(b_ver.at(x, y) - b_ver.at(x, y - 1));
      s_f_hor += d_f_hor;
      s_v_hor += std::max(0.0, d_f_hor - d_b_hor);
      s_f_ver += d_f_ver;
      s_v_ver += std::max(0.0, d_f_ver - d_b_ver);
    }
  if (s_f_hor <= 0 && s_f_ver <= 0) return 1.0;  // no edges at all
  double blur_hor = s_f_hor > 0 ? (s_f_hor - s_v_hor) / s_f_hor : 1.0;
  double blur_ver = s_f_ver > 0 ? (s_f_ver - s_v_ver) / s_f_ver : 1.0;
  return std::max(blur_hor, blur_ver);
}

inline double blurriness(const Image8& rgb) { return blurriness(luma(rgb)); }

}  // namespace textvol
