#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "textvol/common.hpp"

namespace textvol {

// Planar-agnostic interleaved float image, values nominally in [0,1].
struct Image {
  int width = 0, height = 0, channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.f)
      : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

  float& at(int x, int y, int c = 0) {
    return data[(size_t(y) * width + x) * channels + c];
  }
  float at(int x, int y, int c = 0) const {
    return data[(size_t(y) * width + x) * channels + c];
  }
  bool inside(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }

  // Clamp-to-edge bilinear sample of one channel.
  float bilinear(double x, double y, int c = 0) const {
    x = clampd(x, 0.0, width - 1.0);
    y = clampd(y, 0.0, height - 1.0);
    int x0 = int(x), y0 = int(y);
    int x1 = std::min(x0 + 1, width - 1);
    int y1 = std::min(y0 + 1, height - 1);
    double fx = x - x0, fy = y - y0;
    double v00 = at(x0, y0, c), v10 = at(x1, y0, c);
    double v01 = at(x0, y1, c), v11 = at(x1, y1, c);
    return float((v00 * (1 - fx) + v10 * fx) * (1 - fy) +
                 (v01 * (1 - fx) + v11 * fx) * fy);
  }

  void bilinear_rgb(double x, double y, float out[3]) const {
    for (int c = 0; c < 3; ++c) out[c] = bilinear(x, y, c);
  }

  // d(sample)/dx, d(sample)/dy of the bilinear interpolant.
  void bilinear_grad(double x, double y, int c, float* gx, float* gy) const {
    x = clampd(x, 0.0, width - 1.0);
    y = clampd(y, 0.0, height - 1.0);
    int x0 = int(x), y0 = int(y);
    int x1 = std::min(x0 + 1, width - 1);
    int y1 = std::min(y0 + 1, height - 1);
    double fx = x - x0, fy = y - y0;
    double v00 = at(x0, y0, c), v10 = at(x1, y0, c);
    double v01 = at(x0, y1, c), v11 = at(x1, y1, c);
    *gx = float((v10 - v00) * (1 - fy) + (v11 - v01) * fy);
    *gy = float((v01 - v00) * (1 - fx) + (v11 - v10) * fx);
  }

  // Projection-convention sampling: stored value (x, y) sits at the pixel
  // center (x + 0.5, y + 0.5).
  float sample(double u, double v, int c = 0) const { return bilinear(u - 0.5, v - 0.5, c); }
  void sample_grad(double u, double v, int c, float* gx, float* gy) const {
    bilinear_grad(u - 0.5, v - 0.5, c, gx, gy);
  }
};

// 8-bit interleaved image (storage / I/O form).
struct Image8 {
  int width = 0, height = 0, channels = 0;
  std::vector<uint8_t> data;

  Image8() = default;
  Image8(int w, int h, int c, uint8_t fill = 0)
      : width(w), height(h), channels(c), data(size_t(w) * h * c, fill) {}

  uint8_t& at(int x, int y, int c = 0) {
    return data[(size_t(y) * width + x) * channels + c];
  }
  uint8_t at(int x, int y, int c = 0) const {
    return data[(size_t(y) * width + x) * channels + c];
  }

  float atf(int x, int y, int c = 0) const { return at(x, y, c) / 255.f; }

  // Clamp-to-edge bilinear on [0,1] scale.
  float bilinear(double x, double y, int c = 0) const {
    x = clampd(x, 0.0, width - 1.0);
    y = clampd(y, 0.0, height - 1.0);
    int x0 = int(x), y0 = int(y);
    int x1 = std::min(x0 + 1, width - 1);
    int y1 = std::min(y0 + 1, height - 1);
    double fx = x - x0, fy = y - y0;
    double v00 = atf(x0, y0, c), v10 = atf(x1, y0, c);
    double v01 = atf(x0, y1, c), v11 = atf(x1, y1, c);
    return float((v00 * (1 - fx) + v10 * fx) * (1 - fy) +
                 (v01 * (1 - fx) + v11 * fx) * fy);
  }

  void bilinear_rgb(double x, double y, float out[3]) const {
    for (int c = 0; c < 3; ++c) out[c] = bilinear(x, y, c);
  }

  void bilinear_grad(double x, double y, int c, float* gx, float* gy) const {
    x = clampd(x, 0.0, width - 1.0);
    y = clampd(y, 0.0, height - 1.0);
    int x0 = int(x), y0 = int(y);
    int x1 = std::min(x0 + 1, width - 1);
    int y1 = std::min(y0 + 1, height - 1);
    double fx = x - x0, fy = y - y0;
    double v00 = atf(x0, y0, c), v10 = atf(x1, y0, c);
    double v01 = atf(x0, y1, c), v11 = atf(x1, y1, c);
    *gx = float((v10 - v00) * (1 - fy) + (v11 - v01) * fy);
    *gy = float((v01 - v00) * (1 - fx) + (v11 - v10) * fx);
  }

  // Projection-convention sampling: stored value (x, y) sits at the pixel
  // center (x + 0.5, y + 0.5).
  float sample(double u, double v, int c = 0) const { return bilinear(u - 0.5, v - 0.5, c); }
  void sample_rgb(double u, double v, float out[3]) const {
    bilinear_rgb(u - 0.5, v - 0.5, out);
  }
  void sample_grad(double u, double v, int c, float* gx, float* gy) const {
    bilinear_grad(u - 0.5, v - 0.5, c, gx, gy);
  }
};

inline uint8_t to_byte(float v) {
  return uint8_t(clampd(std::lround(clampd(v, 0.f, 1.f) * 255.f), 0, 255));
}

inline Image to_float(const Image8& src) {
  Image dst(src.width, src.height, src.channels);
  for (size_t i = 0; i < src.data.size(); ++i) dst.data[i] = src.data[i] / 255.f;
  return dst;
}

inline Image8 to_byte(const Image& src) {
  Image8 dst(src.width, src.height, src.channels);
  for (size_t i = 0; i < src.data.size(); ++i) dst.data[i] = to_byte(src.data[i]);
  return dst;
}

// Rec. 601 luma.
inline Image luma(const Image8& rgb) {
  Image out(rgb.width, rgb.height, 1);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x)
      out.at(x, y) = 0.299f * rgb.atf(x, y, 0) + 0.587f * rgb.atf(x, y, 1) +
                     0.114f * rgb.atf(x, y, 2);
  return out;
}

inline Image luma(const Image& rgb) {
  Image out(rgb.width, rgb.height, 1);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x)
      out.at(x, y) = 0.299f * rgb.at(x, y, 0) + 0.587f * rgb.at(x, y, 1) +
                     0.114f * rgb.at(x, y, 2);
  return out;
}

// Scharr 3x3 gradient magnitude, normalized to intensity units per pixel.
inline Image gradient_magnitude(const Image& gray) {
  Image out(gray.width, gray.height, 1);
  auto px = [&](int x, int y) {
    x = std::clamp(x, 0, gray.width - 1);
    y = std::clamp(y, 0, gray.height - 1);
    return double(gray.at(x, y));
  };
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) {
      double gx = (3 * px(x + 1, y - 1) + 10 * px(x + 1, y) + 3 * px(x + 1, y + 1) -
                   3 * px(x - 1, y - 1) - 10 * px(x - 1, y) - 3 * px(x - 1, y + 1)) /
                  32.0;
      double gy = (3 * px(x - 1, y + 1) + 10 * px(x, y + 1) + 3 * px(x + 1, y + 1) -
                   3 * px(x - 1, y - 1) - 10 * px(x, y - 1) - 3 * px(x + 1, y - 1)) /
                  32.0;
      out.at(x, y) = float(std::sqrt(gx * gx + gy * gy));
    }
  }
  return out;
}

// Separable Gaussian blur with clamp-to-edge, one channel.
inline Image gaussian_blur(const Image& gray, double sigma, int radius) {
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  Image tmp(gray.width, gray.height, 1), out(gray.width, gray.height, 1);
  for (int y = 0; y < gray.height; ++y)
    for (int x = 0; x < gray.width; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[i + radius] * gray.at(std::clamp(x + i, 0, gray.width - 1), y);
      tmp.at(x, y) = float(acc);
    }
  for (int y = 0; y < gray.height; ++y)
    for (int x = 0; x < gray.width; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[i + radius] * tmp.at(x, std::clamp(y + i, 0, gray.height - 1));
      out.at(x, y) = float(acc);
    }
  return out;
}

// Pushes valid colors outward a few rings so that bilinear sampling near
// the validity boundary never mixes in undefined pixels.
inline Image8 pad_invalid_regions(const Image8& img, std::vector<uint8_t> valid, int rounds) {
  Image8 out = img;
  const int W = img.width, H = img.height;
  for (int round = 0; round < rounds; ++round) {
    std::vector<uint8_t> prev = valid;
    Image8 src = out;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        size_t i = size_t(y) * W + x;
        if (prev[i]) continue;
        int acc[3] = {0, 0, 0}, n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
            if (!prev[size_t(ny) * W + nx]) continue;
            for (int c = 0; c < img.channels; ++c) acc[c] += src.at(nx, ny, c);
            ++n;
          }
        if (n > 0) {
          for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = uint8_t((acc[c] + n / 2) / n);
          valid[i] = 1;
        }
      }
  }
  return out;
}

// 1-D box filter of odd width along x or y, clamp-to-edge.
inline Image box_blur_1d(const Image& gray, int taps, bool horizontal) {
  Image out(gray.width, gray.height, 1);
  int r = taps / 2;
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        int xx = horizontal ? std::clamp(x + i, 0, gray.width - 1) : x;
        int yy = horizontal ? y : std::clamp(y + i, 0, gray.height - 1);
        acc += gray.at(xx, yy);
      }
      out.at(x, y) = float(acc / taps);
    }
  }
  return out;
}

}  // namespace textvol
