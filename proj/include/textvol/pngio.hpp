#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "textvol/image.hpp"

namespace textvol {

namespace detail {
struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;
}  // namespace detail

inline void write_png_rgb8(const std::string& path, const Image8& img) {
  if (img.channels != 3) throw IoError("write_png_rgb8: image must have 3 channels");
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for write: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(&img.data[size_t(y) * img.width * 3]);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Image8 read_png_rgb8(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  Image8 img(int(w), int(h), 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = &img.data[size_t(y) * w * 3];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// 16-bit grayscale, big-endian in the file per PNG spec.
inline void write_png_gray16(const std::string& path, int width, int height,
                             const std::vector<uint16_t>& pix) {
  if (int(pix.size()) != width * height)
    throw IoError("write_png_gray16: size mismatch");
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for write: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(size_t(width) * 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      uint16_t v = pix[size_t(y) * width + x];
      row[2 * x] = uint8_t(v >> 8);
      row[2 * x + 1] = uint8_t(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline std::vector<uint16_t> read_png_gray16(const std::string& path, int* width,
                                             int* height) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  if (png_get_bit_depth(png, info) != 16 ||
      png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("expected 16-bit grayscale png: " + path);
  }
  std::vector<uint16_t> pix(size_t(w) * h);
  std::vector<uint8_t> row(size_t(w) * 2);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x)
      pix[size_t(y) * w + x] = uint16_t((row[2 * x] << 8) | row[2 * x + 1]);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  *width = int(w);
  *height = int(h);
  return pix;
}

// Raw fallbacks for dependency-free consumers.
inline void write_ppm(const std::string& path, const Image8& img) {
  if (img.channels != 3) throw IoError("write_ppm: image must have 3 channels");
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for write: " + path);
  std::fprintf(fp.get(), "P6\n%d %d\n255\n", img.width, img.height);
  std::fwrite(img.data.data(), 1, img.data.size(), fp.get());
}

inline Image8 read_ppm(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path);
  int w = 0, h = 0, maxv = 0;
  if (std::fscanf(fp.get(), "P6 %d %d %d", &w, &h, &maxv) != 3 || maxv != 255)
    throw IoError("bad ppm header: " + path);
  std::fgetc(fp.get());
  Image8 img(w, h, 3);
  if (std::fread(img.data.data(), 1, img.data.size(), fp.get()) != img.data.size())
    throw IoError("truncated ppm: " + path);
  return img;
}

inline void write_pgm16(const std::string& path, int width, int height,
                        const std::vector<uint16_t>& pix) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for write: " + path);
  std::fprintf(fp.get(), "P5\n%d %d\n65535\n", width, height);
  std::vector<uint8_t> raw(pix.size() * 2);
  for (size_t i = 0; i < pix.size(); ++i) {
    raw[2 * i] = uint8_t(pix[i] >> 8);
    raw[2 * i + 1] = uint8_t(pix[i] & 0xff);
  }
  std::fwrite(raw.data(), 1, raw.size(), fp.get());
}

inline std::vector<uint16_t> read_pgm16(const std::string& path, int* width, int* height) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path);
  int w = 0, h = 0, maxv = 0;
  if (std::fscanf(fp.get(), "P5 %d %d %d", &w, &h, &maxv) != 3 || maxv != 65535)
    throw IoError("bad pgm header: " + path);
  std::fgetc(fp.get());
  std::vector<uint8_t> raw(size_t(w) * h * 2);
  if (std::fread(raw.data(), 1, raw.size(), fp.get()) != raw.size())
    throw IoError("truncated pgm: " + path);
  std::vector<uint16_t> pix(size_t(w) * h);
  for (size_t i = 0; i < pix.size(); ++i)
    pix[i] = uint16_t((raw[2 * i] << 8) | raw[2 * i + 1]);
  *width = w;
  *height = h;
  return pix;
}

}  // namespace textvol
