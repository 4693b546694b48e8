#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "textvol/mesh.hpp"

namespace textvol {

struct DepthIdMap {
  int width = 0, height = 0;
  std::vector<float> depth;     // +inf where empty
  std::vector<int32_t> face_id; // -1 where empty

  DepthIdMap() = default;
  DepthIdMap(int w, int h)
      : width(w),
        height(h),
        depth(size_t(w) * h, std::numeric_limits<float>::infinity()),
        face_id(size_t(w) * h, -1) {}

  float depth_at(int x, int y) const { return depth[size_t(y) * width + x]; }
  int32_t id_at(int x, int y) const { return face_id[size_t(y) * width + x]; }
};

namespace detail {

// Snapped to a 1/256-texel grid so edge functions are exact integers:
// adjacent triangles partition their shared edge with no gaps, no double
// claims, independent of evaluation order.
constexpr int64_t kSubPixel = 256;

// Top-left fill rule: an edge owns its pixels when it is a top edge
// (horizontal, pointing +x with interior below) or a left edge (pointing
// -y). Assumes positive-area orientation in y-down pixel coordinates.
inline int64_t edge_bias(int64_t ax, int64_t ay, int64_t bx, int64_t by) {
  bool top_left = (ay == by && bx > ax) || (by < ay);
  return top_left ? 0 : 1;
}

// Rasterize one 2D triangle; emits (x, y, w0, w1, w2) with normalized
// barycentric weights at pixel centers. Accepts either winding.
template <typename Fn>
void raster_triangle_2d(double fx0, double fy0, double fx1, double fy1, double fx2,
                        double fy2, int width, int height, Fn&& emit) {
  int64_t x0 = llround(fx0 * kSubPixel), y0 = llround(fy0 * kSubPixel);
  int64_t x1 = llround(fx1 * kSubPixel), y1 = llround(fy1 * kSubPixel);
  int64_t x2 = llround(fx2 * kSubPixel), y2 = llround(fy2 * kSubPixel);
  int64_t area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
  if (area == 0) return;
  bool swapped = false;
  if (area < 0) {
    std::swap(x1, x2);
    std::swap(y1, y2);
    area = -area;
    swapped = true;
  }
  int minx = std::max<int64_t>(0, (std::min({x0, x1, x2})) / kSubPixel - 1);
  int maxx = std::min<int64_t>(width - 1, (std::max({x0, x1, x2})) / kSubPixel + 1);
  int miny = std::max<int64_t>(0, (std::min({y0, y1, y2})) / kSubPixel - 1);
  int maxy = std::min<int64_t>(height - 1, (std::max({y0, y1, y2})) / kSubPixel + 1);
  if (minx > maxx || miny > maxy) return;
  int64_t b0 = edge_bias(x1, y1, x2, y2);
  int64_t b1 = edge_bias(x2, y2, x0, y0);
  int64_t b2 = edge_bias(x0, y0, x1, y1);
  double inv_area = 1.0 / double(area);
  for (int py = miny; py <= maxy; ++py) {
    int64_t sy = int64_t(py) * kSubPixel + kSubPixel / 2;
    for (int px = minx; px <= maxx; ++px) {
      int64_t sx = int64_t(px) * kSubPixel + kSubPixel / 2;
      int64_t w0 = (x2 - x1) * (sy - y1) - (y2 - y1) * (sx - x1);
      int64_t w1 = (x0 - x2) * (sy - y2) - (y0 - y2) * (sx - x2);
      int64_t w2 = (x1 - x0) * (sy - y0) - (y1 - y0) * (sx - x0);
      if (w0 >= b0 && w1 >= b1 && w2 >= b2) {
        double u1 = double(swapped ? w2 : w1) * inv_area;
        double u2 = double(swapped ? w1 : w2) * inv_area;
        emit(px, py, double(w0) * inv_area, u1, u2);
      }
    }
  }
}

}  // namespace detail

// Z-buffered depth + face-ID render with perspective-correct interpolation.
// Faces are processed in index order; exact depth ties keep the smaller
// face id, so the output is deterministic.
inline DepthIdMap render_depth(const std::vector<Vec3>& pos,
                               const std::vector<std::array<int, 3>>& faces,
                               const Camera& cam) {
  DepthIdMap map(cam.width, cam.height);
  for (int f = 0; f < int(faces.size()); ++f) {
    const auto& tri = faces[f];
    const Vec3 &a = pos[tri[0]], &b = pos[tri[1]], &c = pos[tri[2]];
    if (a.z() <= 1e-9 || b.z() <= 1e-9 || c.z() <= 1e-9) continue;  // near clip
    double u0 = cam.fx * a.x() / a.z() + cam.cx, v0 = cam.fy * a.y() / a.z() + cam.cy;
    double u1 = cam.fx * b.x() / b.z() + cam.cx, v1 = cam.fy * b.y() / b.z() + cam.cy;
    double u2 = cam.fx * c.x() / c.z() + cam.cx, v2 = cam.fy * c.y() / c.z() + cam.cy;
    double iz0 = 1.0 / a.z(), iz1 = 1.0 / b.z(), iz2 = 1.0 / c.z();
    detail::raster_triangle_2d(
        u0, v0, u1, v1, u2, v2, cam.width, cam.height,
        [&](int px, int py, double w0, double w1, double w2) {
          // 1/z is affine in screen space
          float z = float(1.0 / (w0 * iz0 + w1 * iz1 + w2 * iz2));
          size_t idx = size_t(py) * map.width + px;
          if (z < map.depth[idx] || (z == map.depth[idx] && f < map.face_id[idx])) {
            map.depth[idx] = z;
            map.face_id[idx] = f;
          }
        });
  }
  return map;
}

// Renders the mesh textured from an atlas through per-vertex uv.
// Background stays black; returns the image and (optionally) the footprint.
inline Image8 render_textured(const std::vector<Vec3>& pos, const TriMesh& mesh,
                              const Camera& cam, const Image8& atlas,
                              std::vector<uint8_t>* footprint = nullptr) {
  DepthIdMap map = render_depth(pos, mesh.faces, cam);
  Image8 out(cam.width, cam.height, 3);
  if (footprint) footprint->assign(size_t(cam.width) * cam.height, 0);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      int f = map.id_at(x, y);
      if (f < 0) continue;
      const auto& tri = mesh.faces[f];
      const Vec3 &a = pos[tri[0]], &b = pos[tri[1]], &c = pos[tri[2]];
      // recover perspective-correct barycentrics at the pixel center
      double u0 = cam.fx * a.x() / a.z() + cam.cx, v0 = cam.fy * a.y() / a.z() + cam.cy;
      double u1 = cam.fx * b.x() / b.z() + cam.cx, v1 = cam.fy * b.y() / b.z() + cam.cy;
      double u2 = cam.fx * c.x() / c.z() + cam.cx, v2 = cam.fy * c.y() / c.z() + cam.cy;
      double sx = x + 0.5, sy = y + 0.5;
      double area = (u1 - u0) * (v2 - v0) - (v1 - v0) * (u2 - u0);
      if (area == 0) continue;
      double w0 = ((u2 - u1) * (sy - v1) - (v2 - v1) * (sx - u1)) / area;
      double w1 = ((u0 - u2) * (sy - v2) - (v0 - v2) * (sx - u2)) / area;
      double w2 = 1.0 - w0 - w1;
      double q0 = w0 / a.z(), q1 = w1 / b.z(), q2 = w2 / c.z();
      double qs = q0 + q1 + q2;
      q0 /= qs;
      q1 /= qs;
      q2 /= qs;
      Vec2 uv = q0 * mesh.uv[tri[0]] + q1 * mesh.uv[tri[1]] + q2 * mesh.uv[tri[2]];
      float rgb[3];
      atlas.sample_rgb(uv.x() * atlas.width, uv.y() * atlas.height, rgb);
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = to_byte(rgb[ch]);
      if (footprint) (*footprint)[size_t(y) * cam.width + x] = 1;
    }
  }
  return out;
}

// Static atlas-space rasterization of the mesh: which face owns each texel
// and with what barycentric weights. Shared by every slice of a volume.
struct AtlasLayout {
  int size = 0;
  std::vector<int32_t> face_id;  // -1 = gutter/empty
  std::vector<float> bary;       // 3 per texel
  std::vector<std::vector<int>> face_texels;  // texel indices per face
  int covered = 0;

  int32_t id_at(int x, int y) const { return face_id[size_t(y) * size + x]; }
  const float* bary_at(int x, int y) const { return &bary[(size_t(y) * size + x) * 3]; }
};

// Throws if two faces claim the same texel (overlapping atlas charts).
inline AtlasLayout build_atlas_layout(const TriMesh& mesh, int atlas_size,
                                      bool check_overlap = true) {
  AtlasLayout layout;
  layout.size = atlas_size;
  layout.face_id.assign(size_t(atlas_size) * atlas_size, -1);
  layout.bary.assign(size_t(atlas_size) * atlas_size * 3, 0.f);
  layout.face_texels.resize(mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f) {
    const auto& tri = mesh.faces[f];
    // texel centers sit at (x+0.5, y+0.5); uv maps to [0, size]
    double x0 = mesh.uv[tri[0]].x() * atlas_size, y0 = mesh.uv[tri[0]].y() * atlas_size;
    double x1 = mesh.uv[tri[1]].x() * atlas_size, y1 = mesh.uv[tri[1]].y() * atlas_size;
    double x2 = mesh.uv[tri[2]].x() * atlas_size, y2 = mesh.uv[tri[2]].y() * atlas_size;
    detail::raster_triangle_2d(
        x0, y0, x1, y1, x2, y2, atlas_size, atlas_size,
        [&](int px, int py, double w0, double w1, double w2) {
          size_t idx = size_t(py) * atlas_size + px;
          if (check_overlap && layout.face_id[idx] >= 0)
            throw ContractError("atlas: overlapping charts at texel (" +
                                std::to_string(px) + "," + std::to_string(py) + ")");
          layout.face_id[idx] = f;
          layout.bary[idx * 3 + 0] = float(w0);
          layout.bary[idx * 3 + 1] = float(w1);
          layout.bary[idx * 3 + 2] = float(w2);
          layout.face_texels[f].push_back(int(idx));
        });
  }
  for (const auto& v : layout.face_id)
    if (v >= 0) ++layout.covered;
  return layout;
}

}  // namespace textvol
